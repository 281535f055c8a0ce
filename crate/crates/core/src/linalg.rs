//! Small dense linear-algebra helpers shared by the pipeline.
//!
//! Every decomposition goes through LAPACK's divide-and-conquer SVD driver
//! (`gesdd`), which is several times faster than the one-sided driver on the
//! few-hundred-row blocks this pipeline produces, at the same machine-level
//! accuracy. The spectral norm is the largest singular value. The Hermitian
//! dilation `[[0, M], [M^T, 0]]` — whose eigenvalues are exactly
//! `+/- sigma_i(M)`, padded with zeros when `M` is rectangular — is provided
//! for the norm statements phrased in dilation form; the correspondence
//! between its spectrum and the singular values is part of the test surface.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{EigValshInto, JobSvd, SVDDC, UPLO};

use crate::error::Result;

/// Hermitian dilation `[[0, M], [M^T, 0]]` of a `k x k'` matrix.
pub fn hermitian_dilation(m: &Array2<f64>) -> Array2<f64> {
    let (r, c) = m.dim();
    let mut d = Array2::zeros((r + c, r + c));
    d.slice_mut(s![..r, r..]).assign(m);
    d.slice_mut(s![r.., ..r]).assign(&m.t());
    d
}

/// Eigenvalues of the Hermitian dilation, ascending. Values-only LAPACK
/// driver: no caller needs the dilation's eigenvectors, and skipping them
/// makes the norm several times cheaper.
pub fn dilation_eigenvalues(m: &Array2<f64>) -> Result<Array1<f64>> {
    let vals = hermitian_dilation(m).eigvalsh_into(UPLO::Lower)?;
    Ok(vals)
}

/// Spectral norm: the largest singular value.
pub fn spectral_norm(m: &Array2<f64>) -> Result<f64> {
    let sv = singular_values(m)?;
    Ok(sv.iter().fold(0.0f64, |acc, v| acc.max(*v)))
}

/// Leading `g` singular triplets `(U, sigma, V)` of `m`, with a deterministic
/// sign convention: the first entry of each left singular vector whose
/// magnitude exceeds `1e-12` is made nonnegative (the matching right vector is
/// flipped alongside). `V` is returned as columns (`k' x g`).
pub fn top_svd(m: &Array2<f64>, g: usize) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (u, sv, vt) = m.svddc(JobSvd::Some)?;
    let u = u.expect("left vectors requested");
    let vt = vt.expect("right vectors requested");
    let rank_limit = sv.len();
    let g = g.min(rank_limit);
    let mut u_g = u.slice(s![.., ..g]).to_owned();
    let mut v_g = vt.slice(s![..g, ..]).t().to_owned();
    let s_g = sv.slice(s![..g]).to_owned();
    for col in 0..g {
        let lead = u_g.column(col).iter().find(|v| v.abs() > 1e-12).copied();
        if let Some(lead) = lead {
            if lead < 0.0 {
                u_g.column_mut(col).mapv_inplace(|v| -v);
                v_g.column_mut(col).mapv_inplace(|v| -v);
            }
        }
    }
    Ok((u_g, s_g, v_g))
}

/// All singular values, descending.
pub fn singular_values(m: &Array2<f64>) -> Result<Array1<f64>> {
    let (_, sv, _) = m.svddc(JobSvd::None)?;
    Ok(sv)
}

/// Orthogonal Procrustes: the orthogonal `Q` minimizing `||A Q - B||_F`,
/// obtained from the SVD of `A^T B`.
pub fn procrustes(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let m = a.t().dot(b);
    let (u, _, vt) = m.svddc(JobSvd::Some)?;
    Ok(u.expect("left").dot(&vt.expect("right")))
}

/// Frobenius norm.
pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
