//! Localized adjacency blocks and degree-regularized Laplacians.
//!
//! Given neighbourhoods `eta(x)` (rows) and `eta(x')` (columns), the localized
//! block `A^eta` is the corresponding sub-matrix of the adjacency matrix. Its
//! regularized Laplacian is
//!
//! ```text
//! L = (O + tau I)^{-1/2}  A^eta  (Q + tau I)^{-1/2}
//! ```
//!
//! with `O` the diagonal of row sums and `Q` the diagonal of column sums of
//! `A^eta` itself (degrees *within* the block, not global degrees).
//!
//! Two population counterparts replace `A^eta` by expected-adjacency blocks:
//! the *realized* one evaluates the edge field at the sampled covariates
//! `B_{g(i) g(j)}(x(i), x(j))`, the *query* one freezes covariates at the
//! query pair, `B_{g(i) g(j)}(x, x')`. Both keep every entry of the block —
//! including entries indexed by the same node on both sides when the
//! neighbourhoods overlap — exactly as the defining formulas dictate; only the
//! sampled block has structural zeros on such entries. The induced bias is the
//! documented price of overlap, and tests exercise mostly disjoint pairs.

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;

use crate::error::{Axis, Error, Result};
use crate::model::ModelSpec;

/// Extract the `rows x cols` sub-matrix of the adjacency matrix as floats.
pub fn localized_block(adjacency: &Array2<u8>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    let mut block = Array2::zeros((rows.len(), cols.len()));
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            block[[r, c]] = adjacency[[i, j]] as f64;
        }
    }
    block
}

/// Default regularizer: the mean degree of the block, averaging row and
/// column degrees (for a square block this is the mean row sum).
pub fn default_tau(block: &Array2<f64>) -> f64 {
    let (r, c) = block.dim();
    if r + c == 0 {
        return 0.0;
    }
    2.0 * block.sum() / (r + c) as f64
}

/// Degree-regularized Laplacian of a localized block.
///
/// Requires `tau >= 0`. With `tau = 0` every row and column must have at
/// least one edge; a zero-degree row or column makes the normalization
/// undefined and is reported with its index.
pub fn laplacian(block: &Array2<f64>, tau: f64) -> Result<Array2<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::DimensionMismatch(format!(
            "regularizer tau = {tau} must be nonnegative"
        )));
    }
    let row_sums: Array1<f64> = block.sum_axis(ndarray::Axis(1));
    let col_sums: Array1<f64> = block.sum_axis(ndarray::Axis(0));
    for (i, s) in row_sums.iter().enumerate() {
        if s + tau <= 0.0 {
            return Err(Error::IsolatedNode {
                axis: Axis::Row,
                index: i,
            });
        }
    }
    for (j, s) in col_sums.iter().enumerate() {
        if s + tau <= 0.0 {
            return Err(Error::IsolatedNode {
                axis: Axis::Column,
                index: j,
            });
        }
    }
    let inv_sqrt_row: Array1<f64> = row_sums.mapv(|s| 1.0 / (s + tau).sqrt());
    let inv_sqrt_col: Array1<f64> = col_sums.mapv(|s| 1.0 / (s + tau).sqrt());
    let mut l = block.clone();
    for ((i, j), v) in l.indexed_iter_mut() {
        *v *= inv_sqrt_row[i] * inv_sqrt_col[j];
    }
    Ok(l)
}

/// Population expected-adjacency blocks for a neighbourhood pair.
#[derive(Debug, Clone)]
pub struct PopulationBlocks {
    /// Edge field at the sampled covariates of each pair.
    pub realized: Array2<f64>,
    /// Edge field frozen at the query pair `(x, x')`.
    pub query: Array2<f64>,
}

/// Evaluate both population blocks for neighbourhoods `eta_x`, `eta_xp`.
pub fn population_blocks(
    spec: &ModelSpec,
    covariates: &Array2<f64>,
    labels: &[usize],
    eta_x: &[usize],
    eta_xp: &[usize],
    x: &[f64],
    xp: &[f64],
) -> Result<PopulationBlocks> {
    let mut realized = Array2::zeros((eta_x.len(), eta_xp.len()));
    let mut query = Array2::zeros((eta_x.len(), eta_xp.len()));
    for (r, &i) in eta_x.iter().enumerate() {
        let xi = covariates.row(i);
        let xi = xi.as_slice().expect("row is contiguous");
        for (c, &j) in eta_xp.iter().enumerate() {
            let xj = covariates.row(j);
            let xj = xj.as_slice().expect("row is contiguous");
            realized[[r, c]] = spec.edge_probability(labels[i], labels[j], xi, xj)?;
            query[[r, c]] = spec.edge_probability(labels[i], labels[j], x, xp)?;
        }
    }
    Ok(PopulationBlocks { realized, query })
}

/// Minimum expected degree `d_min`: the smallest diagonal entry across the
/// row- and column-degree matrices of both population blocks. The regularizer
/// `tau` is *not* part of this quantity; bounds add it where their formulas
/// say so.
pub fn min_degree(blocks: &PopulationBlocks) -> f64 {
    let mut d_min = f64::INFINITY;
    for block in [&blocks.realized, &blocks.query] {
        for s in block.sum_axis(ndarray::Axis(1)).iter() {
            d_min = d_min.min(*s);
        }
        for s in block.sum_axis(ndarray::Axis(0)).iter() {
            d_min = d_min.min(*s);
        }
    }
    d_min
}

/// Block-model factorization of the query-pair population Laplacian.
///
/// With `Theta(x)` the one-hot community memberships of `eta(x)` and `n_g(x)`
/// the community counts, the population Laplacian factors as
/// `Theta(x) Z_U diag(sigma) Z_V^T Theta(x')^T` where the centroid matrices
/// `Z_U`, `Z_V` are scaled orthogonal factors of a `G x G` core. The rows of
/// `Z_U` are the distinct rows of the left singular-vector matrix; row `g`
/// has norm `1 / sqrt(n_g(x))`, and distinct rows `g`, `l` are exactly
/// `sqrt(1/n_g(x) + 1/n_l(x))` apart. That separation is what the clustering
/// step exploits.
#[derive(Debug, Clone)]
pub struct PopulationFactorization {
    /// `k x G` one-hot memberships of the row neighbourhood.
    pub membership_x: Array2<f64>,
    /// `k' x G` one-hot memberships of the column neighbourhood.
    pub membership_xp: Array2<f64>,
    /// `G x G` centroid matrix for rows (`Z_U`).
    pub centroids_u: Array2<f64>,
    /// `G x G` centroid matrix for columns (`Z_V`).
    pub centroids_v: Array2<f64>,
    /// Singular values of the population Laplacian, descending, length `G`.
    pub singular_values: Array1<f64>,
    /// Orthonormal left factor `U = Theta(x) Z_U` (`k x G`).
    pub u: Array2<f64>,
    /// Orthonormal right factor `V = Theta(x') Z_V` (`k' x G`).
    pub v: Array2<f64>,
    /// Community counts in the row neighbourhood.
    pub counts_x: Vec<usize>,
    /// Community counts in the column neighbourhood.
    pub counts_xp: Vec<usize>,
}

impl PopulationFactorization {
    /// Reassemble the population Laplacian from the factors.
    pub fn reconstruct(&self) -> Array2<f64> {
        let lam = Array2::from_diag(&self.singular_values);
        self.u.dot(&lam).dot(&self.v.t())
    }
}

fn one_hot(labels: &[usize], groups: usize) -> Array2<f64> {
    let mut m = Array2::zeros((labels.len(), groups));
    for (i, &g) in labels.iter().enumerate() {
        m[[i, g]] = 1.0;
    }
    m
}

fn counts(labels: &[usize], groups: usize) -> Vec<usize> {
    let mut c = vec![0usize; groups];
    for &g in labels {
        c[g] += 1;
    }
    c
}

/// Factorize the query-pair population Laplacian from the `G x G` edge matrix
/// at the query pair and the community labels of the two neighbourhoods.
///
/// Every community must appear in both neighbourhoods, otherwise the centroid
/// scaling is undefined.
pub fn population_factorization(
    b: &Array2<f64>,
    labels_x: &[usize],
    labels_xp: &[usize],
    tau: f64,
) -> Result<PopulationFactorization> {
    let groups = b.nrows();
    let counts_x = counts(labels_x, groups);
    let counts_xp = counts(labels_xp, groups);
    for (g, &c) in counts_x.iter().enumerate() {
        if c == 0 {
            return Err(Error::EmptyNeighbourhoodGroup {
                community: g,
                side: "row",
            });
        }
    }
    for (g, &c) in counts_xp.iter().enumerate() {
        if c == 0 {
            return Err(Error::EmptyNeighbourhoodGroup {
                community: g,
                side: "column",
            });
        }
    }
    // Community-level degrees: a row node of community g sees sum_h n_h(x') B_gh
    // expected edges, and symmetrically for columns.
    let mut o_bar = Array1::<f64>::zeros(groups);
    let mut q_bar = Array1::<f64>::zeros(groups);
    for g in 0..groups {
        for h in 0..groups {
            o_bar[g] += counts_xp[h] as f64 * b[[g, h]];
            q_bar[g] += counts_x[h] as f64 * b[[h, g]];
        }
    }
    let n_x: Array1<f64> = counts_x.iter().map(|&c| (c as f64).sqrt()).collect();
    let n_xp: Array1<f64> = counts_xp.iter().map(|&c| (c as f64).sqrt()).collect();
    // Core = N(x) Obar^{-1/2} B Qbar^{-1/2} N(x').
    let mut core = b.clone();
    for ((g, h), v) in core.indexed_iter_mut() {
        *v *= n_x[g] * n_xp[h] / ((o_bar[g] + tau).sqrt() * (q_bar[h] + tau).sqrt());
    }
    let (zu, sv, zvt) = core.svd(true, true)?;
    let zu = zu.expect("left");
    let zv = zvt.expect("right").t().to_owned();
    let mut centroids_u = zu;
    let mut centroids_v = zv;
    for g in 0..groups {
        let su = 1.0 / n_x[g];
        let sv_ = 1.0 / n_xp[g];
        centroids_u.row_mut(g).mapv_inplace(|v| v * su);
        centroids_v.row_mut(g).mapv_inplace(|v| v * sv_);
    }
    let membership_x = one_hot(labels_x, groups);
    let membership_xp = one_hot(labels_xp, groups);
    let u = membership_x.dot(&centroids_u);
    let v = membership_xp.dot(&centroids_v);
    Ok(PopulationFactorization {
        membership_x,
        membership_xp,
        centroids_u,
        centroids_v,
        singular_values: sv,
        u,
        v,
        counts_x,
        counts_xp,
    })
}
