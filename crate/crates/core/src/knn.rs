//! k-nearest-neighbour radii and localized neighbourhoods.
//!
//! The neighbourhood of a query point `x` is the set of the `k` sample points
//! closest to `x` in Euclidean distance; its radius is the distance to the
//! k-th closest. Distances are compared as `(distance, node index)` pairs, so
//! ties at the boundary are broken deterministically in favour of the lowest
//! index and the neighbourhood has exactly `k` members. Search is exact
//! (linear scan) — the sample sizes of interest do not justify a spatial
//! index, and exactness keeps the radius envelopes meaningful.

use ndarray::Array2;

use crate::bounds::Condition;
use crate::error::{Error, Result};
use crate::model::Constants;

/// A localized neighbourhood: the `k` nearest sample points to a query.
#[derive(Debug, Clone)]
pub struct Neighbourhood {
    /// Member node indices, ordered by `(distance, index)`.
    pub members: Vec<usize>,
    /// Distance from the query to the k-th nearest point (closed-ball radius).
    pub radius: f64,
}

fn squared_distance(row: ndarray::ArrayView1<f64>, x: &[f64]) -> f64 {
    row.iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

fn k_nearest(pairs: &mut Vec<(f64, usize)>, k: usize) -> Neighbourhood {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    };
    pairs.select_nth_unstable_by(k - 1, cmp);
    pairs.truncate(k);
    pairs.sort_unstable_by(cmp);
    Neighbourhood {
        radius: pairs[k - 1].0.sqrt(),
        members: pairs.iter().map(|&(_, i)| i).collect(),
    }
}

/// The k-NN radius and members at query `x`.
pub fn knn_radius(covariates: &Array2<f64>, x: &[f64], k: usize) -> Result<Neighbourhood> {
    let n = covariates.nrows();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, available: n });
    }
    if x.len() != covariates.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "query has dimension {}, covariates have {}",
            x.len(),
            covariates.ncols()
        )));
    }
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|i| (squared_distance(covariates.row(i), x), i))
        .collect();
    Ok(k_nearest(&mut pairs, k))
}

/// The within-community radius: distance from `x` to its `l`-th nearest
/// neighbour among the nodes of community `h` only.
pub fn subgroup_radius(
    covariates: &Array2<f64>,
    labels: &[usize],
    community: usize,
    x: &[f64],
    l: usize,
) -> Result<Neighbourhood> {
    if x.len() != covariates.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "query has dimension {}, covariates have {}",
            x.len(),
            covariates.ncols()
        )));
    }
    let mut pairs: Vec<(f64, usize)> = labels
        .iter()
        .enumerate()
        .filter(|(_, g)| **g == community)
        .map(|(i, _)| (squared_distance(covariates.row(i), x), i))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyCommunity { community });
    }
    if l == 0 || l > pairs.len() {
        return Err(Error::KTooLarge {
            k: l,
            available: pairs.len(),
        });
    }
    Ok(k_nearest(&mut pairs, l))
}

/// Volume of the Euclidean unit ball in dimension `d`, by the two-step
/// recurrence `V_d = (2 pi / d) V_{d-2}` with `V_0 = 1`, `V_1 = 2`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut i = if d % 2 == 0 { 2 } else { 3 };
    while i <= d {
        v *= 2.0 * std::f64::consts::PI / i as f64;
        i += 2;
    }
    v
}

/// Deterministic upper envelope `(2k/(N b_X c V_d))^{1/d}` for the sup of
/// the k-NN radius over the region; also the bias radius of the deviation
/// bounds.
pub fn upper_radius_envelope(n: usize, k: usize, d: usize, constants: &Constants) -> f64 {
    let v_d = unit_ball_volume(d);
    (2.0 * k as f64 / (n as f64 * constants.b_x * constants.c * v_d)).powf(1.0 / d as f64)
}

/// Deterministic envelopes for the k-NN radius, together with the conditions
/// under which each holds with probability at least `1 - delta`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RadiusEnvelopes {
    /// High-probability upper bound on `sup_x r_k(x)` over the region.
    pub upper: f64,
    /// High-probability lower bound on `inf_x r_k(x)`; `None` when `k` is too
    /// small for the bound's numerator to be positive.
    pub lower: Option<f64>,
    /// LHS/RHS pairs of the admissibility conditions, never silently enforced.
    pub conditions: Vec<Condition>,
    pub delta: f64,
}

/// Evaluate both radius envelopes at sample size `n`, neighbourhood size `k`,
/// dimension `d`, and failure probability `delta`.
pub fn radius_envelopes(
    n: usize,
    k: usize,
    d: usize,
    delta: f64,
    constants: &Constants,
) -> RadiusEnvelopes {
    let (nf, kf, df) = (n as f64, k as f64, d as f64);
    let v_d = unit_ball_volume(d);
    let log_term = 12.0 * df * (12.0 * nf / delta).ln();
    let upper = upper_radius_envelope(n, k, d, constants);
    let lower_numerator = kf - log_term;
    let lower = if lower_numerator > 0.0 {
        Some((lower_numerator / (4.0 * nf * constants.ubar_x * v_d)).powf(1.0 / df))
    } else {
        None
    };
    let conditions = vec![
        Condition::ge("radius-upper: k at least 24 d ln(12N/delta)", kf, 2.0 * log_term),
        Condition::le(
            "radius-upper: k at most T^d N b_X c V_d / 2",
            kf,
            constants.t.powf(df) * nf * constants.b_x * constants.c * v_d / 2.0,
        ),
        Condition::ge("radius-lower: k at least 12 d ln(12N/delta)", kf, log_term),
    ];
    RadiusEnvelopes {
        upper,
        lower,
        conditions,
        delta,
    }
}
