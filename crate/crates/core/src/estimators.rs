//! Plug-in estimators and label alignment.
//!
//! With clustered neighbourhoods in hand, the estimators are counting
//! exercises: community proportions are cluster counts over `k`, and the edge
//! probability between row cluster `g` and column cluster `h` is the mean of
//! the sampled block over the matching index pairs. Entries whose cluster is
//! empty on either side are *undefined*, kept distinct from zero throughout
//! (they serialize as JSON `null`).
//!
//! Cluster labels are arbitrary, so every cross-instance comparison goes
//! through an explicit alignment step: assortative matching (the diagonal of
//! the estimated edge matrix should dominate its rows), proportion ordering
//! (sort by estimated community probability), or — when the hidden truth is
//! available — a minimum-disagreement permutation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn;
use crate::laplacian::{default_tau, laplacian, localized_block};
use crate::spectral::{cluster_neighbourhoods, ClusteringConfig};

/// How the edge-probability estimator treats index pairs that refer to the
/// same node on both sides (possible when the neighbourhoods overlap).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BHatMode {
    /// Drop self-pairs from numerator and denominator. Default: the sampled
    /// diagonal is structurally zero, which would otherwise bias the mean
    /// downward for no statistical benefit.
    ExcludeSelfPairs,
    /// Keep every pair and divide by the full product of cluster sizes,
    /// reproducing the defining formula verbatim.
    Literal,
}

/// Community-proportion estimate: cluster counts over the neighbourhood size.
/// Counts are returned alongside so exactness checks can avoid floats.
pub fn estimate_pi(assignment: &[usize], groups: usize) -> (Vec<f64>, Vec<usize>) {
    let mut counts = vec![0usize; groups];
    for &a in assignment {
        counts[a] += 1;
    }
    let k = assignment.len() as f64;
    let pi = counts.iter().map(|&c| c as f64 / k).collect();
    (pi, counts)
}

/// Edge-probability estimates between row clusters and column clusters.
///
/// `nodes_x` / `nodes_xp` carry the global node indices behind each block row
/// and column, needed to recognize self-pairs. Undefined entries (empty
/// cluster on either side, or no admissible pairs after exclusion) are `None`.
pub fn estimate_b(
    block: &Array2<f64>,
    assign_x: &[usize],
    assign_xp: &[usize],
    groups: usize,
    mode: BHatMode,
    nodes_x: &[usize],
    nodes_xp: &[usize],
) -> Array2<Option<f64>> {
    let mut sums = Array2::<f64>::zeros((groups, groups));
    let mut pairs = Array2::<u64>::zeros((groups, groups));
    for (r, &g) in assign_x.iter().enumerate() {
        for (c, &h) in assign_xp.iter().enumerate() {
            if matches!(mode, BHatMode::ExcludeSelfPairs) && nodes_x[r] == nodes_xp[c] {
                continue;
            }
            sums[[g, h]] += block[[r, c]];
            pairs[[g, h]] += 1;
        }
    }
    let mut out = Array2::from_elem((groups, groups), None);
    for ((g, h), &count) in pairs.indexed_iter() {
        if count > 0 {
            out[[g, h]] = Some(sums[[g, h]] / count as f64);
        }
    }
    out
}

/// Oracle estimates: the same counting estimators fed with the hidden labels.
#[derive(Debug, Clone)]
pub struct OracleEstimates {
    pub pi_x: Vec<f64>,
    pub pi_xp: Vec<f64>,
    pub counts_x: Vec<usize>,
    pub counts_xp: Vec<usize>,
    pub b: Array2<Option<f64>>,
}

pub fn oracle_estimators(
    adjacency: &Array2<u8>,
    labels: &[usize],
    members_x: &[usize],
    members_xp: &[usize],
    groups: usize,
    mode: BHatMode,
) -> OracleEstimates {
    let assign_x: Vec<usize> = members_x.iter().map(|&i| labels[i]).collect();
    let assign_xp: Vec<usize> = members_xp.iter().map(|&i| labels[i]).collect();
    let block = localized_block(adjacency, members_x, members_xp);
    let (pi_x, counts_x) = estimate_pi(&assign_x, groups);
    let (pi_xp, counts_xp) = estimate_pi(&assign_xp, groups);
    let b = estimate_b(&block, &assign_x, &assign_xp, groups, mode, members_x, members_xp);
    OracleEstimates {
        pi_x,
        pi_xp,
        counts_x,
        counts_xp,
        b,
    }
}

/// Convert an estimated edge matrix into a dense array, erroring if any entry
/// is undefined (alignment by assortativity needs every entry).
pub fn require_defined(b: &Array2<Option<f64>>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(b.raw_dim());
    for ((g, h), v) in b.indexed_iter() {
        match v {
            Some(x) => out[[g, h]] = *x,
            None => {
                return Err(Error::InvalidModel(format!(
                    "edge-probability estimate undefined at ({g}, {h})"
                )))
            }
        }
    }
    Ok(out)
}

const EXACT_PERMUTATION_LIMIT: usize = 8;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut result = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &result {
            for v in 0..n {
                if !p.contains(&v) {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
        }
        result = next;
    }
    result
}

/// Maximum-weight assignment by the standard potentials (Hungarian) method on
/// the negated weights; `O(n^3)`, exact. Returns `perm[row] = column`.
pub fn max_weight_assignment(w: &Array2<f64>) -> Vec<usize> {
    let n = w.nrows();
    assert_eq!(n, w.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return vec![];
    }
    // Minimize cost = -w with 1-based potentials.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = -w[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

/// Match column clusters to row clusters through the assortative structure of
/// the estimated edge matrix: choose the column permutation maximizing the
/// matched diagonal (minimizing it under `disassortative`).
///
/// Fails if any row's maximum (minimum) is tied — the matching would then be
/// arbitrary — or if `G` exceeds the exact-search limit of 8.
pub fn align_by_assortativity(b: &Array2<f64>, disassortative: bool) -> Result<Vec<usize>> {
    let g = b.nrows();
    if g > EXACT_PERMUTATION_LIMIT {
        return Err(Error::TooManyGroups {
            groups: g,
            limit: EXACT_PERMUTATION_LIMIT,
        });
    }
    for row in 0..g {
        let vals = b.row(row);
        let target = if disassortative {
            vals.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        if vals.iter().filter(|&&v| v == target).count() > 1 {
            return Err(Error::AlignmentTie { row });
        }
    }
    let sign = if disassortative { -1.0 } else { 1.0 };
    let best = permutations(g)
        .into_iter()
        .max_by(|a, b_| {
            let ta: f64 = a.iter().enumerate().map(|(r, &c)| sign * b[[r, c]]).sum();
            let tb: f64 = b_.iter().enumerate().map(|(r, &c)| sign * b[[r, c]]).sum();
            ta.total_cmp(&tb)
        })
        .expect("nonempty permutation set");
    Ok(best)
}

/// Order clusters by decreasing estimated proportion. Returns
/// `(order, tie_flag)` where `order[slot] = cluster` and the flag reports
/// whether any two proportions were exactly equal (making the order
/// convention-dependent: ties break toward the lower cluster index).
pub fn align_by_pi_ordering(pi: &[f64]) -> (Vec<usize>, bool) {
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| pi[b].total_cmp(&pi[a]).then(a.cmp(&b)));
    let tie = order
        .windows(2)
        .any(|w| pi[w[0]] == pi[w[1]]);
    (order, tie)
}

/// Alignment of estimated labels against the hidden truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthAlignment {
    /// `permutation[estimated] = true community`.
    pub permutation: Vec<usize>,
    /// Misclassified node count per true community, after relabeling.
    pub misclassified: Vec<usize>,
    /// True community sizes within the compared node set.
    pub sizes: Vec<usize>,
    /// Sum over nonempty true communities of `misclassified / size`.
    pub measure: f64,
    /// True communities absent from the compared node set (skipped by the
    /// measure).
    pub skipped: Vec<usize>,
}

/// Find the relabeling of `estimated` minimizing disagreements with `truth`,
/// by exact search for `G <= 8` and the assignment solver above.
pub fn align_to_truth(estimated: &[usize], truth: &[usize], groups: usize) -> TruthAlignment {
    assert_eq!(estimated.len(), truth.len());
    let mut confusion = Array2::<f64>::zeros((groups, groups));
    for (&e, &t) in estimated.iter().zip(truth) {
        confusion[[e, t]] += 1.0;
    }
    let permutation = if groups <= EXACT_PERMUTATION_LIMIT {
        permutations(groups)
            .into_iter()
            .max_by(|a, b| {
                let ta: f64 = a.iter().enumerate().map(|(e, &t)| confusion[[e, t]]).sum();
                let tb: f64 = b.iter().enumerate().map(|(e, &t)| confusion[[e, t]]).sum();
                ta.total_cmp(&tb).then_with(|| b.cmp(a)) // deterministic among ties
            })
            .expect("nonempty")
    } else {
        max_weight_assignment(&confusion)
    };
    let mut sizes = vec![0usize; groups];
    for &t in truth {
        sizes[t] += 1;
    }
    let mut misclassified = vec![0usize; groups];
    for (&e, &t) in estimated.iter().zip(truth) {
        if permutation[e] != t {
            misclassified[t] += 1;
        }
    }
    let mut measure = 0.0;
    let mut skipped = Vec::new();
    for t in 0..groups {
        if sizes[t] > 0 {
            measure += misclassified[t] as f64 / sizes[t] as f64;
        } else {
            skipped.push(t);
        }
    }
    TruthAlignment {
        permutation,
        misclassified,
        sizes,
        measure,
        skipped,
    }
}

/// Inverse of a permutation given as `perm[new] = old`.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

// ---------------------------------------------------------------------------
// Full estimation pipeline at one query pair.
// ---------------------------------------------------------------------------

/// Settings for [`estimate_at`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateSettings {
    pub k: usize,
    /// Regularizer; `None` resolves to the mean degree of the localized block.
    pub tau: Option<f64>,
    pub groups: usize,
    pub seed: u64,
    pub restarts: usize,
    pub b_mode: BHatMode,
}

impl EstimateSettings {
    pub fn new(k: usize, groups: usize, seed: u64) -> Self {
        EstimateSettings {
            k,
            tau: None,
            groups,
            seed,
            restarts: 20,
            b_mode: BHatMode::ExcludeSelfPairs,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KmeansDiagnostics {
    pub objective: f64,
    pub restart_spread: f64,
    pub reseeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentInfo {
    /// "assortative" or "pi-ordering" (the fallback when a row maximum ties).
    pub method: String,
    /// Slot order of row clusters (`row_order[slot] = raw row cluster`).
    pub row_order: Vec<usize>,
    /// Slot order of column clusters, after matching columns to rows.
    pub col_order: Vec<usize>,
    /// Whether any ordering decision hit an exact tie.
    pub tie: bool,
}

/// Everything the `estimate` entry point reports for one query pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationResult {
    pub n: usize,
    pub k: usize,
    pub groups: usize,
    pub tau: f64,
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub radius_x: f64,
    pub radius_xp: f64,
    pub neighbourhood_x: Vec<usize>,
    pub neighbourhood_xp: Vec<usize>,
    /// Aligned cluster label per member of each neighbourhood.
    pub assignment_x: Vec<usize>,
    pub assignment_xp: Vec<usize>,
    pub pi_hat_x: Vec<f64>,
    pub pi_hat_xp: Vec<f64>,
    pub counts_x: Vec<usize>,
    pub counts_xp: Vec<usize>,
    /// Aligned edge-probability estimates; `null` marks undefined entries.
    pub b_hat: Vec<Vec<Option<f64>>>,
    pub alignment: AlignmentInfo,
    pub singular_values: Vec<f64>,
    pub rank_deficiency: usize,
    pub kmeans_rows: KmeansDiagnostics,
    pub kmeans_cols: KmeansDiagnostics,
}

fn permute_vec<T: Copy>(v: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| v[i]).collect()
}

/// Run the whole pipeline at one query pair: neighbourhoods, localized
/// Laplacian, co-clustering, plug-in estimates, and alignment.
pub fn estimate_at(
    adjacency: &Array2<u8>,
    covariates: &Array2<f64>,
    x: &[f64],
    xp: &[f64],
    settings: &EstimateSettings,
) -> Result<EstimationResult> {
    let eta_x = knn::knn_radius(covariates, x, settings.k)?;
    let eta_xp = knn::knn_radius(covariates, xp, settings.k)?;
    let block = localized_block(adjacency, &eta_x.members, &eta_xp.members);
    let tau = settings.tau.unwrap_or_else(|| default_tau(&block));
    let l = laplacian(&block, tau)?;
    let mut config = ClusteringConfig::new(settings.groups, settings.seed);
    config.restarts = settings.restarts;
    let co = cluster_neighbourhoods(&l, &config)?;

    let (pi_x, counts_x) = estimate_pi(&co.rows.assignment, settings.groups);
    let (pi_xp, counts_xp) = estimate_pi(&co.cols.assignment, settings.groups);
    let b_raw = estimate_b(
        &block,
        &co.rows.assignment,
        &co.cols.assignment,
        settings.groups,
        settings.b_mode,
        &eta_x.members,
        &eta_xp.members,
    );

    // Match column clusters to row clusters, preferring the assortative
    // criterion, then order slots canonically by row-side proportions.
    let (method, col_match, mut tie) = match require_defined(&b_raw)
        .and_then(|b| align_by_assortativity(&b, false))
    {
        Ok(perm) => ("assortative".to_string(), perm, false),
        Err(Error::AlignmentTie { .. }) | Err(Error::InvalidModel(_)) => {
            let (order_xp, tie_xp) = align_by_pi_ordering(&pi_xp);
            ("pi-ordering".to_string(), order_xp, tie_xp)
        }
        Err(e) => return Err(e),
    };
    let (row_order, tie_rows) = align_by_pi_ordering(&pi_x);
    tie |= tie_rows;
    // Column slot t hosts the column cluster matched to the row cluster in
    // slot t (assortative), or the t-th by column proportions (fallback).
    let col_order: Vec<usize> = if method == "assortative" {
        row_order.iter().map(|&r| col_match[r]).collect()
    } else {
        col_match
    };

    let inv_rows = invert_permutation(&row_order);
    let inv_cols = invert_permutation(&col_order);
    let assignment_x: Vec<usize> = co.rows.assignment.iter().map(|&a| inv_rows[a]).collect();
    let assignment_xp: Vec<usize> = co.cols.assignment.iter().map(|&a| inv_cols[a]).collect();
    let mut b_hat = vec![vec![None; settings.groups]; settings.groups];
    for s in 0..settings.groups {
        for t in 0..settings.groups {
            b_hat[s][t] = b_raw[[row_order[s], col_order[t]]];
        }
    }

    Ok(EstimationResult {
        n: covariates.nrows(),
        k: settings.k,
        groups: settings.groups,
        tau,
        x: x.to_vec(),
        xp: xp.to_vec(),
        radius_x: eta_x.radius,
        radius_xp: eta_xp.radius,
        neighbourhood_x: eta_x.members.clone(),
        neighbourhood_xp: eta_xp.members.clone(),
        assignment_x,
        assignment_xp,
        pi_hat_x: permute_vec(&pi_x, &row_order),
        pi_hat_xp: permute_vec(&pi_xp, &col_order),
        counts_x: permute_vec(&counts_x, &row_order),
        counts_xp: permute_vec(&counts_xp, &col_order),
        b_hat,
        alignment: AlignmentInfo {
            method,
            row_order,
            col_order,
            tie,
        },
        singular_values: co.singular_values.to_vec(),
        rank_deficiency: co.rank_deficiency,
        kmeans_rows: KmeansDiagnostics {
            objective: co.rows.objective,
            restart_spread: co.rows.restart_spread,
            reseeds: co.rows.reseeds,
        },
        kmeans_cols: KmeansDiagnostics {
            objective: co.cols.objective,
            restart_spread: co.cols.restart_spread,
            reseeds: co.cols.reseeds,
        },
    })
}
