//! Spectral co-clustering of a localized Laplacian.
//!
//! The row and column communities of a neighbourhood pair are recovered by
//! clustering the rows of the leading left (respectively right) singular
//! vectors of the localized Laplacian. In the population matrix those rows
//! collapse to one point per community, a fixed `sqrt(1/n_g + 1/n_l)` apart,
//! so k-means with enough restarts separates them exactly; on samples the
//! misclustering rate is controlled by the Laplacian deviation.
//!
//! The k-means here is plain Lloyd iteration. Restart 0 is deterministic
//! greedy furthest-point seeding; the remaining restarts draw initial
//! centroids uniformly from the rows using the stream keyed on the config
//! seed. No approximation guarantee is claimed: the result reports the spread
//! between the best and worst restart so callers can judge how settled the
//! objective is.

use ndarray::{Array2, ArrayView1};

use crate::error::Result;
use crate::linalg::top_svd;
use crate::rng::{purpose, Stream};

/// Settings for the k-means step.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClusteringConfig {
    pub groups: usize,
    /// Total restarts (the first is deterministic furthest-point seeding).
    pub restarts: usize,
    /// Lloyd iteration cap per restart.
    pub max_iterations: usize,
    /// Seed for the random restarts.
    pub seed: u64,
}

impl ClusteringConfig {
    pub fn new(groups: usize, seed: u64) -> Self {
        ClusteringConfig {
            groups,
            restarts: 20,
            max_iterations: 200,
            seed,
        }
    }
}

/// Outcome of one k-means run (best restart).
#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// Cluster index per row.
    pub assignment: Vec<usize>,
    /// `G x dim` centroids.
    pub centroids: Array2<f64>,
    /// Sum of squared distances to assigned centroids.
    pub objective: f64,
    /// Spread of the restarts: worst objective over best, minus one. Zero
    /// when every restart agrees; large values flag an unsettled objective.
    pub restart_spread: f64,
    /// Number of empty-cluster reseeds that occurred in the winning restart.
    pub reseeds: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct LloydRun {
    assignment: Vec<usize>,
    centroids: Array2<f64>,
    objective: f64,
    reseeds: usize,
}

fn lloyd(rows: &Array2<f64>, initial: Array2<f64>, max_iterations: usize) -> LloydRun {
    let n = rows.nrows();
    let g = initial.nrows();
    let mut centroids = initial;
    let mut assignment = vec![0usize; n];
    let mut reseeds = 0usize;
    for _ in 0..max_iterations {
        // Assign to nearest centroid; ties go to the lowest cluster index.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..g {
                let d = sq_dist(rows.row(i), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        // Re-seed empty clusters with the point currently worst served.
        loop {
            let mut counts = vec![0usize; g];
            for &a in &assignment {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let (mut far_i, mut far_d) = (0usize, -1.0);
            for i in 0..n {
                let d = sq_dist(rows.row(i), centroids.row(assignment[i]));
                if d > far_d {
                    far_d = d;
                    far_i = i;
                }
            }
            centroids.row_mut(empty).assign(&rows.row(far_i));
            assignment[far_i] = empty;
            reseeds += 1;
            changed = true;
        }
        // Update centroids to cluster means.
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; g];
        for i in 0..n {
            let a = assignment[i];
            counts[a] += 1;
            let mut s = sums.row_mut(a);
            s += &rows.row(i);
        }
        for c in 0..g {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                let mut row = sums.row_mut(c);
                row.mapv_inplace(|v| v * inv);
                centroids.row_mut(c).assign(&sums.row(c));
            }
        }
        if !changed {
            break;
        }
    }
    let objective = (0..n)
        .map(|i| sq_dist(rows.row(i), centroids.row(assignment[i])))
        .sum();
    LloydRun {
        assignment,
        centroids,
        objective,
        reseeds,
    }
}

/// Deterministic furthest-point seeding: start from the row furthest from the
/// grand mean, then repeatedly add the row furthest from the chosen set.
fn furthest_point_seed(rows: &Array2<f64>, g: usize) -> Array2<f64> {
    let n = rows.nrows();
    let mean = rows.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let mut chosen: Vec<usize> = Vec::with_capacity(g);
    let first = (0..n)
        .max_by(|&a, &b| {
            sq_dist(rows.row(a), mean.view())
                .total_cmp(&sq_dist(rows.row(b), mean.view()))
                .then(b.cmp(&a)) // prefer the lower index on ties
        })
        .expect("nonempty");
    chosen.push(first);
    while chosen.len() < g {
        let next = (0..n)
            .max_by(|&a, &b| {
                let da = chosen
                    .iter()
                    .map(|&c| sq_dist(rows.row(a), rows.row(c)))
                    .fold(f64::INFINITY, f64::min);
                let db = chosen
                    .iter()
                    .map(|&c| sq_dist(rows.row(b), rows.row(c)))
                    .fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("nonempty");
        chosen.push(next);
    }
    let mut init = Array2::zeros((g, rows.ncols()));
    for (c, &i) in chosen.iter().enumerate() {
        init.row_mut(c).assign(&rows.row(i));
    }
    init
}

/// Cluster the rows of `rows` into `config.groups` clusters, returning the
/// best of all restarts.
pub fn kmeans_rows(rows: &Array2<f64>, config: &ClusteringConfig) -> KmeansResult {
    assert!(rows.nrows() > 0, "k-means needs at least one row");
    let g = config.groups.min(rows.nrows());
    let mut stream = Stream::from_key(&[config.seed, purpose::KMEANS]);
    let mut best: Option<LloydRun> = None;
    let mut worst_objective = f64::NEG_INFINITY;
    let restarts = config.restarts.max(1);
    for restart in 0..restarts {
        let init = if restart == 0 {
            furthest_point_seed(rows, g)
        } else {
            // Uniform draws without replacement.
            let mut picked: Vec<usize> = Vec::with_capacity(g);
            while picked.len() < g {
                let i = stream.next_index(rows.nrows());
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
            let mut init = Array2::zeros((g, rows.ncols()));
            for (c, &i) in picked.iter().enumerate() {
                init.row_mut(c).assign(&rows.row(i));
            }
            init
        };
        let run = lloyd(rows, init, config.max_iterations);
        worst_objective = worst_objective.max(run.objective);
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let restart_spread = if best.objective > 0.0 {
        worst_objective / best.objective - 1.0
    } else if worst_objective > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    KmeansResult {
        assignment: best.assignment,
        centroids: best.centroids,
        objective: best.objective,
        restart_spread,
        reseeds: best.reseeds,
    }
}

/// Joint clustering of both sides of a localized Laplacian.
#[derive(Debug, Clone)]
pub struct CoClustering {
    /// Leading left singular vectors (`k x G`).
    pub u: Array2<f64>,
    /// Leading right singular vectors (`k' x G`).
    pub v: Array2<f64>,
    /// Leading singular values, descending.
    pub singular_values: ndarray::Array1<f64>,
    /// Cluster labels for the row neighbourhood.
    pub rows: KmeansResult,
    /// Cluster labels for the column neighbourhood.
    pub cols: KmeansResult,
    /// Number of requested components whose singular value is numerically
    /// zero. When positive, clustering ran on the leading nonzero components.
    pub rank_deficiency: usize,
}

/// Compute the leading `G`-dimensional spectral embedding of `l` and cluster
/// each side's rows. Row and column restarts use distinct sub-seeds.
pub fn cluster_neighbourhoods(l: &Array2<f64>, config: &ClusteringConfig) -> Result<CoClustering> {
    let (u, sv, v) = top_svd(l, config.groups)?;
    let tol = sv.iter().fold(0.0f64, |a, &b| a.max(b)) * 1e-12;
    let effective = sv.iter().filter(|&&s| s > tol).count().max(1);
    let rank_deficiency = config.groups.saturating_sub(effective);
    let embed_u = if effective < u.ncols() {
        u.slice(ndarray::s![.., ..effective]).to_owned()
    } else {
        u.clone()
    };
    let embed_v = if effective < v.ncols() {
        v.slice(ndarray::s![.., ..effective]).to_owned()
    } else {
        v.clone()
    };
    let rows = kmeans_rows(
        &embed_u,
        &ClusteringConfig {
            seed: crate::rng::key(&[config.seed, purpose::KMEANS, 0]),
            ..config.clone()
        },
    );
    let cols = kmeans_rows(
        &embed_v,
        &ClusteringConfig {
            seed: crate::rng::key(&[config.seed, purpose::KMEANS, 1]),
            ..config.clone()
        },
    );
    Ok(CoClustering {
        u,
        v,
        singular_values: sv,
        rows,
        cols,
        rank_deficiency,
    })
}
