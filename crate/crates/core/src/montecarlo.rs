//! Monte Carlo verification harness.
//!
//! An [`ExperimentPlan`] fixes a model, query pairs, and grids over sample
//! size, neighbourhood size, regularizer, and failure probability. Each
//! replication regenerates a network, runs the estimation pipeline at every
//! grid cell, measures errors against the population truth, and evaluates
//! every finite-sample bound together with its admissibility conditions.
//! Outputs are one CSV row per (replication, query pair, N, k, tau, delta)
//! cell plus one JSON coverage summary per plan; both are byte-stable
//! functions of `(plan, seed)`.
//!
//! Replications whose pipeline fails (for example a degenerate empty graph at
//! `rho = 0` making the unregularized Laplacian undefined) are retained as
//! flagged failure records rather than dropped. Coverage is reported in three
//! strata — all records, records where the bound's conditions hold, and
//! records where they fail — because several logarithmic conditions fail
//! numerically at desk scale even where empirical coverage holds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs};
use crate::error::{Error, Result};
use crate::estimators::{self, BHatMode};
use crate::knn;
use crate::laplacian::{self, PopulationBlocks};
use crate::linalg;
use crate::model::{ModelSpec, Region};
use crate::network::{self, EdgeMode};
use crate::rng;
use crate::spectral::{self, ClusteringConfig};

// ---------------------------------------------------------------------------
// Plan types
// ---------------------------------------------------------------------------

/// One query pair `(x, x')` at which the pipeline is evaluated.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryPair {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
}

/// Metric families. Selecting a subset skips the expensive stages the others
/// would need (eigensolves, population blocks, covariate-grid scans); every
/// stage that does run reports all the fields it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Spectral-norm deviation between sample and population Laplacians.
    Deviation,
    /// Misassignment measure of the recovered co-clustering at both sides.
    Misclustering,
    /// Entrywise error of the edge-probability estimator.
    EdgeError,
    /// Sup-norm error of the community-probability estimator.
    PiError,
    /// Extremes of the realized k-NN radius over a fixed covariate grid.
    Radii,
    /// Frobenius alignment error of the leading singular subspace.
    Subspace,
}

/// Coverage stratum selector for acceptance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    All,
    ConditionsPass,
    ConditionsFail,
}

/// One acceptance property: in every grid cell, the coverage of `metric` by
/// `bound` within `stratum` must be at least `1 - delta - se_slack * SE`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoverageCheck {
    /// Record metric field, e.g. `"deviation"` or `"sup_radius"`.
    pub metric: String,
    /// Bound name, the radius envelopes (`"radius-upper"`, `"radius-lower"`),
    /// or `"subspace"` for the per-record subspace bound.
    pub bound: String,
    #[serde(default = "default_stratum")]
    pub stratum: Stratum,
    #[serde(default = "default_se_slack")]
    pub se_slack: f64,
}

fn default_stratum() -> Stratum {
    Stratum::ConditionsPass
}

fn default_se_slack() -> f64 {
    3.0
}

fn default_tau_grid() -> Vec<Option<f64>> {
    vec![None]
}

fn default_grid_resolution() -> usize {
    50
}

fn default_true() -> bool {
    true
}

fn default_restarts() -> usize {
    20
}

/// A replicated experiment: model, query pairs, design grids, and outputs to
/// collect. The JSON schema matches the field names below; `tau_grid` entries
/// may be `null` for the data-driven default regularizer, `k_grid: null`
/// selects the rate-optimal neighbourhood size for each `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    pub queries: Vec<QueryPair>,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub k_grid: Option<Vec<usize>>,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<Option<f64>>,
    pub delta_grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    /// `null` collects every metric family.
    #[serde(default)]
    pub metrics: Option<Vec<Metric>>,
    /// Per-axis resolution of the covariate grid used for radius extremes.
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    /// Replace Bernoulli edges by deterministic rounding of the expectation.
    #[serde(default)]
    pub noiseless: bool,
    /// Exclude self-pairs shared by both neighbourhoods from the
    /// edge-probability estimator.
    #[serde(default = "default_true")]
    pub exclude_self_pairs: bool,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub checks: Vec<CoverageCheck>,
}

/// Record metric fields and the family whose selection computes them.
const METRIC_FIELDS: [(&str, Metric); 9] = [
    ("deviation", Metric::Deviation),
    ("subspace_error", Metric::Subspace),
    ("misclustering_x", Metric::Misclustering),
    ("misclustering_xp", Metric::Misclustering),
    ("edge_error_max", Metric::EdgeError),
    ("pi_error_x", Metric::PiError),
    ("pi_error_xp", Metric::PiError),
    ("sup_radius", Metric::Radii),
    ("inf_radius", Metric::Radii),
];

/// Family that computes a given record metric field.
pub fn metric_family(field: &str) -> Option<Metric> {
    METRIC_FIELDS
        .iter()
        .find(|(name, _)| *name == field)
        .map(|&(_, m)| m)
}

/// Resolve CLI-friendly metric aliases to record field names.
pub fn canonical_metric(name: &str) -> Option<&'static str> {
    match name {
        "deviation" => Some("deviation"),
        "misclustering" | "misclustering_x" => Some("misclustering_x"),
        "misclustering_xp" => Some("misclustering_xp"),
        "B_err" | "b_err" | "edge_error" | "edge_error_max" => Some("edge_error_max"),
        "pi_err" | "pi_error" | "pi_error_x" => Some("pi_error_x"),
        "pi_error_xp" => Some("pi_error_xp"),
        "subspace" | "subspace_error" => Some("subspace_error"),
        "sup_radius" => Some("sup_radius"),
        "inf_radius" => Some("inf_radius"),
        _ => None,
    }
}

fn valid_bound_name(name: &str) -> bool {
    name == "radius-upper"
        || name == "radius-lower"
        || name == "subspace"
        || bounds::BOUND_NAMES.contains(&name)
}

impl ExperimentPlan {
    /// A plan with every optional knob at its default.
    pub fn new(
        model: ModelSpec,
        queries: Vec<QueryPair>,
        n_grid: Vec<usize>,
        delta_grid: Vec<f64>,
        replications: usize,
        seed: u64,
    ) -> ExperimentPlan {
        ExperimentPlan {
            model,
            queries,
            n_grid,
            k_grid: None,
            tau_grid: default_tau_grid(),
            delta_grid,
            replications,
            seed,
            metrics: None,
            grid_resolution: default_grid_resolution(),
            noiseless: false,
            exclude_self_pairs: true,
            restarts: default_restarts(),
            checks: Vec::new(),
        }
    }

    /// Read and validate a plan from a JSON file.
    pub fn load(path: &Path) -> Result<ExperimentPlan> {
        let text = fs::read_to_string(path)?;
        let plan: ExperimentPlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    /// Whether a metric family is selected (an absent list selects all).
    pub fn metric_enabled(&self, metric: Metric) -> bool {
        match &self.metrics {
            None => true,
            Some(ms) => ms.contains(&metric),
        }
    }

    /// Neighbourhood sizes evaluated at sample size `n`: the explicit grid,
    /// or the rate-optimal choice when no grid is given.
    pub fn k_for(&self, n: usize) -> Vec<usize> {
        match &self.k_grid {
            Some(ks) => ks.clone(),
            None => vec![bounds::optimal_k(n, self.model.rho, self.model.dim).k],
        }
    }

    /// Number of design cells (records per replication).
    pub fn cells(&self) -> usize {
        let per_n: usize = self.n_grid.iter().map(|&n| self.k_for(n).len()).sum();
        per_n * self.queries.len() * self.tau_grid.len() * self.delta_grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidPlan(msg));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.queries.is_empty() {
            return fail("at least one query pair is required".into());
        }
        for (i, q) in self.queries.iter().enumerate() {
            if q.x.len() != self.model.dim || q.xp.len() != self.model.dim {
                return fail(format!(
                    "query {i} has dimension ({}, {}), model covariates have dimension {}",
                    q.x.len(),
                    q.xp.len(),
                    self.model.dim
                ));
            }
            if !self.model.region.contains(&q.x) || !self.model.region.contains(&q.xp) {
                return fail(format!("query {i} lies outside the covariate region"));
            }
        }
        if self.n_grid.is_empty() {
            return fail("n_grid must be nonempty".into());
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return fail("every n must be at least 2".into());
        }
        if let Some(ks) = &self.k_grid {
            if ks.is_empty() {
                return fail("k_grid, when given, must be nonempty".into());
            }
            if ks.iter().any(|&k| k == 0) {
                return fail("every k must be at least 1".into());
            }
        }
        if self.tau_grid.is_empty() {
            return fail("tau_grid must be nonempty".into());
        }
        for t in self.tau_grid.iter().flatten() {
            if !t.is_finite() || *t < 0.0 {
                return fail(format!("tau = {t} must be finite and nonnegative"));
            }
        }
        if self.delta_grid.is_empty() {
            return fail("delta_grid must be nonempty".into());
        }
        for &d in &self.delta_grid {
            if !(d > 0.0 && d < 1.0) {
                return fail(format!("delta = {d} must lie strictly inside (0, 1)"));
            }
        }
        if self.grid_resolution < 2 {
            return fail("grid_resolution must be at least 2".into());
        }
        if self.metric_enabled(Metric::Radii) {
            let total = (self.grid_resolution as u64).checked_pow(self.model.dim as u32);
            if !matches!(total, Some(t) if t <= 10_000_000) {
                return fail(format!(
                    "covariate grid of {}^{} points is too large",
                    self.grid_resolution, self.model.dim
                ));
            }
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1".into());
        }
        if matches!(&self.metrics, Some(ms) if ms.is_empty()) {
            return fail("metrics, when given, must be nonempty".into());
        }
        for c in &self.checks {
            let family = match metric_family(&c.metric) {
                Some(f) => f,
                None => return fail(format!("check metric {:?} is not a record metric", c.metric)),
            };
            if !self.metric_enabled(family) {
                return fail(format!(
                    "check on {:?} needs the {:?} metric family enabled",
                    c.metric, family
                ));
            }
            if !valid_bound_name(&c.bound) {
                return fail(format!("check bound {:?} is not a known bound", c.bound));
            }
            if !c.se_slack.is_finite() || c.se_slack < 0.0 {
                return fail(format!("se_slack = {} must be finite and nonnegative", c.se_slack));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

/// One bound evaluation scalarized for tabular output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundOutcome {
    pub name: String,
    #[serde(with = "bounds::nonfinite")]
    pub value: f64,
    pub conditions_hold: bool,
}

/// Everything measured at one design cell of one replication. Metric fields
/// are `None` when their stage did not run or failed; `failure` carries the
/// first pipeline error. No field is ever NaN.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// Per-replication seed derived from the plan seed.
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    /// Index of the query pair in the plan.
    pub query: usize,
    /// Index of the regularizer entry in the plan grid.
    pub tau_index: usize,
    /// Resolved regularizer; `None` when a data-driven default was requested
    /// but no localized block was sampled.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub tau: Option<f64>,
    pub delta: f64,
    #[serde(default)]
    pub failure: Option<String>,
    /// `‖L̃ − ℒ̃‖` between sample and population localized Laplacians.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub deviation: Option<f64>,
    /// Smallest population singular value `λ_G`.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub lambda_g: Option<f64>,
    /// `‖U − 𝒰Q‖_F` after the optimal orthogonal alignment.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub subspace_error: Option<f64>,
    /// Deterministic subspace bound `4 sqrt(2G) ‖L̃ − ℒ̃‖ / λ_G`.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub subspace_bound: Option<f64>,
    /// Misassignment measure `Σ_g m_g / n_g` in the row neighbourhood.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub misclustering_x: Option<f64>,
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub misclustering_xp: Option<f64>,
    /// Entrywise `|B̂ - B|` over aligned communities; `None` marks entries the
    /// estimator left undefined. Empty when the stage did not run.
    #[serde(default)]
    pub edge_errors: Vec<Vec<Option<f64>>>,
    /// Largest defined entry of `edge_errors`.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub edge_error_max: Option<f64>,
    /// Number of undefined entries of the edge-probability estimate.
    #[serde(default)]
    pub edge_undefined: Option<usize>,
    /// `‖π̂ - π(x)‖_∞` over communities.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub pi_error_x: Option<f64>,
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub pi_error_xp: Option<f64>,
    /// Largest k-NN radius over the fixed covariate grid.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub sup_radius: Option<f64>,
    /// Smallest k-NN radius over the fixed covariate grid.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub inf_radius: Option<f64>,
    /// Deterministic upper envelope for the radius at this `(n, k, delta)`.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub upper_envelope: Option<f64>,
    /// Lower envelope; `None` when `k` is too small for it to be positive.
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub lower_envelope: Option<f64>,
    /// Whether the envelope admissibility conditions all hold.
    #[serde(default)]
    pub radius_conditions_hold: Option<bool>,
    /// Every bound evaluated at this cell (empty when the regularizer could
    /// not be resolved).
    #[serde(default)]
    pub bounds: Vec<BoundOutcome>,
}

impl ReplicationRecord {
    fn empty(
        replication: usize,
        seed: u64,
        n: usize,
        k: usize,
        query: usize,
        tau_index: usize,
        delta: f64,
    ) -> ReplicationRecord {
        ReplicationRecord {
            replication,
            seed,
            n,
            k,
            query,
            tau_index,
            tau: None,
            delta,
            failure: None,
            deviation: None,
            lambda_g: None,
            subspace_error: None,
            subspace_bound: None,
            misclustering_x: None,
            misclustering_xp: None,
            edge_errors: Vec::new(),
            edge_error_max: None,
            edge_undefined: None,
            pi_error_x: None,
            pi_error_xp: None,
            sup_radius: None,
            inf_radius: None,
            upper_envelope: None,
            lower_envelope: None,
            radius_conditions_hold: None,
            bounds: Vec::new(),
        }
    }

    /// Look up a metric field by name.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "deviation" => self.deviation,
            "lambda_g" => self.lambda_g,
            "subspace_error" => self.subspace_error,
            "misclustering_x" => self.misclustering_x,
            "misclustering_xp" => self.misclustering_xp,
            "edge_error_max" => self.edge_error_max,
            "pi_error_x" => self.pi_error_x,
            "pi_error_xp" => self.pi_error_xp,
            "sup_radius" => self.sup_radius,
            "inf_radius" => self.inf_radius,
            _ => None,
        }
    }

    /// Look up a bound outcome by name.
    pub fn bound(&self, name: &str) -> Option<&BoundOutcome> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Which expensive stages the selected metrics require.
#[derive(Clone, Copy)]
struct Needs {
    deviation: bool,
    clustering: bool,
    subspace: bool,
    radii: bool,
    adjacency: bool,
    population: bool,
}

impl Needs {
    fn from_plan(plan: &ExperimentPlan) -> Needs {
        let on = |m| plan.metric_enabled(m);
        let deviation = on(Metric::Deviation) || on(Metric::Subspace);
        let clustering = on(Metric::Misclustering)
            || on(Metric::EdgeError)
            || on(Metric::PiError)
            || on(Metric::Subspace);
        Needs {
            deviation,
            clustering,
            subspace: on(Metric::Subspace),
            radii: on(Metric::Radii),
            adjacency: deviation || clustering,
            population: deviation,
        }
    }
}

fn community_counts(labels: &[usize], groups: usize) -> Vec<usize> {
    let mut counts = vec![0usize; groups];
    for &g in labels {
        counts[g] += 1;
    }
    counts
}

fn relabel(assignment: &[usize], permutation: &[usize]) -> Vec<usize> {
    assignment.iter().map(|&a| permutation[a]).collect()
}

/// Axis-aligned covariate grid with inclusive endpoints, `resolution` points
/// per axis, in row-major order.
fn covariate_grid(region: &Region, resolution: usize) -> Vec<Vec<f64>> {
    let d = region.dim();
    let total = resolution.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut point = vec![0.0; d];
        for j in (0..d).rev() {
            let digit = idx % resolution;
            idx /= resolution;
            let span = region.upper[j] - region.lower[j];
            point[j] = region.lower[j] + span * digit as f64 / (resolution - 1) as f64;
        }
        points.push(point);
    }
    points
}

/// Extremes of the realized k-NN radius over the covariate grid.
fn radius_extremes(
    covariates: &Array2<f64>,
    k: usize,
    region: &Region,
    resolution: usize,
) -> Result<(f64, f64)> {
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for point in covariate_grid(region, resolution) {
        let r = knn::knn_radius(covariates, &point, k)?.radius;
        sup = sup.max(r);
        inf = inf.min(r);
    }
    Ok((sup, inf))
}

/// Per-(n, k, query) intermediates shared by every regularizer entry.
struct Prep {
    members_x: Vec<usize>,
    members_xp: Vec<usize>,
    labels_x: Vec<usize>,
    labels_xp: Vec<usize>,
    /// Sampled localized block, as reals. `None` when no metric needs edges.
    block: Option<Array2<f64>>,
    /// Population expected-adjacency blocks at the sampled covariates and at
    /// the frozen query pair.
    blocks: Option<PopulationBlocks>,
    /// Edge-probability matrix at the exact query pair.
    b_query: Array2<f64>,
    b_max: f64,
    sigma_g: f64,
    /// Measured minimum population degree, when the blocks were built.
    d_min: Option<f64>,
}

fn prepare(
    spec: &ModelSpec,
    covariates: &Array2<f64>,
    labels: &[usize],
    x: &[f64],
    xp: &[f64],
    k: usize,
    needs: Needs,
    edge_mode: EdgeMode,
) -> Result<Prep> {
    let eta_x = knn::knn_radius(covariates, x, k)?;
    let eta_xp = knn::knn_radius(covariates, xp, k)?;
    let b_query = spec.b_matrix(x, xp)?;
    let singular = linalg::singular_values(&b_query)?;
    let sigma_g = singular[singular.len() - 1];
    let b_max = b_query.iter().fold(0.0f64, |m, &v| m.max(v));
    let labels_x: Vec<usize> = eta_x.members.iter().map(|&i| labels[i]).collect();
    let labels_xp: Vec<usize> = eta_xp.members.iter().map(|&i| labels[i]).collect();
    let block = if needs.adjacency {
        let a = network::sample_adjacency_block(
            spec,
            covariates,
            labels,
            edge_mode,
            &eta_x.members,
            &eta_xp.members,
        )?;
        Some(a.mapv(f64::from))
    } else {
        None
    };
    let blocks = if needs.population {
        Some(laplacian::population_blocks(
            spec,
            covariates,
            labels,
            &eta_x.members,
            &eta_xp.members,
            x,
            xp,
        )?)
    } else {
        None
    };
    let d_min = blocks.as_ref().map(laplacian::min_degree);
    Ok(Prep {
        members_x: eta_x.members,
        members_xp: eta_xp.members,
        labels_x,
        labels_xp,
        block,
        blocks,
        b_query,
        b_max,
        sigma_g,
        d_min,
    })
}

/// Metrics measured at one regularizer entry.
struct TauStage {
    /// Resolved regularizer; `None` when a data-driven default was requested
    /// without a sampled block.
    tau: Option<f64>,
    deviation: Option<f64>,
    lambda_g: Option<f64>,
    subspace_error: Option<f64>,
    subspace_bound: Option<f64>,
    misclustering_x: Option<f64>,
    misclustering_xp: Option<f64>,
    edge_errors: Vec<Vec<Option<f64>>>,
    edge_error_max: Option<f64>,
    edge_undefined: Option<usize>,
    pi_error_x: Option<f64>,
    pi_error_xp: Option<f64>,
}

impl TauStage {
    fn empty(tau: Option<f64>) -> TauStage {
        TauStage {
            tau,
            deviation: None,
            lambda_g: None,
            subspace_error: None,
            subspace_bound: None,
            misclustering_x: None,
            misclustering_xp: None,
            edge_errors: Vec::new(),
            edge_error_max: None,
            edge_undefined: None,
            pi_error_x: None,
            pi_error_xp: None,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn tau_stage(
    plan: &ExperimentPlan,
    prep: &Prep,
    tau_entry: Option<f64>,
    cluster_seed_parts: (u64, usize, usize, usize),
    x: &[f64],
    xp: &[f64],
    needs: Needs,
) -> Result<TauStage> {
    let spec = &plan.model;
    let groups = spec.groups;
    let block = match &prep.block {
        Some(b) => b,
        // No sampled edges (radius-only runs): nothing tau-dependent to do.
        None => return Ok(TauStage::empty(tau_entry)),
    };
    let tau = tau_entry.unwrap_or_else(|| laplacian::default_tau(block));
    let mut out = TauStage::empty(Some(tau));
    let l_hat = laplacian::laplacian(block, tau)?;

    if needs.deviation {
        let blocks = prep.blocks.as_ref().expect("population blocks follow deviation");
        let l_pop = laplacian::laplacian(&blocks.query, tau)?;
        out.deviation = Some(linalg::spectral_norm(&(&l_hat - &l_pop))?);
    }

    if needs.clustering {
        let (rep_seed, n, k, query) = cluster_seed_parts;
        let seed = rng::key(&[rep_seed, n as u64, k as u64, query as u64, tau.to_bits()]);
        let mut config = ClusteringConfig::new(groups, seed);
        config.restarts = plan.restarts;
        let co = spectral::cluster_neighbourhoods(&l_hat, &config)?;

        let align_x = estimators::align_to_truth(&co.rows.assignment, &prep.labels_x, groups);
        let align_xp = estimators::align_to_truth(&co.cols.assignment, &prep.labels_xp, groups);
        out.misclustering_x = Some(align_x.measure);
        out.misclustering_xp = Some(align_xp.measure);

        let aligned_rows = relabel(&co.rows.assignment, &align_x.permutation);
        let aligned_cols = relabel(&co.cols.assignment, &align_xp.permutation);

        let (pi_hat_x, _) = estimators::estimate_pi(&aligned_rows, groups);
        let (pi_hat_xp, _) = estimators::estimate_pi(&aligned_cols, groups);
        let pi_x = spec.pi(x);
        let pi_xp = spec.pi(xp);
        let sup_err = |est: &[f64], truth: &[f64]| {
            est.iter()
                .zip(truth)
                .fold(0.0f64, |m, (&e, &t)| m.max((e - t).abs()))
        };
        out.pi_error_x = Some(sup_err(&pi_hat_x, &pi_x));
        out.pi_error_xp = Some(sup_err(&pi_hat_xp, &pi_xp));

        let mode = if plan.exclude_self_pairs {
            BHatMode::ExcludeSelfPairs
        } else {
            BHatMode::Literal
        };
        let b_hat = estimators::estimate_b(
            block,
            &aligned_rows,
            &aligned_cols,
            groups,
            mode,
            &prep.members_x,
            &prep.members_xp,
        );
        let mut errors = vec![vec![None; groups]; groups];
        let mut max_err: Option<f64> = None;
        let mut undefined = 0usize;
        for g in 0..groups {
            for h in 0..groups {
                match b_hat[[g, h]] {
                    Some(v) => {
                        let e = (v - prep.b_query[[g, h]]).abs();
                        errors[g][h] = Some(e);
                        max_err = Some(max_err.map_or(e, |m: f64| m.max(e)));
                    }
                    None => undefined += 1,
                }
            }
        }
        out.edge_errors = errors;
        out.edge_error_max = max_err;
        out.edge_undefined = Some(undefined);

        if needs.subspace {
            let fact = laplacian::population_factorization(
                &prep.b_query,
                &prep.labels_x,
                &prep.labels_xp,
                tau,
            )?;
            let lambda = fact.singular_values[groups - 1];
            out.lambda_g = Some(lambda);
            let q = linalg::procrustes(&fact.u, &co.u)?;
            out.subspace_error = Some(linalg::frobenius(&(fact.u.dot(&q) - &co.u)));
            let deviation = out.deviation.expect("subspace implies deviation");
            out.subspace_bound = Some(bounds::subspace_error_bound(groups, lambda, deviation));
        }
    }

    Ok(out)
}

fn fill_envelopes(record: &mut ReplicationRecord, spec: &ModelSpec, delta: f64) {
    let env = knn::radius_envelopes(record.n, record.k, spec.dim, delta, &spec.constants);
    record.upper_envelope = Some(env.upper);
    record.lower_envelope = env.lower;
    record.radius_conditions_hold = Some(env.conditions.iter().all(|c| c.satisfied));
}

#[allow(clippy::too_many_arguments)]
fn bound_outcomes(
    spec: &ModelSpec,
    n: usize,
    k: usize,
    tau: f64,
    delta: f64,
    community_sizes: &[usize],
    b_max: f64,
    sigma_g: f64,
    d_min: Option<f64>,
    sup_radius: Option<f64>,
) -> Vec<BoundOutcome> {
    let inputs = BoundInputs {
        n,
        k,
        groups: spec.groups,
        dim: spec.dim,
        tau,
        delta,
        rho: spec.rho,
        constants: spec.constants.clone(),
        community_sizes: Some(community_sizes.to_vec()),
        b_max,
        sigma_g,
    };
    inputs
        .report(d_min, sup_radius)
        .bounds
        .iter()
        .map(|b| BoundOutcome {
            name: b.name.clone(),
            value: b.value,
            conditions_hold: b.conditions_hold,
        })
        .collect()
}

/// Run one replication of the plan: one record per design cell, failures
/// captured per cell rather than aborting the batch. A pure function of
/// `(plan, rep)`.
pub fn run_replication(plan: &ExperimentPlan, rep: usize) -> Vec<ReplicationRecord> {
    let spec = &plan.model;
    let groups = spec.groups;
    let needs = Needs::from_plan(plan);
    let rep_seed = rng::replication_seed(plan.seed, rep as u64);
    let mut records = Vec::with_capacity(plan.cells());

    for &n in &plan.n_grid {
        let net_seed = rng::key(&[rep_seed, n as u64]);
        let covariates = network::sample_covariates(spec, n, net_seed);
        let sampled = network::sample_communities(spec, &covariates, net_seed);
        let (labels, counts, n_failure) = match sampled {
            Ok(labels) => {
                let counts = community_counts(&labels, groups);
                (labels, counts, None)
            }
            Err(e) => (Vec::new(), Vec::new(), Some(e.to_string())),
        };
        let edge_mode = if plan.noiseless {
            EdgeMode::RoundedExpectation
        } else {
            EdgeMode::Bernoulli { seed: net_seed }
        };

        for k in plan.k_for(n) {
            let radii = if needs.radii && n_failure.is_none() {
                radius_extremes(&covariates, k, &spec.region, plan.grid_resolution).ok()
            } else {
                None
            };

            for (query, pair) in plan.queries.iter().enumerate() {
                let prep = match &n_failure {
                    Some(msg) => Err(msg.clone()),
                    None => prepare(
                        spec,
                        &covariates,
                        &labels,
                        &pair.x,
                        &pair.xp,
                        k,
                        needs,
                        edge_mode,
                    )
                    .map_err(|e| e.to_string()),
                };

                for (tau_index, &tau_entry) in plan.tau_grid.iter().enumerate() {
                    let stage = match &prep {
                        Ok(p) => tau_stage(
                            plan,
                            p,
                            tau_entry,
                            (rep_seed, n, k, query),
                            &pair.x,
                            &pair.xp,
                            needs,
                        )
                        .map_err(|e| e.to_string()),
                        Err(msg) => Err(msg.clone()),
                    };

                    for &delta in &plan.delta_grid {
                        let mut record =
                            ReplicationRecord::empty(rep, rep_seed, n, k, query, tau_index, delta);
                        record.sup_radius = radii.map(|r| r.0);
                        record.inf_radius = radii.map(|r| r.1);
                        fill_envelopes(&mut record, spec, delta);
                        match (&prep, &stage) {
                            (Ok(p), Ok(s)) => {
                                record.tau = s.tau;
                                record.deviation = s.deviation;
                                record.lambda_g = s.lambda_g;
                                record.subspace_error = s.subspace_error;
                                record.subspace_bound = s.subspace_bound;
                                record.misclustering_x = s.misclustering_x;
                                record.misclustering_xp = s.misclustering_xp;
                                record.edge_errors = s.edge_errors.clone();
                                record.edge_error_max = s.edge_error_max;
                                record.edge_undefined = s.edge_undefined;
                                record.pi_error_x = s.pi_error_x;
                                record.pi_error_xp = s.pi_error_xp;
                                if let Some(tau) = s.tau {
                                    record.bounds = bound_outcomes(
                                        spec,
                                        n,
                                        k,
                                        tau,
                                        delta,
                                        &counts,
                                        p.b_max,
                                        p.sigma_g,
                                        p.d_min,
                                        record.sup_radius,
                                    );
                                }
                            }
                            (_, Err(msg)) => {
                                record.tau = tau_entry;
                                record.failure = Some(msg.clone());
                            }
                            (Err(msg), _) => {
                                record.tau = tau_entry;
                                record.failure = Some(msg.clone());
                            }
                        }
                        records.push(record);
                    }
                }
            }
        }
    }
    records
}

/// Run every replication of a validated plan, in replication order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ReplicationRecord>> {
    plan.validate()?;
    let mut records = Vec::with_capacity(plan.cells() * plan.replications);
    for rep in 0..plan.replications {
        records.extend(run_replication(plan, rep));
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

/// An exact coverage fraction with its binomial standard error.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Coverage {
    pub passed: usize,
    pub total: usize,
    pub fraction: f64,
    pub standard_error: f64,
}

/// Exact fraction `passed / total` plus `sqrt(p(1-p)/total)`; `None` for an
/// empty stratum.
pub fn coverage_fraction(passed: usize, total: usize) -> Option<Coverage> {
    if total == 0 {
        return None;
    }
    let p = passed as f64 / total as f64;
    Some(Coverage {
        passed,
        total,
        fraction: p,
        standard_error: (p * (1.0 - p) / total as f64).sqrt(),
    })
}

/// Whether a record's metric is covered by a bound, and whether that bound's
/// conditions hold there. `None` when either side is unavailable. The lower
/// radius envelope is compared in its natural direction (`inf ≥ envelope`).
fn pair_outcome(record: &ReplicationRecord, metric: &str, bound: &str) -> Option<(bool, bool)> {
    let m = record.metric(metric)?;
    match bound {
        "radius-upper" => Some((m <= record.upper_envelope?, record.radius_conditions_hold?)),
        "radius-lower" => Some((m >= record.lower_envelope?, record.radius_conditions_hold?)),
        "subspace" => Some((m <= record.subspace_bound?, true)),
        name => {
            let b = record.bound(name)?;
            Some((m <= b.value, b.conditions_hold))
        }
    }
}

/// Coverage of `metric` by `bound` over records, within one stratum.
pub fn coverage(
    records: &[ReplicationRecord],
    metric: &str,
    bound: &str,
    stratum: Stratum,
) -> Option<Coverage> {
    let mut passed = 0;
    let mut total = 0;
    for r in records {
        if let Some((ok, conds)) = pair_outcome(r, metric, bound) {
            let in_stratum = match stratum {
                Stratum::All => true,
                Stratum::ConditionsPass => conds,
                Stratum::ConditionsFail => !conds,
            };
            if in_stratum {
                total += 1;
                if ok {
                    passed += 1;
                }
            }
        }
    }
    coverage_fraction(passed, total)
}

/// Coverage of one (metric, bound) pair in one design cell, in all three
/// condition strata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub metric: String,
    pub bound: String,
    pub query: usize,
    pub n: usize,
    pub k: usize,
    pub tau_index: usize,
    /// The plan's regularizer entry (`null` = data-driven default).
    pub tau_setting: Option<f64>,
    pub delta: f64,
    pub all: Option<Coverage>,
    pub conditions_pass: Option<Coverage>,
    pub conditions_fail: Option<Coverage>,
    /// Records in the cell where the pair could not be evaluated.
    pub unavailable: usize,
}

/// Outcome of one requested acceptance check across all cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub metric: String,
    pub bound: String,
    pub stratum: Stratum,
    pub se_slack: f64,
    pub cells: usize,
    pub failing_cells: usize,
    /// Cells whose selected stratum was empty (vacuously passing).
    pub vacuous_cells: usize,
    pub pass: bool,
}

/// Whole-experiment summary written as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub replications: usize,
    pub cells: usize,
    pub records: usize,
    pub failures: usize,
    pub coverage: Vec<CoverageSummary>,
    pub checks: Vec<CheckOutcome>,
    pub all_checks_pass: bool,
}

/// Default (metric, bound) pairs tabulated for the enabled metric families,
/// plus any pair a check requests.
fn coverage_pairs(plan: &ExperimentPlan) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push = |m: &str, b: &str| pairs.push((m.to_string(), b.to_string()));
    if plan.metric_enabled(Metric::Deviation) {
        push("deviation", "laplacian-deviation");
        push("deviation", "laplacian-deviation-conditional");
    }
    if plan.metric_enabled(Metric::Subspace) {
        push("subspace_error", "subspace");
    }
    if plan.metric_enabled(Metric::Misclustering) {
        push("misclustering_x", "misclustering-rate");
        push("misclustering_xp", "misclustering-rate");
    }
    if plan.metric_enabled(Metric::EdgeError) {
        push("edge_error_max", "edge-probability-deviation");
        push("edge_error_max", "edge-probability-deviation-conditional");
    }
    if plan.metric_enabled(Metric::PiError) {
        push("pi_error_x", "community-probability-deviation");
        push("pi_error_xp", "community-probability-deviation");
    }
    if plan.metric_enabled(Metric::Radii) {
        push("sup_radius", "radius-upper");
        push("inf_radius", "radius-lower");
    }
    for c in &plan.checks {
        let pair = (c.metric.clone(), c.bound.clone());
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    pairs
}

/// Aggregate records into per-cell coverage tables and evaluate the plan's
/// acceptance checks. Aggregation order is deterministic.
pub fn summarize(plan: &ExperimentPlan, records: &[ReplicationRecord]) -> ExperimentSummary {
    let pairs = coverage_pairs(plan);

    #[derive(Default)]
    struct Acc {
        all_pass: usize,
        all_total: usize,
        cond_pass: usize,
        cond_total: usize,
        fail_pass: usize,
        fail_total: usize,
        unavailable: usize,
    }
    let mut table: BTreeMap<(usize, usize, usize, usize, usize, usize), Acc> = BTreeMap::new();

    for r in records {
        let delta_index = plan
            .delta_grid
            .iter()
            .position(|&d| d == r.delta)
            .expect("record delta comes from the plan grid");
        for (pair_index, (metric, bound)) in pairs.iter().enumerate() {
            let key = (pair_index, r.query, r.n, r.k, r.tau_index, delta_index);
            let acc = table.entry(key).or_default();
            match pair_outcome(r, metric, bound) {
                None => acc.unavailable += 1,
                Some((ok, conds)) => {
                    acc.all_total += 1;
                    if ok {
                        acc.all_pass += 1;
                    }
                    if conds {
                        acc.cond_total += 1;
                        if ok {
                            acc.cond_pass += 1;
                        }
                    } else {
                        acc.fail_total += 1;
                        if ok {
                            acc.fail_pass += 1;
                        }
                    }
                }
            }
        }
    }

    let coverage: Vec<CoverageSummary> = table
        .into_iter()
        .map(|((pair_index, query, n, k, tau_index, delta_index), acc)| {
            let (metric, bound) = &pairs[pair_index];
            CoverageSummary {
                metric: metric.clone(),
                bound: bound.clone(),
                query,
                n,
                k,
                tau_index,
                tau_setting: plan.tau_grid[tau_index],
                delta: plan.delta_grid[delta_index],
                all: coverage_fraction(acc.all_pass, acc.all_total),
                conditions_pass: coverage_fraction(acc.cond_pass, acc.cond_total),
                conditions_fail: coverage_fraction(acc.fail_pass, acc.fail_total),
                unavailable: acc.unavailable,
            }
        })
        .collect();

    let checks: Vec<CheckOutcome> = plan
        .checks
        .iter()
        .map(|check| {
            let mut cells = 0;
            let mut failing = 0;
            let mut vacuous = 0;
            for cs in coverage
                .iter()
                .filter(|cs| cs.metric == check.metric && cs.bound == check.bound)
            {
                cells += 1;
                let cov = match check.stratum {
                    Stratum::All => &cs.all,
                    Stratum::ConditionsPass => &cs.conditions_pass,
                    Stratum::ConditionsFail => &cs.conditions_fail,
                };
                match cov {
                    None => vacuous += 1,
                    Some(c) => {
                        let threshold = 1.0 - cs.delta - check.se_slack * c.standard_error;
                        if c.fraction + 1e-12 < threshold {
                            failing += 1;
                        }
                    }
                }
            }
            CheckOutcome {
                metric: check.metric.clone(),
                bound: check.bound.clone(),
                stratum: check.stratum,
                se_slack: check.se_slack,
                cells,
                failing_cells: failing,
                vacuous_cells: vacuous,
                pass: failing == 0,
            }
        })
        .collect();
    let all_checks_pass = checks.iter().all(|c| c.pass);

    ExperimentSummary {
        replications: plan.replications,
        cells: plan.cells(),
        records: records.len(),
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        coverage,
        checks,
        all_checks_pass,
    }
}

// ---------------------------------------------------------------------------
// Rate slopes
// ---------------------------------------------------------------------------

/// Log-log OLS fit of medians against sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSlope {
    pub slope: f64,
    /// OLS standard error of the slope; infinite with only two usable points.
    #[serde(with = "bounds::nonfinite")]
    pub standard_error: f64,
    pub intercept: f64,
    /// Number of grid points entering the fit.
    pub used: usize,
    /// Sample sizes excluded for non-positive (or missing) medians.
    pub excluded: Vec<usize>,
}

/// Fit `ln median = intercept + slope ln n` by least squares over at least 4
/// grid points; non-positive medians are excluded and flagged.
pub fn rate_slope(points: &[(usize, f64)]) -> Result<RateSlope> {
    if points.len() < 4 {
        return Err(Error::TooFewGridPoints(points.len()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for &(n, median) in points {
        if median.is_finite() && median > 0.0 {
            xs.push((n as f64).ln());
            ys.push(median.ln());
        } else {
            excluded.push(n);
        }
    }
    let m = xs.len();
    if m < 2 {
        return Err(Error::TooFewGridPoints(m));
    }
    let mf = m as f64;
    let x_bar = xs.iter().sum::<f64>() / mf;
    let y_bar = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_bar) * (y - y_bar)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidPlan(
            "rate slope needs at least two distinct sample sizes".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let standard_error = if m > 2 {
        (rss / (mf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(RateSlope {
        slope,
        standard_error,
        intercept,
        used: m,
        excluded,
    })
}

/// One plot-ready sweep row; the group's fitted slope is repeated on each of
/// its rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub metric: String,
    pub query: usize,
    pub tau_index: usize,
    pub delta: f64,
    pub n: usize,
    pub k: usize,
    /// Records contributing to the median.
    pub replications: usize,
    #[serde(default, with = "bounds::nonfinite_opt")]
    pub median: Option<f64>,
    /// Whether the median entered the log-log fit.
    pub included: bool,
    pub slope: f64,
    #[serde(with = "bounds::nonfinite")]
    pub slope_se: f64,
    pub intercept: f64,
}

/// A rate-of-convergence study over the plan's sample-size grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub metric: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "metric,query,tau_index,delta,n,k,replications,median,included,slope,slope_se,intercept\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.metric,
                r.query,
                r.tau_index,
                fmt_f64(r.delta),
                r.n,
                r.k,
                r.replications,
                fmt_opt(r.median),
                r.included,
                fmt_f64(r.slope),
                fmt_f64(r.slope_se),
                fmt_f64(r.intercept),
            );
        }
        s
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    Some(if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    })
}

/// Run the plan with `k` pinned to the rate-optimal choice per `n`, restrict
/// computation to the swept metric's family, and fit one log-log slope per
/// (query, tau, delta) group. Requires at least 4 sample sizes.
pub fn sweep(plan: &ExperimentPlan, metric: &str) -> Result<SweepReport> {
    let field = canonical_metric(metric)
        .ok_or_else(|| Error::InvalidPlan(format!("unknown sweep metric {metric:?}")))?;
    if plan.n_grid.len() < 4 {
        return Err(Error::TooFewGridPoints(plan.n_grid.len()));
    }
    let mut plan = plan.clone();
    plan.k_grid = None;
    plan.metrics = Some(vec![metric_family(field).expect("canonical metric has a family")]);
    plan.checks.clear();
    let records = run_experiment(&plan)?;

    let mut rows = Vec::new();
    for query in 0..plan.queries.len() {
        for tau_index in 0..plan.tau_grid.len() {
            for &delta in &plan.delta_grid {
                let mut points = Vec::new();
                let mut group_rows = Vec::new();
                for &n in &plan.n_grid {
                    let k = plan.k_for(n)[0];
                    let values: Vec<f64> = records
                        .iter()
                        .filter(|r| {
                            r.query == query
                                && r.tau_index == tau_index
                                && r.delta == delta
                                && r.n == n
                        })
                        .filter_map(|r| r.metric(field))
                        .collect();
                    let replications = values.len();
                    let med = median(values);
                    let included = med.is_some_and(|m| m.is_finite() && m > 0.0);
                    points.push((n, med.unwrap_or(0.0)));
                    group_rows.push(SweepRow {
                        metric: field.to_string(),
                        query,
                        tau_index,
                        delta,
                        n,
                        k,
                        replications,
                        median: med,
                        included,
                        slope: 0.0,
                        slope_se: 0.0,
                        intercept: 0.0,
                    });
                }
                let fit = rate_slope(&points)?;
                for mut row in group_rows {
                    row.slope = fit.slope;
                    row.slope_se = fit.standard_error;
                    row.intercept = fit.intercept;
                    rows.push(row);
                }
            }
        }
    }
    Ok(SweepReport {
        metric: field.to_string(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Tabular output
// ---------------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    debug_assert!(!v.is_nan(), "NaN reached the output layer");
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn sanitize(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}

/// Render records as CSV, one row per design cell per replication, with a
/// stable header derived from the plan's community count and the published
/// bound-name order. Formatting is shortest-round-trip, so equal runs produce
/// byte-identical files.
pub fn records_csv(plan: &ExperimentPlan, records: &[ReplicationRecord]) -> String {
    let groups = plan.model.groups;
    let mut s = String::new();
    s.push_str(
        "replication,seed,n,k,query,tau_index,tau,delta,failure,deviation,lambda_g,\
         subspace_error,subspace_bound,misclustering_x,misclustering_xp,edge_error_max,\
         edge_undefined,pi_error_x,pi_error_xp,sup_radius,inf_radius,upper_envelope,\
         lower_envelope,radius_conditions_hold",
    );
    for g in 0..groups {
        for h in 0..groups {
            let _ = write!(s, ",b_err_{g}_{h}");
        }
    }
    for name in bounds::BOUND_NAMES {
        let snake = name.replace('-', "_");
        let _ = write!(s, ",bound_{snake},ok_{snake}");
    }
    s.push('\n');

    for r in records {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replication,
            r.seed,
            r.n,
            r.k,
            r.query,
            r.tau_index,
            fmt_opt(r.tau),
            fmt_f64(r.delta),
            r.failure.as_deref().map(sanitize).unwrap_or_default(),
            fmt_opt(r.deviation),
            fmt_opt(r.lambda_g),
            fmt_opt(r.subspace_error),
            fmt_opt(r.subspace_bound),
            fmt_opt(r.misclustering_x),
            fmt_opt(r.misclustering_xp),
            fmt_opt(r.edge_error_max),
            r.edge_undefined.map(|u| u.to_string()).unwrap_or_default(),
            fmt_opt(r.pi_error_x),
            fmt_opt(r.pi_error_xp),
            fmt_opt(r.sup_radius),
            fmt_opt(r.inf_radius),
            fmt_opt(r.upper_envelope),
            fmt_opt(r.lower_envelope),
            r.radius_conditions_hold
                .map(|b| b.to_string())
                .unwrap_or_default(),
        );
        for g in 0..groups {
            for h in 0..groups {
                let value = r.edge_errors.get(g).and_then(|row| row.get(h)).copied().flatten();
                let _ = write!(s, ",{}", fmt_opt(value));
            }
        }
        for name in bounds::BOUND_NAMES {
            match r.bound(name) {
                Some(b) => {
                    let _ = write!(s, ",{},{}", fmt_f64(b.value), b.conditions_hold);
                }
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    s
}

/// Run the full experiment and write `records.csv` and `summary.json` into
/// `out_dir`. Returns the summary so callers can gate on its checks.
pub fn verify(plan: &ExperimentPlan, out_dir: &Path) -> Result<ExperimentSummary> {
    let records = run_experiment(plan)?;
    let summary = summarize(plan, &records);
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("records.csv"), records_csv(plan, &records))?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(out_dir.join("summary.json"), json)?;
    Ok(summary)
}
