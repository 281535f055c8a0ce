//! Model specifications.
//!
//! A [`ModelSpec`] bundles everything the generator and the bound evaluator
//! need to know about one model: the number of communities `G`, the covariate
//! dimension `d`, an edge-probability field `B_gh(x, x')` (values in `[0, 1]`
//! before sparsity scaling), a community-probability field `pi_g(x)`, the
//! sparsity scale `rho` multiplying the edge field, the covariate law, the
//! region over which the theory's constants are certified, and those constants
//! themselves ([`Constants`]).
//!
//! For the built-in fields the constants are derived in closed form; for
//! custom fields the caller must supply them (or forgo bound evaluation).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Edge-probability field before sparsity scaling, `B^0_gh(x, x') in [0, 1]`.
///
/// Built-ins are symmetric by construction (`B^0_gh(x, x') = B^0_hg(x', x)`);
/// custom fields are symmetrized on evaluation as the average of the two
/// orientations, so mirrored sampling is always consistent.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BField {
    /// Constant-in-covariates planted partition: `within` on the diagonal,
    /// `between` off it.
    PlantedPartition { within: f64, between: f64 },
    /// Distance-decaying logistic field
    /// `B^0_gh(x, x') = sigmoid(alpha_gh - beta * ||x - x'||)` with
    /// `alpha_gh = alpha_within` if `g = h` and `alpha_between` otherwise.
    LogisticHomophily {
        alpha_within: f64,
        alpha_between: f64,
        beta: f64,
    },
    /// User-supplied field. Not serializable; models holding one cannot be
    /// written to `model.json`, and constants must be provided by the caller.
    #[serde(skip)]
    Custom(CustomField),
}

/// Wrapper for user-supplied edge fields: `(g, h, x, x') -> B^0 in [0, 1]`.
#[derive(Clone)]
pub struct CustomField(pub Arc<dyn Fn(usize, usize, &[f64], &[f64]) -> f64 + Send + Sync>);

impl std::fmt::Debug for BField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BField::PlantedPartition { within, between } => f
                .debug_struct("PlantedPartition")
                .field("within", within)
                .field("between", between)
                .finish(),
            BField::LogisticHomophily {
                alpha_within,
                alpha_between,
                beta,
            } => f
                .debug_struct("LogisticHomophily")
                .field("alpha_within", alpha_within)
                .field("alpha_between", alpha_between)
                .field("beta", beta)
                .finish(),
            BField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl BField {
    /// Raw (unsymmetrized, unscaled) evaluation.
    fn raw(&self, g: usize, h: usize, x: &[f64], xp: &[f64]) -> f64 {
        match self {
            BField::PlantedPartition { within, between } => {
                if g == h {
                    *within
                } else {
                    *between
                }
            }
            BField::LogisticHomophily {
                alpha_within,
                alpha_between,
                beta,
            } => {
                let alpha = if g == h { *alpha_within } else { *alpha_between };
                sigmoid(alpha - beta * euclidean(x, xp))
            }
            BField::Custom(f) => (f.0)(g, h, x, xp),
        }
    }
}

/// Community-probability field `pi(x)` on the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PiField {
    /// `pi_g(x) = 1/G` for all `x`.
    Uniform,
    /// Covariate-independent probabilities (must sum to 1).
    Fixed { probabilities: Vec<f64> },
    /// Two communities whose balance moves linearly along the first covariate
    /// axis: `pi_1(x) = (x_1 - lo_1) / (hi_1 - lo_1)`, `pi_2 = 1 - pi_1`.
    Linear,
}

/// Axis-aligned box, used both as covariate support and as the region on which
/// the model constants are certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn unit_box(dim: usize) -> Self {
        Region {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    /// Largest distance between two points of the box.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(Error::InvalidModel(format!(
                "region dimension {} does not match covariate dimension {dim}",
                self.lower.len()
            )));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo < hi) {
                return Err(Error::InvalidModel(format!(
                    "degenerate region side [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Covariate law. Only product-uniform laws are built in; they make every
/// density constant computable exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CovariateLaw {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl CovariateLaw {
    pub fn support(&self) -> Region {
        match self {
            CovariateLaw::UniformBox { lower, upper } => Region {
                lower: lower.clone(),
                upper: upper.clone(),
            },
        }
    }

    /// Constant density on the support.
    pub fn density(&self) -> f64 {
        1.0 / self.support().volume()
    }
}

/// Model constants that enter the finite-sample bounds. All are certified on
/// the model's `region` (density and geometry) or on its square (edge field):
///
/// * `c`, `t`: small-ball geometry of the region — every ball centred in the
///   region with radius at most `t` keeps at least the fraction `c` of its
///   volume inside the region;
/// * `b_x`: lower bound on the covariate density over the region;
/// * `ubar_x`: upper bound on the covariate density over all of `R^d`;
/// * `delta`: lower bound on `min_g max_h B_gh(x, x')` over pairs in the
///   region (after sparsity scaling);
/// * `l_b`: Lipschitz constant of `(x, x') -> B_gh(x, x')` in the joint
///   Euclidean norm, after sparsity scaling; `l_b_base` is the same constant
///   before scaling (they differ by the factor `rho`);
/// * `l_pi`: per-component Lipschitz constant of `x -> pi_g(x)`;
/// * `pi_min`: lower bound on the marginal community probabilities
///   `P(g(i) = h)` under the covariate law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c: f64,
    pub t: f64,
    pub b_x: f64,
    pub ubar_x: f64,
    pub delta: f64,
    pub l_b: f64,
    pub l_b_base: f64,
    pub l_pi: f64,
    pub pi_min: f64,
}

/// Full model specification. Construct through the builders
/// ([`ModelSpec::planted_partition`], [`ModelSpec::logistic_homophily`],
/// [`ModelSpec::custom`]) or deserialize from `model.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecConfig", into = "ModelSpecConfig")]
pub struct ModelSpec {
    pub groups: usize,
    pub dim: usize,
    pub field: BField,
    pub pi: PiField,
    pub rho: f64,
    pub covariates: CovariateLaw,
    pub region: Region,
    pub constants: Constants,
}

/// On-disk shape of a model. `constants` may be omitted for built-in fields,
/// in which case they are derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpecConfig {
    pub groups: usize,
    pub dim: usize,
    pub field: BField,
    pub pi: PiField,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub covariates: Option<CovariateLaw>,
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub constants: Option<Constants>,
}

fn default_rho() -> f64 {
    1.0
}

impl TryFrom<ModelSpecConfig> for ModelSpec {
    type Error = Error;

    fn try_from(cfg: ModelSpecConfig) -> Result<ModelSpec> {
        let covariates = cfg
            .covariates
            .unwrap_or_else(|| CovariateLaw::UniformBox {
                lower: vec![0.0; cfg.dim],
                upper: vec![1.0; cfg.dim],
            });
        let region = cfg.region.unwrap_or_else(|| covariates.support());
        let constants = match cfg.constants {
            Some(c) => c,
            None => derive_constants(
                &cfg.field,
                &cfg.pi,
                cfg.rho,
                &covariates,
                &region,
                cfg.groups,
            )?,
        };
        let spec = ModelSpec {
            groups: cfg.groups,
            dim: cfg.dim,
            field: cfg.field,
            pi: cfg.pi,
            rho: cfg.rho,
            covariates,
            region,
            constants,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ModelSpec> for ModelSpecConfig {
    fn from(spec: ModelSpec) -> ModelSpecConfig {
        ModelSpecConfig {
            groups: spec.groups,
            dim: spec.dim,
            field: spec.field,
            pi: spec.pi,
            rho: spec.rho,
            covariates: Some(spec.covariates),
            region: Some(spec.region),
            constants: Some(spec.constants),
        }
    }
}

impl ModelSpec {
    /// Planted partition with `within` on the diagonal and `between` off it,
    /// uniform community probabilities, uniform covariates on the unit box.
    pub fn planted_partition(
        groups: usize,
        within: f64,
        between: f64,
        rho: f64,
        dim: usize,
    ) -> Result<ModelSpec> {
        ModelSpec::builtin(
            groups,
            dim,
            BField::PlantedPartition { within, between },
            PiField::Uniform,
            rho,
        )
    }

    /// Logistic distance-decay field, uniform community probabilities, uniform
    /// covariates on the unit box.
    pub fn logistic_homophily(
        groups: usize,
        alpha_within: f64,
        alpha_between: f64,
        beta: f64,
        rho: f64,
        dim: usize,
    ) -> Result<ModelSpec> {
        ModelSpec::builtin(
            groups,
            dim,
            BField::LogisticHomophily {
                alpha_within,
                alpha_between,
                beta,
            },
            PiField::Uniform,
            rho,
        )
    }

    /// Assemble a model from built-in parts on the unit box, deriving the
    /// constants.
    pub fn builtin(
        groups: usize,
        dim: usize,
        field: BField,
        pi: PiField,
        rho: f64,
    ) -> Result<ModelSpec> {
        ModelSpec::try_from(ModelSpecConfig {
            groups,
            dim,
            field,
            pi,
            rho,
            covariates: None,
            region: None,
            constants: None,
        })
    }

    /// Model with a user-supplied edge field and explicit constants.
    pub fn custom(
        groups: usize,
        dim: usize,
        field: CustomField,
        pi: PiField,
        rho: f64,
        covariates: CovariateLaw,
        region: Region,
        constants: Constants,
    ) -> Result<ModelSpec> {
        let spec = ModelSpec {
            groups,
            dim,
            field: BField::Custom(field),
            pi,
            rho,
            covariates,
            region,
            constants,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Replace the community-probability field, rederiving `pi`-related
    /// constants for built-in edge fields.
    pub fn with_pi(mut self, pi: PiField) -> Result<ModelSpec> {
        let (l_pi, pi_min) = pi_constants(&pi, &self.covariates, self.groups)?;
        self.pi = pi;
        self.constants.l_pi = l_pi;
        self.constants.pi_min = pi_min;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::InvalidModel("need at least one community".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidModel(
                "covariate dimension must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidModel(format!(
                "sparsity scale rho = {} outside [0, 1]",
                self.rho
            )));
        }
        self.region.validate(self.dim)?;
        let support = self.covariates.support();
        support.validate(self.dim)?;
        match &self.pi {
            PiField::Fixed { probabilities } => {
                if probabilities.len() != self.groups {
                    return Err(Error::InvalidModel(format!(
                        "fixed pi has {} entries for {} communities",
                        probabilities.len(),
                        self.groups
                    )));
                }
                let sum: f64 = probabilities.iter().sum();
                if probabilities.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "fixed pi entries must be nonnegative and sum to 1 (sum = {sum})"
                    )));
                }
            }
            PiField::Linear => {
                if self.groups != 2 {
                    return Err(Error::InvalidModel(
                        "linear pi is defined for exactly 2 communities".into(),
                    ));
                }
            }
            PiField::Uniform => {}
        }
        match &self.field {
            BField::PlantedPartition { within, between } => {
                for v in [within, between] {
                    if !(0.0..=1.0).contains(v) {
                        return Err(Error::InvalidModel(format!(
                            "planted-partition probability {v} outside [0, 1]"
                        )));
                    }
                }
            }
            BField::LogisticHomophily { beta, .. } => {
                if *beta < 0.0 {
                    return Err(Error::InvalidModel(
                        "logistic-homophily decay beta must be nonnegative".into(),
                    ));
                }
            }
            BField::Custom(_) => {}
        }
        Ok(())
    }

    /// Sparsity-scaled, symmetrized edge probability
    /// `B_gh(x, x') = rho * (B^0_gh(x, x') + B^0_hg(x', x)) / 2`.
    ///
    /// For the built-in fields the symmetrization is an exact identity.
    pub fn edge_probability(&self, g: usize, h: usize, x: &[f64], xp: &[f64]) -> Result<f64> {
        let raw = 0.5 * (self.field.raw(g, h, x, xp) + self.field.raw(h, g, xp, x));
        let value = self.rho * raw;
        if !(0.0..=1.0).contains(&value) || !value.is_finite() {
            return Err(Error::ProbabilityOutOfRange { g, h, value });
        }
        Ok(value)
    }

    /// The `G x G` matrix of sparsity-scaled edge probabilities at one
    /// covariate pair.
    pub fn b_matrix(&self, x: &[f64], xp: &[f64]) -> Result<ndarray::Array2<f64>> {
        let g = self.groups;
        let mut b = ndarray::Array2::zeros((g, g));
        for a in 0..g {
            for c in 0..g {
                b[[a, c]] = self.edge_probability(a, c, x, xp)?;
            }
        }
        Ok(b)
    }

    /// Community probabilities at one covariate.
    pub fn pi(&self, x: &[f64]) -> Vec<f64> {
        match &self.pi {
            PiField::Uniform => vec![1.0 / self.groups as f64; self.groups],
            PiField::Fixed { probabilities } => probabilities.clone(),
            PiField::Linear => {
                let support = self.covariates.support();
                let (lo, hi) = (support.lower[0], support.upper[0]);
                let p = ((x[0] - lo) / (hi - lo)).clamp(0.0, 1.0);
                vec![p, 1.0 - p]
            }
        }
    }
}

/// Closed-form constants for built-in fields under a product-uniform
/// covariate law. Errors for custom fields, whose constants cannot be
/// certified automatically.
pub fn derive_constants(
    field: &BField,
    pi: &PiField,
    rho: f64,
    covariates: &CovariateLaw,
    region: &Region,
    groups: usize,
) -> Result<Constants> {
    let support = covariates.support();
    if region != &support {
        // Density bounds below assume the certified region IS the uniform
        // support; anything fancier needs caller-supplied constants.
        return Err(Error::InvalidModel(
            "constants can only be derived when the region equals the covariate support; \
             supply constants explicitly otherwise"
                .into(),
        ));
    }
    let density = covariates.density();
    let (b_x, ubar_x) = (density, density);
    // Worst case for a ball centred in an axis-aligned box is a corner, where
    // exactly the 2^-d orthant fraction of the ball stays inside, valid up to
    // the shortest side length.
    let dim = region.dim();
    let c = 0.5f64.powi(dim as i32);
    let t = region
        .lower
        .iter()
        .zip(&region.upper)
        .map(|(lo, hi)| hi - lo)
        .fold(f64::INFINITY, f64::min);
    // Largest distance between covariates of a pair, both drawn in the region.
    let t_max = region.diameter();
    let (delta_base, l_b_base) = match field {
        BField::PlantedPartition { within, between } => (within.max(*between), 0.0),
        BField::LogisticHomophily {
            alpha_within,
            alpha_between,
            beta,
        } => {
            // Each row's maximum is at the larger alpha; the sigmoid decays
            // with distance, so the infimum over pairs sits at the diameter.
            let alpha_hi = alpha_within.max(*alpha_between);
            let delta = sigmoid(alpha_hi - beta * t_max);
            // d/dt sigmoid(alpha - beta t) = -beta s(1-s); |d t / d(x,x')| <= sqrt(2).
            let slope = |alpha: f64| -> f64 {
                let zs = [alpha - beta * t_max, alpha];
                if zs[0] <= 0.0 && zs[1] >= 0.0 {
                    0.25
                } else {
                    zs.iter()
                        .map(|z| sigmoid(*z) * (1.0 - sigmoid(*z)))
                        .fold(0.0, f64::max)
                }
            };
            let s_max = slope(*alpha_within).max(slope(*alpha_between));
            (delta, std::f64::consts::SQRT_2 * beta * s_max)
        }
        BField::Custom(_) => {
            return Err(Error::InvalidModel(
                "cannot derive constants for a custom edge field".into(),
            ))
        }
    };
    let (l_pi, pi_min) = pi_constants(pi, covariates, groups)?;
    Ok(Constants {
        c,
        t,
        b_x,
        ubar_x,
        delta: rho * delta_base,
        l_b: rho * l_b_base,
        l_b_base,
        l_pi,
        pi_min,
    })
}

fn pi_constants(pi: &PiField, covariates: &CovariateLaw, groups: usize) -> Result<(f64, f64)> {
    Ok(match pi {
        PiField::Uniform => (0.0, 1.0 / groups as f64),
        PiField::Fixed { probabilities } => (
            0.0,
            probabilities.iter().copied().fold(f64::INFINITY, f64::min),
        ),
        PiField::Linear => {
            let support = covariates.support();
            let width = support.upper[0] - support.lower[0];
            // Under the uniform law each marginal community probability is 1/2.
            (1.0 / width, 0.5)
        }
    })
}

fn euclidean(x: &[f64], xp: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), xp.len());
    x.iter()
        .zip(xp)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
