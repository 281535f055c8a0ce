//! Numerical evaluation of the finite-sample deviation bounds.
//!
//! Every high-probability bound of the analysis — on the localized Laplacian
//! deviation, the misclustering measure, and the plug-in estimators — is
//! evaluated here as a number, from declared model constants, together with
//! the complete list of admissibility conditions of its statement. Conditions
//! are never silently enforced: each is reported as an LHS/RHS pair with a
//! pass flag, so a report shows *how far* a condition fails. At desk scale
//! several logarithmic conditions fail numerically even where empirical
//! coverage holds, and downstream consumers must be able to distinguish
//! "bound applicable" from "bound holds empirically".
//!
//! Degenerate inputs (zero floors, rank-deficient edge matrices, nonpositive
//! denominators) yield a flagged `f64::INFINITY`; `NaN` is never produced,
//! and the serializer refuses it outright as a backstop.

use serde::{Deserialize, Serialize};

use crate::knn;
use crate::model::Constants;

/// JSON-safe (de)serialization for possibly non-finite `f64` values: finite
/// values serialize as numbers, infinities as the strings `"inf"`/`"-inf"`.
/// `NaN` is rejected at serialization time, enforcing the no-NaN invariant.
pub mod nonfinite {
    use serde::de::{self, Deserializer, Visitor};
    use serde::ser::{Error as _, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            Err(S::Error::custom("refusing to serialize NaN"))
        } else if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"/\"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(E::custom(format!("unknown float token {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// [`nonfinite`] lifted to `Option<f64>`: `None` maps to `null`, `Some`
/// follows the finite/token scheme.
pub mod nonfinite_opt {
    use serde::de::{self, Deserializer, Visitor};
    use serde::ser::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::nonfinite::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Option<f64>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number, \"inf\"/\"-inf\", or null")
            }
            fn visit_none<E: de::Error>(self) -> Result<Self::Value, E> {
                Ok(None)
            }
            fn visit_unit<E: de::Error>(self) -> Result<Self::Value, E> {
                Ok(None)
            }
            fn visit_some<D2: Deserializer<'de>>(self, d: D2) -> Result<Self::Value, D2::Error> {
                super::nonfinite::deserialize(d).map(Some)
            }
        }
        d.deserialize_option(V)
    }
}

/// Comparison direction of an admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

/// One admissibility condition, kept as a full LHS/RHS pair. A `NaN` on
/// either side never satisfies any relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    #[serde(with = "nonfinite")]
    pub lhs: f64,
    #[serde(with = "nonfinite")]
    pub rhs: f64,
    pub relation: Relation,
    pub satisfied: bool,
}

impl Condition {
    fn build(name: &str, lhs: f64, rhs: f64, relation: Relation) -> Self {
        let satisfied = match relation {
            Relation::Ge => lhs >= rhs,
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Gt => lhs > rhs,
        };
        Condition {
            name: name.to_owned(),
            lhs,
            rhs,
            relation,
            satisfied,
        }
    }

    pub fn ge(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::build(name, lhs, rhs, Relation::Ge)
    }

    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::build(name, lhs, rhs, Relation::Le)
    }

    pub fn lt(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::build(name, lhs, rhs, Relation::Lt)
    }

    pub fn gt(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::build(name, lhs, rhs, Relation::Gt)
    }
}

/// A bound value together with every admissibility condition of its
/// statement. `value` is nonnegative and finite or `f64::INFINITY` (vacuous),
/// never `NaN`; `conditions_hold` is the conjunction of the per-condition
/// flags and marks whether the bound is applicable as stated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundValue {
    pub name: String,
    #[serde(with = "nonfinite")]
    pub value: f64,
    pub conditions: Vec<Condition>,
    pub conditions_hold: bool,
}

impl BoundValue {
    fn new(name: &str, value: f64, conditions: Vec<Condition>) -> Self {
        debug_assert!(!value.is_nan(), "bound {name} evaluated to NaN");
        debug_assert!(value >= 0.0, "bound {name} evaluated to {value}");
        let conditions_hold = conditions.iter().all(|c| c.satisfied);
        BoundValue {
            name: name.to_owned(),
            value,
            conditions,
            conditions_hold,
        }
    }
}

/// Per-community floors `⌊(c/16)(N_h/N)(b_X/Ū_X)k⌋` and their minimum; the
/// minimum enters every degree denominator of the integrated bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupFloors {
    pub per_group: Vec<u64>,
    pub minimum: u64,
    /// `true` when realized community sizes were unavailable and the
    /// assignment-probability surrogate `N_h := π̲N/2` was used instead.
    pub substituted: bool,
}

/// Suggested neighbourhood size `(N²/ρ^d)^{1/(d+2)}` along with the implied
/// deviation rate `(ρN)^{-1/(d+2)}` it achieves up to logarithmic factors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimalK {
    pub k: usize,
    pub rate_exponent: f64,
    pub rate: f64,
}

/// Neighbourhood size balancing the variance and bias terms of the deviation
/// bound. The suggestion is rounded and clamped to `[1, n]`; a zero density
/// scale `rho` degenerates to `k = n` with an infinite rate, never `NaN`.
pub fn optimal_k(n: usize, rho: f64, dim: usize) -> OptimalK {
    let df = dim as f64;
    let exponent = 1.0 / (df + 2.0);
    let raw = ((n as f64).powi(2) / rho.powf(df)).powf(exponent);
    let k = (raw.round() as usize).clamp(1, n.max(1));
    OptimalK {
        k,
        rate_exponent: -exponent,
        rate: (rho * n as f64).powf(-exponent),
    }
}

/// Subspace-distance bound from a measured Laplacian deviation:
/// `4√(2G)/λ_G · dev`, with a nonpositive gap yielding a flagged infinity.
pub fn subspace_error_bound(groups: usize, lambda_g: f64, deviation: f64) -> f64 {
    if lambda_g <= 0.0 {
        return f64::INFINITY;
    }
    4.0 * (2.0 * groups as f64).sqrt() / lambda_g * deviation
}

/// Misclustering-measure bound from a measured Laplacian deviation:
/// `512 G · dev² / λ_G²`, with a nonpositive gap yielding a flagged infinity.
pub fn misclustering_from_deviation(groups: usize, lambda_g: f64, deviation: f64) -> f64 {
    if lambda_g <= 0.0 {
        return f64::INFINITY;
    }
    512.0 * groups as f64 * deviation * deviation / (lambda_g * lambda_g)
}

/// Floor of a nonnegative `f64` to an exact integer. `floor` on an IEEE
/// double is exact, so identical inputs always produce identical floors; the
/// argument itself is a product of declared `f64` constants, whose rounding
/// is part of the declared semantics.
fn exact_floor(x: f64) -> u64 {
    if !(x > 0.0) {
        0
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.floor() as u64
    }
}

/// Product that treats a vacuous (infinite) factor as dominant, so that
/// `0 × ∞` degenerates to the flagged infinity instead of `NaN`.
fn sat_mul(a: f64, b: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        a * b
    }
}

/// Everything needed to evaluate the bounds at one `(N, k, τ, δ)` design
/// point and one query pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub k: usize,
    pub groups: usize,
    pub dim: usize,
    pub tau: f64,
    /// Failure probability δ of the high-probability statements.
    pub delta: f64,
    /// Global density scale ρ of the model (drives the optimal-k suggestion).
    pub rho: f64,
    pub constants: Constants,
    /// Realized community sizes `N_h`, one per community. `None` selects the
    /// assignment-probability surrogate `N_h := π̲N/2` used by the
    /// unconditional bounds.
    pub community_sizes: Option<Vec<usize>>,
    /// Largest entry of the edge-probability matrix at the exact query pair.
    pub b_max: f64,
    /// Smallest of the `G` singular values of the edge-probability matrix at
    /// the exact query pair.
    pub sigma_g: f64,
}

impl BoundInputs {
    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }

    fn df(&self) -> f64 {
        self.dim as f64
    }

    fn gf(&self) -> f64 {
        self.groups as f64
    }

    /// Deterministic upper envelope for the sup of the k-NN radius.
    pub fn upper_radius(&self) -> f64 {
        knn::upper_radius_envelope(self.n, self.k, self.dim, &self.constants)
    }

    /// Raw (pre-floor) value of `(c/16)(N_h/N)(b_X/Ū_X)k` at community size
    /// `n_h`.
    fn floor_argument(&self, n_h: f64) -> f64 {
        self.constants.c / 16.0
            * (n_h / self.nf())
            * (self.constants.b_x / self.constants.ubar_x)
            * self.kf()
    }

    /// Raw (pre-floor) value of the assignment-probability floor
    /// `π̲ c b_X k / (32 Ū_X)`.
    fn pi_floor_argument(&self) -> f64 {
        self.constants.pi_min * self.constants.c * self.constants.b_x * self.kf()
            / (32.0 * self.constants.ubar_x)
    }

    /// Assignment-probability floor `⌊π̲ c b_X k / (32 Ū_X)⌋`.
    pub fn pi_floor(&self) -> u64 {
        exact_floor(self.pi_floor_argument())
    }

    /// Community-size floors, from realized sizes when available and from
    /// the assignment-probability surrogate otherwise.
    pub fn floor_group_size(&self) -> GroupFloors {
        match &self.community_sizes {
            Some(sizes) => {
                let per_group: Vec<u64> = sizes
                    .iter()
                    .map(|&s| exact_floor(self.floor_argument(s as f64)))
                    .collect();
                let minimum = per_group.iter().copied().min().unwrap_or(0);
                GroupFloors {
                    per_group,
                    minimum,
                    substituted: false,
                }
            }
            None => {
                let f = self.pi_floor();
                GroupFloors {
                    per_group: vec![f; self.groups],
                    minimum: f,
                    substituted: true,
                }
            }
        }
    }

    /// Shared deviation shape: variance `4√(3 ln(arg)/D)` plus bias
    /// `(2k l_B R_k/D)(2k l_B R_k/D + 3)` at denominator `D`. A nonpositive
    /// denominator yields the flagged infinity.
    fn deviation(&self, log_argument: f64, denominator: f64) -> f64 {
        if !(denominator > 0.0) {
            return f64::INFINITY;
        }
        let variance = 4.0 * (3.0 * log_argument.ln() / denominator).sqrt();
        let bias = 2.0 * self.kf() * self.constants.l_b * self.upper_radius() / denominator;
        variance + bias * (bias + 3.0)
    }

    /// Prefactor `scale · G · (‖B‖_max k + τ)² / (σ_G² floor²)` of the
    /// misclustering-propagation bounds; degenerate gaps or floors yield the
    /// flagged infinity.
    fn spectral_prefactor(&self, scale: f64, floor: f64) -> f64 {
        if floor <= 0.0 || self.sigma_g <= 0.0 {
            return f64::INFINITY;
        }
        scale * self.gf() * (self.b_max * self.kf() + self.tau).powi(2)
            / (self.sigma_g.powi(2) * floor.powi(2))
    }

    /// Pair-count amplification `k/f + k²/f²` of the edge-probability bounds.
    fn pair_count_bracket(&self, floor: f64) -> f64 {
        if floor <= 0.0 {
            return f64::INFINITY;
        }
        let r = self.kf() / floor;
        r + r * r
    }

    /// Concentration tail `√(2 ln(4/δ)) / floor` of the edge-probability
    /// bounds.
    fn pair_mean_tail(&self, floor: f64) -> f64 {
        if floor <= 0.0 {
            return f64::INFINITY;
        }
        (2.0 * (4.0 / self.delta).ln()).sqrt() / floor
    }

    fn cond_k_lower_group(&self, m: u32) -> Condition {
        Condition::ge(
            &format!("k at least 12 d ln({m} G N / delta)"),
            self.kf(),
            12.0 * self.df() * (f64::from(m) * self.gf() * self.nf() / self.delta).ln(),
        )
    }

    fn cond_k_lower_radius(&self, m2: u32) -> Condition {
        Condition::ge(
            &format!("k at least 24 d ln({m2} N / delta)"),
            self.kf(),
            24.0 * self.df() * (f64::from(m2) * self.nf() / self.delta).ln(),
        )
    }

    fn cond_k_upper_volume(&self) -> Condition {
        let v_d = knn::unit_ball_volume(self.dim);
        Condition::le(
            "k at most 8 T^d V_d Ubar_X N",
            self.kf(),
            8.0 * self.constants.t.powf(self.df()) * v_d * self.constants.ubar_x * self.nf(),
        )
    }

    fn cond_k_upper_radius(&self) -> Condition {
        let v_d = knn::unit_ball_volume(self.dim);
        Condition::le(
            "k at most T^d V_d b_X c N / 2",
            self.kf(),
            0.5 * self.constants.t.powf(self.df())
                * v_d
                * self.constants.b_x
                * self.constants.c
                * self.nf(),
        )
    }

    /// Per-community floor conditions at log multiplier `m`: with realized
    /// sizes, one condition per community with `N_h` inside the logarithm;
    /// otherwise the single surrogate condition with `N` inside the
    /// logarithm, as in the unconditional statements.
    fn floor_conditions(&self, m: u32, out: &mut Vec<Condition>) {
        match &self.community_sizes {
            Some(sizes) => {
                for (h, &s) in sizes.iter().enumerate() {
                    let lhs = self.floor_argument(s as f64);
                    let rhs = if s == 0 {
                        // An empty community can never satisfy the size
                        // requirement; an infinite RHS keeps the failure
                        // explicit without taking ln(0).
                        f64::INFINITY
                    } else {
                        24.0 * self.df() * (f64::from(m) * self.gf() * s as f64 / self.delta).ln()
                            + 1.0
                    };
                    out.push(Condition::ge(
                        &format!(
                            "community {h} floor argument at least 24 d ln({m} G N_h / delta) + 1"
                        ),
                        lhs,
                        rhs,
                    ));
                }
            }
            None => out.push(self.cond_pi_floor_argument(m)),
        }
    }

    fn cond_pi_floor_argument(&self, m: u32) -> Condition {
        Condition::ge(
            &format!("assignment floor argument at least 24 d ln({m} G N / delta) + 1"),
            self.pi_floor_argument(),
            24.0 * self.df() * (f64::from(m) * self.gf() * self.nf() / self.delta).ln() + 1.0,
        )
    }

    fn cond_degree_lower(&self, a: u32, denominator: f64) -> Condition {
        Condition::ge(
            &format!("Delta times floor plus tau at least 3 ln({a} k / delta)"),
            denominator,
            3.0 * (f64::from(a) * self.kf() / self.delta).ln(),
        )
    }

    /// Clustering separation constraint with the deterministic community
    /// floors, at confidence `delta_tilde`.
    fn deterministic_constraint(&self, delta_tilde: f64, min_floor: f64, name: &str) -> Condition {
        let denominator = self.constants.delta * min_floor + self.tau;
        let lhs = self.deviation(8.0 * self.kf() / delta_tilde, denominator);
        let scale = self.b_max * self.kf() + self.tau;
        let rhs = if scale > 0.0 {
            16.0 * (2.0 * self.gf()).sqrt() * self.sigma_g * min_floor / scale
        } else {
            0.0
        };
        Condition::lt(name, lhs, rhs)
    }

    /// Clustering separation constraint with the assignment-probability
    /// floor, at confidence `delta_tilde`.
    fn integrated_constraint(&self, delta_tilde: f64, pi_floor: f64, name: &str) -> Condition {
        let denominator = self.constants.delta * pi_floor + self.tau;
        let lhs = self.deviation(24.0 * self.kf() / delta_tilde, denominator);
        let scale = self.b_max * self.kf() + self.tau;
        let rhs = if scale > 0.0 {
            16.0 * (2.0 * self.gf()).sqrt() * self.sigma_g * pi_floor / scale
        } else {
            0.0
        };
        Condition::lt(name, lhs, rhs)
    }

    /// High-probability lower bound on the smallest community count within
    /// any neighbourhood: value `min_h ⌊(c/16)(N_h/N)(b_X/Ū_X)k⌋`.
    pub fn group_size_floor_bound(&self, floors: &GroupFloors) -> BoundValue {
        let mut conditions = vec![self.cond_k_lower_group(24), self.cond_k_upper_volume()];
        self.floor_conditions(24, &mut conditions);
        BoundValue::new("community-size-floor", floors.minimum as f64, conditions)
    }

    /// High-probability lower bound on the minimum expected localized degree:
    /// value `Δ · min_h ⌊…⌋`, same conditions as the size floor.
    pub fn degree_floor_bound(&self, floors: &GroupFloors) -> BoundValue {
        let mut conditions = vec![self.cond_k_lower_group(24), self.cond_k_upper_volume()];
        self.floor_conditions(24, &mut conditions);
        BoundValue::new(
            "degree-floor",
            self.constants.delta * floors.minimum as f64,
            conditions,
        )
    }

    /// Laplacian deviation bound conditional on the observed covariates, at
    /// measured minimum expected degree `d_min`; when a measured sup radius
    /// is supplied it is checked against the upper envelope as the statement
    /// requires.
    pub fn laplacian_bound_conditional(&self, d_min: f64, sup_radius: Option<f64>) -> BoundValue {
        let denominator = d_min + self.tau;
        let mut conditions = Vec::new();
        if let Some(r) = sup_radius {
            conditions.push(Condition::le(
                "sup radius at most upper envelope",
                r,
                self.upper_radius(),
            ));
        }
        conditions.push(Condition::ge(
            "d_min plus tau at least 3 ln(8 k / delta)",
            denominator,
            3.0 * (8.0 * self.kf() / self.delta).ln(),
        ));
        BoundValue::new(
            "laplacian-deviation-conditional",
            self.deviation(8.0 * self.kf() / self.delta, denominator),
            conditions,
        )
    }

    /// Laplacian deviation bound with the degree floor substituted for
    /// `d_min`, integrating the covariates out.
    pub fn laplacian_bound(&self) -> BoundValue {
        let floors = self.floor_group_size();
        let min_floor = floors.minimum as f64;
        let denominator = self.constants.delta * min_floor + self.tau;
        let mut conditions = vec![
            self.cond_degree_lower(24, denominator),
            self.cond_k_lower_group(72),
            self.cond_k_lower_radius(36),
            self.cond_k_upper_volume(),
            self.cond_k_upper_radius(),
        ];
        self.floor_conditions(72, &mut conditions);
        BoundValue::new(
            "laplacian-deviation",
            self.deviation(24.0 * self.kf() / self.delta, denominator),
            conditions,
        )
    }

    /// Lower bound `σ_G(B)·floor/(‖B‖_max k + τ)` on the smallest nonzero
    /// singular value of the population Laplacian; a rank-deficient edge
    /// matrix yields zero, flagged through its condition.
    pub fn singular_value_lower(&self, min_floor: u64) -> BoundValue {
        let conditions = vec![Condition::gt(
            "sigma_G of query edge matrix positive",
            self.sigma_g,
            0.0,
        )];
        let scale = self.b_max * self.kf() + self.tau;
        let value = if self.sigma_g > 0.0 && scale > 0.0 {
            self.sigma_g * min_floor as f64 / scale
        } else {
            0.0
        };
        BoundValue::new("singular-value-lower", value, conditions)
    }

    /// The clustering separation constraint with deterministic floors as a
    /// standalone report entry: value = the deviation LHS at confidence δ.
    pub fn clustering_constraint_deterministic(&self) -> BoundValue {
        let floors = self.floor_group_size();
        let condition = self.deterministic_constraint(
            self.delta,
            floors.minimum as f64,
            "deviation below separation threshold",
        );
        let value = condition.lhs;
        BoundValue::new(
            "clustering-constraint-deterministic",
            value,
            vec![condition],
        )
    }

    /// The clustering separation constraint with the assignment-probability
    /// floor as a standalone report entry: value = the deviation LHS at
    /// confidence δ.
    pub fn clustering_constraint_integrated(&self) -> BoundValue {
        let condition = self.integrated_constraint(
            self.delta,
            self.pi_floor() as f64,
            "deviation below separation threshold",
        );
        let value = condition.lhs;
        BoundValue::new("clustering-constraint-integrated", value, vec![condition])
    }

    /// Bound on the misclustering measure `Σ_g |S_g|/n_g` at either query
    /// point.
    pub fn misclustering_bound(&self) -> BoundValue {
        let floors = self.floor_group_size();
        let min_floor = floors.minimum as f64;
        let denominator = self.constants.delta * min_floor + self.tau;
        let mut conditions = vec![
            self.cond_degree_lower(24, denominator),
            self.cond_k_lower_group(72),
            self.cond_k_lower_radius(36),
            self.cond_k_upper_volume(),
            self.cond_k_upper_radius(),
        ];
        self.floor_conditions(72, &mut conditions);
        conditions.push(self.deterministic_constraint(
            self.delta / 3.0,
            min_floor,
            "deviation below separation threshold at delta/3",
        ));
        let dev = self.deviation(24.0 * self.kf() / self.delta, denominator);
        let value = sat_mul(self.spectral_prefactor(512.0, min_floor), dev * dev);
        BoundValue::new("misclustering-rate", value, conditions)
    }

    /// Entrywise edge-probability error bound with realized community
    /// floors (conditional form).
    pub fn edge_probability_bound_conditional(&self) -> BoundValue {
        let floors = self.floor_group_size();
        let min_floor = floors.minimum as f64;
        let denominator = self.constants.delta * min_floor + self.tau;
        let mut conditions = vec![
            self.cond_degree_lower(48, denominator),
            self.cond_k_lower_group(144),
            self.cond_k_lower_radius(72),
            self.cond_k_upper_volume(),
            self.cond_k_upper_radius(),
        ];
        self.floor_conditions(144, &mut conditions);
        conditions.push(self.deterministic_constraint(
            self.delta / 6.0,
            min_floor,
            "deviation below separation threshold at delta/6",
        ));
        let dev = self.deviation(48.0 * self.kf() / self.delta, denominator);
        let propagation = sat_mul(
            sat_mul(
                self.spectral_prefactor(1024.0, min_floor),
                self.pair_count_bracket(min_floor),
            ),
            dev * dev,
        );
        let value = propagation
            + 2.0 * self.constants.l_b * self.upper_radius()
            + self.pair_mean_tail(min_floor);
        BoundValue::new("edge-probability-deviation-conditional", value, conditions)
    }

    /// Uniform community-probability error bound (unconditional form, with
    /// the assignment-probability floor).
    pub fn community_probability_bound(&self) -> BoundValue {
        let pi_floor = self.pi_floor() as f64;
        let denominator = self.constants.delta * pi_floor + self.tau;
        let v_d = knn::unit_ball_volume(self.dim);
        let conditions = vec![
            self.cond_degree_lower(72, denominator),
            self.cond_k_lower_group(216),
            self.cond_k_lower_radius(108),
            self.cond_k_upper_volume(),
            self.cond_k_upper_radius(),
            self.cond_pi_floor_argument(216),
            self.integrated_constraint(
                self.delta / 3.0,
                pi_floor,
                "deviation below separation threshold at delta/3",
            ),
            Condition::ge(
                "k at least 256 d ln(24 / delta) ln N",
                self.kf(),
                256.0 * self.df() * (24.0 / self.delta).ln() * self.nf().ln(),
            ),
            Condition::le(
                "k at most c V_d b_X T^d N / 2 (assignment oracle window)",
                self.kf(),
                self.constants.c
                    * v_d
                    * self.constants.b_x
                    * self.constants.t.powf(self.df())
                    * self.nf()
                    / 2.0,
            ),
            Condition::ge(
                "N at least 8 ln(3 G / delta) / pi_min^2",
                self.nf(),
                8.0 * (3.0 * self.gf() / self.delta).ln() / self.constants.pi_min.powi(2),
            ),
        ];
        let dev = self.deviation(72.0 * self.kf() / self.delta, denominator);
        let propagation = sat_mul(self.spectral_prefactor(512.0, pi_floor), dev * dev);
        let oracle_tail = self.constants.l_pi * self.upper_radius()
            + 2.0 * ((self.df() * self.nf().ln() + (6.0 / self.delta).ln()) / self.kf()).sqrt();
        BoundValue::new(
            "community-probability-deviation",
            propagation + oracle_tail,
            conditions,
        )
    }

    /// Entrywise edge-probability error bound (unconditional form, with the
    /// assignment-probability floor).
    pub fn edge_probability_bound(&self) -> BoundValue {
        let pi_floor = self.pi_floor() as f64;
        let denominator = self.constants.delta * pi_floor + self.tau;
        let conditions = vec![
            self.cond_degree_lower(96, denominator),
            self.cond_k_lower_group(288),
            self.cond_k_lower_radius(144),
            self.cond_k_upper_volume(),
            self.cond_k_upper_radius(),
            self.cond_pi_floor_argument(288),
            self.integrated_constraint(
                self.delta / 12.0,
                pi_floor,
                "deviation below separation threshold at delta/12",
            ),
            Condition::ge(
                "N at least 8 ln(2 G / delta) / pi_min^2",
                self.nf(),
                8.0 * (2.0 * self.gf() / self.delta).ln() / self.constants.pi_min.powi(2),
            ),
        ];
        // The deviation core keeps its ln(48k/δ) argument in this statement
        // even though the degree condition tightens to ln(96k/δ).
        let dev = self.deviation(48.0 * self.kf() / self.delta, denominator);
        let propagation = sat_mul(
            sat_mul(
                self.spectral_prefactor(1024.0, pi_floor),
                self.pair_count_bracket(pi_floor),
            ),
            dev * dev,
        );
        let value = propagation
            + 2.0 * self.constants.l_b * self.upper_radius()
            + self.pair_mean_tail(pi_floor);
        BoundValue::new("edge-probability-deviation", value, conditions)
    }

    /// The three estimator bounds as a group.
    pub fn estimator_bounds(&self) -> [BoundValue; 3] {
        [
            self.edge_probability_bound_conditional(),
            self.community_probability_bound(),
            self.edge_probability_bound(),
        ]
    }

    /// Evaluate the full report: every covered bound with all conditions.
    /// `d_min` is the measured minimum expected degree when available (the
    /// degree-floor surrogate `Δ·min⌊…⌋` is used otherwise); `sup_radius` is
    /// the measured sup of the k-NN radius over the region grid.
    pub fn report(&self, d_min: Option<f64>, sup_radius: Option<f64>) -> BoundReport {
        let floors = self.floor_group_size();
        let d_min_value = d_min.unwrap_or(self.constants.delta * floors.minimum as f64);
        let bounds = vec![
            self.group_size_floor_bound(&floors),
            self.degree_floor_bound(&floors),
            self.laplacian_bound_conditional(d_min_value, sup_radius),
            self.laplacian_bound(),
            self.singular_value_lower(floors.minimum),
            self.clustering_constraint_deterministic(),
            self.clustering_constraint_integrated(),
            self.misclustering_bound(),
            self.edge_probability_bound_conditional(),
            self.community_probability_bound(),
            self.edge_probability_bound(),
        ];
        let mut notes = Vec::new();
        if d_min.is_none() {
            notes.push(
                "laplacian-deviation-conditional evaluated at the degree-floor surrogate; \
                 supply a measured d_min for the literal conditional bound"
                    .to_owned(),
            );
        }
        if floors.substituted {
            notes.push(
                "realized community sizes unavailable; community-size floors use the \
                 assignment-probability surrogate pi_min N / 2"
                    .to_owned(),
            );
        }
        notes.push(
            "edge-probability-deviation is stated in conditional form but grouped with the \
             unconditional results; it is evaluated with the assignment-probability floor \
             and coverage should be read in both strata"
                .to_owned(),
        );
        let pi_floor = self.pi_floor();
        BoundReport {
            inputs: self.clone(),
            group_floors: floors,
            pi_floor,
            optimal_k: optimal_k(self.n, self.rho, self.dim),
            bounds,
            notes,
        }
    }
}

/// Stable names of the report entries, in report order. Downstream tabular
/// output keys its columns on this list.
pub const BOUND_NAMES: [&str; 11] = [
    "community-size-floor",
    "degree-floor",
    "laplacian-deviation-conditional",
    "laplacian-deviation",
    "singular-value-lower",
    "clustering-constraint-deterministic",
    "clustering-constraint-integrated",
    "misclustering-rate",
    "edge-probability-deviation-conditional",
    "community-probability-deviation",
    "edge-probability-deviation",
];

/// Full per-design-point report: every bound with its full condition list,
/// the community floors, and the suggested neighbourhood size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub group_floors: GroupFloors,
    pub pi_floor: u64,
    pub optimal_k: OptimalK,
    pub bounds: Vec<BoundValue>,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Look up a bound entry by its stable name.
    pub fn bound(&self, name: &str) -> Option<&BoundValue> {
        self.bounds.iter().find(|b| b.name == name)
    }

    /// CSV summary, one row per bound. Condition names contain no commas by
    /// construction; failed conditions are joined with `"; "`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bound,value,conditions_hold,failed_conditions\n");
        for b in &self.bounds {
            let failed: Vec<&str> = b
                .conditions
                .iter()
                .filter(|c| !c.satisfied)
                .map(|c| c.name.as_str())
                .collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                b.name,
                b.value,
                b.conditions_hold,
                failed.join("; ")
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_constants() -> Constants {
        Constants {
            c: 1.0,
            t: 1.0,
            b_x: 1.0,
            ubar_x: 1.0,
            delta: 0.6,
            l_b: 0.0,
            l_b_base: 0.0,
            l_pi: 0.0,
            pi_min: 0.5,
        }
    }

    fn inputs() -> BoundInputs {
        BoundInputs {
            n: 128,
            k: 64,
            groups: 2,
            dim: 1,
            tau: 0.0,
            delta: 0.1,
            rho: 1.0,
            constants: unit_constants(),
            community_sizes: Some(vec![64, 64]),
            b_max: 0.6,
            sigma_g: 0.4,
        }
    }

    #[test]
    fn floor_matches_hand_arithmetic() {
        // (1/16)(1/2)(1)·64 = 2 exactly.
        let f = inputs().floor_group_size();
        assert_eq!(f.per_group, vec![2, 2]);
        assert_eq!(f.minimum, 2);
        assert!(!f.substituted);
    }

    #[test]
    fn tiny_k_gives_zero_floor_and_vacuous_bounds() {
        let mut i = inputs();
        i.k = 8; // (1/16)(1/2)·8 = 0.25 → floor 0
        let f = i.floor_group_size();
        assert_eq!(f.minimum, 0);
        let m = i.misclustering_bound();
        assert!(m.value.is_infinite());
        assert!(!m.conditions_hold);
    }

    #[test]
    fn conditional_deviation_matches_scalar_oracle() {
        let mut i = inputs();
        i.k = 100;
        i.n = 1000;
        // log argument 8k/delta = 8 * 100 / 0.1 = 8000; zero Lipschitz bias.
        let b = i.laplacian_bound_conditional(50.0, None);
        let expected = 4.0 * (3.0 * (8000.0f64).ln() / 50.0).sqrt();
        assert!((b.value - expected).abs() < 1e-12);
        assert!((expected - 2.94).abs() < 0.01);
    }

    #[test]
    fn nonpositive_denominator_is_flagged_infinite() {
        let i = inputs();
        let b = i.laplacian_bound_conditional(0.0, None);
        assert!(b.value.is_infinite());
        assert!(!b.conditions_hold);
    }

    #[test]
    fn sigma_lower_matches_diagonal_example() {
        // B = p·I with G = 2, floor = k/2, τ = 0: p·(k/2)/(p·k) = 1/2.
        let mut i = inputs();
        i.b_max = 0.3;
        i.sigma_g = 0.3;
        let b = i.singular_value_lower(i.k as u64 / 2);
        assert!((b.value - 0.5).abs() < 1e-15);
        assert!(b.conditions_hold);
    }

    #[test]
    fn rank_deficient_edge_matrix_flags_zero() {
        let mut i = inputs();
        i.sigma_g = 0.0;
        let b = i.singular_value_lower(10);
        assert_eq!(b.value, 0.0);
        assert!(!b.conditions_hold);
    }

    #[test]
    fn optimal_k_examples() {
        let o = optimal_k(1000, 1.0, 1);
        assert_eq!(o.k, 100);
        assert!((o.rate_exponent + 1.0 / 3.0).abs() < 1e-15);
        // Halving rho grows k by 2^{1/(d+2)}.
        let half = optimal_k(1000, 0.5, 1);
        assert!((half.k as f64 / o.k as f64 - 0.5f64.powf(-1.0 / 3.0)).abs() < 0.02);
    }

    #[test]
    fn bounds_monotone_in_delta() {
        let deltas = [0.01, 0.05, 0.1, 0.2, 0.5];
        let mut previous: Option<(f64, f64, f64)> = None;
        for &d in &deltas {
            let mut i = inputs();
            i.n = 4000;
            i.k = 400;
            i.delta = d;
            let lap = i.laplacian_bound().value;
            let mis = i.misclustering_bound().value;
            let edge = i.edge_probability_bound().value;
            if let Some((pl, pm, pe)) = previous {
                // Smaller δ means a larger (more conservative) bound.
                assert!(pl >= lap);
                assert!(pm >= mis);
                assert!(pe >= edge);
            }
            previous = Some((lap, mis, edge));
        }
    }

    #[test]
    fn report_serializes_infinities_as_tokens() {
        let mut i = inputs();
        i.k = 8; // zero floor → infinite bounds
        let report = i.report(None, None);
        let json = serde_json::to_string(&report).expect("serializable");
        assert!(json.contains("\"inf\""));
        assert!(!json.contains("NaN"));
        let back: BoundReport = serde_json::from_str(&json).expect("round-trips");
        assert!(back.bound("misclustering-rate").unwrap().value.is_infinite());
    }

    #[test]
    fn degenerate_inputs_never_produce_nan() {
        // Zero everything that can be zeroed and check every bound.
        let i = BoundInputs {
            n: 10,
            k: 2,
            groups: 2,
            dim: 1,
            tau: 0.0,
            delta: 0.1,
            rho: 1.0,
            constants: Constants {
                c: 1.0,
                t: 1.0,
                b_x: 1.0,
                ubar_x: 1.0,
                delta: 0.0,
                l_b: 0.0,
                l_b_base: 0.0,
                l_pi: 0.0,
                pi_min: 0.0,
            },
            community_sizes: Some(vec![0, 10]),
            b_max: 0.0,
            sigma_g: 0.0,
        };
        let report = i.report(None, None);
        for b in &report.bounds {
            assert!(!b.value.is_nan(), "{} is NaN", b.name);
            for c in &b.conditions {
                assert!(!c.lhs.is_nan() && !c.rhs.is_nan(), "{} has NaN side", c.name);
            }
        }
    }

    #[test]
    fn report_entry_names_match_published_order() {
        let i = inputs();
        let report = i.report(None, None);
        let names: Vec<&str> = report.bounds.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, BOUND_NAMES.to_vec());
    }
}
