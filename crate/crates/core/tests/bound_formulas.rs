//! Oracle tests for the finite-sample bound evaluator: worked scalar
//! examples, limiting behaviour, and a full dual-coded re-evaluation of every
//! report entry at a fixed design point.

use covariate_sbm::bounds::{optimal_k, BoundInputs, Condition, BOUND_NAMES};
use covariate_sbm::laplacian::population_factorization;
use covariate_sbm::model::Constants;
use covariate_sbm::{linalg, rng};
use ndarray::Array2;

fn unit_constants() -> Constants {
    Constants {
        c: 1.0,
        t: 1.0,
        b_x: 1.0,
        ubar_x: 1.0,
        delta: 1.0,
        l_b: 0.0,
        l_b_base: 0.0,
        l_pi: 0.0,
        pi_min: 0.5,
    }
}

/// Design point exercising every term of every bound: fractional floors,
/// nonzero Lipschitz bias, both floor variants, both regularizer variants.
fn scenario_constants() -> Constants {
    Constants {
        c: 0.5,
        t: 1.0,
        b_x: 0.9,
        ubar_x: 1.2,
        delta: 0.6,
        l_b: 0.05,
        l_b_base: 0.05,
        l_pi: 0.1,
        pi_min: 0.4,
    }
}

fn scenario_inputs(tau: f64, sizes: Option<Vec<usize>>) -> BoundInputs {
    BoundInputs {
        n: 4000,
        k: 252,
        groups: 2,
        dim: 1,
        tau,
        delta: 0.1,
        rho: 1.0,
        constants: scenario_constants(),
        community_sizes: sizes,
        b_max: 0.7,
        sigma_g: 0.35,
    }
}

fn close(actual: f64, expected: f64, rel: f64, what: &str) {
    if expected.is_infinite() || actual.is_infinite() {
        assert_eq!(actual, expected, "{what}: {actual} vs {expected}");
        return;
    }
    let scale = expected.abs().max(1.0);
    assert!(
        (actual - expected).abs() <= rel * scale,
        "{what}: {actual} vs expected {expected}"
    );
}

// ---------------------------------------------------------------------------
// Independent re-implementation of the bound formulas, used as the
// dual-coding oracle. Written from the statements, not from the library.
// ---------------------------------------------------------------------------

struct Mirror {
    n: f64,
    k: f64,
    g: f64,
    d: f64,
    tau: f64,
    delta: f64,
    c: f64,
    b_x: f64,
    ubar_x: f64,
    gap: f64,
    l_b: f64,
    l_pi: f64,
    pi_min: f64,
    sizes: Option<Vec<f64>>,
    b_max: f64,
    sigma_g: f64,
}

impl Mirror {
    fn of(inputs: &BoundInputs) -> Self {
        Mirror {
            n: inputs.n as f64,
            k: inputs.k as f64,
            g: inputs.groups as f64,
            d: inputs.dim as f64,
            tau: inputs.tau,
            delta: inputs.delta,
            c: inputs.constants.c,
            b_x: inputs.constants.b_x,
            ubar_x: inputs.constants.ubar_x,
            gap: inputs.constants.delta,
            l_b: inputs.constants.l_b,
            l_pi: inputs.constants.l_pi,
            pi_min: inputs.constants.pi_min,
            sizes: inputs
                .community_sizes
                .as_ref()
                .map(|s| s.iter().map(|&x| x as f64).collect()),
            b_max: inputs.b_max,
            sigma_g: inputs.sigma_g,
        }
    }

    fn volume(&self) -> f64 {
        // Closed forms of the unit-ball volume for the dimensions used here.
        match self.d as usize {
            1 => 2.0,
            2 => std::f64::consts::PI,
            3 => 4.0 * std::f64::consts::PI / 3.0,
            _ => panic!("mirror only covers d <= 3"),
        }
    }

    fn radius(&self) -> f64 {
        (2.0 * self.k / (self.n * self.b_x * self.c * self.volume())).powf(1.0 / self.d)
    }

    fn dev(&self, log_argument: f64, denominator: f64) -> f64 {
        if denominator <= 0.0 {
            return f64::INFINITY;
        }
        let bias = 2.0 * self.k * self.l_b * self.radius() / denominator;
        4.0 * (3.0 * log_argument.ln() / denominator).sqrt() + bias * (bias + 3.0)
    }

    /// Per-community floors `⌊(c/16)(N_h/N)(b_X/Ū_X)k⌋`, via the
    /// assignment-probability surrogate when realized sizes are absent.
    fn floors(&self) -> Vec<f64> {
        match &self.sizes {
            Some(sizes) => sizes
                .iter()
                .map(|&s| (self.c / 16.0 * (s / self.n) * (self.b_x / self.ubar_x) * self.k).floor())
                .collect(),
            None => vec![self.pi_floor(); self.g as usize],
        }
    }

    fn min_floor(&self) -> f64 {
        self.floors().into_iter().fold(f64::INFINITY, f64::min)
    }

    fn pi_floor(&self) -> f64 {
        (self.pi_min * self.c * self.b_x * self.k / (32.0 * self.ubar_x)).floor()
    }

    fn prefactor(&self, scale: f64, floor: f64) -> f64 {
        if floor <= 0.0 || self.sigma_g <= 0.0 {
            return f64::INFINITY;
        }
        scale * self.g * (self.b_max * self.k + self.tau).powi(2)
            / (self.sigma_g.powi(2) * floor.powi(2))
    }

    fn bracket(&self, floor: f64) -> f64 {
        if floor <= 0.0 {
            return f64::INFINITY;
        }
        self.k / floor + (self.k / floor).powi(2)
    }

    fn tail(&self, floor: f64) -> f64 {
        if floor <= 0.0 {
            return f64::INFINITY;
        }
        (2.0 * (4.0 / self.delta).ln()).sqrt() / floor
    }

    fn guarded(&self, a: f64, b: f64) -> f64 {
        if a.is_infinite() || b.is_infinite() {
            f64::INFINITY
        } else {
            a * b
        }
    }

    /// Expected report values keyed like the stable bound-name list.
    fn expected_values(&self, d_min: Option<f64>) -> Vec<(&'static str, f64)> {
        let floor = self.min_floor();
        let pi_floor = self.pi_floor();
        let den = self.gap * floor + self.tau;
        let pi_den = self.gap * pi_floor + self.tau;
        let d_min = d_min.unwrap_or(self.gap * floor);
        let sigma_scale = self.b_max * self.k + self.tau;
        let sigma_lower = if self.sigma_g > 0.0 && sigma_scale > 0.0 {
            self.sigma_g * floor / sigma_scale
        } else {
            0.0
        };
        let dev24 = self.dev(24.0 * self.k / self.delta, den);
        let dev48 = self.dev(48.0 * self.k / self.delta, den);
        let dev48_pi = self.dev(48.0 * self.k / self.delta, pi_den);
        let dev72_pi = self.dev(72.0 * self.k / self.delta, pi_den);
        let pi_tail = self.l_pi * self.radius()
            + 2.0 * ((self.d * self.n.ln() + (6.0 / self.delta).ln()) / self.k).sqrt();
        vec![
            ("community-size-floor", floor),
            ("degree-floor", self.gap * floor),
            (
                "laplacian-deviation-conditional",
                self.dev(8.0 * self.k / self.delta, d_min + self.tau),
            ),
            ("laplacian-deviation", dev24),
            ("singular-value-lower", sigma_lower),
            (
                "clustering-constraint-deterministic",
                self.dev(8.0 * self.k / self.delta, den),
            ),
            (
                "clustering-constraint-integrated",
                self.dev(24.0 * self.k / self.delta, pi_den),
            ),
            (
                "misclustering-rate",
                self.guarded(self.prefactor(512.0, floor), dev24 * dev24),
            ),
            (
                "edge-probability-deviation-conditional",
                self.guarded(
                    self.guarded(self.prefactor(1024.0, floor), self.bracket(floor)),
                    dev48 * dev48,
                ) + 2.0 * self.l_b * self.radius()
                    + self.tail(floor),
            ),
            (
                "community-probability-deviation",
                self.guarded(self.prefactor(512.0, pi_floor), dev72_pi * dev72_pi) + pi_tail,
            ),
            (
                "edge-probability-deviation",
                self.guarded(
                    self.guarded(self.prefactor(1024.0, pi_floor), self.bracket(pi_floor)),
                    dev48_pi * dev48_pi,
                ) + 2.0 * self.l_b * self.radius()
                    + self.tail(pi_floor),
            ),
        ]
    }
}

// ---------------------------------------------------------------------------
// Floor arithmetic
// ---------------------------------------------------------------------------

#[test]
fn floor_arithmetic_matches_the_worked_half_split_example() {
    let inputs = BoundInputs {
        n: 1000,
        k: 64,
        groups: 2,
        dim: 1,
        tau: 0.0,
        delta: 0.1,
        rho: 1.0,
        constants: unit_constants(),
        community_sizes: Some(vec![500, 500]),
        b_max: 0.5,
        sigma_g: 0.3,
    };
    let floors = inputs.floor_group_size();
    // (1/16)(1/2)(1)(64) = 2 for both communities.
    assert_eq!(floors.per_group, vec![2, 2]);
    assert_eq!(floors.minimum, 2);
    assert!(!floors.substituted);
}

#[test]
fn small_k_produces_zero_floors_and_vacuous_downstream_bounds() {
    let mut inputs = BoundInputs {
        n: 1000,
        k: 8,
        groups: 2,
        dim: 1,
        tau: 0.0,
        delta: 0.1,
        rho: 1.0,
        constants: unit_constants(),
        community_sizes: Some(vec![500, 500]),
        b_max: 0.5,
        sigma_g: 0.3,
    };
    let floors = inputs.floor_group_size();
    // (1/16)(1/2)(8) = 0.25 floors to zero.
    assert_eq!(floors.minimum, 0);

    let report = inputs.report(None, None);
    for name in [
        "laplacian-deviation",
        "misclustering-rate",
        "edge-probability-deviation-conditional",
    ] {
        let bound = report.bound(name).unwrap();
        assert!(
            bound.value.is_infinite(),
            "{name} should be vacuous at zero floor, got {}",
            bound.value
        );
        assert!(!bound.conditions_hold, "{name} conditions should fail");
    }

    // The same degeneracy through the surrogate path: floor of
    // pi_min * c * b_X * k / 32 = 0.125 is also zero.
    inputs.community_sizes = None;
    assert_eq!(inputs.pi_floor(), 0);
    let report = inputs.report(None, None);
    let bound = report.bound("edge-probability-deviation").unwrap();
    assert!(bound.value.is_infinite());
    assert!(!bound.conditions_hold);
}

#[test]
fn randomized_constants_match_an_independent_floor_recomputation() {
    for trial in 0..50u64 {
        let u = |j: u64| rng::unit_from_key(&[0xF100u64, trial, j]);
        let constants = Constants {
            c: 0.1 + 0.9 * u(0),
            t: 0.5 + u(1),
            b_x: 0.2 + 0.8 * u(2),
            ubar_x: 1.0 + u(3),
            delta: 0.2 + 0.8 * u(4),
            l_b: 0.2 * u(5),
            l_b_base: 0.2 * u(5),
            l_pi: 0.2 * u(6),
            pi_min: 0.1 + 0.4 * u(7),
        };
        let n = 500 + (u(8) * 4000.0) as usize;
        let sizes = vec![n / 3, n / 3, n - 2 * (n / 3)];
        let inputs = BoundInputs {
            n,
            k: 10 + (u(9) * 400.0) as usize,
            groups: 3,
            dim: 1,
            tau: 0.0,
            delta: 0.1,
            rho: 1.0,
            constants,
            community_sizes: Some(sizes.clone()),
            b_max: 0.5,
            sigma_g: 0.3,
        };
        let floors = inputs.floor_group_size();
        for (h, &s) in sizes.iter().enumerate() {
            let expected = (inputs.constants.c / 16.0
                * (s as f64 / n as f64)
                * (inputs.constants.b_x / inputs.constants.ubar_x)
                * inputs.k as f64)
                .floor() as u64;
            assert_eq!(floors.per_group[h], expected, "trial {trial} community {h}");
        }
        assert_eq!(floors.minimum, *floors.per_group.iter().min().unwrap());
        let expected_pi = (inputs.constants.pi_min
            * inputs.constants.c
            * inputs.constants.b_x
            * inputs.k as f64
            / (32.0 * inputs.constants.ubar_x))
            .floor() as u64;
        assert_eq!(inputs.pi_floor(), expected_pi, "trial {trial} pi floor");
    }
}

// ---------------------------------------------------------------------------
// Spectral-deviation bound
// ---------------------------------------------------------------------------

#[test]
fn conditional_bound_matches_the_scalar_arithmetic_example() {
    let inputs = BoundInputs {
        n: 1000,
        k: 100,
        groups: 2,
        dim: 1,
        tau: 0.0,
        delta: 0.1,
        rho: 1.0,
        constants: unit_constants(),
        community_sizes: None,
        b_max: 0.5,
        sigma_g: 0.3,
    };
    let bound = inputs.laplacian_bound_conditional(50.0, None);
    // Pure variance term at l_B = 0: 4 sqrt(3 ln(8k/delta) / d_min).
    let expected = 4.0 * (3.0 * (8.0 * 100.0 / 0.1f64).ln() / 50.0).sqrt();
    close(bound.value, expected, 1e-14, "conditional laplacian bound");
    assert!((expected - 2.937).abs() < 1e-3);
}

#[test]
fn zero_lipschitz_constant_removes_the_bias_term_entirely() {
    let mut constants = scenario_constants();
    constants.l_b = 0.0;
    constants.l_b_base = 0.0;
    let inputs = BoundInputs {
        constants,
        ..scenario_inputs(0.7, Some(vec![2100, 1900]))
    };
    let bound = inputs.laplacian_bound_conditional(50.0, None);
    let expected = 4.0 * (3.0 * (8.0 * 252.0 / 0.1f64).ln() / 50.7).sqrt();
    close(bound.value, expected, 1e-14, "pure variance term");
}

#[test]
fn bound_decreases_to_zero_as_the_minimum_degree_grows() {
    let inputs = BoundInputs {
        n: 1000,
        k: 100,
        groups: 2,
        dim: 1,
        tau: 0.0,
        delta: 0.1,
        rho: 1.0,
        constants: unit_constants(),
        community_sizes: None,
        b_max: 0.5,
        sigma_g: 0.3,
    };
    let mut previous = f64::INFINITY;
    let mut d_min = 10.0;
    while d_min <= 1e12 {
        let value = inputs.laplacian_bound_conditional(d_min, None).value;
        assert!(value < previous, "bound must fall as d_min grows");
        previous = value;
        d_min *= 100.0;
    }
    assert!(previous < 1e-4, "limit should approach zero, got {previous}");
}

#[test]
fn integrated_bound_dominates_the_conditional_bound_at_the_degree_floor() {
    // With d_min at least the degree-floor surrogate, the integrated bound
    // (smaller denominator, larger log argument) can only be larger.
    for trial in 0..20u64 {
        let u = rng::unit_from_key(&[0xD0117u64, trial]);
        let inputs = scenario_inputs(0.4 * u, Some(vec![2100, 1900]));
        let floors = inputs.floor_group_size();
        let surrogate = inputs.constants.delta * floors.minimum as f64;
        let d_min = surrogate * (1.0 + u);
        let conditional = inputs.laplacian_bound_conditional(d_min, None).value;
        let integrated = inputs.laplacian_bound().value;
        assert!(
            integrated >= conditional - 1e-12,
            "trial {trial}: integrated {integrated} < conditional {conditional}"
        );
    }
}

// ---------------------------------------------------------------------------
// Singular-value lower bound
// ---------------------------------------------------------------------------

#[test]
fn diagonal_edge_matrix_gives_the_half_singular_ratio() {
    let p = 0.4;
    let inputs = BoundInputs {
        n: 1000,
        k: 64,
        groups: 2,
        dim: 1,
        tau: 0.0,
        delta: 0.1,
        rho: 1.0,
        constants: unit_constants(),
        community_sizes: None,
        b_max: p,
        sigma_g: p,
    };
    // sigma_G(pI) = p, n-floor = k/2: p (k/2) / (p k) = 1/2 exactly.
    let bound = inputs.singular_value_lower(32);
    assert_eq!(bound.value, 0.5);
    assert!(bound.conditions_hold);
}

#[test]
fn rank_deficient_edge_matrix_yields_zero_flagged() {
    let inputs = BoundInputs {
        sigma_g: 0.0,
        ..scenario_inputs(0.0, None)
    };
    let bound = inputs.singular_value_lower(10);
    assert_eq!(bound.value, 0.0);
    assert!(!bound.conditions_hold);
}

#[test]
fn singular_value_bound_undershoots_the_population_factorization() {
    // The closed-form lower bound must never exceed the G-th singular value
    // of the population operator it bounds, computed exactly from the
    // factorization.
    let k = 100;
    let mut labels = vec![0usize; 60];
    labels.extend(vec![1usize; 40]);
    for trial in 0..20u64 {
        let u = |j: u64| rng::unit_from_key(&[0x51CAu64, trial, j]);
        let b = Array2::from_shape_vec(
            (2, 2),
            vec![
                0.1 + 0.8 * u(0),
                0.1 + 0.8 * u(1),
                0.1 + 0.8 * u(2),
                0.1 + 0.8 * u(3),
            ],
        )
        .unwrap();
        let tau = if trial % 2 == 0 { 0.0 } else { 1.3 };
        let spectrum = linalg::singular_values(&b).unwrap();
        let sigma_g = spectrum[spectrum.len() - 1];
        if sigma_g < 0.05 {
            continue;
        }
        let b_max = b.iter().cloned().fold(0.0f64, f64::max);
        let inputs = BoundInputs {
            n: 1000,
            k,
            groups: 2,
            dim: 1,
            tau,
            delta: 0.1,
            rho: 1.0,
            constants: unit_constants(),
            community_sizes: None,
            b_max,
            sigma_g,
        };
        let bound = inputs.singular_value_lower(40);
        let factorization = population_factorization(&b, &labels, &labels, tau).unwrap();
        let lambda_g = factorization.singular_values[1];
        assert!(
            bound.value <= lambda_g + 1e-9,
            "trial {trial}: bound {} exceeds population value {lambda_g}",
            bound.value
        );
    }
}

// ---------------------------------------------------------------------------
// Misclustering bound
// ---------------------------------------------------------------------------

#[test]
fn noiseless_limit_drives_the_misclustering_bound_to_zero() {
    // As the neighbourhood grows with everything else proportional, the
    // deviation term vanishes while the propagation prefactor stabilizes.
    let mut previous = f64::INFINITY;
    for exponent in [9u32, 12, 15] {
        let k = 10usize.pow(exponent);
        let n = 2 * k;
        let inputs = BoundInputs {
            n,
            k,
            groups: 2,
            dim: 1,
            tau: 0.0,
            delta: 0.1,
            rho: 1.0,
            constants: unit_constants(),
            community_sizes: Some(vec![n / 2, n / 2]),
            b_max: 0.5,
            sigma_g: 0.5,
        };
        let value = inputs.misclustering_bound().value;
        assert!(value < previous, "bound must shrink along the limit");
        previous = value;
    }
    assert!(previous < 1e-3, "limit should approach zero, got {previous}");
}

#[test]
fn failed_separation_constraint_is_flagged_but_still_reported() {
    // A nearly rank-deficient query matrix makes the separation threshold
    // tiny; the constraint fails, yet the value stays a finite number equal
    // to its formula.
    let inputs = BoundInputs {
        sigma_g: 1e-9,
        ..scenario_inputs(1.5, Some(vec![2100, 1900]))
    };
    let bound = inputs.misclustering_bound();
    assert!(!bound.conditions_hold);
    assert!(bound.value.is_finite());
    assert!(bound.value >= 0.0);
    let constraint = bound
        .conditions
        .iter()
        .find(|c| c.name.contains("separation"))
        .unwrap();
    assert!(!constraint.satisfied);
    assert!(constraint.lhs >= constraint.rhs);

    // The standalone constraint entries report the deviation side as value.
    let entry = inputs.clustering_constraint_deterministic();
    let mirror = Mirror::of(&inputs);
    let expected = mirror.dev(
        8.0 * 252.0 / 0.1,
        mirror.gap * mirror.min_floor() + mirror.tau,
    );
    close(entry.value, expected, 1e-12, "constraint LHS as value");
    assert!(!entry.conditions_hold);
}

// ---------------------------------------------------------------------------
// Full-report dual coding
// ---------------------------------------------------------------------------

#[test]
fn full_report_matches_a_dual_coded_evaluation() {
    let cases: Vec<(BoundInputs, Option<f64>, Option<f64>)> = vec![
        (scenario_inputs(0.0, Some(vec![2100, 1900])), None, None),
        (
            scenario_inputs(1.5, Some(vec![2100, 1900])),
            Some(37.5),
            Some(0.1),
        ),
        (scenario_inputs(0.0, None), None, None),
        (scenario_inputs(1.5, None), Some(37.5), None),
    ];
    for (case, (inputs, d_min, sup_radius)) in cases.into_iter().enumerate() {
        let report = inputs.report(d_min, sup_radius);
        let names: Vec<&str> = report.bounds.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, BOUND_NAMES.to_vec(), "report order is stable");

        let mirror = Mirror::of(&inputs);
        for (name, expected) in mirror.expected_values(d_min) {
            let bound = report.bound(name).unwrap();
            close(
                bound.value,
                expected,
                1e-12,
                &format!("case {case}, bound {name}"),
            );
            assert_eq!(
                bound.conditions_hold,
                bound.conditions.iter().all(|c| c.satisfied),
                "case {case}, bound {name}: flag must be the conjunction"
            );
        }
        assert_eq!(report.pi_floor as f64, mirror.pi_floor());
        assert_eq!(report.group_floors.substituted, inputs.community_sizes.is_none());
    }
}

#[test]
fn report_notes_describe_the_substitutions_made() {
    let surrogate = scenario_inputs(0.0, None).report(None, None);
    assert_eq!(surrogate.notes.len(), 3);
    assert!(surrogate.notes[0].contains("degree-floor surrogate"));
    assert!(surrogate.notes[1].contains("assignment-probability surrogate"));

    let measured =
        scenario_inputs(0.0, Some(vec![2100, 1900])).report(Some(30.0), Some(0.1));
    assert_eq!(measured.notes.len(), 1);
    assert!(measured.notes[0].contains("both strata"));
}

#[test]
fn report_csv_has_one_row_per_bound() {
    let report = scenario_inputs(1.5, Some(vec![2100, 1900])).report(None, None);
    let csv = report.to_csv();
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines[0], "bound,value,conditions_hold,failed_conditions");
    assert_eq!(lines.len(), 1 + BOUND_NAMES.len());
    for (line, name) in lines[1..].iter().zip(BOUND_NAMES) {
        assert!(line.starts_with(&format!("{name},")), "row for {name}");
    }
}

#[test]
fn report_with_vacuous_bounds_survives_a_json_round_trip() {
    let inputs = BoundInputs {
        k: 8,
        ..scenario_inputs(0.0, Some(vec![500, 500]))
    };
    let report = inputs.report(None, None);
    assert!(report.bounds.iter().any(|b| b.value.is_infinite()));
    let text = serde_json::to_string(&report).unwrap();
    let back: covariate_sbm::bounds::BoundReport = serde_json::from_str(&text).unwrap();
    for (a, b) in report.bounds.iter().zip(back.bounds.iter()) {
        assert_eq!(a.name, b.name);
        assert!(
            a.value == b.value || (a.value.is_infinite() && b.value.is_infinite()),
            "{}: {} vs {}",
            a.name,
            a.value,
            b.value
        );
        assert_eq!(a.conditions_hold, b.conditions_hold);
    }
}

// ---------------------------------------------------------------------------
// Estimator-bound structure
// ---------------------------------------------------------------------------

#[test]
fn community_probability_bound_reduces_to_its_sampling_tail_term() {
    // Kill the oracle bias (l_pi = 0) and the clustering propagation
    // (infinite spectral gap): only the covariate-sampling tail remains.
    let mut constants = scenario_constants();
    constants.l_pi = 0.0;
    let inputs = BoundInputs {
        constants,
        sigma_g: f64::INFINITY,
        ..scenario_inputs(1.0, None)
    };
    let bound = inputs.community_probability_bound();
    let expected =
        2.0 * ((1.0 * 4000.0f64.ln() + (6.0 / 0.1f64).ln()) / 252.0).sqrt();
    close(bound.value, expected, 1e-14, "isolated sampling tail");
}

#[test]
fn doubling_k_shrinks_the_sampling_tail_by_the_square_root_of_two() {
    let mut constants = scenario_constants();
    constants.l_pi = 0.0;
    let tail = |k: usize| {
        let inputs = BoundInputs {
            constants: constants.clone(),
            sigma_g: f64::INFINITY,
            k,
            ..scenario_inputs(1.0, None)
        };
        inputs.community_probability_bound().value
    };
    let ratio = tail(504) / tail(252);
    assert!(
        (ratio - 0.5f64.sqrt()).abs() < 1e-12,
        "tail ratio {ratio} should be 1/sqrt(2)"
    );
}

#[test]
fn every_bound_value_is_nonincreasing_in_the_failure_probability() {
    let deltas = [0.01, 0.05, 0.1, 0.2, 0.4];
    let mut previous: Option<Vec<f64>> = None;
    for &delta in &deltas {
        let inputs = BoundInputs {
            delta,
            ..scenario_inputs(1.5, Some(vec![2100, 1900]))
        };
        let report = inputs.report(Some(50.0), Some(0.05));
        let values: Vec<f64> = report.bounds.iter().map(|b| b.value).collect();
        if let Some(prev) = previous {
            for ((name, &now), &before) in BOUND_NAMES.iter().zip(&values).zip(&prev) {
                assert!(
                    now <= before + 1e-12,
                    "{name} grew from {before} to {now} as delta rose to {delta}"
                );
            }
        }
        previous = Some(values);
    }
}

#[test]
fn conditions_are_pure_predicates_of_their_operands() {
    assert!(Condition::ge("x", 1.0, 1.0).satisfied);
    assert!(!Condition::gt("x", 1.0, 1.0).satisfied);
    assert!(Condition::le("x", 1.0, 1.0).satisfied);
    assert!(!Condition::lt("x", 1.0, 1.0).satisfied);
    assert!(Condition::lt("x", 0.999, 1.0).satisfied);
    for bad in [f64::NAN, -f64::NAN] {
        assert!(!Condition::ge("x", bad, 1.0).satisfied);
        assert!(!Condition::le("x", bad, 1.0).satisfied);
        assert!(!Condition::lt("x", 1.0, bad).satisfied);
        assert!(!Condition::gt("x", 1.0, bad).satisfied);
    }
    let c = Condition::ge("stored verbatim", 2.5, 1.25);
    assert_eq!((c.lhs, c.rhs), (2.5, 1.25));
}

// ---------------------------------------------------------------------------
// Suggested neighbourhood size
// ---------------------------------------------------------------------------

#[test]
fn suggested_neighbourhood_size_follows_the_two_thirds_rule() {
    let suggestion = optimal_k(1000, 1.0, 1);
    assert_eq!(suggestion.k, 100);
    assert_eq!(suggestion.rate_exponent, -(1.0 / 3.0));
    assert!((suggestion.rate - 0.1).abs() < 1e-12);
}

#[test]
fn halving_the_density_scale_grows_the_suggestion_by_the_stated_factor() {
    for (dim, n) in [(1usize, 100_000usize), (2, 100_000)] {
        let full = optimal_k(n, 1.0, dim);
        let half = optimal_k(n, 0.5, dim);
        let ratio = half.k as f64 / full.k as f64;
        // Halving rho multiplies N^2/rho^d by 2^d, so k grows by 2^(d/(d+2));
        // at d = 1 this is the stated 2^(1/3).
        let expected = 2.0f64.powf(dim as f64 / (dim as f64 + 2.0));
        assert!(
            (ratio - expected).abs() < 1e-3,
            "d={dim}: ratio {ratio} vs {expected}"
        );
    }
}

#[test]
fn zero_density_scale_degenerates_without_nan() {
    let suggestion = optimal_k(500, 0.0, 1);
    assert_eq!(suggestion.k, 500);
    assert!(suggestion.rate.is_infinite());
    assert!(!suggestion.rate.is_nan());
}

#[test]
fn rate_exponent_is_constant_across_sample_sizes() {
    for dim in 1usize..=3 {
        for n in [500usize, 2000, 8000, 32000] {
            let suggestion = optimal_k(n, 1.0, dim);
            assert_eq!(suggestion.rate_exponent, -(1.0 / (dim as f64 + 2.0)));
            let expected_rate = (n as f64).powf(suggestion.rate_exponent);
            close(suggestion.rate, expected_rate, 1e-12, "implied rate");
        }
    }
}

// ---------------------------------------------------------------------------
// Invariant sweep
// ---------------------------------------------------------------------------

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Report invariants: values are nonnegative and never NaN, flags are
        /// conjunctions, and every report serializes.
        #[test]
        fn report_values_are_nonnegative_and_never_nan(
            n in 200usize..5000,
            k in 1usize..400,
            groups in 1usize..4,
            tau in 0.0f64..5.0,
            delta in 0.001f64..0.5,
            gap in 0.0f64..1.0,
            l_b in 0.0f64..0.5,
            sigma_g in 0.0f64..0.5,
            b_max in 0.05f64..1.0,
            with_sizes in proptest::bool::ANY,
        ) {
            let constants = Constants {
                c: 0.4,
                t: 1.0,
                b_x: 0.8,
                ubar_x: 1.1,
                delta: gap,
                l_b,
                l_b_base: l_b,
                l_pi: 0.1,
                pi_min: 0.3,
            };
            let sizes = with_sizes.then(|| {
                let mut sizes = vec![n / groups; groups];
                sizes[0] = n - (groups - 1) * (n / groups);
                sizes
            });
            let inputs = BoundInputs {
                n,
                k: k.min(n),
                groups,
                dim: 1,
                tau,
                delta,
                rho: 1.0,
                constants,
                community_sizes: sizes,
                b_max,
                sigma_g,
            };
            let report = inputs.report(None, None);
            prop_assert_eq!(report.bounds.len(), BOUND_NAMES.len());
            for bound in &report.bounds {
                prop_assert!(!bound.value.is_nan(), "{} is NaN", bound.name);
                prop_assert!(bound.value >= 0.0, "{} negative", bound.name);
                prop_assert_eq!(
                    bound.conditions_hold,
                    bound.conditions.iter().all(|c| c.satisfied)
                );
                for condition in &bound.conditions {
                    prop_assert!(!condition.lhs.is_nan() || !condition.satisfied);
                }
            }
            serde_json::to_string(&report).unwrap();
        }
    }
}
