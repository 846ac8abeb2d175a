//! Built-in oracle checks behind `cnls validate`.

use cnls_core::ground_state::{minimize, SolverConfig};
use cnls_core::model::{
    el_residual, energy, energy_gradient, equal_coupling_state, sech_profile, single_component_frequency,
    single_component_lambda, two_component_profile, CouplingModel, MassTriple, Multipliers, State,
};
use cnls_core::spectral::{make_grid, Field, Grid};
use cnls_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

/// Grid length on which a profile of frequency `omega` has decayed to
/// round-off at the box edge.
pub fn oracle_length(omega: f64) -> f64 {
    80.0 / omega.sqrt()
}

/// Closed-form residuals, the single-component minimum for `r = 1, 2, 4`,
/// and gradient-versus-finite-difference on 20 random pairs.
pub fn oracle_checks() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.extend(closed_form_residuals());
    for r in [1.0, 2.0, 4.0] {
        out.extend(single_component_minimum(r));
    }
    out.push(gradient_check(20, 7));
    out
}

fn closed_form_residuals() -> Vec<CheckOutcome> {
    let g = make_grid(1024, 80.0).expect("valid grid");
    let uniform = CouplingModel::uniform(1.0, 2.0).expect("valid model");
    let triple = equal_coupling_state(1.0, 1.0, 1.0, 2.0, &g).expect("valid profile");
    let triple_res = el_residual(&triple, &Multipliers { omega: [1.0; 3] }, &uniform).unwrap_or(f64::INFINITY);

    let single = State::new(sech_profile(1.0, 1.0, 2.0, &g).expect("valid profile"), Field::zeros(&g), Field::zeros(&g))
        .expect("finite state");
    let single_res = el_residual(&single, &Multipliers { omega: [1.0, 0.0, 0.0] }, &uniform).unwrap_or(f64::INFINITY);

    let beta = 0.5;
    let pair_model = CouplingModel::new([[1.0, beta, 1.0], [beta, 1.0, 1.0], [1.0, 1.0, 1.0]], 2.0).expect("valid model");
    let (u, v) = two_component_profile(1.0, beta, &g).expect("valid profile");
    let pair = State::new(u, v, Field::zeros(&g)).expect("finite state");
    let pair_res = el_residual(&pair, &Multipliers { omega: [1.0, 1.0, 0.0] }, &pair_model).unwrap_or(f64::INFINITY);

    vec![
        CheckOutcome::new("residual of single sech profile", single_res, 1e-9),
        CheckOutcome::new("residual of equal-coupling triple", triple_res, 1e-9),
        CheckOutcome::new("residual of two-component family (beta = 0.5)", pair_res, 1e-9),
    ]
}

fn single_component_minimum(r: f64) -> Vec<CheckOutcome> {
    let omega = single_component_frequency(r, 1.0);
    let g = make_grid(1024, oracle_length(omega)).expect("valid grid");
    let model = CouplingModel::uniform(1.0, 2.0).expect("valid model");
    let masses = MassTriple::new(r, 0.0, 0.0).expect("valid masses");
    let exact = single_component_lambda(r, 1.0);
    match minimize(&model, &masses, &g, &SolverConfig::default()) {
        Ok(gs) => {
            let profile = sech_profile(omega, 1.0, 2.0, &g).expect("valid profile");
            let aligned = gs.profile.component(0).modulus().to_field();
            vec![
                CheckOutcome::new(format!("lambda({r}, 0, 0) relative error"), ((gs.lambda - exact) / exact).abs(), 1e-5),
                CheckOutcome::new(format!("omega at r = {r}"), (gs.multipliers.omega[0] - omega).abs(), 1e-6),
                CheckOutcome::new(
                    format!("profile at r = {r} (max norm)"),
                    aligned.max_distance(&profile).unwrap_or(f64::INFINITY),
                    1e-5,
                ),
            ]
        }
        Err(_) => vec![CheckOutcome::new(format!("lambda({r}, 0, 0) solve"), f64::INFINITY, 1e-5)],
    }
}

/// Smooth random state: a Gaussian plus a modulated sech per component.
pub fn random_state(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> State {
    let mut component = || {
        let (c1, c2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (w1, w2) = (rng.random_range(0.6..1.5), rng.random_range(0.6..1.5));
        let (a1, a2) = (rng.random_range(0.3..1.2), rng.random_range(0.3..1.2));
        let (k, phase) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.0));
        Field::from_fn(g, move |x: f64| {
            let gauss = a1 * (-(x - c1).powi(2) * w1).exp();
            let sech = a2 / (w2 * (x - c2)).cosh();
            Complex64::new(gauss, 0.0) + Complex64::from_polar(sech, k * x + phase)
        })
    };
    let (a, b, c) = (component(), component(), component());
    State::new(a, b, c).expect("finite state")
}

/// Largest relative gap between the central difference of the energy and
/// `2 Re <G, d>` over `pairs` random `(state, direction)` pairs, half of them
/// at `p = 2` and half at `p = 2.5`.
pub fn gradient_check(pairs: usize, seed: u64) -> CheckOutcome {
    let g = make_grid(256, 30.0).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let p = if i % 2 == 0 { 2.0 } else { 2.5 };
        let model = CouplingModel::new([[1.0, 0.7, 1.3], [0.7, 0.9, 0.5], [1.3, 0.5, 1.6]], p).expect("valid model");
        let s = random_state(&g, &mut rng);
        let d = random_state(&g, &mut rng);
        let shifted = |sign: f64| {
            s.map(|j, f| {
                let values = f.values().iter().zip(d.component(j).values()).map(|(a, b)| a + b * (sign * step)).collect();
                Field::new(&g, values).expect("finite field")
            })
        };
        let fd = (energy(&shifted(1.0), &model) - energy(&shifted(-1.0), &model)) / (2.0 * step);
        let grad = energy_gradient(&s, &model);
        let analytic: f64 = (0..3)
            .map(|j| {
                let pair: Complex64 =
                    grad.component(j).values().iter().zip(d.component(j).values()).map(|(a, b)| a * b.conj()).sum();
                2.0 * pair.re * g.spacing()
            })
            .sum();
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-3));
    }
    CheckOutcome::new(format!("gradient vs finite differences ({pairs} pairs)"), worst, 1e-6)
}
