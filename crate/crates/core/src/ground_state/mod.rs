//! Constrained energy minimization `lambda(r, s, t) = inf { H(u) : Q(u_1) = r, Q(u_2) = s, Q(u_3) = t }`.
//!
//! The three mass constraints act on disjoint variables, so the exact
//! projection onto the constraint set is an independent rescaling of each
//! component. The minimizer is a Sobolev-preconditioned projected gradient
//! flow (normalized imaginary-time method) with periodic symmetric
//! rearrangement; [`refine_fixed_point`] polishes a result through the
//! resolvent form of the Euler-Lagrange system.

mod checks;
mod concentration;
mod refine;
mod subadditivity;

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::model::{
    energy, energy_gradient, residual_from_gradient, CouplingModel, MassTriple, ModelError, Multipliers, State,
};
use crate::spectral::{rearrange, Field, Grid};
use crate::tolerances::ZERO_MASS;

pub use checks::{phase_deviation, StructuralChecks};
pub use concentration::{concentration, ConcentrationProfile};
pub use refine::{refine_fixed_point, refine_fixed_point_with, RefineOptions};
pub use subadditivity::{subadditivity_check, MassSplit, SubadditivityReport, SubadditivityVerdict};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64, last: Box<GroundState> },
    #[error("step size collapsed to {tau:.3e} at iteration {iteration}")]
    StepCollapse { iteration: usize, tau: f64 },
    #[error("fixed-point iteration diverged after {sweeps} sweeps: {reason}")]
    Diverged { sweeps: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Initial guess for [`minimize`].
#[derive(Debug, Clone)]
pub enum Init {
    /// Centered Gaussians of width `L / 20`.
    GaussianBumps,
    /// Centered `sech(x)` profiles.
    SechGuess,
    /// Caller-provided state on the solve grid.
    Supplied(State),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Gradient step (dimensionless; the step is preconditioned by `(k^2 + w)^-1`).
    pub tau: f64,
    pub max_iters: usize,
    /// Stop once the Euler-Lagrange residual is below this ...
    pub residual_tol: f64,
    /// ... and the last energy decrease is below this.
    pub energy_tol: f64,
    /// Replace each component by the rearrangement of its modulus every this many iterations.
    pub rearrange_every: Option<usize>,
    pub seed: u64,
    /// Relative amplitude of seeded noise added to the initial guess.
    pub noise: f64,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            max_iters: 20_000,
            residual_tol: 1e-9,
            energy_tol: 1e-12,
            rearrange_every: Some(25),
            seed: 0,
            noise: 0.0,
            init: Init::GaussianBumps,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SolveError::Precondition(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.residual_tol > 0.0 && self.energy_tol > 0.0) {
            return Err(SolveError::Precondition("tolerances must be positive".into()));
        }
        if self.rearrange_every == Some(0) {
            return Err(SolveError::Precondition("rearrange_every must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(SolveError::Precondition("noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// A computed minimizer together with its multipliers and diagnostics.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub profile: State,
    pub multipliers: Multipliers,
    /// Attained energy, the numerical value of `lambda(r, s, t)`.
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub masses_achieved: [f64; 3],
    pub targets: MassTriple,
    /// Energy after each accepted iteration (the initial guess first).
    pub energy_history: Vec<f64>,
}

impl GroundState {
    pub fn grid(&self) -> &Arc<Grid> {
        self.profile.grid()
    }

    /// Structural sign and shape checks of a converged minimizer.
    pub fn checks(&self, model: &CouplingModel, support_floor: f64) -> StructuralChecks {
        StructuralChecks::evaluate(self, model, support_floor)
    }
}

/// Rescale each active component to its target mass; inactive ones are zeroed.
pub(crate) fn project(state: &mut State, targets: &MassTriple) -> Result<(), SolveError> {
    let t = targets.as_array();
    for (j, &target) in t.iter().enumerate() {
        let f = state.component_mut(j);
        if target <= 0.0 {
            f.values_mut().iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            continue;
        }
        let q = f.mass();
        if !(q > ZERO_MASS && q.is_finite()) {
            return Err(SolveError::Precondition(format!("component {} cannot be normalized (mass {q:e})", j + 1)));
        }
        let scale = (target / q).sqrt();
        f.values_mut().iter_mut().for_each(|z| *z *= scale);
    }
    Ok(())
}

fn initial_state(grid: &Arc<Grid>, targets: &MassTriple, cfg: &SolverConfig) -> Result<State, SolveError> {
    let mut state = match &cfg.init {
        Init::GaussianBumps => {
            let w = grid.length() / 20.0;
            let f = Field::from_real(grid, |x| (-0.5 * (x / w).powi(2)).exp());
            State::new(f.clone(), f.clone(), f)?
        }
        Init::SechGuess => {
            let f = Field::from_real(grid, |x| 1.0 / x.cosh());
            State::new(f.clone(), f.clone(), f)?
        }
        Init::Supplied(s) => {
            if **s.grid() != **grid {
                return Err(SolveError::Precondition("supplied initial state lives on another grid".into()));
            }
            s.clone()
        }
    };
    if cfg.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for j in 0..3 {
            for z in state.component_mut(j).values_mut() {
                let eta: f64 = StandardNormal.sample(&mut rng);
                *z *= 1.0 + cfg.noise * eta;
            }
        }
    }
    project(&mut state, targets)?;
    Ok(state)
}

/// `w_j = -Re<G_j, u_j> / Q(u_j)`, the same quantity as the integrated
/// Euler-Lagrange identity, reusing an already computed gradient.
pub(crate) fn multipliers_from_gradient(state: &State, gradient: &State) -> Multipliers {
    let grid = state.grid();
    let omega = [0, 1, 2].map(|j| {
        let u = state.component(j).values();
        let q = grid.norm_sq(u);
        if q <= ZERO_MASS {
            return 0.0;
        }
        let pair: f64 = gradient.component(j).values().iter().zip(u).map(|(g, z)| (g * z.conj()).re).sum();
        -pair * grid.spacing() / q
    });
    Multipliers { omega }
}

/// Preconditioner shift floor; keeps `(k^2 + shift)^-1` bounded while the
/// multiplier estimate is still negative.
const MIN_SHIFT: f64 = 1e-2;
const MIN_TAU_FACTOR: f64 = 1e-6;

/// Compute a minimizer of the energy at prescribed masses.
///
/// Each iteration takes the projected gradient `G_j + w_j u_j` (the
/// Euler-Lagrange residual), preconditions it with `(k^2 + w_j)^-1`, steps by
/// `tau` and renormalizes every active component. A step that raises the
/// energy is retried with half the step. Every `rearrange_every` iterations
/// each component is replaced by the symmetric decreasing rearrangement of
/// its modulus if that does not raise the energy.
pub fn minimize(
    model: &CouplingModel,
    masses: &MassTriple,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundState, SolveError> {
    cfg.validate()?;
    let mut state = initial_state(grid, masses, cfg)?;
    let mut e = energy(&state, model);
    let mut history = vec![e];
    let mut last_decrease = f64::INFINITY;
    let mut tau = cfg.tau;
    let slack = |e: f64| 1e-14 * e.abs().max(1.0);

    let mut residual = f64::INFINITY;
    let mut omega = Multipliers { omega: [0.0; 3] };
    for iteration in 0..=cfg.max_iters {
        let gradient = energy_gradient(&state, model);
        omega = multipliers_from_gradient(&state, &gradient);
        residual = residual_from_gradient(&state, &gradient, &omega).ok_or(ModelError::ZeroTotalMass)?;
        if residual < cfg.residual_tol && last_decrease.abs() < cfg.energy_tol {
            return Ok(finish(state, omega, e, residual, iteration, masses, history));
        }
        if iteration == cfg.max_iters {
            break;
        }

        let direction = state.map(|j, u| {
            if !masses.is_active(j) {
                return Field::zeros(grid);
            }
            let shift = omega.omega[j].max(MIN_SHIFT);
            let r: Vec<Complex64> = gradient
                .component(j)
                .values()
                .iter()
                .zip(u.values())
                .map(|(g, z)| g + z * omega.omega[j])
                .collect();
            let values = grid.apply_multiplier(&r, |m| Complex64::new(1.0 / (grid.laplace_symbol(m) + shift), 0.0));
            Field::new(grid, values).expect("finite preconditioned residual")
        });

        let (candidate, e_new) = loop {
            let mut candidate = state.map(|j, u| {
                let values = u
                    .values()
                    .iter()
                    .zip(direction.component(j).values())
                    .map(|(z, d)| z - d * tau)
                    .collect();
                Field::new(grid, values).unwrap_or_else(|_| u.clone())
            });
            project(&mut candidate, masses)?;
            let e_new = energy(&candidate, model);
            if e_new <= e + slack(e) {
                break (candidate, e_new);
            }
            tau *= 0.5;
            if tau < cfg.tau * MIN_TAU_FACTOR {
                return Err(SolveError::StepCollapse { iteration, tau });
            }
        };
        tau = (tau * 1.5).min(cfg.tau);
        state = candidate;
        let mut e_next = e_new;

        if let Some(every) = cfg.rearrange_every {
            if (iteration + 1) % every == 0 {
                let rearranged = rearranged_state(&state)?;
                let e_r = energy(&rearranged, model);
                if e_r <= e_next {
                    state = rearranged;
                    e_next = e_r;
                }
            }
        }
        last_decrease = e - e_next;
        e = e_next;
        history.push(e);
    }

    let last = finish(state, omega, e, residual, cfg.max_iters, masses, history);
    Err(SolveError::NotConverged { iterations: cfg.max_iters, residual, last: Box::new(last) })
}

/// Componentwise symmetric decreasing rearrangement `(|u_1|*, |u_2|*, |u_3|*)`.
pub fn rearranged_state(state: &State) -> Result<State, SolveError> {
    let mut out = Vec::with_capacity(3);
    for f in state.components() {
        let r = rearrange(&f.modulus()).map_err(ModelError::from)?;
        out.push(r.to_field());
    }
    let components: [Field; 3] = out.try_into().expect("three components");
    Ok(State::from_components(components))
}

pub(crate) fn finish(
    profile: State,
    multipliers: Multipliers,
    lambda: f64,
    residual: f64,
    iterations: usize,
    targets: &MassTriple,
    energy_history: Vec<f64>,
) -> GroundState {
    let masses_achieved = profile.masses();
    GroundState { profile, multipliers, lambda, residual, iterations, masses_achieved, targets: *targets, energy_history }
}

/// Two-component problem `m(a1, a2)` for the functional with self-couplings
/// `alpha1`, `alpha2` and cross-coupling `beta`, solved as the three-component
/// problem with the third mass set to zero.
#[allow(clippy::too_many_arguments)]
pub fn two_component_min(
    alpha1: f64,
    alpha2: f64,
    beta: f64,
    a1: f64,
    a2: f64,
    p: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundState, SolveError> {
    for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2), ("beta", beta), ("a1", a1), ("a2", a2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SolveError::Precondition(format!("{name} = {v} must be positive")));
        }
    }
    // The third row/column never enters: its component is frozen at zero.
    let model = CouplingModel::new([[alpha1, beta, 1.0], [beta, alpha2, 1.0], [1.0, 1.0, 1.0]], p)?;
    minimize(&model, &MassTriple::new(a1, a2, 0.0)?, grid, cfg)
}
