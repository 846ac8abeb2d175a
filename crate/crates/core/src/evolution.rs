//! Strang split-step integration of the coupled system.
//!
//! One step of size `dt` is: half linear step `u_j^ <- exp(-i k^2 dt/2) u_j^`,
//! full nonlinear step `u_j <- exp(i dt sum_k a_kj |u_k|^p |u_j|^(p-2)) u_j`,
//! half linear step. The nonlinear substep is solved exactly because it only
//! rotates phases and therefore leaves every modulus, and hence its own
//! rotation rate, unchanged. Both substeps are L2 isometries per component.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{energy, nonlinear_rates, CouplingModel, State};
use crate::spectral::Grid;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("solution became non-finite at t = {time}")]
    BlowUp { time: f64, trace: Box<EvolutionTrace> },
    #[error("invalid evolution parameter: {0}")]
    InvalidParameter(String),
}

/// Precomputed split-step propagator for a fixed grid, model and step.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Arc<Grid>,
    model: CouplingModel,
    dt: f64,
    half_linear: Vec<Complex64>,
    nonlinear: bool,
}

impl Propagator {
    /// `dt` may be negative to integrate backwards in time.
    pub fn new(grid: &Arc<Grid>, model: &CouplingModel, dt: f64) -> Self {
        let half_linear = (0..grid.n())
            .map(|m| Complex64::from_polar(1.0, -0.5 * grid.laplace_symbol(m) * dt))
            .collect();
        Self { grid: Arc::clone(grid), model: *model, dt, half_linear, nonlinear: true }
    }

    /// Free Schrödinger flow only (all couplings switched off).
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, state: &State) -> State {
        let mut out = state.clone();
        self.step_in_place(&mut out);
        out
    }

    pub fn step_in_place(&self, state: &mut State) {
        for j in 0..3 {
            self.linear_half(state.component_mut(j).values_mut());
        }
        if self.nonlinear {
            let rates = nonlinear_rates(state, &self.model);
            for (j, rate) in rates.iter().enumerate() {
                for (z, r) in state.component_mut(j).values_mut().iter_mut().zip(rate) {
                    *z *= Complex64::from_polar(1.0, r * self.dt);
                }
            }
        }
        for j in 0..3 {
            self.linear_half(state.component_mut(j).values_mut());
        }
    }

    fn linear_half(&self, values: &mut [Complex64]) {
        self.grid.forward(values);
        values.iter_mut().zip(&self.half_linear).for_each(|(z, e)| *z *= e);
        self.grid.inverse(values);
    }
}

/// One Strang step; see [`Propagator`] for repeated stepping.
pub fn step(state: &State, dt: f64, model: &CouplingModel) -> State {
    Propagator::new(state.grid(), model, dt).step(state)
}

/// Conservation record of a trajectory.
#[derive(Debug, Clone, Default)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `|H(t) - H(0)| / |H(0)|` (absolute when `H(0) = 0`).
    pub energy_drift: Vec<f64>,
    /// Per-component `|Q(t) - Q(0)| / Q(0)` (absolute for zero-mass components).
    pub mass_drifts: [Vec<f64>; 3],
    pub snapshots: Vec<(f64, State)>,
    /// Filled by the stability experiments at their sampling times.
    pub orbital_distance: Option<Vec<(f64, f64)>>,
    pub initial_energy: f64,
    pub initial_masses: [f64; 3],
}

impl EvolutionTrace {
    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_mass_drift(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.mass_drifts[j].iter().cloned().fold(0.0, f64::max))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn record(&mut self, t: f64, state: &State, model: &CouplingModel) -> bool {
        let rel = |now: f64, start: f64| {
            if start == 0.0 {
                (now - start).abs()
            } else {
                ((now - start) / start).abs()
            }
        };
        let e = rel(energy(state, model), self.initial_energy);
        let q = state.masses();
        self.times.push(t);
        self.energy_drift.push(e);
        for j in 0..3 {
            self.mass_drifts[j].push(rel(q[j], self.initial_masses[j]));
        }
        e.is_finite() && q.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Store a snapshot every this many steps (0 disables).
    pub snapshot_every: usize,
    /// Record drifts every this many steps (the final time is always recorded).
    pub record_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { snapshot_every: 0, record_every: 1 }
    }
}

/// Finiteness check interval for steps that are not recorded.
const BLOW_UP_CHECK_EVERY: usize = 100;

/// Integrate from `state0` to time `t_final`, recording drifts every step.
pub fn evolve(
    state0: &State,
    t_final: f64,
    dt: f64,
    model: &CouplingModel,
    snapshot_every: usize,
) -> Result<EvolutionTrace, EvolutionError> {
    let opts = EvolveOptions { snapshot_every, ..EvolveOptions::default() };
    evolve_with(state0, t_final, dt, model, &opts, |_, _, _| {}).map(|(trace, _)| trace)
}

/// Integrate with an observer called as `observer(step, t, state)` at
/// `t = 0` and after every step. Returns the trace and the final state.
///
/// The number of steps is `ceil(t_final / dt)`; the step is shrunk so that
/// the last one lands exactly on `t_final`.
pub fn evolve_with(
    state0: &State,
    t_final: f64,
    dt: f64,
    model: &CouplingModel,
    opts: &EvolveOptions,
    mut observer: impl FnMut(usize, f64, &State),
) -> Result<(EvolutionTrace, State), EvolutionError> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(EvolutionError::InvalidParameter(format!("final time {t_final} must be non-negative")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EvolutionError::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if opts.record_every == 0 {
        return Err(EvolutionError::InvalidParameter("record_every must be at least 1".into()));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let dt_eff = if steps > 0 { t_final / steps as f64 } else { dt };
    let prop = Propagator::new(state0.grid(), model, dt_eff);

    let mut trace = EvolutionTrace {
        initial_energy: energy(state0, model),
        initial_masses: state0.masses(),
        ..EvolutionTrace::default()
    };
    let mut state = state0.clone();
    trace.record(0.0, &state, model);
    if opts.snapshot_every > 0 {
        trace.snapshots.push((0.0, state.clone()));
    }
    observer(0, 0.0, &state);

    for n in 1..=steps {
        prop.step_in_place(&mut state);
        let t = n as f64 * dt_eff;
        let finite = if n % opts.record_every == 0 || n == steps {
            trace.record(t, &state, model)
        } else if n % BLOW_UP_CHECK_EVERY == 0 {
            state.is_finite()
        } else {
            true
        };
        if !finite {
            return Err(EvolutionError::BlowUp { time: t, trace: Box::new(trace) });
        }
        if opts.snapshot_every > 0 && n % opts.snapshot_every == 0 {
            trace.snapshots.push((t, state.clone()));
        }
        observer(n, t, &state);
    }
    Ok((trace, state))
}

/// `int x sum_j |u_j|^2 dx / int sum_j |u_j|^2 dx` on the unwrapped box.
pub fn center_of_mass(state: &State) -> f64 {
    let grid = state.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for (m, &x) in grid.nodes().iter().enumerate() {
        let rho: f64 = state.components().iter().map(|f| f.values()[m].norm_sqr()).sum();
        num += x * rho;
        den += rho;
    }
    num / den
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn convergence_order(dts: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = dts.iter().zip(errors).map(|(d, e)| (d.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
