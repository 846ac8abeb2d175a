//! Fixed-point polish of a near-solution.
//!
//! The Euler-Lagrange system can be written `u_j = E_{w_j} * N_j(u)` where
//! `E_w(x) = exp(-sqrt(w) |x|) / (2 sqrt(w))` is the Green's function of
//! `-d^2/dx^2 + w` and `N_j(u) = (sum_k a_jk |u_k|^p) |u_j|^(p-2) u_j`. On the
//! periodic grid the convolution is the Fourier multiplier `1 / (k^2 + w)`.

use num_complex::Complex64;

use super::{finish, multipliers_from_gradient, project, GroundState, SolveError};
use crate::model::{energy, energy_gradient, nonlinear_rates, residual_from_gradient, CouplingModel, MassTriple, ModelError, State};
use crate::spectral::Field;

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub max_sweeps: usize,
    /// Stop once the residual is below this.
    pub residual_tol: f64,
    /// Consecutive residual increases tolerated before declaring divergence.
    pub max_increases: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { max_sweeps: 500, residual_tol: 1e-12, max_increases: 5 }
    }
}

pub fn refine_fixed_point(
    state: &State,
    model: &CouplingModel,
    masses: &MassTriple,
) -> Result<GroundState, SolveError> {
    refine_fixed_point_with(state, model, masses, &RefineOptions::default())
}

/// Iterate `u_j <- normalize((k^2 + w_j)^-1 N_j(u))` with `w_j` re-extracted
/// every sweep. Returns the iterate with the smallest residual seen.
///
/// Fails with [`SolveError::Diverged`] when the residual rises for
/// `max_increases` consecutive sweeps to more than twice the best value seen,
/// or a multiplier turns non-positive. Rises that stay within that factor
/// end the iteration normally.
pub fn refine_fixed_point_with(
    state: &State,
    model: &CouplingModel,
    masses: &MassTriple,
    opts: &RefineOptions,
) -> Result<GroundState, SolveError> {
    let grid = state.grid().clone();
    for j in 0..3 {
        if masses.is_active(j) != (state.component(j).mass() > 0.0) {
            return Err(SolveError::Precondition(format!(
                "component {} support does not match its target mass",
                j + 1
            )));
        }
    }
    let mut u = state.clone();
    project(&mut u, masses)?;

    let mut best: Option<(State, f64)> = None;
    let mut previous = f64::INFINITY;
    let mut increases = 0;
    let mut sweeps = 0;
    loop {
        let gradient = energy_gradient(&u, model);
        let omega = multipliers_from_gradient(&u, &gradient);
        let residual = residual_from_gradient(&u, &gradient, &omega).ok_or(ModelError::ZeroTotalMass)?;
        if best.as_ref().is_none_or(|(_, r)| residual < *r) {
            best = Some((u.clone(), residual));
        }
        if residual <= opts.residual_tol || sweeps == opts.max_sweeps {
            break;
        }
        if residual > previous {
            increases += 1;
            if increases >= opts.max_increases {
                let floor = best.as_ref().map_or(f64::INFINITY, |(_, r)| *r);
                if residual <= 2.0 * floor {
                    // Wandering at the round-off floor, not moving away.
                    break;
                }
                return Err(SolveError::Diverged {
                    sweeps,
                    reason: format!("residual rose for {increases} consecutive sweeps to {residual:.3e}"),
                });
            }
        } else {
            increases = 0;
        }
        previous = residual;

        if let Some(j) = (0..3).find(|&j| masses.is_active(j) && omega.omega[j] <= 0.0) {
            return Err(SolveError::Diverged {
                sweeps,
                reason: format!("multiplier of component {} is {:.3e}", j + 1, omega.omega[j]),
            });
        }
        let rates = nonlinear_rates(&u, model);
        u = u.map(|j, f| {
            if !masses.is_active(j) {
                return f.clone();
            }
            let source: Vec<Complex64> = f.values().iter().zip(&rates[j]).map(|(z, r)| z * r).collect();
            let w = omega.omega[j];
            let values = grid.apply_multiplier(&source, |m| Complex64::new(1.0 / (grid.laplace_symbol(m) + w), 0.0));
            Field::new(&grid, values).unwrap_or_else(|_| f.clone())
        });
        project(&mut u, masses)?;
        sweeps += 1;
    }

    let (profile, _) = best.expect("at least one sweep evaluated");
    let gradient = energy_gradient(&profile, model);
    let omega = multipliers_from_gradient(&profile, &gradient);
    let residual = residual_from_gradient(&profile, &gradient, &omega).ok_or(ModelError::ZeroTotalMass)?;
    let lambda = energy(&profile, model);
    Ok(finish(profile, omega, lambda, residual, sweeps, masses, vec![lambda]))
}
