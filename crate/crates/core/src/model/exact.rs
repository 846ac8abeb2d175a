//! Closed-form solitary-wave profiles used as oracles.

use std::sync::Arc;

use super::{ModelError, State};
use crate::spectral::{Field, Grid};

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Positive even solution of `-u'' + sigma u = a |u|^(2p-2) u`:
/// `(sigma p / a)^(1/(2p-2)) sech^(2/(2p-2))(sqrt(sigma) (2p-2) x / 2)`.
pub fn sech_profile(sigma: f64, a: f64, p: f64, grid: &Arc<Grid>) -> Result<Field, ModelError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("sigma = {sigma} must be positive")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("a = {a} must be positive")));
    }
    if !(2.0..3.0).contains(&p) {
        return Err(ModelError::ExponentOutOfRange(p));
    }
    let q = 2.0 * p - 2.0;
    let amp = (sigma * p / a).powf(1.0 / q);
    let rate = sigma.sqrt() * q / 2.0;
    Ok(Field::from_real(grid, |x| amp * sech(rate * x).powf(2.0 / q)))
}

/// Semi-trivial two-component solution for `p = 2`, `a11 = a22 = 1`, `a12 = beta`:
/// both components equal `sqrt(2 Omega / (1 + beta)) sech(sqrt(Omega) x)`.
pub fn two_component_profile(omega: f64, beta: f64, grid: &Arc<Grid>) -> Result<(Field, Field), ModelError> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("Omega = {omega} must be positive")));
    }
    if !(beta > -1.0 && beta.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("beta = {beta} must exceed -1")));
    }
    let amp = (2.0 * omega / (1.0 + beta)).sqrt();
    let k = omega.sqrt();
    let f = Field::from_real(grid, |x| amp * sech(k * x));
    Ok((f.clone(), f))
}

/// Equal-coupling standing wave `phi_{Omega, a+2b} (1, 1, 1)` for
/// `a_jj = diag`, `a_kj = off`.
pub fn equal_coupling_state(
    omega: f64,
    diag: f64,
    off: f64,
    p: f64,
    grid: &Arc<Grid>,
) -> Result<State, ModelError> {
    let f = sech_profile(omega, diag + 2.0 * off, p, grid)?;
    State::new(f.clone(), f.clone(), f)
}

/// `lambda(r, 0, 0) = -a^2 r^3 / 48` for `p = 2` and self-coupling `a`.
pub fn single_component_lambda(r: f64, a: f64) -> f64 {
    -a * a * r.powi(3) / 48.0
}

/// Frequency of the single-component minimizer: `(a r / 4)^2` for `p = 2`.
pub fn single_component_frequency(r: f64, a: f64) -> f64 {
    (a * r / 4.0).powi(2)
}
