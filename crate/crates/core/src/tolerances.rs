//! Named numerical tolerances.
//!
//! Every threshold used by the solver post-checks, the CLI validation
//! command and the acceptance suite lives here so that there is exactly one
//! place to look them up.

/// Relative accuracy demanded from per-component mass projection.
pub const PROJECTION_REL_TOL: f64 = 1e-12;

/// Mass below which a component is treated as identically zero.
pub const ZERO_MASS: f64 = 1e-300;

/// Collection of tolerances with documented defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max relative error of `lambda` against a closed form.
    pub lambda_rel: f64,
    /// Absolute error of `lambda` for the equal-coupling triple.
    pub lambda_abs: f64,
    /// Absolute error on recovered Lagrange multipliers.
    pub multiplier_abs: f64,
    /// Max-norm error of an aligned profile against a closed form.
    pub profile_max: f64,
    /// Pairwise max-norm distance between components expected to coincide.
    pub component_equality: f64,
    /// Euler-Lagrange residual required of a converged minimizer.
    pub residual: f64,
    /// Max phase deviation from the mean phase of a component (radians).
    pub phase: f64,
    /// Relative amplitude below which a sample is ignored by phase/positivity checks.
    pub support_floor: f64,
    /// Relative error of the finite-difference directional derivative.
    pub gradient_fd_rel: f64,
    /// Finite-difference step for the gradient check.
    pub gradient_fd_step: f64,
    /// Per-component relative mass drift over a conservation run.
    pub mass_drift: f64,
    /// Relative energy drift over a conservation run.
    pub energy_drift: f64,
    /// Admissible range of the fitted splitting order.
    pub splitting_order: (f64, f64),
    /// Slack for the discrete energy decrease under rearrangement.
    pub rearrangement_energy: f64,
    /// Slack for the two-bump rearrangement gradient inequality.
    pub two_bump: f64,
    /// Absolute error allowed on the closed-form subadditivity margin.
    pub subadditivity_margin: f64,
    /// Bound on the orbital distance of the unperturbed control run.
    pub stability_control: f64,
    /// sup distance must not exceed this multiple of the perturbation size.
    pub stability_ratio: f64,
    /// Minimum fraction of the mass inside the concentration window.
    pub gamma_proxy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lambda_rel: 1e-5,
            lambda_abs: 1e-5,
            multiplier_abs: 1e-6,
            profile_max: 1e-5,
            component_equality: 1e-6,
            residual: 1e-8,
            phase: 1e-6,
            support_floor: 1e-10,
            gradient_fd_rel: 1e-6,
            gradient_fd_step: 1e-5,
            mass_drift: 1e-11,
            energy_drift: 1e-8,
            splitting_order: (1.8, 2.2),
            rearrangement_energy: 1e-6,
            two_bump: 1e-3,
            subadditivity_margin: 2e-4,
            stability_control: 1e-6,
            stability_ratio: 10.0,
            gamma_proxy: 0.999,
        }
    }
}
