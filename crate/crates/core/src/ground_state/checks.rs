use num_complex::Complex64;

use super::GroundState;
use crate::model::{component_energy, CouplingModel};
use crate::spectral::Field;
use crate::tolerances::ZERO_MASS;

/// Outcome of the structural checks on a computed minimizer.
///
/// Entries for zero-mass components are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralChecks {
    pub lambda: f64,
    pub omega: [Option<f64>; 3],
    /// `int |u_j'|^2 - (1/p) int |u_j|^p sum_k a_jk |u_k|^p`, expected negative.
    pub component_energy: [Option<f64>; 3],
    /// `||u_j'||`, expected positive.
    pub gradient_norm: [Option<f64>; 3],
    /// Largest phase deviation from the mass-weighted mean phase (radians).
    pub phase_deviation: [Option<f64>; 3],
    /// Whether the phase-rotated component is strictly positive on its support.
    pub positive: [Option<bool>; 3],
}

impl StructuralChecks {
    pub(super) fn evaluate(gs: &GroundState, model: &CouplingModel, support_floor: f64) -> Self {
        let profile = &gs.profile;
        let grid = profile.grid();
        let ce = component_energy(profile, model);
        let mut out = StructuralChecks {
            lambda: gs.lambda,
            omega: [None; 3],
            component_energy: [None; 3],
            gradient_norm: [None; 3],
            phase_deviation: [None; 3],
            positive: [None; 3],
        };
        for j in 0..3 {
            let f = profile.component(j);
            if f.mass() <= ZERO_MASS {
                continue;
            }
            out.omega[j] = Some(gs.multipliers.omega[j]);
            out.component_energy[j] = Some(ce[j]);
            out.gradient_norm[j] = Some(grid.gradient_norm_sq(f.values()).sqrt());
            let (dev, positive) = phase_deviation(f, support_floor);
            out.phase_deviation[j] = Some(dev);
            out.positive[j] = Some(positive);
        }
        out
    }

    pub fn lambda_negative(&self) -> bool {
        self.lambda < 0.0
    }

    pub fn multipliers_positive(&self) -> bool {
        self.omega.iter().flatten().all(|&w| w > 0.0)
    }

    pub fn components_negative(&self) -> bool {
        self.component_energy.iter().flatten().all(|&e| e < 0.0)
    }

    pub fn gradients_nonzero(&self) -> bool {
        self.gradient_norm.iter().flatten().all(|&g| g > 0.0)
    }

    pub fn max_phase_deviation(&self) -> f64 {
        self.phase_deviation.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn all_positive(&self) -> bool {
        self.positive.iter().flatten().all(|&p| p)
    }

    /// Every check passes with phase tolerance `phase_tol`.
    pub fn passed(&self, phase_tol: f64) -> bool {
        self.lambda_negative()
            && self.multipliers_positive()
            && self.components_negative()
            && self.gradients_nonzero()
            && self.max_phase_deviation() <= phase_tol
            && self.all_positive()
    }
}

/// Mass-weighted mean phase `theta`, the largest `|arg(f e^{-i theta})|` over
/// the samples with `|f| > floor * max |f|`, and whether `f e^{-i theta}` has
/// positive real part at every such sample.
pub fn phase_deviation(f: &Field, floor: f64) -> (f64, bool) {
    let mean: Complex64 = f.values().iter().map(|z| z * z.norm()).sum();
    let rot = Complex64::from_polar(1.0, -mean.arg());
    let cutoff = floor * f.max_abs();
    let mut dev: f64 = 0.0;
    let mut positive = true;
    for z in f.values() {
        if z.norm() <= cutoff {
            continue;
        }
        let w = z * rot;
        dev = dev.max(w.arg().abs());
        positive &= w.re > 0.0;
    }
    (dev, positive)
}
