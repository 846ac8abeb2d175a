//! The three-component system made computable.
//!
//! Energy
//! `H(u) = int sum_j |u_j'|^2 - (1/p) sum_{k,j} a_kj |u_k|^p |u_j|^p dx`,
//! per-component masses `Q(u_j) = int |u_j|^2 dx`, the variational gradient
//! and the Euler-Lagrange machinery built on them.

mod exact;
mod symmetry;

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{Field, Grid, SpectralError};
use crate::tolerances::ZERO_MASS;

pub use exact::{
    equal_coupling_state, sech_profile, single_component_frequency, single_component_lambda,
    two_component_profile,
};
pub use symmetry::{apply_symmetry, Symmetry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("coupling matrix is not symmetric: a[{0}][{1}] != a[{1}][{0}]")]
    Asymmetric(usize, usize),
    #[error("coupling a[{0}][{1}] = {2} must be positive and finite")]
    NonPositiveCoupling(usize, usize, f64),
    #[error("exponent p = {0} outside [2, 3)")]
    ExponentOutOfRange(f64),
    #[error("mass {0} must be non-negative and finite")]
    InvalidMass(f64),
    #[error("total mass must be positive")]
    ZeroTotalMass,
    #[error("component {0} has zero mass; its multiplier is undefined")]
    ZeroMassComponent(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Symmetric positive interaction matrix together with the exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingModel {
    a: [[f64; 3]; 3],
    p: f64,
}

impl CouplingModel {
    pub fn new(a: [[f64; 3]; 3], p: f64) -> Result<Self, ModelError> {
        for k in 0..3 {
            for j in 0..3 {
                if !(a[k][j] > 0.0 && a[k][j].is_finite()) {
                    return Err(ModelError::NonPositiveCoupling(k, j, a[k][j]));
                }
                if a[k][j] != a[j][k] {
                    return Err(ModelError::Asymmetric(k, j));
                }
            }
        }
        if !(2.0..3.0).contains(&p) {
            return Err(ModelError::ExponentOutOfRange(p));
        }
        Ok(Self { a, p })
    }

    /// All couplings equal to `a`.
    pub fn uniform(a: f64, p: f64) -> Result<Self, ModelError> {
        Self::new([[a; 3]; 3], p)
    }

    /// `a_jj = diag`, `a_kj = off` for `k != j`.
    pub fn equal_coupling(diag: f64, off: f64, p: f64) -> Result<Self, ModelError> {
        let mut a = [[off; 3]; 3];
        (0..3).for_each(|j| a[j][j] = diag);
        Self::new(a, p)
    }

    pub fn a(&self) -> &[[f64; 3]; 3] {
        &self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `|z|^p`.
    #[inline]
    pub(crate) fn abs_pow(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            r * r
        } else {
            r.powf(self.p)
        }
    }

    /// `|z|^(p-2)`, continued by 0 at `z = 0` when `p > 2`.
    #[inline]
    pub(crate) fn abs_pow_m2(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            1.0
        } else if r == 0.0 {
            0.0
        } else {
            r.powf(self.p - 2.0)
        }
    }
}

/// Target masses `(r, s, t)`; zero entries freeze the component at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassTriple {
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl MassTriple {
    pub fn new(r: f64, s: f64, t: f64) -> Result<Self, ModelError> {
        for m in [r, s, t] {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(ModelError::InvalidMass(m));
            }
        }
        if r + s + t <= 0.0 {
            return Err(ModelError::ZeroTotalMass);
        }
        Ok(Self { r, s, t })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.s, self.t]
    }

    pub fn total(&self) -> f64 {
        self.r + self.s + self.t
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.as_array()[j] > 0.0
    }
}

impl TryFrom<[f64; 3]> for MassTriple {
    type Error = ModelError;

    fn try_from(m: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(m[0], m[1], m[2])
    }
}

/// Frequencies `(w1, w2, w3)` attached to the three mass constraints.
///
/// Components with zero mass carry a multiplier of 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers {
    pub omega: [f64; 3],
}

/// Triple of complex fields on a common grid.
#[derive(Debug, Clone)]
pub struct State {
    components: [Field; 3],
}

impl State {
    pub fn new(u1: Field, u2: Field, u3: Field) -> Result<Self, ModelError> {
        let g = u1.grid();
        if **u2.grid() != **g || **u3.grid() != **g {
            return Err(SpectralError::GridMismatch.into());
        }
        if !(u1.is_finite() && u2.is_finite() && u3.is_finite()) {
            return Err(SpectralError::NonFinite(0).into());
        }
        Ok(Self { components: [u1, u2, u3] })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { components: [Field::zeros(grid), Field::zeros(grid), Field::zeros(grid)] }
    }

    pub(crate) fn from_components(components: [Field; 3]) -> Self {
        Self { components }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.components[0].grid()
    }

    pub fn component(&self, j: usize) -> &Field {
        &self.components[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut Field {
        &mut self.components[j]
    }

    pub fn components(&self) -> &[Field; 3] {
        &self.components
    }

    pub fn into_components(self) -> [Field; 3] {
        self.components
    }

    pub fn masses(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.components[j].mass())
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(Field::is_finite)
    }

    /// Apply `f` to each component.
    pub fn map(&self, mut f: impl FnMut(usize, &Field) -> Field) -> State {
        State { components: [0, 1, 2].map(|j| f(j, &self.components[j])) }
    }

    /// Product `H^1` norm.
    pub fn y_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|f| crate::spectral::h1_norm(f).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `||self - other||_Y`.
    pub fn y_distance(&self, other: &State) -> Result<f64, ModelError> {
        let mut sum = 0.0;
        for j in 0..3 {
            let d = self.components[j].sub(&other.components[j])?;
            sum += crate::spectral::h1_norm(&d).powi(2);
        }
        Ok(sum.sqrt())
    }

    /// Largest pointwise modulus difference over all components.
    pub fn max_distance(&self, other: &State) -> Result<f64, ModelError> {
        let mut d: f64 = 0.0;
        for j in 0..3 {
            d = d.max(self.components[j].max_distance(&other.components[j])?);
        }
        Ok(d)
    }
}

/// Moduli `|u_j|` at every node.
pub(crate) fn moduli(state: &State) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|j| state.component(j).values().iter().map(|z| z.norm()).collect())
}

/// `sum_k a_kj |u_k|^p` for each `j`, from precomputed `|u_k|^p`.
pub(crate) fn coupling_potentials(powers: &[Vec<f64>; 3], model: &CouplingModel) -> [Vec<f64>; 3] {
    let a = model.a();
    let n = powers[0].len();
    [0, 1, 2].map(|j| {
        (0..n)
            .map(|m| a[0][j] * powers[0][m] + a[1][j] * powers[1][m] + a[2][j] * powers[2][m])
            .collect()
    })
}

/// Real phase-rotation rates `sum_k a_kj |u_k|^p |u_j|^(p-2)`.
pub(crate) fn nonlinear_rates(state: &State, model: &CouplingModel) -> [Vec<f64>; 3] {
    let r = moduli(state);
    let powers = r.clone().map(|v| v.into_iter().map(|x| model.abs_pow(x)).collect::<Vec<_>>());
    let pots = coupling_potentials(&powers, model);
    [0, 1, 2].map(|j| {
        pots[j]
            .iter()
            .zip(&r[j])
            .map(|(v, &rj)| v * model.abs_pow_m2(rj))
            .collect()
    })
}

/// Per-component integrals used by the energy and the multipliers.
#[derive(Debug, Clone, Copy)]
pub struct ComponentIntegrals {
    /// `int |u_j'|^2`
    pub kinetic: [f64; 3],
    /// `int |u_j|^p sum_k a_jk |u_k|^p`
    pub interaction: [f64; 3],
    /// `int |u_j|^2`
    pub mass: [f64; 3],
}

pub fn component_integrals(state: &State, model: &CouplingModel) -> ComponentIntegrals {
    let grid = state.grid();
    let r = moduli(state);
    let powers = r.clone().map(|v| v.into_iter().map(|x| model.abs_pow(x)).collect::<Vec<_>>());
    let pots = coupling_potentials(&powers, model);
    let kinetic = [0, 1, 2].map(|j| grid.gradient_norm_sq(state.component(j).values()));
    let interaction = [0, 1, 2].map(|j| {
        grid.integrate(&powers[j].iter().zip(&pots[j]).map(|(a, b)| a * b).collect::<Vec<_>>())
    });
    let mass = state.masses();
    ComponentIntegrals { kinetic, interaction, mass }
}

/// `H(S)`.
pub fn energy(state: &State, model: &CouplingModel) -> f64 {
    let c = component_integrals(state, model);
    (0..3).map(|j| c.kinetic[j] - c.interaction[j] / model.p()).sum()
}

/// The single-component part of the energy functional appearing in the
/// componentwise negativity property:
/// `int |u_j'|^2 - (1/p) int |u_j|^p sum_k a_jk |u_k|^p`.
pub fn component_energy(state: &State, model: &CouplingModel) -> [f64; 3] {
    let c = component_integrals(state, model);
    [0, 1, 2].map(|j| c.kinetic[j] - c.interaction[j] / model.p())
}

/// `G_j = -u_j'' - (sum_k a_kj |u_k|^p) |u_j|^(p-2) u_j`.
///
/// With this scaling the first variation of the energy along `d` is
/// `2 Re <G, d>_{L^2}` and the Euler-Lagrange system reads `G_j + w_j u_j = 0`.
pub fn energy_gradient(state: &State, model: &CouplingModel) -> State {
    let grid = state.grid();
    let rates = nonlinear_rates(state, model);
    state.map(|j, u| {
        let mut out = grid.apply_multiplier(u.values(), |m| Complex64::new(grid.laplace_symbol(m), 0.0));
        for ((o, z), rate) in out.iter_mut().zip(u.values()).zip(&rates[j]) {
            *o -= z * rate;
        }
        Field::from_raw(grid, out)
    })
}

/// Multiplier of component `j` from the integrated Euler-Lagrange equation.
pub fn lagrange_multiplier(state: &State, model: &CouplingModel, j: usize) -> Result<f64, ModelError> {
    let c = component_integrals(state, model);
    if c.mass[j] <= ZERO_MASS {
        return Err(ModelError::ZeroMassComponent(j));
    }
    Ok(-(c.kinetic[j] - c.interaction[j]) / c.mass[j])
}

/// `w_j = -(int |u_j'|^2 - int |u_j|^p sum_k a_jk |u_k|^p) / int |u_j|^2`.
///
/// Zero-mass components are skipped and reported as 0; an error is returned
/// only when every component vanishes.
pub fn lagrange_multipliers(state: &State, model: &CouplingModel) -> Result<Multipliers, ModelError> {
    let c = component_integrals(state, model);
    if c.mass.iter().all(|&m| m <= ZERO_MASS) {
        return Err(ModelError::ZeroTotalMass);
    }
    let omega = [0, 1, 2].map(|j| {
        if c.mass[j] <= ZERO_MASS {
            0.0
        } else {
            -(c.kinetic[j] - c.interaction[j]) / c.mass[j]
        }
    });
    Ok(Multipliers { omega })
}

/// Relative residual from an already computed gradient.
pub(crate) fn residual_from_gradient(state: &State, gradient: &State, w: &Multipliers) -> Option<f64> {
    let grid = state.grid();
    let mut worst: Option<f64> = None;
    for j in 0..3 {
        let u = state.component(j).values();
        let q = grid.norm_sq(u);
        if q <= ZERO_MASS {
            continue;
        }
        let r: Vec<Complex64> = gradient
            .component(j)
            .values()
            .iter()
            .zip(u)
            .map(|(g, z)| g + z * w.omega[j])
            .collect();
        let rel = (grid.norm_sq(&r) / q).sqrt();
        worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
    }
    worst
}

/// `max_j ||G_j + w_j u_j|| / ||u_j||` over components with positive mass.
pub fn el_residual(state: &State, w: &Multipliers, model: &CouplingModel) -> Result<f64, ModelError> {
    let g = energy_gradient(state, model);
    residual_from_gradient(state, &g, w).ok_or(ModelError::ZeroTotalMass)
}
