//! Periodic spectral discretization on a uniform 1-D grid.
//!
//! The real line is truncated to the box `[-L/2, L/2)` with periodic
//! boundary conditions. Derivatives are Fourier multipliers, integrals use
//! the rectangle rule (exact for trigonometric polynomials), and the discrete
//! symmetric decreasing rearrangement permutes samples about the node `x = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("grid size {0} is below the minimum of 16 points")]
    TooFewPoints(usize),
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("expected {expected} samples, found {found}")]
    SampleCount { expected: usize, found: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("negative sample {value} at index {index}")]
    Negative { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Uniform periodic grid together with its FFT plans.
///
/// Plans are owned by the grid and shared through `Arc`; `rustfft` plans are
/// immutable and `Sync`, so one grid can serve any number of threads.
pub struct Grid {
    n: usize,
    length: f64,
    spacing: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    diff_wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self, SpectralError> {
        if !n.is_power_of_two() {
            return Err(SpectralError::NotPowerOfTwo(n));
        }
        if n < 16 {
            return Err(SpectralError::TooFewPoints(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SpectralError::InvalidLength(length));
        }
        let spacing = length / n as f64;
        let nodes = (0..n).map(|m| -0.5 * length + m as f64 * spacing).collect();
        let dk = 2.0 * PI / length;
        let half = n / 2;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|m| if m < half { m as f64 * dk } else { (m as f64 - n as f64) * dk })
            .collect();
        // The Nyquist mode has no sign; odd derivatives annihilate it.
        let mut diff_wavenumbers = wavenumbers.clone();
        diff_wavenumbers[half] = 0.0;

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self { n, length, spacing, nodes, wavenumbers, diff_wavenumbers, forward, inverse })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Node spacing `h = L / n`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nodes `x_m = -L/2 + m h`, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers in FFT order: `0, 1, .., n/2-1, -n/2, .., -1` times `2 pi / L`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Wavenumbers used by the derivative: as `wavenumbers` with the Nyquist mode zeroed.
    pub fn diff_wavenumbers(&self) -> &[f64] {
        &self.diff_wavenumbers
    }

    /// Symbol of `-d^2/dx^2`, consistent with `diff_wavenumbers`.
    pub fn laplace_symbol(&self, m: usize) -> f64 {
        let k = self.diff_wavenumbers[m];
        k * k
    }

    /// Index of the node at `x = 0`.
    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse DFT in place, normalized so that `inverse(forward(f)) = f`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    /// Apply the Fourier multiplier `symbol(m)` (indexed in FFT order) to `values`.
    pub fn apply_multiplier(
        &self,
        values: &[Complex64],
        symbol: impl Fn(usize) -> Complex64,
    ) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        buf.iter_mut().enumerate().for_each(|(m, z)| *z *= symbol(m));
        self.inverse(&mut buf);
        buf
    }

    /// Spectral first derivative of raw samples.
    pub fn derivative(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.apply_multiplier(values, |m| Complex64::new(0.0, self.diff_wavenumbers[m]))
    }

    /// Rectangle-rule integral `h * sum f(x_m)`.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        self.spacing * samples.iter().sum::<f64>()
    }

    /// `int |f|^2 dx` of raw samples.
    pub fn norm_sq(&self, values: &[Complex64]) -> f64 {
        self.spacing * values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `int |f'|^2 dx` evaluated in Fourier space (discrete Parseval).
    pub fn gradient_norm_sq(&self, values: &[Complex64]) -> f64 {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        let weight = self.spacing / self.n as f64;
        weight
            * buf
                .iter()
                .enumerate()
                .map(|(m, z)| self.laplace_symbol(m) * z.norm_sqr())
                .sum::<f64>()
    }

    /// Samples of a real function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Order in which the rearrangement fills nodes: `0, +h, -h, +2h, -2h, ..., -L/2`.
    pub fn rearrangement_order(&self) -> Vec<usize> {
        let c = self.center_index();
        let mut order = Vec::with_capacity(self.n);
        order.push(c);
        for d in 1..c {
            order.push(c + d);
            order.push(c - d);
        }
        order.push(0);
        order
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

/// Build a grid; see [`Grid::new`].
pub fn make_grid(n: usize, length: f64) -> Result<Arc<Grid>, SpectralError> {
    Grid::new(n, length).map(Arc::new)
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Complex samples on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n() {
            return Err(SpectralError::SampleCount { expected: grid.n(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: Arc::clone(grid), values: vec![Complex64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self { grid: Arc::clone(grid), values }
    }

    pub fn from_real(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Wrap samples without validation; callers guarantee length and finiteness.
    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mass(&self) -> f64 {
        self.grid.norm_sq(&self.values)
    }

    pub fn derivative(&self) -> Field {
        Field::from_raw(&self.grid, self.grid.derivative(&self.values))
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|z| z * c).collect())
    }

    /// Translation by a whole number of grid steps: `f(x - steps * h)`.
    pub fn roll(&self, steps: isize) -> Field {
        let n = self.grid.n() as isize;
        let values = (0..n)
            .map(|m| self.values[(m - steps).rem_euclid(n) as usize])
            .collect();
        Field::from_raw(&self.grid, values)
    }

    /// Translation by an arbitrary distance via Fourier interpolation.
    pub fn translate(&self, y: f64) -> Field {
        let h = self.grid.spacing();
        let steps = (y / h).round();
        if (y - steps * h).abs() <= 1e-12 * h.max(y.abs()) {
            return self.roll(steps as isize);
        }
        let k = self.grid.diff_wavenumbers();
        let values = self.grid.apply_multiplier(&self.values, |m| Complex64::from_polar(1.0, -k[m] * y));
        Field::from_raw(&self.grid, values)
    }

    /// `|f|` as a non-negative real field.
    pub fn modulus(&self) -> RealField {
        RealField { grid: Arc::clone(&self.grid), values: self.values.iter().map(|z| z.norm()).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm distance to another field on the same grid.
    pub fn max_distance(&self, other: &Field) -> Result<f64, SpectralError> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(SpectralError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn sub(&self, other: &Field) -> Result<Field, SpectralError> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(SpectralError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field::from_raw(&self.grid, values))
    }
}

/// Non-negative real samples on a grid.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n() {
            return Err(SpectralError::SampleCount { expected: grid.n(), found: values.len() });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(SpectralError::NonFinite(index));
            }
            if value < 0.0 {
                return Err(SpectralError::Negative { index, value });
            }
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_field(&self) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// `int f^q dx`.
    pub fn integrate_power(&self, q: f64) -> f64 {
        self.grid.integrate(&self.values.iter().map(|v| v.powf(q)).collect::<Vec<_>>())
    }

    /// `int |f'|^2 dx` using the spectral derivative.
    pub fn gradient_norm_sq(&self) -> f64 {
        let z: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.gradient_norm_sq(&z)
    }
}

pub fn spectral_derivative(f: &Field) -> Field {
    f.derivative()
}

/// Rectangle-rule integral of samples on `grid`.
pub fn integrate(grid: &Grid, samples: &[f64]) -> f64 {
    grid.integrate(samples)
}

/// `Q(f) = int |f|^2 dx`.
pub fn mass(f: &Field) -> f64 {
    f.mass()
}

/// `int (f conj(g) + f' conj(g')) dx`.
pub fn h1_inner(f: &Field, g: &Field) -> Result<Complex64, SpectralError> {
    if !same_grid(&f.grid, &g.grid) {
        return Err(SpectralError::GridMismatch);
    }
    let grid = &f.grid;
    let mut fh = f.values.clone();
    let mut gh = g.values.clone();
    grid.forward(&mut fh);
    grid.forward(&mut gh);
    let weight = grid.spacing() / grid.n() as f64;
    let sum: Complex64 = fh
        .iter()
        .zip(&gh)
        .enumerate()
        .map(|(m, (a, b))| a * b.conj() * (1.0 + grid.laplace_symbol(m)))
        .sum();
    Ok(sum * weight)
}

pub fn h1_norm(f: &Field) -> f64 {
    let grid = &f.grid;
    (grid.norm_sq(&f.values) + grid.gradient_norm_sq(&f.values)).sqrt()
}

/// Discrete symmetric decreasing rearrangement.
///
/// Samples are sorted in descending order (ties broken by original index)
/// and written to the nodes `0, +h, -h, +2h, -2h, ...`. The output is a
/// permutation of the input, so every integral of a power of it is unchanged.
pub fn rearrange(f: &RealField) -> Result<RealField, SpectralError> {
    if let Some((index, &value)) = f.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(SpectralError::Negative { index, value });
    }
    let values = &f.values;
    let mut ranked: Vec<usize> = (0..values.len()).collect();
    ranked.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; values.len()];
    for (slot, src) in f.grid.rearrangement_order().into_iter().zip(ranked) {
        out[slot] = values[src];
    }
    Ok(RealField { grid: Arc::clone(&f.grid), values: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn grid(n: usize, l: f64) -> Arc<Grid> {
        make_grid(n, l).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = grid(16, 16.0);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.nodes()[0], -8.0);
        assert_eq!(g.nodes()[g.center_index()], 0.0);
        let g = grid(1024, 40.0);
        assert_eq!(g.spacing(), 0.0390625);
        assert!((g.spacing() * 1024.0 - 40.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert_eq!(Grid::new(24, 10.0).unwrap_err(), SpectralError::NotPowerOfTwo(24));
        assert_eq!(Grid::new(8, 10.0).unwrap_err(), SpectralError::TooFewPoints(8));
        assert!(matches!(Grid::new(64, 0.0), Err(SpectralError::InvalidLength(_))));
        assert!(matches!(Grid::new(64, -1.0), Err(SpectralError::InvalidLength(_))));
    }

    #[test]
    fn wavenumbers_are_symmetric() {
        let g = grid(32, 2.0 * PI);
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        for m in 1..16 {
            assert_eq!(k[m], -k[32 - m]);
        }
        assert_eq!(k[16], -16.0);
        assert_eq!(g.diff_wavenumbers()[16], 0.0);
    }

    #[test]
    fn derivative_of_constant_and_sine() {
        let g = grid(64, 10.0);
        let one = Field::from_real(&g, |_| 1.0);
        assert!(one.derivative().max_abs() < 1e-14);

        let w = 2.0 * PI / 10.0;
        let s = Field::from_real(&g, |x| (w * x).sin());
        let exact = Field::from_real(&g, |x| w * (w * x).cos());
        assert!(s.derivative().max_distance(&exact).unwrap() < 1e-13);
    }

    #[test]
    fn derivative_of_sech() {
        // The box must be wide enough for sech to reach round-off at the edge.
        let g = grid(1024, 80.0);
        let f = Field::from_real(&g, sech);
        let exact = Field::from_real(&g, |x| -sech(x) * x.tanh());
        assert!(spectral_derivative(&f).max_distance(&exact).unwrap() <= 1e-10);
    }

    #[test]
    fn quadrature_of_sech_powers() {
        let g = grid(1024, 40.0);
        assert!((integrate(&g, &g.sample(|_| 1.0)) - 40.0).abs() < 1e-12);
        assert!((integrate(&g, &g.sample(|x| sech(x).powi(2))) - 2.0).abs() < 1e-12);
        assert!((integrate(&g, &g.sample(|x| sech(x).powi(4))) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mass_examples() {
        let g = grid(1024, 40.0);
        assert_eq!(mass(&Field::zeros(&g)), 0.0);
        let f = Field::from_real(&g, |x| 2f64.sqrt() * sech(x));
        assert!((mass(&f) - 4.0).abs() < 1e-10);
        let rotated = f.scaled(Complex64::from_polar(1.0, 1.234));
        assert!((mass(&rotated) - mass(&f)).abs() < 1e-13);
    }

    #[test]
    fn h1_inner_examples() {
        let g = grid(1024, 40.0);
        let f = Field::from_real(&g, sech);
        let ff = h1_inner(&f, &f).unwrap();
        assert!((ff.re - 8.0 / 3.0).abs() < 1e-10 && ff.im.abs() < 1e-14);
        assert!((h1_norm(&f).powi(2) - ff.re).abs() < 1e-12);

        let h = Field::from_fn(&g, |x| Complex64::new(sech(x - 1.0), 0.3 * sech(2.0 * x)));
        let fh = h1_inner(&f, &h).unwrap();
        let hf = h1_inner(&h, &f).unwrap();
        assert!((fh - hf.conj()).norm() < 1e-13);
        assert_eq!(h1_inner(&Field::zeros(&g), &h).unwrap(), Complex64::new(0.0, 0.0));

        let other = grid(512, 40.0);
        assert_eq!(h1_inner(&f, &Field::zeros(&other)), Err(SpectralError::GridMismatch));
    }

    #[test]
    fn field_validation() {
        let g = grid(16, 1.0);
        let bad = vec![Complex64::new(0.0, 0.0); 15];
        assert!(matches!(Field::new(&g, bad), Err(SpectralError::SampleCount { .. })));
        let mut nan = vec![Complex64::new(0.0, 0.0); 16];
        nan[3].re = f64::NAN;
        assert_eq!(Field::new(&g, nan).unwrap_err(), SpectralError::NonFinite(3));
        let mut neg = vec![0.0; 16];
        neg[5] = -1.0;
        assert!(matches!(RealField::new(&g, neg), Err(SpectralError::Negative { index: 5, .. })));
    }

    #[test]
    fn rearrangement_fixes_symmetric_decreasing_input() {
        let g = grid(256, 20.0);
        let f = Field::from_real(&g, |x| (-x * x).exp()).modulus();
        let r = rearrange(&f).unwrap();
        assert_eq!(r.values(), f.values());
    }

    #[test]
    fn rearrangement_is_centered_and_decreasing() {
        let g = grid(128, 20.0);
        let f = Field::from_real(&g, |x| sech(x - 4.0) + 0.5 * sech(2.0 * (x + 5.0))).modulus();
        let r = rearrange(&f).unwrap();
        let order = g.rearrangement_order();
        for w in order.windows(2) {
            assert!(r.values()[w[0]] >= r.values()[w[1]]);
        }
        let c = g.center_index();
        let peak = r.values().iter().cloned().fold(0.0, f64::max);
        assert_eq!(r.values()[c], peak);
    }

    #[test]
    fn translation_commutes_with_derivative() {
        let g = grid(256, 20.0);
        let f = Field::from_fn(&g, |x| Complex64::new(sech(x), 0.2 * x * sech(x)));
        for steps in [-7isize, 1, 13] {
            let a = f.roll(steps).derivative();
            let b = f.derivative().roll(steps);
            assert!(a.max_distance(&b).unwrap() < 1e-13);
        }
    }

    #[test]
    fn fractional_translation_matches_analytic_shift() {
        let g = grid(1024, 80.0);
        let f = Field::from_real(&g, sech);
        let shifted = f.translate(0.3);
        let exact = Field::from_real(&g, |x| sech(x - 0.3));
        assert!(shifted.max_distance(&exact).unwrap() < 1e-10);
    }

    /// Even `C_c^inf` bump, non-increasing on `[0, inf)`, supported on `|x| < 1`.
    pub(crate) fn bump(x: f64) -> f64 {
        if x.abs() < 1.0 {
            (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }

    #[test]
    fn two_separated_bumps_lose_gradient_energy() {
        let g = grid(1024, 40.0);
        // (center, width, height) of the two bumps.
        let cases = [
            ((-8.0, 3.0, 1.0), (8.0, 3.0, 1.0)),
            ((-10.0, 2.0, 1.0), (5.0, 4.0, 0.5)),
            ((-3.0, 1.5, 2.0), (6.0, 2.5, 1.0)),
            ((-12.0, 5.0, 0.3), (9.0, 5.0, 0.8)),
            ((-4.1, 2.0, 1.0), (3.3, 3.0, 1.5)),
        ];
        for ((c1, w1, a1), (c2, w2, a2)) in cases {
            let f = RealField::new(&g, g.sample(|x| a1 * bump((x - c1) / w1))).unwrap();
            let h = RealField::new(&g, g.sample(|x| a2 * bump((x - c2) / w2))).unwrap();
            let w = RealField::new(&g, f.values().iter().zip(h.values()).map(|(a, b)| a + b).collect()).unwrap();
            let lhs = rearrange(&w).unwrap().gradient_norm_sq();
            let rhs = w.gradient_norm_sq() - 0.75 * f.gradient_norm_sq().min(h.gradient_norm_sq());
            assert!(lhs <= rhs + 1e-3, "{lhs} > {rhs}");
        }
    }

    fn smooth_bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-10.0f64..10.0, 0.5f64..3.0, 0.1f64..2.0), 1..5)
    }

    fn sample_bumps(g: &Arc<Grid>, bumps: &[(f64, f64, f64)]) -> RealField {
        let values = g.sample(|x| bumps.iter().map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum());
        RealField::new(g, values).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rearrangement_is_equimeasurable(values in prop::collection::vec(0.0f64..5.0, 256), p in 2.0f64..3.0) {
            let g = grid(256, 20.0);
            let f = RealField::new(&g, values).unwrap();
            let r = rearrange(&f).unwrap();
            let mut a = f.values().to_vec();
            let mut b = r.values().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            for q in [1.0, 2.0, p, 2.0 * p] {
                let (x, y) = (f.integrate_power(q), r.integrate_power(q));
                prop_assert!((x - y).abs() <= 1e-13 * x.max(1e-300));
            }
        }

        #[test]
        fn rearrangement_does_not_raise_gradient_energy(bumps in smooth_bumps()) {
            let g = grid(1024, 40.0);
            let f = sample_bumps(&g, &bumps);
            let r = rearrange(&f).unwrap();
            prop_assert!(r.gradient_norm_sq() <= f.gradient_norm_sq() + g.spacing());
        }

        #[test]
        fn rearrangement_raises_product_integrals(a in smooth_bumps(), b in smooth_bumps(), p in 2.0f64..3.0) {
            let g = grid(1024, 40.0);
            let (f, h) = (sample_bumps(&g, &a), sample_bumps(&g, &b));
            let (fr, hr) = (rearrange(&f).unwrap(), rearrange(&h).unwrap());
            let product = |u: &RealField, v: &RealField| {
                g.integrate(&u.values().iter().zip(v.values()).map(|(x, y)| x.powf(p) * y.powf(p)).collect::<Vec<_>>())
            };
            prop_assert!(product(&fr, &hr) >= product(&f, &h) - g.spacing());
        }

        #[test]
        fn transform_round_trip(re in prop::collection::vec(-1.0f64..1.0, 512), im in prop::collection::vec(-1.0f64..1.0, 512)) {
            let g = grid(512, 30.0);
            let original: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
            let mut buf = original.clone();
            g.forward(&mut buf);
            let spectral_mass: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>() / 512.0;
            let mass: f64 = original.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((spectral_mass - mass).abs() <= 1e-12 * mass);
            g.inverse(&mut buf);
            let err = buf.iter().zip(&original).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = original.iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-12 * scale);
        }
    }
}
