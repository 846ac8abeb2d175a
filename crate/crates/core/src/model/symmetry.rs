//! Galilean, translation and phase symmetries of the system.

use num_complex::Complex64;

use super::State;
use crate::spectral::Field;

/// Parameters of `u_j -> exp(-i sigma^2 t + i sigma x + i beta_j) u_j(x - y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Symmetry {
    pub shift: f64,
    pub boost: f64,
    pub phases: [f64; 3],
    pub time: f64,
}

impl Symmetry {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn phases(phases: [f64; 3]) -> Self {
        Self { phases, ..Self::default() }
    }

    pub fn shift(shift: f64) -> Self {
        Self { shift, ..Self::default() }
    }
}

/// Apply a symmetry transformation.
///
/// Shifts that are whole multiples of the grid spacing permute samples
/// exactly; other shifts use Fourier interpolation. A boost whose wavenumber
/// is not a multiple of `2 pi / L` is not periodic, which is harmless only
/// while the profile vanishes at the box edge.
pub fn apply_symmetry(state: &State, sym: &Symmetry) -> State {
    state.map(|j, f| {
        let moved = if sym.shift == 0.0 { f.clone() } else { f.translate(sym.shift) };
        if sym.boost == 0.0 && sym.time == 0.0 {
            if sym.phases[j] == 0.0 {
                return moved;
            }
            return moved.scaled(Complex64::from_polar(1.0, sym.phases[j]));
        }
        let base = -sym.boost * sym.boost * sym.time + sym.phases[j];
        let grid = moved.grid().clone();
        let values = moved
            .values()
            .iter()
            .zip(grid.nodes())
            .map(|(z, &x)| z * Complex64::from_polar(1.0, base + sym.boost * x))
            .collect();
        Field::new(&grid, values).expect("unit-modulus factors keep samples finite")
    })
}
