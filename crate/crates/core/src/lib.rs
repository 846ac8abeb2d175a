//! Normalized solitary waves of the three-component coupled nonlinear
//! Schrödinger system
//!
//! ```text
//! i u_j,t + u_j,xx + (sum_k a_kj |u_k|^p) |u_j|^(p-2) u_j = 0,   j = 1, 2, 3,
//! ```
//!
//! computed as minimizers of the energy under three independent mass
//! constraints, then evolved and perturbed to probe orbital stability.

pub mod spectral;
pub mod model;
pub mod tolerances;
pub mod ground_state;
pub mod evolution;
pub mod stability;

pub use num_complex::Complex64;
