//! Pseudospectral machinery for the short-pulse approximation of a quasilinear
//! Klein-Gordon equation.
//!
//! The crate is organised around four layers:
//!
//! * [`spectral`] - periodic Fourier grids, fields, derivatives, zero-mean
//!   anti-derivatives, Sobolev norms and the anti-derivative semigroup.
//! * [`short_pulse`] - the short-pulse equation `A_xi_tau = A + (A^3)_xi_xi`,
//!   its time-derivative closures, an RK4 evolver and a Duhamel solver.
//! * [`klein_gordon`] - the quasilinear Klein-Gordon equation
//!   `u_tt - u_xx + u + (u^3)_xx = 0`, its symmetric first-order form, energy
//!   functionals with balance laws, and the scaling maps between the original
//!   and the short-pulse frames.
//! * [`justification`] - remainder diagnostics: the error energy, its tilde
//!   correction, the flux functional, Gronwall fits and the epsilon
//!   convergence study behind the O(epsilon) error law.

pub mod justification;
pub mod klein_gordon;
pub mod short_pulse;
pub mod spectral;

pub use spectral::{Field, FourierGrid, SpectralError};
