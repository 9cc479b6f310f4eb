//! Finite-scale computations for the spectral theory of non-singular group
//! actions.
//!
//! The crate works with exact finite models: Fourier-mode truncations of
//! torus rotations, finite odometers with biased product measures, and
//! explicit unitary representations of abelian groups and of the
//! Heisenberg group `H₃(ℝ)`. Every verdict is reported at the resolution
//! of the model that produced it.
//!
//! Module map:
//!
//! - [`groups`]: group elements, characters, Følner windows.
//! - [`spaces`]: measure spaces, non-singular maps, Koopman operators.
//! - [`spectral`]: correlation sequences, spectral estimates, eigenvalue
//!   sets and the ergodic multiplier test.
//! - [`invariant`]: finite-dimensional invariant subspaces, absolutely
//!   continuous invariant measures, Banach–Kronecker factors.
//! - [`bk`]: invariant metrics and the non-ergodic product witness.
//! - [`gaussian`]: covariance, sampling, symmetric tensor powers and the
//!   weak-mixing verdict for Gaussian systems.
//! - [`heisenberg`]: `H₃(ℝ)` representations, rigidity and weak mixing.

pub mod bk;
pub mod error;
pub mod gaussian;
pub mod groups;
pub mod heisenberg;
pub mod invariant;
pub mod linalg;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Limits, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
