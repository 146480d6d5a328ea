//! Grids, fields, and the Fourier-side operator calculus on the 3-torus.
//!
//! Conventions used throughout the crate:
//!
//! * The domain is `[0, 2pi)^3` sampled on an `n^3` uniform grid, `n` a
//!   power of two, layout x-fastest.
//! * Spectral data are the normalised coefficients `c_k` of
//!   `f(x) = sum_k c_k exp(i k.x)` over the centred integer band; Parseval
//!   then reads `||f||_{L2}^2 = (2pi)^3 sum |c_k|^2`.
//! * The Nyquist row is treated as data (round trips preserve it) but is
//!   zeroed by every differentiation multiplier.

pub mod fft;
pub mod field;
pub mod grid;
pub mod norms;
pub mod ops;

pub use field::{sym_slot, ScalarField, StressField, VectorField, SYM_PAIRS};
pub use grid::Grid3;
pub use norms::NormKind;
