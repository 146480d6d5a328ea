//! Pseudospectral building blocks for a convex-integration cascade on the
//! 3-torus `[0, 2pi)^3`, driven by exactly sampled Ornstein-Uhlenbeck noise.
//!
//! The crate is organised around eight subsystems:
//!
//! * [`spectral`]: grids, real fields with lazy spectral mirrors, and the
//!   Fourier-side operator calculus (Leray projection, inverse divergence,
//!   bilinear antidivergence, derivatives, norms).
//! * [`noise`]: band-limited OU processes sampled exactly per Fourier mode
//!   with counter-based randomness, plus moment estimators.
//! * [`geometry`]: the rational direction set and the positive-coefficient
//!   decomposition of symmetric matrices near the identity.
//! * [`jets`]: compactly supported profile functions and the intermittent
//!   jet family built from them.
//! * [`ledger`]: the exact-arithmetic parameter ladder and its inequality
//!   verdicts.
//! * [`step`]: one level of the cascade: mollification, energy pacing,
//!   amplitude fields, the perturbation, the new stress, and the residual
//!   gate.
//! * [`cascade`]: multi-level drivers, trajectory shifts, empirical
//!   averaging, and the vanishing-viscosity sweep.
//! * [`io`]: run configuration, binary field snapshots, manifests, and CSV
//!   diagnostics.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod jets;
pub mod ledger;
pub mod noise;
pub mod spectral;
pub mod step;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Volume of the periodic box `[0, 2pi)^3`.
pub const BOX_VOLUME: f64 = 8.0 * std::f64::consts::PI
    * std::f64::consts::PI
    * std::f64::consts::PI;
