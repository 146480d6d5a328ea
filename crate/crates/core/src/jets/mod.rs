//! Intermittent jet building blocks.
//!
//! A jet is a unit-direction vector field concentrated on thin periodic
//! tubes, translating along its axis in time. It factors through two
//! compactly supported profiles: a 1-D mean-zero pulse `psi` along the
//! axis and a 2-D potential bump `Phi` (with `phi = -Laplacian(Phi)`)
//! across it. The crate realizes jets through their Fourier series on an
//! integer sublattice, truncated to the working band of the target grid:
//! every structural identity (divergence of the corrected jet, transport,
//! quadratic means) is then an exact statement about the realized fields,
//! while the profile normalizations are fixed by high-resolution
//! quadrature of the closed-form profiles in jet coordinates.

pub mod family;
pub mod placement;
pub mod profiles;
pub mod verify;

pub use family::{JetBand, JetFamily, JetScales, Pattern, VectorPattern};
pub use placement::{
    pair_gap, place_shifts, place_shifts_best_effort, support_mask, PairGap, PlacementDiag,
};
pub use profiles::{ProfileConfig, ProfileSet};
pub use verify::{verify_jet_identities, JetReport, NormRatioProbe};
