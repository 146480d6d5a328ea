//! One level of the convex-integration cascade and the step to the next.
//!
//! A [`LevelState`] is a velocity, a trace-free stress coupling them
//! through the momentum balance, and the noise path the pair rides on.
//! Closed-form levels carry their velocity as sparse analytic modes and
//! their stress implicitly (the compensator that makes the balance
//! exact up to the analytic-versus-discrete derivative gap). Stepped
//! levels carry a [`StepPipeline`], which can reproduce any sample of
//! the new velocity and stress on demand.
//!
//! [`step`] consumes a state and a [`StepConfig`] and returns the next
//! state plus a [`StepReport`] of everything measured along the way.
//! The perturbation is a sum of amplitude-modulated jets: the stress is
//! mollified in time then space, pointwise amplitudes are read off the
//! cancellation identity, and the oscillation, corrector, and transport
//! pieces are assembled so the successor's discrete residual telescopes
//! to the mollified parent residual plus second-order-in-time terms.
//! [`residual`] is the single gate: it measures the Leray-projected
//! momentum balance of any state the same way, whatever its origin.

mod amplitude;
mod assemble;
mod gap;
mod jetset;
mod mollify;
mod residual;
pub(crate) mod slim;

pub use amplitude::{
    build_amplitudes, cancellation_probe, truncate_amplitudes, AmplitudePointwise,
    CancellationProbe,
};
pub use assemble::{
    closed_form_compensator, path_modal, EnergyIdentity, FlexStress, FlexVector, SampleData,
    StepPipeline, StepReport, StressParts,
};
pub use gap::{energy_gap, EnergyGap, EnergyProfile};
pub use jetset::{JetDir, ModalTimed, StepJets};
pub use mollify::Mollifier;
pub use residual::{residual, temporal_corrector_check, ResidualReport, TemporalCorrectorCheck};
pub use slim::{Ball, Compact, CompactVec, Modal, ModalStress, ModalVector};

use std::rc::Rc;

use crate::jets::{JetBand, JetScales, ProfileConfig};
use crate::noise::OUPath;
use crate::spectral::Grid3;
use crate::Result;

/// A closed-form velocity given as sparse modes over time. The closure
/// returns the modes at time `t`; `dt_order = 1` must return the exact
/// analytic time derivative (the compensating stress absorbs it, so the
/// measured residual is purely the difference-stencil gap).
pub struct AnalyticVelocity {
    pub modes: Box<dyn Fn(f64, u32) -> ModalVector>,
    /// An upper bound on the L² norm of the third time derivative over
    /// the window, used to predict the centred-difference constant.
    pub d3_l2_bound: f64,
}

impl std::fmt::Debug for AnalyticVelocity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticVelocity")
            .field("d3_l2_bound", &self.d3_l2_bound)
            .finish()
    }
}

/// Where a level's velocity comes from.
#[derive(Clone, Debug)]
pub enum VelocitySource {
    /// Identically zero.
    Zero,
    /// Closed-form sparse modes.
    Analytic(Rc<AnalyticVelocity>),
    /// Produced by the step below; samples are replayed on demand.
    Stepped(Rc<StepPipeline>),
}

/// Where a level's stress comes from.
#[derive(Clone, Debug)]
pub enum StressSource {
    /// The closed-form compensator of a closed-form velocity: the
    /// deviatoric quadratic plus the potential of whatever the momentum
    /// balance leaves over. Valid only with [`VelocitySource::Zero`] or
    /// [`VelocitySource::Analytic`].
    Compensator,
    /// The assembled parts of the step below (must be the same step as
    /// the velocity's).
    Stepped(Rc<StepPipeline>),
}

/// One level of the cascade: a velocity-stress pair on a noise window.
///
/// `z` is the spectral truncation of `z_raw` feeding *this* level;
/// `z_raw` is kept so the next step can re-truncate at its own cutoff
/// from the same driving path. Cloning is cheap (shared pipelines).
#[derive(Clone, Debug)]
pub struct LevelState {
    pub q: u32,
    pub grid: Grid3,
    pub nu: f64,
    pub v: VelocitySource,
    pub stress: StressSource,
    pub z: Rc<OUPath>,
    pub z_raw: Rc<OUPath>,
    /// Length of the interior window, in time, starting at `z.t0`.
    pub horizon: f64,
}

impl LevelState {
    pub fn dt(&self) -> f64 {
        self.z.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.z.time(j)
    }

    /// Interior sample range `[start, end]` on the path lattice. The
    /// padding outside it exists to feed mollifier lags and difference
    /// stencils.
    pub fn interior(&self) -> (usize, usize) {
        (
            self.z.index_of(self.z.t0),
            self.z.index_of(self.z.t0 + self.horizon),
        )
    }
}

/// Everything one step needs beyond the state itself.
#[derive(Clone, Debug)]
pub struct StepConfig {
    /// Mollification scale, in time units and space length at once.
    pub ell: f64,
    pub scales: JetScales,
    pub band: JetBand,
    pub profiles: ProfileConfig,
    /// Spectral radius of the amplitude coefficients kept after
    /// truncation. Must stay below the smallest pattern mode.
    pub amp_radius: f64,
    /// Target energy profile for the pacing bracket.
    pub energy: EnergyProfile,
    /// Energy share reserved two levels down (enters the bracket).
    pub delta_next2: f64,
    /// Energy share of the next level (sizes the perturbation).
    pub delta_next: f64,
    /// Spectral cutoff for the next level's noise truncation.
    pub kappa_next: f64,
    /// Extra driving-path seeds for the pacing confidence band; empty
    /// means single-path mode with zero band.
    pub ensemble_seeds: Vec<u64>,
    /// Per-sample cache size of the pipeline.
    pub cache_cap: usize,
}

/// Advance one level. Returns the successor state (which replays its
/// fields lazily through the stored pipeline) and the step's report.
pub fn step(state: LevelState, cfg: &StepConfig) -> Result<(LevelState, StepReport)> {
    let pipe = Rc::new(StepPipeline::new(state, cfg.clone())?);
    let report = pipe.report()?;
    let next = LevelState {
        q: pipe.state.q + 1,
        grid: pipe.grid,
        nu: pipe.state.nu,
        v: VelocitySource::Stepped(Rc::clone(&pipe)),
        stress: StressSource::Stepped(Rc::clone(&pipe)),
        z: Rc::clone(&pipe.z_next),
        z_raw: Rc::clone(&pipe.state.z_raw),
        horizon: pipe.state.horizon,
    };
    Ok((next, report))
}
