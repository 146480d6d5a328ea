//! Per-sample assembly of the perturbation and the replacement stress.
//!
//! A [`StepPipeline`] owns everything one cascade level needs to produce
//! its successor: the mollifier, the jet family, the energy pacing, and a
//! sliding cache of [`SampleData`]. Nothing is precomputed over the whole
//! window; any sample can be (re)built on demand from the level below, so
//! the successor level replays its parent lazily instead of storing dense
//! trajectories.
//!
//! The stress returned by [`StepPipeline::stress_parts`] is organised so
//! that the discrete residual of the successor telescopes: every term of
//! `Dt v1 - z1 - nu Lap v1 + div T(x1 (x) x1)` is matched by the
//! divergence of exactly one part, built with the *same* truncated
//! product rule and the *same* centred difference as the residual uses.
//! What survives is the mollified parent residual plus a transport
//! mismatch quadratic in `dt` (the centred difference of a rotating
//! phase is its analytic derivative times `sinc(m sigma mu dt)`). No
//! inequality is invoked anywhere in the construction; the gates measure
//! what is left, they do not assume it.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use num_complex::Complex64;

use crate::jets::ProfileSet;
use crate::noise::OUPath;
use crate::spectral::{ops, Grid3, ScalarField, StressField, VectorField, SYM_PAIRS};
use crate::{Error, Result, BOX_VOLUME};

use super::amplitude::{build_amplitudes, cancellation_probe, truncate_amplitudes};
use super::gap::{energy_gap, EnergyGap};
use super::jetset::StepJets;
use super::mollify::Mollifier;
use super::slim::{
    compact_curl_curl, compact_laplacian, compact_leray, compact_potential, compact_self_conv,
    compact_stress_div, compact_vec_add_scaled, compact_vec_l2, compact_vec_to_field,
    compact_vec_zeros, sparse_mul, sym_outer_sparse, Ball, Compact, CompactVec, Modal,
    ModalStress, ModalVector,
};
use super::{LevelState, StepConfig, StressSource, VelocitySource};

/// A velocity that is either genuinely sparse (closed-form levels) or
/// compact on a ball (stepped levels).
#[derive(Clone, Debug)]
pub enum FlexVector {
    Modal(ModalVector),
    Compact(CompactVec),
}

impl FlexVector {
    pub fn l2(&self) -> f64 {
        match self {
            FlexVector::Modal(m) => m.l2(),
            FlexVector::Compact(c) => compact_vec_l2(c),
        }
    }

    pub fn as_modal(&self) -> Option<&ModalVector> {
        match self {
            FlexVector::Modal(m) => Some(m),
            FlexVector::Compact(_) => None,
        }
    }

    /// Add into a compact accumulator; every mode must fit its ball.
    pub fn add_into(&self, acc: &mut CompactVec) -> Result<()> {
        match self {
            FlexVector::Modal(m) => {
                for i in 0..3 {
                    acc[i].add_assign_modal(&m.0[i], 1.0)?;
                }
            }
            FlexVector::Compact(c) => {
                for i in 0..3 {
                    let e = c[i].embed(&acc[i].ball.clone());
                    acc[i].add_assign_scaled(&e, 1.0);
                }
            }
        }
        Ok(())
    }

    pub fn realize(&self, grid: Grid3) -> Result<VectorField> {
        match self {
            FlexVector::Modal(m) => m.realize(grid),
            FlexVector::Compact(c) => Ok(compact_vec_to_field(c)),
        }
    }
}

/// A symmetric tensor that is either sparse or dense.
#[derive(Clone, Debug)]
pub enum FlexStress {
    Modal(ModalStress),
    Dense(StressField),
}

impl FlexStress {
    pub fn realize(&self, grid: Grid3) -> Result<StressField> {
        match self {
            FlexStress::Modal(m) => m.realize(grid),
            FlexStress::Dense(s) => Ok(s.clone()),
        }
    }
}

/// Everything the assembly keeps for one time sample. Roughly 20 MB at
/// `n = 128`; the dense amplitude and stress intermediates are transient.
#[derive(Debug)]
pub struct SampleData {
    pub t: f64,
    /// Lagged energy gap entering the amplitudes at this sample.
    pub gamma_ell: f64,
    /// Whether the instantaneous gap was clamped at zero here.
    pub clamped: bool,
    /// Mollified velocity of this level.
    pub v_ell: FlexVector,
    /// Mollified noise of this level.
    pub z_ell: ModalVector,
    /// The successor's (further truncated) noise at this sample.
    pub z_next: ModalVector,
    /// Mollified stress of this level.
    pub r_ell: FlexStress,
    /// Per-direction amplitude squares `T(a^2)` (lossless self
    /// convolutions on the doubled amplitude ball).
    pub q_dir: Vec<Compact>,
    /// Per-direction grouped squares `T(q s^2)`.
    pub g_dir: Vec<Compact>,
    /// Principal perturbation `sum T(a s) xi`.
    pub wp: CompactVec,
    /// Double-curl form `sum curlcurl(T(a v) xi)`; contains `wp` plus
    /// the incompressibility corrector.
    pub wpc: CompactVec,
    /// Temporal corrector `-(1/mu) P_{neq 0} sum T(q s^2) xi`.
    pub wt: CompactVec,
    /// New velocity `v_ell + wpc + wt`.
    pub v1: CompactVec,
    /// Relative spectral mass given up by the amplitude truncation.
    pub amp_tail: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Worst stress distance against the positivity radius.
    pub max_rel_dist: f64,
    /// `int sqrt(ell^2 + |R|_F^2)`, needed by the energy identity.
    pub sqrt_term_integral: f64,
}

impl SampleData {
    pub fn w1(&self) -> CompactVec {
        compact_vec_add_scaled(&self.wpc, &self.wt, 1.0)
    }
}

/// The stress split into named parts by storage kind. Divergences are
/// accumulated part by part so only one dense tensor is alive at a time.
#[derive(Default)]
pub struct StressParts {
    pub compact: Vec<(&'static str, [Compact; 6])>,
    pub modal: Vec<(&'static str, ModalStress)>,
    pub dense: Vec<(&'static str, StressField)>,
}

impl StressParts {
    /// Row divergence of the whole stress as dense spectra.
    pub fn divergence_spec(&self, grid: Grid3) -> Result<[Vec<Complex64>; 3]> {
        let mut acc: [Vec<Complex64>; 3] =
            std::array::from_fn(|_| vec![Complex64::default(); grid.len()]);
        for (_, part) in &self.compact {
            let d = compact_stress_div(part);
            for i in 0..3 {
                d[i].scatter_add(&mut acc[i], 1.0);
            }
        }
        for (_, part) in &self.modal {
            let d = part.divergence();
            for i in 0..3 {
                for (&k, &c) in &d.0[i].0 {
                    if let Some(di) = Ball::spec_index(grid, k) {
                        acc[i][di] += c;
                    } else {
                        return Err(Error::ResolutionError(format!(
                            "stress mode {k:?} exceeds the grid band"
                        )));
                    }
                }
            }
        }
        for (_, part) in &self.dense {
            let d = ops::div_stress(part);
            for i in 0..3 {
                let spec = d.comps[i].spec();
                for (a, b) in acc[i].iter_mut().zip(spec) {
                    *a += b;
                }
            }
        }
        Ok(acc)
    }

    /// Materialise the total stress (used for trace checks and as the
    /// parent stress of the next level).
    pub fn total_field(&self, grid: Grid3) -> Result<StressField> {
        let mut acc: Vec<Vec<Complex64>> =
            (0..6).map(|_| vec![Complex64::default(); grid.len()]).collect();
        for (_, part) in &self.compact {
            for slot in 0..6 {
                part[slot].scatter_add(&mut acc[slot], 1.0);
            }
        }
        for (_, part) in &self.modal {
            for slot in 0..6 {
                for (&k, &c) in &part.0[slot].0 {
                    let di = Ball::spec_index(grid, k).ok_or_else(|| {
                        Error::ResolutionError(format!("stress mode {k:?} exceeds the grid band"))
                    })?;
                    acc[slot][di] += c;
                }
            }
        }
        for (_, part) in &self.dense {
            for slot in 0..6 {
                let spec = part.comps[slot].spec();
                for (a, b) in acc[slot].iter_mut().zip(spec) {
                    *a += b;
                }
            }
        }
        let mut slots = acc.into_iter();
        Ok(StressField::new(std::array::from_fn(|_| {
            ScalarField::from_spec(grid, slots.next().unwrap())
        })))
    }

    /// `L^1` size of every part, for reports.
    pub fn l1_norms(&self, grid: Grid3) -> Result<Vec<(String, f64)>> {
        use crate::spectral::norms::stress_norm;
        use crate::spectral::NormKind;
        let mut out = Vec::new();
        for (name, part) in &self.compact {
            let f = super::slim::compact_stress_to_field(part);
            out.push((name.to_string(), stress_norm(&f, NormKind::Lp(1.0))));
        }
        for (name, part) in &self.modal {
            let f = part.realize(grid)?;
            out.push((name.to_string(), stress_norm(&f, NormKind::Lp(1.0))));
        }
        for (name, part) in &self.dense {
            out.push((name.to_string(), stress_norm(part, NormKind::Lp(1.0))));
        }
        Ok(out)
    }
}

/// Mollified slow fields at one sample, shared between the sample build
/// and the report probes.
struct SlowFields {
    v_ell: FlexVector,
    z_ell: ModalVector,
    z_next: ModalVector,
    r_ell: FlexStress,
    gamma_ell: f64,
    clamped: bool,
}

/// One level's assembly engine.
pub struct StepPipeline {
    pub state: LevelState,
    pub cfg: StepConfig,
    pub grid: Grid3,
    pub moll: Mollifier,
    pub jets: StepJets,
    pub gap: EnergyGap,
    /// The successor's noise path (further spectral truncation of the
    /// same realisation).
    pub z_next: Rc<OUPath>,
    /// Per-direction realized square means of the scalar pattern.
    pub c_bars: [f64; 6],
    /// Amplitude spectra live here.
    pub ball_a: Rc<Ball>,
    /// Amplitude squares live here (doubled radius, lossless).
    pub ball_q: Rc<Ball>,
    /// Perturbations, their products with slow fields, and the new
    /// velocity live here.
    pub ball_main: Rc<Ball>,
    /// Whether dense quadratic products need dealiasing on this grid.
    pub use_padded: bool,
    /// First and last sample of the nominal window.
    pub interior: (usize, usize),
    cache: RefCell<BTreeMap<usize, Rc<SampleData>>>,
    com_modal: RefCell<BTreeMap<usize, Rc<ModalStress>>>,
    com_dense: RefCell<BTreeMap<usize, Rc<StressField>>>,
}

impl std::fmt::Debug for StepPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StepPipeline")
            .field("q", &self.state.q)
            .field("n", &self.grid.n())
            .field("interior", &self.interior)
            .field("cached", &self.cache.borrow().len())
            .finish()
    }
}

/// Sparse spectrum of a noise path at one sample, mirroring the dense
/// realisation mode for mode (representative at `+k`, conjugate at `-k`).
pub fn path_modal(path: &OUPath, j: usize) -> ModalVector {
    let mut out = ModalVector::default();
    for (e, entry) in path.spectrum.entries.iter().enumerate() {
        let amp = [path.mode_state(j, e, 0), path.mode_state(j, e, 1)];
        for c in 0..3 {
            let zk = amp[0] * entry.pol[0][c] + amp[1] * entry.pol[1][c];
            let neg = [-entry.k[0], -entry.k[1], -entry.k[2]];
            out.0[c].insert_add(entry.k, zk);
            out.0[c].insert_add(neg, zk.conj());
        }
    }
    out
}

/// The stress that makes a closed-form pair `(v, z)` an exact solution:
/// the deviatoric quadratic plus a potential absorbing whatever the
/// analytic time derivative, the noise term, and dissipation leave in
/// the momentum balance.
pub fn closed_form_compensator(
    v: &ModalVector,
    dv: &ModalVector,
    z: &ModalVector,
    nu: f64,
) -> ModalStress {
    let x = v.add(z);
    let quad = x.sym_outer(&x).deviatoric();
    let leftover = dv
        .add_scaled(z, -1.0)
        .add_scaled(&v.laplacian(), -nu);
    quad.add_scaled(&leftover.leray().potential(), 1.0)
}

fn scale_slots(s: &mut [Compact; 6], factor: f64) {
    for slot in s.iter_mut() {
        *slot = slot.scale(factor);
    }
}

fn compact_vec_scale(v: &CompactVec, s: f64) -> CompactVec {
    std::array::from_fn(|i| v[i].scale(s))
}

impl StepPipeline {
    pub fn new(state: LevelState, cfg: StepConfig) -> Result<StepPipeline> {
        let grid = state.grid;
        let dt = state.z.dt;
        if state.z.nu != state.nu {
            return Err(Error::StructuralError(format!(
                "noise path viscosity {} disagrees with the level's {}",
                state.z.nu, state.nu
            )));
        }
        cfg.energy.validate()?;
        if !(cfg.kappa_next > 0.0) {
            return Err(Error::ConfigError(
                "next-level spectral cutoff must be positive".into(),
            ));
        }
        if !(cfg.delta_next > 0.0) {
            return Err(Error::ConfigError(
                "next-level energy share must be positive".into(),
            ));
        }

        let moll = Mollifier::new(grid, cfg.ell, dt)?;
        let profiles = ProfileSet::build(cfg.profiles)?;
        let jets = StepJets::build(profiles, cfg.scales, cfg.band, grid)?;

        // The amplitude band must sit strictly inside the smallest
        // pattern mode so every perturbation product is mean-free by
        // construction (no pairing can reach the zero mode).
        if !(cfg.amp_radius > 0.0 && cfg.amp_radius < jets.min_pattern_norm()) {
            return Err(Error::StructuralError(format!(
                "amplitude radius {} must lie in (0, {}) so the perturbation is mean-free",
                cfg.amp_radius,
                jets.min_pattern_norm()
            )));
        }
        // The amplitude square must be lossless on this grid, else the
        // grouped square bookkeeping breaks.
        let limit = grid.max_wavenumber() as f64;
        if 2.0 * cfg.amp_radius > limit {
            return Err(Error::ResolutionError(format!(
                "amplitude squares reach radius {} beyond the grid band {}",
                2.0 * cfg.amp_radius,
                limit
            )));
        }

        let c_bars: [f64; 6] = std::array::from_fn(|d| jets.dirs[d].c_bar);

        // Ball radii from the measured band extents. `r_slow` bounds the
        // closed-form sources (noise plus any analytic velocity);
        // stepped parents hand over their own ball radius.
        let r_pattern = jets.max_pattern_norm();
        let mut ssq_max = 0.0f64;
        for d in &jets.dirs {
            ssq_max = ssq_max.max(d.s_sq.max_norm());
        }
        let r_u = cfg.amp_radius + r_pattern;
        let r_g = 2.0 * cfg.amp_radius + ssq_max;
        let mut r_slow = state.z.spectrum.max_wavenumber();
        if let VelocitySource::Analytic(a) = &state.v {
            let m = (a.modes)(state.z.time(0), 0);
            if !m.0.iter().all(|c| c.mean().norm_sqr() == 0.0) {
                return Err(Error::StructuralError(
                    "analytic velocity must be mean-free".into(),
                ));
            }
            let axis_max = m.0.iter().map(Modal::max_wavenumber).max().unwrap_or(0);
            r_slow = r_slow.max(axis_max as f64 * 3f64.sqrt());
        }
        let mut r_core = r_u.max(r_g).max(r_slow);
        if let VelocitySource::Stepped(parent) = &state.v {
            r_core = r_core.max(parent.ball_main.radius());
        }
        let r_main = r_core + r_slow + 0.25;

        let ball_a = Ball::new(grid, cfg.amp_radius);
        let ball_q = Ball::new(grid, 2.0 * cfg.amp_radius);
        let ball_main = Ball::new(grid, r_main);

        // Dense quadratic products of ball-limited content leave the
        // band only when twice the per-axis extent does; pad exactly
        // then. (Padded and unpadded agree wherever both are exact.)
        let b_axis = (r_main.floor() as i64).min(grid.max_wavenumber());
        let use_padded = 2 * b_axis > grid.max_wavenumber();

        let z_next = Rc::new(state.z_raw.truncate(cfg.kappa_next));
        if z_next.len() != state.z.len() || z_next.dt != dt {
            return Err(Error::StructuralError(
                "truncated noise path lost its sample lattice".into(),
            ));
        }

        let interior = state.interior();
        let max_lag = moll.max_lag();
        if interior.0 < max_lag + 1 {
            return Err(Error::WindowError(format!(
                "window pad {} cannot cover mollifier lags {} plus a difference stencil",
                interior.0, max_lag
            )));
        }
        if interior.1 + 1 >= state.z.len() {
            return Err(Error::WindowError(
                "window pad misses the trailing difference stencil".into(),
            ));
        }

        let mut pipe = StepPipeline {
            state,
            cfg,
            grid,
            moll,
            jets,
            gap: EnergyGap {
                gamma: Vec::new(),
                gamma_ell: Vec::new(),
                first_valid: 0,
                clamp_count: 0,
                ci_half_width: 0.0,
                mean_sq: Vec::new(),
            },
            z_next,
            c_bars,
            ball_a,
            ball_q,
            ball_main,
            use_padded,
            interior,
            cache: RefCell::new(BTreeMap::new()),
            com_modal: RefCell::new(BTreeMap::new()),
            com_dense: RefCell::new(BTreeMap::new()),
        };
        pipe.gap = pipe.build_gap()?;
        Ok(pipe)
    }

    pub fn dt(&self) -> f64 {
        self.state.z.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.state.z.time(j)
    }

    pub fn z_modal(&self, j: usize) -> ModalVector {
        path_modal(&self.state.z, j)
    }

    pub fn z_next_modal(&self, j: usize) -> ModalVector {
        path_modal(&self.z_next, j)
    }

    /// This level's velocity at a sample, in whichever form it exists.
    pub fn v_state(&self, j: usize) -> Result<FlexVector> {
        match &self.state.v {
            VelocitySource::Zero => Ok(FlexVector::Modal(ModalVector::default())),
            VelocitySource::Analytic(a) => Ok(FlexVector::Modal((a.modes)(self.time(j), 0))),
            VelocitySource::Stepped(parent) => {
                Ok(FlexVector::Compact(parent.sample(j)?.v1.clone()))
            }
        }
    }

    /// Energy pacing over the whole sample lattice, optionally averaged
    /// over an ensemble of independent noise re-draws.
    fn build_gap(&self) -> Result<EnergyGap> {
        let len = self.state.z.len();
        let times: Vec<f64> = (0..len).map(|j| self.time(j)).collect();
        let base = self.mean_sq_for_path(&self.state.z)?;
        let (mean_sq, ci) = if self.cfg.ensemble_seeds.is_empty() {
            (base, 0.0)
        } else {
            let mut rows = vec![base];
            for &seed in &self.cfg.ensemble_seeds {
                let path = self.state.z.reseeded(seed);
                rows.push(self.mean_sq_for_path(&path)?);
            }
            let m = rows.len() as f64;
            let mut mean = vec![0.0; len];
            let mut var = vec![0.0; len];
            for row in &rows {
                for (a, &b) in mean.iter_mut().zip(row) {
                    *a += b / m;
                }
            }
            for row in &rows {
                for j in 0..len {
                    var[j] += (row[j] - mean[j]).powi(2) / (m - 1.0).max(1.0);
                }
            }
            let worst_se = var
                .iter()
                .map(|v| (v / m).sqrt())
                .fold(0.0f64, f64::max);
            (mean, 3.0 * worst_se)
        };
        energy_gap(
            &self.cfg.energy,
            self.cfg.delta_next2,
            &times,
            &mean_sq,
            ci,
            &self.moll,
        )
    }

    /// Per-sample `||v_q + z_q||^2`. A stepped parent only exists from
    /// its own mollifier depth onward; the unreachable leading pad is
    /// frozen at the first defined value (those samples influence
    /// nothing but the lagged average's warm-up).
    fn mean_sq_for_path(&self, path: &OUPath) -> Result<Vec<f64>> {
        let len = path.len();
        let start = match &self.state.v {
            VelocitySource::Stepped(parent) => parent.moll.max_lag(),
            _ => 0,
        };
        let mut out = vec![0.0; len];
        for j in start..len {
            let z = path_modal(path, j);
            out[j] = match &self.state.v {
                VelocitySource::Zero => z.l2().powi(2),
                VelocitySource::Analytic(a) => {
                    let v = (a.modes)(self.time(j), 0);
                    v.add(&z).l2().powi(2)
                }
                VelocitySource::Stepped(parent) => {
                    let v1 = &parent.sample(j)?.v1;
                    let mut x = v1.clone();
                    for i in 0..3 {
                        x[i].add_assign_modal(&z.0[i], 1.0)?;
                    }
                    compact_vec_l2(&x).powi(2)
                }
            };
        }
        for j in 0..start {
            out[j] = out[start];
        }
        Ok(out)
    }

    /// Fetch (or build) the sample, keeping a sliding window in cache.
    pub fn sample(&self, j: usize) -> Result<Rc<SampleData>> {
        if let Some(hit) = self.cache.borrow().get(&j) {
            return Ok(Rc::clone(hit));
        }
        let built = Rc::new(self.build_sample(j)?);
        let mut cache = self.cache.borrow_mut();
        cache.insert(j, Rc::clone(&built));
        while cache.len() > self.cfg.cache_cap.max(3) {
            let evict = *cache
                .keys()
                .max_by_key(|&&k| (k as i64 - j as i64).unsigned_abs())
                .expect("cache is nonempty");
            cache.remove(&evict);
        }
        Ok(built)
    }

    /// Closed-form stress of a raw (not previously stepped) level: the
    /// deviatoric quadratic plus the potential of whatever the momentum
    /// equation leaves over, with the analytic time derivative.
    fn compensator_modal(&self, j: usize) -> Result<ModalStress> {
        let t = self.time(j);
        let z = self.z_modal(j);
        let (v, dv) = match &self.state.v {
            VelocitySource::Zero => (ModalVector::default(), ModalVector::default()),
            VelocitySource::Analytic(a) => ((a.modes)(t, 0), (a.modes)(t, 1)),
            VelocitySource::Stepped(_) => {
                return Err(Error::StructuralError(
                    "a stepped level carries its own stress; no compensator exists".into(),
                ))
            }
        };
        Ok(closed_form_compensator(&v, &dv, &z, self.state.nu))
    }

    /// Time-then-space mollification of the level's slow fields at `j`.
    fn slow_fields(&self, j: usize) -> Result<SlowFields> {
        self.moll.check_history(j)?;
        let lags = self.moll.lags().to_vec();

        let z_ell = {
            let tm = self.moll.time_modal_vector(j, |i| self.z_modal(i))?;
            self.moll.space_modal_vector(&tm)
        };
        let z_next = self.z_next_modal(j);

        let v_ell = match &self.state.v {
            VelocitySource::Zero => FlexVector::Modal(ModalVector::default()),
            VelocitySource::Analytic(a) => {
                let tm = self
                    .moll
                    .time_modal_vector(j, |i| (a.modes)(self.time(i), 0))?;
                FlexVector::Modal(self.moll.space_modal_vector(&tm))
            }
            VelocitySource::Stepped(parent) => {
                let mut acc: Option<CompactVec> = None;
                for &(i, w) in &lags {
                    let s = parent.sample(j - i)?;
                    match &mut acc {
                        None => acc = Some(compact_vec_scale(&s.v1, w)),
                        Some(a) => {
                            for c in 0..3 {
                                a[c].add_assign_scaled(&s.v1[c], w);
                            }
                        }
                    }
                }
                let acc = acc.expect("mollifier has at least one lag");
                FlexVector::Compact(std::array::from_fn(|c| self.moll.space_compact(&acc[c])))
            }
        };

        let r_ell = match &self.state.stress {
            StressSource::Compensator => {
                let mut acc = ModalStress::default();
                for &(i, w) in &lags {
                    acc.add_assign_scaled(&self.compensator_modal(j - i)?, w);
                }
                FlexStress::Modal(ModalStress(std::array::from_fn(|s| {
                    self.moll.space_modal(&acc.0[s])
                })))
            }
            StressSource::Stepped(parent) => {
                let mut acc: Vec<Vec<Complex64>> =
                    (0..6).map(|_| vec![Complex64::default(); self.grid.len()]).collect();
                for &(i, w) in &lags {
                    let s = parent.stress_at(j - i)?;
                    for slot in 0..6 {
                        for (a, b) in acc[slot].iter_mut().zip(s.comps[slot].spec()) {
                            *a += b * w;
                        }
                    }
                }
                let mut slots = acc.into_iter();
                FlexStress::Dense(StressField::new(std::array::from_fn(|_| {
                    self.moll
                        .space_field(&ScalarField::from_spec(self.grid, slots.next().unwrap()))
                })))
            }
        };

        let gamma_ell = *self.gap.gamma_ell.get(j).ok_or_else(|| {
            Error::WindowError(format!("sample {j} outside the energy window"))
        })?;
        let clamped = self.gap.gamma.get(j).is_some_and(|&g| g == 0.0);

        Ok(SlowFields {
            v_ell,
            z_ell,
            z_next,
            r_ell,
            gamma_ell,
            clamped,
        })
    }

    fn build_sample(&self, j: usize) -> Result<SampleData> {
        let sf = self.slow_fields(j)?;
        let t = self.time(j);
        let mu = self.cfg.scales.mu;

        let r_dense = sf.r_ell.realize(self.grid)?;
        let ap = build_amplitudes(&r_dense, sf.gamma_ell, self.cfg.ell, &self.c_bars)?;
        drop(r_dense);
        let (amps, amp_tail) = truncate_amplitudes(&ap, &self.ball_a);
        let diag = (
            ap.rho_min,
            ap.rho_max,
            ap.max_rel_dist,
            ap.sqrt_term_integral,
        );
        drop(ap);

        let mut wp = compact_vec_zeros(&self.ball_main);
        let mut pot = compact_vec_zeros(&self.ball_main);
        let mut gv = compact_vec_zeros(&self.ball_main);
        let mut q_dir = Vec::with_capacity(6);
        let mut g_dir = Vec::with_capacity(6);
        for d in 0..6 {
            let dir = &self.jets.dirs[d];
            let u = sparse_mul(&amps[d], &dir.s.at(t, 0), &self.ball_main);
            let p = sparse_mul(&amps[d], &dir.v_pot.at(t, 0), &self.ball_main);
            let q = compact_self_conv(&amps[d], &self.ball_q);
            let g = sparse_mul(&q, &dir.s_sq.at(t, 0), &self.ball_main);
            for i in 0..3 {
                wp[i].add_assign_scaled(&u, dir.xi[i]);
                pot[i].add_assign_scaled(&p, dir.xi[i]);
                gv[i].add_assign_scaled(&g, dir.xi[i]);
            }
            q_dir.push(q);
            g_dir.push(g);
        }
        let wpc = compact_curl_curl(&pot);
        let wt = compact_vec_scale(&compact_leray(&gv), -1.0 / mu);

        let mut v1 = compact_vec_add_scaled(&wpc, &wt, 1.0);
        sf.v_ell.add_into(&mut v1)?;

        Ok(SampleData {
            t,
            gamma_ell: sf.gamma_ell,
            clamped: sf.clamped,
            v_ell: sf.v_ell,
            z_ell: sf.z_ell,
            z_next: sf.z_next,
            r_ell: sf.r_ell,
            q_dir,
            g_dir,
            wp,
            wpc,
            wt,
            v1,
            amp_tail,
            rho_min: diag.0,
            rho_max: diag.1,
            max_rel_dist: diag.2,
            sqrt_term_integral: diag.3,
        })
    }

    pub fn dense_sym(&self, u: &VectorField, w: &VectorField) -> StressField {
        ops::sym_tensor_product(u, w, self.use_padded)
    }

    /// The level's own quadratic `T((v_q + z_q) (x) (v_q + z_q))` at a
    /// sample, cached for the mollified-history part of the stress. The
    /// routes here must be byte-identical to what the parent's residual
    /// uses, which is why a stepped parent's own product policy is
    /// reused.
    fn quad_modal(&self, j: usize) -> Result<Rc<ModalStress>> {
        if let Some(hit) = self.com_modal.borrow().get(&j) {
            return Ok(Rc::clone(hit));
        }
        let v = match &self.state.v {
            VelocitySource::Zero => ModalVector::default(),
            VelocitySource::Analytic(a) => (a.modes)(self.time(j), 0),
            VelocitySource::Stepped(_) => unreachable!("dense history handled separately"),
        };
        let x = v.add(&self.z_modal(j));
        let quad = Rc::new(x.sym_outer(&x));
        self.com_modal.borrow_mut().insert(j, Rc::clone(&quad));
        Ok(quad)
    }

    fn quad_dense(&self, j: usize) -> Result<Rc<StressField>> {
        if let Some(hit) = self.com_dense.borrow().get(&j) {
            return Ok(Rc::clone(hit));
        }
        let parent = match &self.state.v {
            VelocitySource::Stepped(p) => p,
            _ => unreachable!("sparse history handled separately"),
        };
        let v1 = parent.sample(j)?.v1.clone();
        let vf = compact_vec_to_field(&v1);
        let zf = self.state.z.field_at(self.grid, j)?;
        let xf = VectorField::new(std::array::from_fn(|i| vf.comps[i].add(&zf.comps[i])));
        let quad = Rc::new(parent.dense_sym(&xf, &xf));
        let mut cache = self.com_dense.borrow_mut();
        cache.insert(j, Rc::clone(&quad));
        while cache.len() > (self.moll.max_lag() + 4).max(self.cfg.cache_cap) {
            let evict = *cache
                .keys()
                .max_by_key(|&&k| (k as i64 - j as i64).unsigned_abs())
                .expect("cache is nonempty");
            cache.remove(&evict);
        }
        Ok(quad)
    }

    /// Assemble the replacement stress at sample `j` as named parts.
    pub fn stress_parts(&self, j: usize) -> Result<StressParts> {
        let dm = self.sample(j - 1)?;
        let d0 = self.sample(j)?;
        let dp = self.sample(j + 1)?;
        let dt = self.dt();
        let inv2 = 1.0 / (2.0 * dt);
        let mu = self.cfg.scales.mu;
        let t = self.time(j);
        let mut parts = StressParts::default();

        // Linear part: potential of the transport-plus-dissipation
        // leftovers, with the same centred difference the residual uses.
        let w1 = d0.w1();
        let lap = compact_laplacian(&w1);
        let lin_vec: CompactVec = std::array::from_fn(|i| {
            dp.wpc[i]
                .sub(&dm.wpc[i])
                .scale(inv2)
                .add_scaled(&lap[i], -self.state.nu)
        });
        parts.compact.push(("lin", compact_potential(&lin_vec)));

        // Advection of the perturbation by the slow flow.
        let x_modal = d0.v_ell.as_modal().map(|vm| vm.add(&d0.z_ell));
        match &x_modal {
            Some(xm) => {
                let w2 = compact_vec_scale(&w1, 2.0);
                let mut adv = sym_outer_sparse(&w2, xm, &self.ball_main);
                adv = super::slim::compact_deviatoric(&adv);
                parts.compact.push(("lin_adv", adv));
            }
            None => {
                let xf = self.x_ell_field(&d0)?;
                let w1f = compact_vec_to_field(&w1);
                let s = self.dense_sym(&w1f, &xf).scale(2.0);
                parts.dense.push(("lin_adv", s.deviatoric()));
            }
        }

        // Corrector quadratic: everything of `w1 (x) w1` that is not the
        // principal square.
        {
            let a_vec: CompactVec = std::array::from_fn(|i| {
                d0.wpc[i].sub(&d0.wp[i]).add_scaled(&d0.wt[i], 1.0)
            });
            let a2b: CompactVec =
                std::array::from_fn(|i| a_vec[i].add_scaled(&d0.wp[i], 2.0));
            let af = compact_vec_to_field(&a_vec);
            let a2bf = compact_vec_to_field(&a2b);
            let s = self.dense_sym(&af, &a2bf);
            parts.dense.push(("cor", s.deviatoric()));
        }

        // Spatial oscillation: one bilinear antidivergence per direction
        // against the mean-free square pattern.
        {
            let mut acc: Option<[Compact; 6]> = None;
            for d in 0..6 {
                let dir = &self.jets.dirs[d];
                let h = dir.s_sq.at(t, 0).remove_mean();
                let grad_q: CompactVec =
                    std::array::from_fn(|a| d0.q_dir[d].derivative(a));
                let b = self.bilinear_antidiv_sparse(&grad_q, &h, dir.xi)?;
                match &mut acc {
                    None => acc = Some(b),
                    Some(a) => {
                        for slot in 0..6 {
                            a[slot].add_assign_scaled(&b[slot], 1.0);
                        }
                    }
                }
            }
            let acc = acc.expect("six directions");
            parts
                .compact
                .push(("osc_x", super::slim::compact_deviatoric(&acc)));
        }

        // Temporal oscillation: potential of the centred difference of
        // the amplitude squares against the half-sum of the pattern
        // squares (the discrete product rule makes this pairing exact).
        {
            let mut tv = compact_vec_zeros(&self.ball_main);
            for d in 0..6 {
                let dir = &self.jets.dirs[d];
                let sbar = dir
                    .s_sq
                    .at(t + dt, 0)
                    .add_scaled(&dir.s_sq.at(t - dt, 0), 1.0)
                    .scale(0.5);
                let dtq = dp.q_dir[d].sub(&dm.q_dir[d]).scale(inv2);
                let m = sparse_mul(&dtq, &sbar, &self.ball_main);
                for i in 0..3 {
                    tv[i].add_assign_scaled(&m, dir.xi[i]);
                }
            }
            let tv: CompactVec = std::array::from_fn(|i| tv[i].remove_mean());
            let mut osc_t = compact_potential(&tv);
            scale_slots(&mut osc_t, -1.0 / mu);
            parts.compact.push(("osc_t", osc_t));
        }

        // Cross closure: the dense principal square minus its grouped
        // per-direction bookkeeping (absorbs cross-direction products
        // and any residue of the product-rule associativity).
        {
            let wpf = compact_vec_to_field(&d0.wp);
            let dense = self.dense_sym(&wpf, &wpf);
            let mut slots: Vec<Vec<Complex64>> = (0..6)
                .map(|slot| dense.comps[slot].spec().to_vec())
                .collect();
            for d in 0..6 {
                let xi = self.jets.dirs[d].xi;
                for slot in 0..6 {
                    let (a, b) = SYM_PAIRS[slot];
                    d0.g_dir[d].scatter_add(&mut slots[slot], -xi[a] * xi[b]);
                }
            }
            let mut it = slots.into_iter();
            let s = StressField::new(std::array::from_fn(|_| {
                ScalarField::from_spec(self.grid, it.next().unwrap())
            }));
            parts.dense.push(("cross", s.deviatoric()));
        }

        // Band closure: the amplitude squares against the direction
        // dyads, plus the mollified parent stress. Both are trace-free
        // already; the pressure absorbs the scalar `rho` exactly, so it
        // never appears here.
        {
            let band: [Compact; 6] = std::array::from_fn(|slot| {
                let (a, b) = SYM_PAIRS[slot];
                let mut acc = Compact::zeros(&self.ball_q);
                for d in 0..6 {
                    let xi = self.jets.dirs[d].xi;
                    let dyad = xi[a] * xi[b] - if a == b { 1.0 / 3.0 } else { 0.0 };
                    acc.add_assign_scaled(&d0.q_dir[d], self.c_bars[d] * dyad);
                }
                acc
            });
            parts.compact.push(("band", band));
            match &d0.r_ell {
                FlexStress::Modal(m) => parts.modal.push(("slow", m.clone())),
                FlexStress::Dense(s) => parts.dense.push(("slow", s.clone())),
            }
        }

        // Mollification commutator: the lagged-state quadratic minus the
        // mollified history of the level's own quadratic.
        match &x_modal {
            Some(xm) => {
                let mut hist = ModalStress::default();
                for &(i, w) in self.moll.lags() {
                    hist.add_assign_scaled(&*self.quad_modal(j - i)?, w);
                }
                let hist =
                    ModalStress(std::array::from_fn(|s| self.moll.space_modal(&hist.0[s])));
                let acc = xm.sym_outer(xm).sub(&hist);
                parts.modal.push(("com", acc.deviatoric()));
            }
            None => {
                let xf = self.x_ell_field(&d0)?;
                let tq = self.dense_sym(&xf, &xf);
                let mut hist: Vec<Vec<Complex64>> =
                    (0..6).map(|_| vec![Complex64::default(); self.grid.len()]).collect();
                for &(i, w) in self.moll.lags() {
                    let q = self.quad_dense(j - i)?;
                    for slot in 0..6 {
                        for (a, b) in hist[slot].iter_mut().zip(q.comps[slot].spec()) {
                            *a += b * w;
                        }
                    }
                }
                let mut slots: Vec<Vec<Complex64>> = (0..6)
                    .map(|slot| tq.comps[slot].spec().to_vec())
                    .collect();
                for slot in 0..6 {
                    let sm = self
                        .moll
                        .space_field(&ScalarField::from_spec(self.grid, hist[slot].clone()));
                    for (a, b) in slots[slot].iter_mut().zip(sm.spec()) {
                        *a -= b;
                    }
                }
                let mut it = slots.into_iter();
                let s = StressField::new(std::array::from_fn(|_| {
                    ScalarField::from_spec(self.grid, it.next().unwrap())
                }));
                parts.dense.push(("com", s.deviatoric()));
            }
        }

        // Noise replacement: products with the truncation increment plus
        // the potential of the increment itself (which also swaps the
        // forcing term of the momentum equation to the new noise).
        {
            let delta = d0.z_next.sub(&d0.z_ell);
            let v2 = compact_vec_scale(&d0.v1, 2.0);
            let cross = sym_outer_sparse(&v2, &delta, &self.ball_main);
            parts
                .compact
                .push(("com1", super::slim::compact_deviatoric(&cross)));

            let mut slow = d0.z_ell.sym_outer(&delta).scale(2.0);
            slow.add_assign_scaled(&delta.sym_outer(&delta), 1.0);
            let mut m = slow.deviatoric();
            m.add_assign_scaled(&d0.z_ell.sub(&d0.z_next).potential(), 1.0);
            parts.modal.push(("com1_slow", m));
        }

        Ok(parts)
    }

    /// Realised `v_ell + z_ell` for the dense branches.
    fn x_ell_field(&self, d0: &SampleData) -> Result<VectorField> {
        let vf = d0.v_ell.realize(self.grid)?;
        let zf = d0.z_ell.realize(self.grid)?;
        Ok(VectorField::new(std::array::from_fn(|i| {
            vf.comps[i].add(&zf.comps[i])
        })))
    }

    /// The total stress at a sample (dense).
    pub fn stress_at(&self, j: usize) -> Result<StressField> {
        self.stress_parts(j)?.total_field(self.grid)
    }

    /// Diagnostics at the mid-window sample, including the probes that
    /// need dense per-point data.
    pub fn report(&self) -> Result<StepReport> {
        let jr = (self.interior.0 + self.interior.1) / 2;
        let d0 = self.sample(jr)?;
        let t = self.time(jr);

        // Pointwise decomposition probe against the untruncated
        // amplitudes (rebuilt transiently; the cached sample only keeps
        // the truncated spectra).
        let sf = self.slow_fields(jr)?;
        let r_dense = sf.r_ell.realize(self.grid)?;
        let ap = build_amplitudes(&r_dense, sf.gamma_ell, self.cfg.ell, &self.c_bars)?;
        let probe = cancellation_probe(&ap, &r_dense, &self.c_bars);
        let (amps, _) = truncate_amplitudes(&ap, &self.ball_a);
        drop(ap);
        drop(r_dense);

        let w1 = d0.w1();
        let wc: CompactVec = std::array::from_fn(|i| d0.wpc[i].sub(&d0.wp[i]));
        let w_l2 = compact_vec_l2(&w1);
        let w_mean_abs = w1
            .iter()
            .map(|c| c.zero_mode().norm())
            .fold(0.0f64, f64::max);
        let w_divfree_rel = {
            let mut div = Compact::zeros(&self.ball_main);
            for i in 0..3 {
                div.add_assign_scaled(&w1[i].derivative(i), 1.0);
            }
            if w_l2 > 0.0 {
                div.l2() / w_l2
            } else {
                0.0
            }
        };

        let corrector_two_route_rel = self.corrector_two_route(jr, &amps, &d0)?;

        // Pacing identity at this sample: the principal square carries
        // the gap, the pointwise square root, and the grouped-square
        // bookkeeping. The closures measure what the truncated
        // amplitudes and overlapping supports actually leave behind.
        let energy = {
            let principal_sq = compact_vec_l2(&d0.wp).powi(2);
            let gamma_term = 3.0 * BOX_VOLUME * d0.gamma_ell;
            let sqrt_term = 6.0 * d0.sqrt_term_integral;
            let mut grouped_tail_term = 0.0;
            let mut diag_sq = 0.0;
            for d in 0..6 {
                let q0 = d0.q_dir[d].zero_mode().re;
                let g0 = d0.g_dir[d].zero_mode().re;
                grouped_tail_term += BOX_VOLUME * (g0 - self.c_bars[d] * q0);
                let u = sparse_mul(&amps[d], &self.jets.dirs[d].s.at(t, 0), &self.ball_main);
                diag_sq += u.l2().powi(2);
            }
            let defect = principal_sq - gamma_term - sqrt_term - grouped_tail_term;
            let denom = principal_sq
                .abs()
                .max(gamma_term.abs())
                .max(sqrt_term.abs())
                .max(1e-300);
            let rho_integral = 2.0 * d0.sqrt_term_integral + BOX_VOLUME * d0.gamma_ell;
            let trace_budget = (0..6)
                .map(|d| self.c_bars[d] * BOX_VOLUME * d0.q_dir[d].zero_mode().re)
                .sum::<f64>()
                - 3.0 * rho_integral;
            EnergyIdentity {
                principal_sq,
                gamma_term,
                sqrt_term,
                grouped_tail_term,
                defect,
                defect_rel: defect.abs() / denom,
                cross_energy: principal_sq - diag_sq,
                trace_budget,
            }
        };

        let parts = self.stress_parts(jr)?;
        let part_l1 = parts.l1_norms(self.grid)?;
        let total = parts.total_field(self.grid)?;
        let stress_trace_rel = total.relative_trace_residual();

        let (e_lo, e_hi) = self.cfg.energy.bounds();
        let e_mid = 0.5 * (e_lo + e_hi);
        let m0_ratio = if self.cfg.delta_next > 0.0 && e_mid > 0.0 {
            w_l2 / (self.cfg.delta_next * e_mid).sqrt()
        } else {
            0.0
        };

        Ok(StepReport {
            level_from: self.state.q,
            grid_n: self.grid.n(),
            nu: self.state.nu,
            dt: self.dt(),
            ell: self.cfg.ell,
            lambda: self.cfg.scales.lambda,
            r_perp: self.cfg.scales.r_perp,
            r_par: self.cfg.scales.r_par,
            mu: self.cfg.scales.mu,
            sigma: self.jets.sigma,
            band_axial: self.jets.band.m_axial,
            band_planar: self.jets.band.m_planar,
            amp_radius: self.cfg.amp_radius,
            c_bar_family: self.jets.c_bar,
            c_bar_dirs: self.c_bars,
            placement_min_margin: self.jets.placement.min_margin,
            placement_infeasible_pairs: self.jets.placement.infeasible_pairs.len(),
            interior: self.interior,
            report_sample: jr,
            gamma_ell: d0.gamma_ell,
            gamma_clamped_samples: self.gap.clamp_count,
            energy_ci_half_width: self.gap.ci_half_width,
            rho_min: d0.rho_min,
            rho_max: d0.rho_max,
            max_rel_dist: d0.max_rel_dist,
            amp_tail: d0.amp_tail,
            cancellation_max_rel: probe.max_rel,
            cancellation_trace_rel: probe.trace_max_rel,
            wp_l2: compact_vec_l2(&d0.wp),
            wc_l2: compact_vec_l2(&wc),
            wt_l2: compact_vec_l2(&d0.wt),
            w_l2,
            v1_l2: compact_vec_l2(&d0.v1),
            w_mean_abs,
            w_divfree_rel,
            corrector_two_route_rel,
            stress_trace_rel,
            part_l1,
            energy,
            kappa_next: self.cfg.kappa_next,
            delta_next: self.cfg.delta_next,
            m0_ratio,
        })
    }

    /// The double-curl route against the expanded product-rule route,
    /// both dense: `curlcurl(a V) = a(W + W^c) + curl(grad a x V) +
    /// grad a x curl V`. Everything stays inside the band, so the two
    /// agree to rounding when the scattered patterns, the sparse
    /// products, and the dense calculus are mutually consistent.
    fn corrector_two_route(
        &self,
        j: usize,
        amps: &[Compact; 6],
        d0: &SampleData,
    ) -> Result<f64> {
        use crate::jets::VectorPattern;
        let t = self.time(j);
        let mul: fn(&ScalarField, &ScalarField) -> ScalarField = if self.use_padded {
            ops::mul_dealiased
        } else {
            ops::mul_unpadded
        };
        let cross = |a: &VectorField, b: &VectorField| -> VectorField {
            VectorField::new([
                mul(&a.comps[1], &b.comps[2]).sub(&mul(&a.comps[2], &b.comps[1])),
                mul(&a.comps[2], &b.comps[0]).sub(&mul(&a.comps[0], &b.comps[2])),
                mul(&a.comps[0], &b.comps[1]).sub(&mul(&a.comps[1], &b.comps[0])),
            ])
        };

        let mut acc = VectorField::zeros(self.grid);
        for d in 0..6 {
            let wf = self
                .jets
                .family
                .scatter_vector(self.grid, d, VectorPattern::W, self.jets.band, t, 0)?;
            let wcf = self.jets.family.scatter_vector(
                self.grid,
                d,
                VectorPattern::WCorrector,
                self.jets.band,
                t,
                0,
            )?;
            let vf = self
                .jets
                .family
                .scatter_vector(self.grid, d, VectorPattern::V, self.jets.band, t, 0)?;
            let af = amps[d].to_field();
            let ga = ops::gradient(&af);
            for i in 0..3 {
                acc.comps[i] = acc.comps[i]
                    .add(&mul(&af, &wf.comps[i]))
                    .add(&mul(&af, &wcf.comps[i]));
            }
            acc = acc.add(&ops::curl(&cross(&ga, &vf)));
            acc = acc.add(&cross(&ga, &ops::curl(&vf)));
        }
        let route_a = compact_vec_to_field(&d0.wpc);
        let diff = acc.sub(&route_a);
        let denom = crate::spectral::norms::vector_norm(&route_a, crate::spectral::NormKind::Lp(2.0));
        let num = crate::spectral::norms::vector_norm(&diff, crate::spectral::NormKind::Lp(2.0));
        Ok(if denom > 0.0 { num / denom } else { num })
    }

    /// Sparse mirror of the dense bilinear antidivergence for `v` a
    /// compact vector and `A = h xi (x) xi` with `h` mean-free sparse.
    /// Same potentials, same correction, same antisymmetry fix; products
    /// drop the identical out-of-band pairings. Its divergence is
    /// `T(vA) - mean` exactly, pairing by pairing.
    fn bilinear_antidiv_sparse(
        &self,
        v: &CompactVec,
        h: &Modal,
        xi: [f64; 3],
    ) -> Result<[Compact; 6]> {
        let out_ball = &self.ball_main;

        // Column potentials M_j = R(A e_j) of A = h xi (x) xi.
        let col_pot: Vec<ModalStress> = (0..3)
            .map(|jc| {
                let col = ModalVector(std::array::from_fn(|i| h.scale(xi[i] * xi[jc])));
                col.potential()
            })
            .collect();

        let dv: Vec<CompactVec> =
            (0..3).map(|i| std::array::from_fn(|k| v[i].derivative(k))).collect();

        // T1 columns and the correction source s.
        let mut t_cols: Vec<CompactVec> = Vec::with_capacity(3);
        let mut s_vec = compact_vec_zeros(out_ball);
        for jc in 0..3 {
            let m = &col_pot[jc];
            let mut t1 = compact_vec_zeros(out_ball);
            for i in 0..3 {
                for k in 0..3 {
                    let mik = &m.0[crate::spectral::sym_slot(i, k)];
                    super::slim::sparse_mul_acc(&mut t1[k], &v[i], mik, Complex64::new(1.0, 0.0));
                    super::slim::sparse_mul_acc(
                        &mut s_vec[jc],
                        &dv[i][k],
                        mik,
                        Complex64::new(1.0, 0.0),
                    );
                }
            }
            t_cols.push(t1);
        }
        let s_vec: CompactVec = std::array::from_fn(|i| s_vec[i].remove_mean());
        let t2 = compact_potential(&s_vec);

        let t = |k: usize, jc: usize| -> Compact {
            t_cols[jc][k].sub(&t2[crate::spectral::sym_slot(k, jc)])
        };
        let mut sym: [Compact; 6] = std::array::from_fn(|slot| {
            let (i, jc) = SYM_PAIRS[slot];
            if i == jc {
                t(i, jc)
            } else {
                t(i, jc).add_scaled(&t(jc, i), 1.0).scale(0.5)
            }
        });

        let anti = |i: usize, jc: usize| -> Compact {
            t(i, jc).sub(&t(jc, i)).scale(0.5)
        };
        let c: CompactVec = [anti(2, 1), anti(0, 2), anti(1, 0)];
        if !c.iter().all(Compact::is_zero) {
            let curl = |a: &CompactVec| -> CompactVec {
                [
                    a[2].derivative(1).sub(&a[1].derivative(2)),
                    a[0].derivative(2).sub(&a[2].derivative(0)),
                    a[1].derivative(0).sub(&a[0].derivative(1)),
                ]
            };
            let cc: CompactVec = {
                let r = curl(&c);
                std::array::from_fn(|i| r[i].remove_mean())
            };
            if !cc.iter().all(Compact::is_zero) {
                let fix = compact_potential(&cc);
                for slot in 0..6 {
                    sym[slot].add_assign_scaled(&fix[slot], 1.0);
                }
            }
        }
        Ok(sym)
    }
}

/// Pacing identity at the report sample. `principal_sq` is the squared
/// L2 norm of the principal perturbation; the next three terms are the
/// gap budget, the pointwise square-root bulk, and the grouped-square
/// tails left by amplitude truncation. `defect` is their signed
/// difference and `cross_energy` is the part of the defect produced by
/// cross-direction overlap (the same product measured direction by
/// direction versus all at once).
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct EnergyIdentity {
    pub principal_sq: f64,
    pub gamma_term: f64,
    pub sqrt_term: f64,
    pub grouped_tail_term: f64,
    pub defect: f64,
    pub defect_rel: f64,
    pub cross_energy: f64,
    pub trace_budget: f64,
}

/// Everything a step run wants to log or gate on, measured at the
/// mid-window sample. Scalar fields only, so it serialises cleanly.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct StepReport {
    pub level_from: u32,
    pub grid_n: usize,
    pub nu: f64,
    pub dt: f64,
    pub ell: f64,
    pub lambda: f64,
    pub r_perp: f64,
    pub r_par: f64,
    pub mu: f64,
    pub sigma: i64,
    pub band_axial: i64,
    pub band_planar: i64,
    pub amp_radius: f64,
    pub c_bar_family: f64,
    pub c_bar_dirs: [f64; 6],
    pub placement_min_margin: f64,
    pub placement_infeasible_pairs: usize,
    pub interior: (usize, usize),
    pub report_sample: usize,
    pub gamma_ell: f64,
    pub gamma_clamped_samples: usize,
    pub energy_ci_half_width: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub max_rel_dist: f64,
    pub amp_tail: f64,
    pub cancellation_max_rel: f64,
    pub cancellation_trace_rel: f64,
    pub wp_l2: f64,
    pub wc_l2: f64,
    pub wt_l2: f64,
    pub w_l2: f64,
    pub v1_l2: f64,
    pub w_mean_abs: f64,
    pub w_divfree_rel: f64,
    pub corrector_two_route_rel: f64,
    pub stress_trace_rel: f64,
    pub part_l1: Vec<(String, f64)>,
    pub energy: EnergyIdentity,
    pub kappa_next: f64,
    pub delta_next: f64,
    pub m0_ratio: f64,
}
