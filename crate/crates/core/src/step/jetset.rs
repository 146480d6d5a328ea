//! Jet building blocks in sparse modal form.
//!
//! The jet family realizes its patterns through grid scatters, which is
//! what the verification suite certifies. The stepper needs those same
//! patterns hundreds of times per sample, at several time lags and time
//! derivatives, so each pattern is scattered once at time zero, its
//! nonzero modes collected, and the axial index of every mode recovered
//! from the lattice frame. Time evolution is then an exact phase
//! rotation mode by mode, and analytic time derivatives are exact
//! multiplier applications; both are checked against fresh scatters.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::slim::Modal;
use crate::geometry;
use crate::jets::{JetBand, JetFamily, JetScales, Pattern, PlacementDiag, ProfileSet, VectorPattern};
use crate::spectral::Grid3;
use crate::{Error, Result};

/// A sparse spectrum whose every mode rotates at an integer multiple of
/// a common rate.
#[derive(Clone, Debug)]
pub struct ModalTimed {
    /// `(wavenumber, axial index, coefficient at t = 0)`.
    base: Vec<([i64; 3], i64, Complex64)>,
    /// Base angular rate `sigma mu`; mode `m` rotates at `m` times it.
    rate: f64,
}

impl ModalTimed {
    /// Recover the rotation structure of a scattered pattern. Every mode
    /// must sit on the direction's jet lattice so its axial index is an
    /// exact integer.
    pub fn from_modal(
        m: &Modal,
        axial_step: [i64; 3],
        rate: f64,
    ) -> Result<ModalTimed> {
        let step2: i64 = axial_step.iter().map(|c| c * c).sum();
        if step2 == 0 {
            return Err(Error::StructuralError(
                "jet frame has a zero axial step".into(),
            ));
        }
        let mut base = Vec::with_capacity(m.0.len());
        for (&k, &c) in &m.0 {
            let dot: i64 = (0..3).map(|i| k[i] * axial_step[i]).sum();
            if dot % step2 != 0 {
                return Err(Error::StructuralError(format!(
                    "mode {k:?} is off the jet lattice of axial step {axial_step:?}"
                )));
            }
            base.push((k, dot / step2, c));
        }
        Ok(ModalTimed { base, rate })
    }

    /// Spectrum at time `t`, with `dt_order` analytic time derivatives.
    pub fn at(&self, t: f64, dt_order: u32) -> Modal {
        let mut out = Modal::new();
        for &(k, m, c) in &self.base {
            let omega = self.rate * m as f64;
            let mut f = c * Complex64::from_polar(1.0, omega * t);
            for _ in 0..dt_order {
                f *= Complex64::new(0.0, omega);
            }
            out.insert_add(k, f);
        }
        out
    }

    /// Largest wavenumber component over the base modes.
    pub fn max_abs_component(&self) -> i64 {
        self.base
            .iter()
            .flat_map(|(k, _, _)| k.iter())
            .map(|c| c.abs())
            .max()
            .unwrap_or(0)
    }

    /// Largest Euclidean mode norm over the base modes.
    pub fn max_norm(&self) -> f64 {
        self.base
            .iter()
            .map(|(k, _, _)| ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt())
            .fold(0.0, f64::max)
    }

    /// Smallest Euclidean mode norm (ignoring a zero mode if present).
    pub fn min_nonzero_norm(&self) -> f64 {
        self.base
            .iter()
            .filter(|(k, _, _)| *k != [0, 0, 0])
            .map(|(k, _, _)| ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

/// One direction's patterns in rotating modal form.
#[derive(Clone, Debug)]
pub struct JetDir {
    pub xi: [f64; 3],
    /// Scalar jet intensity pattern (the one multiplying the direction
    /// in the principal part).
    pub s: ModalTimed,
    /// Exact convolution square of the realized pattern. Quadratic
    /// identities downstream hold to rounding only against this object,
    /// so it is built from `s` itself, never re-scattered.
    pub s_sq: ModalTimed,
    /// Spatial mean of the square; matches the band's realized square
    /// mean and ties the amplitude normalization to this direction.
    pub c_bar: f64,
    /// Scalar potential pattern whose double curl regenerates the jet
    /// plus its corrector.
    pub v_pot: ModalTimed,
}

/// The jet family prepared for stepping on a fixed grid.
#[derive(Debug)]
pub struct StepJets {
    pub family: JetFamily,
    pub band: JetBand,
    pub sigma: i64,
    /// Realized square mean of the scalar pattern at this band; the
    /// amplitude normalization divides by its square root so the
    /// realized quadratic mean is restored exactly.
    pub c_bar: f64,
    /// Placement quality (best-effort shifts; overlap is measured, not
    /// assumed away).
    pub placement: PlacementDiag,
    pub dirs: Vec<JetDir>,
}

impl StepJets {
    pub fn build(
        profiles: ProfileSet,
        scales: JetScales,
        band: JetBand,
        grid: Grid3,
    ) -> Result<StepJets> {
        let (family, placement) = JetFamily::build_best_effort(profiles, scales)?;
        let sigma = family.sigma;
        let rate = sigma as f64 * scales.mu;
        let c_bar = family.realized_square_mean(band);
        if !(c_bar > 0.0) {
            return Err(Error::StructuralError(
                "jet band carries no quadratic mass".into(),
            ));
        }

        let mut dirs = Vec::with_capacity(geometry::DIRECTION_COUNT);
        for dir in 0..geometry::DIRECTION_COUNT {
            let d = &geometry::directions()[dir];
            let xi = d.xi_f64();
            let lr = scales.lambda_r_perp();
            let axial_step = d.xi_lattice().map(|c| c * lr);

            let s_field = family.scatter_scalar(grid, dir, Pattern::PsiPhi, band, 0.0, 0)?;
            let s_base = Modal::collect(&s_field);
            let s = ModalTimed::from_modal(&s_base, axial_step, rate)?;

            // Convolution squares live on the doubled lattice and may
            // exceed this grid's band; they are consumed only through
            // band-truncating sparse products, never realized whole.
            let sq_base = s_base.conv(&s_base);
            let c_bar_dir = sq_base.mean().re;
            let s_sq = ModalTimed::from_modal(&sq_base, axial_step, rate)?;

            // The potential pattern is a scalar times the constant
            // direction; divide out the largest direction component.
            let v_field = family.scatter_vector(grid, dir, VectorPattern::V, band, 0.0, 0)?;
            let lead = (0..3).max_by(|&a, &b| xi[a].abs().total_cmp(&xi[b].abs())).unwrap();
            let v_scalar = Modal::collect(&v_field.comps[lead]).scale(1.0 / xi[lead]);
            let v_pot = ModalTimed::from_modal(&v_scalar, axial_step, rate)?;

            if s.is_empty() || v_pot.is_empty() || !(c_bar_dir > 0.0) {
                return Err(Error::StructuralError(format!(
                    "direction {dir} scattered to an empty pattern at this band"
                )));
            }
            dirs.push(JetDir {
                xi,
                s,
                s_sq,
                c_bar: c_bar_dir,
                v_pot,
            });
        }

        Ok(StepJets {
            family,
            band,
            sigma,
            c_bar,
            placement,
            dirs,
        })
    }

    /// Smallest nonzero mode norm over all patterns; amplitude spectra
    /// must stay strictly inside it for the perturbation to be mean-free
    /// by construction.
    pub fn min_pattern_norm(&self) -> f64 {
        self.dirs
            .iter()
            .flat_map(|d| [d.s.min_nonzero_norm(), d.v_pot.min_nonzero_norm()])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest mode norm over all patterns (squares included).
    pub fn max_pattern_norm(&self) -> f64 {
        self.dirs
            .iter()
            .flat_map(|d| [d.s.max_norm(), d.s_sq.max_norm(), d.v_pot.max_norm()])
            .fold(0.0, f64::max)
    }

    /// Fundamental period of the rotation (all rates are integer
    /// multiples of `sigma mu`).
    pub fn rotation_period(&self) -> f64 {
        2.0 * PI / (self.sigma as f64 * self.family.scales.mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::ProfileConfig;
    use crate::spectral::{norms, NormKind};

    fn small_jets(grid: Grid3) -> StepJets {
        let profiles = ProfileSet::build(ProfileConfig::default()).unwrap();
        let scales = JetScales {
            lambda: 4.0,
            r_perp: 0.25,
            r_par: 0.5,
            mu: 0.5,
        };
        let band = JetBand {
            m_axial: 1,
            m_planar: 1,
        };
        StepJets::build(profiles, scales, band, grid).unwrap()
    }

    #[test]
    fn phase_rotation_matches_fresh_scatter() {
        let grid = Grid3::new(32).unwrap();
        let jets = small_jets(grid);
        let t = 0.37;
        for dir in [0usize, 3, 5] {
            let direct = jets
                .family
                .scatter_scalar(grid, dir, Pattern::PsiPhi, jets.band, t, 0)
                .unwrap();
            let rotated = jets.dirs[dir].s.at(t, 0).realize(grid).unwrap();
            let diff = norms::scalar_norm(&direct.sub(&rotated), NormKind::Lp(2.0));
            let scale = norms::scalar_norm(&direct, NormKind::Lp(2.0));
            assert!(
                diff <= 1e-12 * scale,
                "dir {dir}: rotated pattern drifts {diff:.3e} from scatter"
            );
        }
    }

    #[test]
    fn time_derivative_matches_scatter_derivative() {
        let grid = Grid3::new(32).unwrap();
        let jets = small_jets(grid);
        let t = 1.21;
        for order in [1u32, 2] {
            let direct = jets
                .family
                .scatter_scalar(grid, 1, Pattern::PsiPhi, jets.band, t, order)
                .unwrap();
            let ours = jets.dirs[1].s.at(t, order).realize(grid).unwrap();
            let diff = norms::scalar_norm(&direct.sub(&ours), NormKind::Lp(2.0));
            let scale = norms::scalar_norm(&direct, NormKind::Lp(2.0)).max(1e-30);
            assert!(
                diff <= 1e-12 * scale,
                "order-{order} derivative drifts {diff:.3e}"
            );
        }
    }

    #[test]
    fn potential_double_curl_regenerates_jet_plus_corrector() {
        use crate::spectral::ops;
        let grid = Grid3::new(32).unwrap();
        let jets = small_jets(grid);
        let t = 0.0;
        for dir in 0..6 {
            let v = jets
                .family
                .scatter_vector(grid, dir, VectorPattern::V, jets.band, t, 0)
                .unwrap();
            let w = jets
                .family
                .scatter_vector(grid, dir, VectorPattern::W, jets.band, t, 0)
                .unwrap();
            let wc = jets
                .family
                .scatter_vector(grid, dir, VectorPattern::WCorrector, jets.band, t, 0)
                .unwrap();
            let cc = ops::curl(&ops::curl(&v));
            let want = w.add(&wc);
            let diff = norms::vector_norm(&cc.sub(&want), NormKind::Lp(2.0));
            let scale = norms::vector_norm(&want, NormKind::Lp(2.0));
            assert!(
                diff <= 1e-10 * scale,
                "dir {dir}: curl curl V misses W + Wc by {diff:.3e}"
            );
        }
    }

    #[test]
    fn square_pattern_is_the_exact_square() {
        use crate::spectral::ops;
        // The convolution square needs twice the band; realize both
        // sides on a larger grid where nothing truncates.
        let grid = Grid3::new(32).unwrap();
        let wide = Grid3::new(64).unwrap();
        let jets = small_jets(grid);
        let t = 0.8;
        let s = jets.dirs[2].s.at(t, 0).realize(wide).unwrap();
        let sq = jets.dirs[2].s_sq.at(t, 0).realize(wide).unwrap();
        let direct = ops::mul_unpadded(&s, &s);
        let diff = norms::scalar_norm(&direct.sub(&sq), NormKind::Lp(2.0));
        let scale = norms::scalar_norm(&sq, NormKind::Lp(2.0));
        assert!(diff <= 1e-12 * scale, "square vs product drift {diff:.3e}");
        // The stored mean matches the realized square mean of the band.
        let mean = jets.dirs[2].c_bar;
        assert!((mean - direct.mean()).abs() <= 1e-12 * mean.abs().max(1.0));
    }

    #[test]
    fn band_extents_support_the_step_budget() {
        let grid = Grid3::new(32).unwrap();
        let jets = small_jets(grid);
        assert!(jets.min_pattern_norm() >= jets.sigma as f64 - 1e-9);
        assert!(jets.max_pattern_norm() <= jets.sigma as f64 * 2.0 * std::f64::consts::SQRT_2 + 1e-9);
        assert!(jets.c_bar > 0.5 && jets.c_bar < 2.0, "c_bar = {}", jets.c_bar);
    }
}
