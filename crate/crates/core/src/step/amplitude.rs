//! Pointwise amplitude fields from the lagged stress and energy gap.
//!
//! At each grid point the lagged stress is measured against the local
//! intensity `rho = 2 sqrt(ell^2 + |R|_F^2) + gamma_ell`, which keeps
//! the normalized matrix inside the positivity ball of the direction
//! decomposition whenever the gap dominates the stress. The coefficient
//! functional is linear, so the amplitude square for direction `xi` is
//! read directly from `rho Id - R` and divided by that direction's
//! realized quadratic mean; summing the squares against `xi (x) xi`
//! reconstructs `rho Id - R` to rounding, which is the identity every
//! later cancellation leans on.

use std::rc::Rc;

use crate::geometry::{self, Sym6};
use crate::spectral::{ScalarField, StressField, SYM_PAIRS};
use crate::step::slim::{Ball, Compact};
use crate::{Error, Result};

/// Dense per-sample amplitude data (transient; slimmed before caching).
#[derive(Debug)]
pub struct AmplitudePointwise {
    pub rho: ScalarField,
    /// One scalar field per direction.
    pub fields: [ScalarField; 6],
    /// Largest normalized stress distance seen, against the positivity
    /// radius.
    pub max_rel_dist: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Integral of `sqrt(ell^2 + |R|_F^2)` over the box.
    pub sqrt_term_integral: f64,
}

#[inline]
fn frob_sq(r: &Sym6) -> f64 {
    r[0] * r[0] + r[1] * r[1] + r[2] * r[2]
        + 2.0 * (r[3] * r[3] + r[4] * r[4] + r[5] * r[5])
}

/// Build the six amplitude fields from the lagged trace-free stress.
pub fn build_amplitudes(
    r_ell: &StressField,
    gamma_ell: f64,
    ell: f64,
    c_bars: &[f64; 6],
) -> Result<AmplitudePointwise> {
    if !(gamma_ell >= 0.0) {
        return Err(Error::EnergyProfileError(format!(
            "lagged gap {gamma_ell} must be nonnegative"
        )));
    }
    let grid = r_ell.grid();
    let len = grid.len();
    let slots: [&[f64]; 6] = std::array::from_fn(|s| r_ell.comps[s].real());
    let decomp = geometry::decomposition();
    let r_pos = decomp.positivity_radius();
    let inv_sqrt_cbar: [f64; 6] = std::array::from_fn(|d| 1.0 / c_bars[d].sqrt());

    let mut rho = vec![0.0; len];
    let mut amps: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; len]);
    let mut max_rel_dist = 0.0f64;
    let mut rho_min = f64::INFINITY;
    let mut rho_max = 0.0f64;
    let mut sqrt_sum = 0.0f64;

    for p in 0..len {
        let r: Sym6 = std::array::from_fn(|s| slots[s][p]);
        let s = (ell * ell + frob_sq(&r)).sqrt();
        let rho_p = 2.0 * s + gamma_ell;
        let dist = frob_sq(&r).sqrt() / rho_p;
        if dist >= r_pos {
            return Err(Error::OutsidePositivityBall(format!(
                "normalized stress distance {dist:.6} at grid point {p} \
                 reaches the positivity radius {r_pos:.6}"
            )));
        }
        max_rel_dist = max_rel_dist.max(dist);
        rho_min = rho_min.min(rho_p);
        rho_max = rho_max.max(rho_p);
        sqrt_sum += s;

        // rho Id - R in slot form; the coefficient functional is linear.
        let target: Sym6 = [
            rho_p - r[0],
            rho_p - r[1],
            rho_p - r[2],
            -r[3],
            -r[4],
            -r[5],
        ];
        let coeff = decomp.coefficients(&target);
        rho[p] = rho_p;
        for d in 0..6 {
            // Positive inside the ball; guard against rounding at zero.
            amps[d][p] = coeff[d].max(0.0).sqrt() * inv_sqrt_cbar[d];
        }
    }

    let cell = crate::BOX_VOLUME / len as f64;
    Ok(AmplitudePointwise {
        rho: ScalarField::from_real(grid, rho),
        fields: amps.map(|a| ScalarField::from_real(grid, a)),
        max_rel_dist,
        rho_min,
        rho_max,
        sqrt_term_integral: sqrt_sum * cell,
    })
}

/// Pointwise reconstruction quality of the amplitude decomposition.
#[derive(Clone, Copy, Debug)]
pub struct CancellationProbe {
    /// Worst pointwise relative Frobenius defect of
    /// `sum c_bar a^2 xi (x) xi = rho Id - R`.
    pub max_rel: f64,
    /// Worst pointwise relative defect of the trace identity
    /// `sum c_bar a^2 = 3 rho`.
    pub trace_max_rel: f64,
}

pub fn cancellation_probe(
    ap: &AmplitudePointwise,
    r_ell: &StressField,
    c_bars: &[f64; 6],
) -> CancellationProbe {
    let len = ap.rho.grid().len();
    let slots: [&[f64]; 6] = std::array::from_fn(|s| r_ell.comps[s].real());
    let amp: [&[f64]; 6] = std::array::from_fn(|d| ap.fields[d].real());
    let rho = ap.rho.real();

    // Slot form of xi (x) xi per direction.
    let outer: [[f64; 6]; 6] = std::array::from_fn(|d| {
        let xi = geometry::directions()[d].xi_f64();
        std::array::from_fn(|s| {
            let (i, j) = SYM_PAIRS[s];
            xi[i] * xi[j]
        })
    });

    let mut max_rel = 0.0f64;
    let mut trace_max_rel = 0.0f64;
    for p in 0..len {
        let mut sum: Sym6 = [0.0; 6];
        let mut trace = 0.0;
        for d in 0..6 {
            let w = c_bars[d] * amp[d][p] * amp[d][p];
            trace += w;
            for s in 0..6 {
                sum[s] += w * outer[d][s];
            }
        }
        let target: Sym6 = [
            rho[p] - slots[0][p],
            rho[p] - slots[1][p],
            rho[p] - slots[2][p],
            -slots[3][p],
            -slots[4][p],
            -slots[5][p],
        ];
        let diff: Sym6 = std::array::from_fn(|s| sum[s] - target[s]);
        let rel = (frob_sq(&diff) / frob_sq(&target)).sqrt();
        max_rel = max_rel.max(rel);
        trace_max_rel = trace_max_rel.max((trace - 3.0 * rho[p]).abs() / (3.0 * rho[p]));
    }
    CancellationProbe {
        max_rel,
        trace_max_rel,
    }
}

/// Restrict the amplitude spectra to a small ball, reporting the worst
/// relative tail mass given up. The tail re-enters the stress through
/// the band closure, so this is lossy only for the part sizes, never
/// for the residual identity.
pub fn truncate_amplitudes(
    ap: &AmplitudePointwise,
    ball: &Rc<Ball>,
) -> ([Compact; 6], f64) {
    let mut worst_tail = 0.0f64;
    let compacts = std::array::from_fn(|d| {
        let f = &ap.fields[d];
        let total: f64 = f.spec().iter().map(|z| z.norm_sqr()).sum();
        let kept = Compact::gather(ball, f);
        let kept_mass: f64 = kept.c.iter().map(|z| z.norm_sqr()).sum();
        if total > 0.0 {
            worst_tail = worst_tail.max(((total - kept_mass).max(0.0) / total).sqrt());
        }
        kept
    });
    (compacts, worst_tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid3;

    fn uniform_gap_state(grid: Grid3) -> (StressField, f64, f64) {
        (StressField::zeros(grid), 0.9, 0.05)
    }

    #[test]
    fn zero_stress_gives_constant_amplitudes() {
        let grid = Grid3::new(8).unwrap();
        let (r, gamma, ell) = uniform_gap_state(grid);
        let c_bars = [1.1; 6];
        let ap = build_amplitudes(&r, gamma, ell, &c_bars).unwrap();
        assert!(ap.max_rel_dist == 0.0);
        assert!((ap.rho_min - ap.rho_max).abs() < 1e-15);
        let probe = cancellation_probe(&ap, &r, &c_bars);
        assert!(probe.max_rel < 1e-13, "reconstruction {:.3e}", probe.max_rel);
        assert!(probe.trace_max_rel < 1e-13);
        // Constant fields: every direction's amplitude is spatially flat.
        for d in 0..6 {
            let vals = ap.fields[d].real();
            let first = vals[0];
            assert!(vals.iter().all(|v| (v - first).abs() < 1e-14));
        }
    }

    #[test]
    fn smooth_stress_reconstructs_pointwise() {
        let grid = Grid3::new(16).unwrap();
        let base = ScalarField::from_fn(grid, |x, y, z| {
            0.02 * (x).cos() * (y + 0.3).sin() + 0.01 * (z - y).cos()
        });
        let mk = |s: f64, t: f64| base.scale(s).add_scaled(
            &ScalarField::from_fn(grid, |x, _, z| 0.008 * (x + z * t).sin()),
            1.0,
        );
        // Trace-free by construction: diagonal sums to zero.
        let d0 = mk(1.0, 0.5);
        let d1 = mk(-0.4, 1.5);
        let d2 = d0.add(&d1).scale(-1.0);
        let r = StressField::new([d0, d1, d2, mk(0.3, 2.0), mk(0.2, 0.0), mk(-0.25, 1.0)]);
        let c_bars = [0.9, 1.0, 1.1, 1.0, 0.95, 1.05];
        let ap = build_amplitudes(&r, 0.85, 0.1, &c_bars).unwrap();
        assert!(ap.max_rel_dist > 0.0 && ap.max_rel_dist < 0.2);
        assert!(ap.rho_min >= 2.0 * 0.1);
        let probe = cancellation_probe(&ap, &r, &c_bars);
        assert!(probe.max_rel < 1e-12, "reconstruction {:.3e}", probe.max_rel);
        assert!(probe.trace_max_rel < 1e-12);
    }

    #[test]
    fn overwhelming_stress_is_rejected() {
        let grid = Grid3::new(8).unwrap();
        let big = ScalarField::from_fn(grid, |_, _, _| 5.0);
        let zero = ScalarField::zeros(grid);
        let r = StressField::new([
            big.clone(),
            big.scale(-0.5),
            big.scale(-0.5),
            zero.clone(),
            zero.clone(),
            zero,
        ]);
        assert!(matches!(
            build_amplitudes(&r, 0.0, 0.05, &[1.0; 6]),
            Err(Error::OutsidePositivityBall(_))
        ));
    }

    #[test]
    fn truncation_reports_tail_mass() {
        let grid = Grid3::new(16).unwrap();
        let wiggle = ScalarField::from_fn(grid, |x, y, z| {
            0.01 * (x.cos() * y.sin() + (2.0 * z).cos() + (x + y + z).sin())
        });
        let d2 = wiggle.scale(-2.0);
        let r = StressField::new([
            wiggle.clone(),
            wiggle.clone(),
            d2,
            wiggle.scale(0.5),
            wiggle.scale(-0.3),
            wiggle.scale(0.2),
        ]);
        let ap = build_amplitudes(&r, 0.9, 0.1, &[1.0; 6]).unwrap();
        let ball = Ball::new(grid, 4.0);
        let (compacts, tail) = truncate_amplitudes(&ap, &ball);
        assert!(tail < 1e-4, "tail {tail:.3e} unexpectedly large");
        assert!(tail >= 0.0);
        // The kept mean agrees with the field mean.
        for d in 0..6 {
            let mean = compacts[d].zero_mode().re;
            assert!((mean - ap.fields[d].mean()).abs() < 1e-12);
        }
    }
}
