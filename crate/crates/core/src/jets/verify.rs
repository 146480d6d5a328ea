//! Identity and scaling report for a built jet family.
//!
//! The checks fall in two groups. Structural identities (divergence of
//! the corrected jet, the double-curl representation, transport) are
//! evaluated on the band-limited realization, where they hold to
//! roundoff by construction; the same divergence residual is also
//! measured on the analytically sampled closed forms, where it instead
//! measures how much of the profile spectrum the grid resolves.
//! Quadrature facts (second-moment normalization, norm ratios against
//! the scale prefactors, corrector smallness) are computed in jet
//! coordinates and never touch the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry;
use crate::jets::family::{JetBand, JetFamily, JetScales, VectorPattern};
use crate::jets::placement::{mask_overlap, support_mask};
use crate::spectral::field::VectorField;
use crate::spectral::grid::Grid3;
use crate::spectral::norms::{vector_norm, NormKind};
use crate::spectral::ops;
use crate::{Error, Result};

/// One row of the scale-prefactor probe: `||W||_{L^p}` divided by
/// `r_perp^{2/p-1} r_par^{1/p-1/2}`, which removes the thin-tube
/// scaling and leaves a profile constant.
#[derive(Clone, Copy, Debug)]
pub struct NormRatioProbe {
    /// Lebesgue exponent; `f64::INFINITY` marks the sup norm.
    pub p: f64,
    /// Oscillation scale of the probed family.
    pub lambda: f64,
    /// Measured norm over the scale prefactor.
    pub ratio: f64,
}

/// Outcome of [`verify_jet_identities`].
#[derive(Clone, Debug)]
pub struct JetReport {
    pub grid_n: usize,
    /// Band actually realized on the grid.
    pub band: JetBand,
    /// Max over directions and sample times of
    /// `||div(W + W^c)||_2 / ||W||_2` for the band-limited realization.
    pub div_residual_realized: f64,
    /// Same ratio with `W + W^c` sampled from the closed forms at grid
    /// points. Small only when the grid resolves the full profile
    /// spectrum (roughly `n` beyond `30 n_* lambda`); at coarser
    /// resolutions the value is dominated by aliased modes and is
    /// reported as a resolution diagnostic, not an identity failure.
    pub div_residual_sampled: f64,
    /// Max relative mismatch of `W + W^c` against `curl curl V` on the
    /// realized band.
    pub curl_identity_residual: f64,
    /// True when every pair of tube masks on this grid is disjoint.
    pub supports_disjoint: bool,
    /// Largest pairwise mask intersection, in grid cells.
    pub max_pair_overlap_cells: usize,
    /// `|mean(psi^2) mean(phi^2) - 1|` by independent quadrature; the
    /// second-moment normalization residual of `(2pi)^-3 int W (x) W`.
    pub normalization_residual: f64,
    /// Worst mismatch of `d_t psi` against `mu (xi . grad) psi` at
    /// random space-time probe points, from the analytic evaluators.
    pub transport_max_err: f64,
    /// `(||W^c||_2 / ||W||_2) / (r_perp / r_par)`: the profile constant
    /// left after removing the predicted corrector smallness.
    pub corrector_ratio_normalized: f64,
    /// Prefactor-normalized norms for `p` in `{1, 2, inf}` at the
    /// family scale and at doubled `lambda` (fixed `lambda r_perp`).
    pub norm_ratios: Vec<NormRatioProbe>,
    /// Relative drift of `||W||_2` between the two lambda values.
    pub lambda_l2_drift: f64,
}

fn max_abs(field: &VectorField) -> f64 {
    vector_norm(field, NormKind::Linf)
}

fn realized_residuals(
    fam: &JetFamily,
    grid: Grid3,
    band: JetBand,
    times: &[f64],
) -> Result<(f64, f64)> {
    let mut worst_div = 0.0f64;
    let mut worst_curl = 0.0f64;
    for &t in times {
        for dir in 0..geometry::DIRECTION_COUNT {
            let w = fam.scatter_vector(grid, dir, VectorPattern::W, band, t, 0)?;
            let wc = fam.scatter_vector(grid, dir, VectorPattern::WCorrector, band, t, 0)?;
            let v = fam.scatter_vector(grid, dir, VectorPattern::V, band, t, 0)?;
            let total = w.add(&wc);
            let wl2 = vector_norm(&w, NormKind::Lp(2.0)).max(1e-300);
            let dv = ops::divergence(&total);
            let dl2 = {
                let mut acc = 0.0;
                for &x in dv.real() {
                    acc += x * x;
                }
                (acc / dv.real().len() as f64).sqrt() * crate::BOX_VOLUME.sqrt()
            };
            worst_div = worst_div.max(dl2 / wl2);
            let cc = ops::curl(&ops::curl(&v));
            let diff = cc.sub(&total);
            worst_curl = worst_curl.max(max_abs(&diff) / max_abs(&total).max(1e-300));
        }
    }
    Ok((worst_div, worst_curl))
}

fn sampled_div_residual(fam: &JetFamily, grid: Grid3, times: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &t in times {
        for dir in 0..geometry::DIRECTION_COUNT {
            let total = VectorField::from_fns(grid, |x, y, z| {
                let p = [x, y, z];
                let w = fam.analytic_w(dir, t, p);
                let c = fam.analytic_w_corrector(dir, t, p);
                [w[0] + c[0], w[1] + c[1], w[2] + c[2]]
            });
            let wnorm = vector_norm(&total, NormKind::Lp(2.0)).max(1e-300);
            let dv = ops::divergence(&total);
            let mut acc = 0.0;
            for &x in dv.real() {
                acc += x * x;
            }
            let dl2 = (acc / dv.real().len() as f64).sqrt() * crate::BOX_VOLUME.sqrt();
            worst = worst.max(dl2 / wnorm);
        }
    }
    worst
}

fn mask_summary(fam: &JetFamily, grid: Grid3) -> (bool, usize) {
    let masks: Vec<_> = (0..geometry::DIRECTION_COUNT)
        .map(|dir| support_mask(grid, fam.sigma, fam.scales.r_perp, dir, fam.shifts[dir]))
        .collect();
    let mut worst = 0usize;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            worst = worst.max(mask_overlap(&masks[i], &masks[j]));
        }
    }
    (worst == 0, worst)
}

fn transport_probe(fam: &JetFamily, times: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a65_7473);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let dir = k % geometry::DIRECTION_COUNT;
        let x = [
            rng.gen_range(0.0..2.0 * std::f64::consts::PI),
            rng.gen_range(0.0..2.0 * std::f64::consts::PI),
            rng.gen_range(0.0..2.0 * std::f64::consts::PI),
        ];
        let t = times.get(k % times.len().max(1)).copied().unwrap_or(0.0)
            + rng.gen_range(0.0..0.1);
        let dt = fam.analytic_psi_dt(dir, t, x);
        let grad = fam.analytic_psi_grad(dir, t, x);
        let xi = geometry::directions()[dir].xi_f64();
        let adv = fam.scales.mu * (grad[0] * xi[0] + grad[1] * xi[1] + grad[2] * xi[2]);
        let scale = dt.abs().max(adv.abs()).max(1.0);
        worst = worst.max((dt - adv).abs() / scale);
    }
    worst
}

fn norm_probe(fam: &JetFamily, out: &mut Vec<NormRatioProbe>) {
    let rq = fam.scales.r_perp;
    let rp = fam.scales.r_par;
    let pref = |p: f64| rq.powf(2.0 / p - 1.0) * rp.powf(1.0 / p - 0.5);
    for p in [1.0, 2.0] {
        out.push(NormRatioProbe {
            p,
            lambda: fam.scales.lambda,
            ratio: fam.w_lp_norm(p) / pref(p),
        });
    }
    out.push(NormRatioProbe {
        p: f64::INFINITY,
        lambda: fam.scales.lambda,
        ratio: fam.w_sup_norm() / (rq.powf(-1.0) * rp.powf(-0.5)),
    });
}

/// Run the full identity/scaling report for a family on a grid.
///
/// The grid must carry at least four harmonics of the jet lattice
/// constant `sigma = n_* lambda r_perp`; coarser grids cannot represent
/// even the fundamental oscillation and get a `ResolutionError`. How
/// well the profile spectrum itself is resolved is reported, not gated:
/// see [`JetReport::div_residual_sampled`].
pub fn verify_jet_identities(fam: &JetFamily, grid: Grid3, times: &[f64]) -> Result<JetReport> {
    let n_min = 4 * fam.sigma;
    if (grid.n() as i64) < n_min {
        return Err(Error::ResolutionError(format!(
            "grid n = {} cannot resolve the jet lattice constant sigma = {} (need n >= {})",
            grid.n(),
            fam.sigma,
            n_min
        )));
    }
    let times = if times.is_empty() { &[0.0][..] } else { times };
    let band = JetBand::for_kappa(fam.sigma, (grid.n() / 2 - 1) as f64);
    let (div_realized, curl_res) = realized_residuals(fam, grid, band, times)?;
    let div_sampled = sampled_div_residual(fam, grid, times);
    let (disjoint, overlap) = mask_summary(fam, grid);

    // Independent quadrature of the squared-profile means (different
    // panel count from the one used to solve the normalization).
    let prof = &fam.profiles;
    let rp = fam.scales.r_par;
    let ax_mean = {
        let m = 34_567;
        let h = 1.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let u = (i as f64 + 0.5) * h;
            let v = prof.psi(u);
            acc += v * v;
        }
        2.0 * acc * h / (2.0 * std::f64::consts::PI)
    };
    let pl_mean = {
        let m = 34_567;
        let h = 1.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let s = (i as f64 + 0.5) * h;
            let v = prof.phi_radial(s);
            acc += v * v;
        }
        std::f64::consts::PI * acc * h / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
    };
    let _ = rp;
    let normalization_residual = (ax_mean * pl_mean - 1.0).abs();

    let transport = transport_probe(fam, times);
    let corrector = fam.corrector_l2_ratio() / (fam.scales.r_perp / fam.scales.r_par);

    let mut ratios = Vec::new();
    norm_probe(fam, &mut ratios);
    let doubled = JetScales {
        lambda: 2.0 * fam.scales.lambda,
        r_perp: fam.scales.r_perp / 2.0,
        r_par: fam.scales.r_par,
        mu: fam.scales.mu,
    };
    let (fam2, _) = JetFamily::build_best_effort(fam.profiles.clone(), doubled)?;
    norm_probe(&fam2, &mut ratios);
    let l2_a = fam.w_lp_norm(2.0);
    let l2_b = fam2.w_lp_norm(2.0);
    let lambda_l2_drift = (l2_b / l2_a - 1.0).abs();

    Ok(JetReport {
        grid_n: grid.n(),
        band,
        div_residual_realized: div_realized,
        div_residual_sampled: div_sampled,
        curl_identity_residual: curl_res,
        supports_disjoint: disjoint,
        max_pair_overlap_cells: overlap,
        normalization_residual,
        transport_max_err: transport,
        corrector_ratio_normalized: corrector,
        norm_ratios: ratios,
        lambda_l2_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::profiles::{ProfileConfig, ProfileSet};
    use crate::spectral::field::ScalarField;

    fn thin_family() -> JetFamily {
        let profiles = ProfileSet::build(ProfileConfig::default()).unwrap();
        let scales = JetScales {
            lambda: 32.0,
            r_perp: 1.0 / 32.0,
            r_par: 0.5,
            mu: 3.0,
        };
        JetFamily::build(profiles, scales, Grid3::new(64).unwrap()).unwrap()
    }

    #[test]
    fn report_certifies_structural_identities() {
        let fam = thin_family();
        let grid = Grid3::new(64).unwrap();
        let report = verify_jet_identities(&fam, grid, &[0.0, 0.21]).unwrap();
        assert!(report.div_residual_realized < 1e-10, "{report:?}");
        assert!(report.curl_identity_residual < 1e-10, "{report:?}");
        assert!(report.supports_disjoint);
        assert_eq!(report.max_pair_overlap_cells, 0);
        assert!(report.normalization_residual < 1e-6, "{report:?}");
        assert!(report.transport_max_err < 1e-8);
        assert!(
            report.corrector_ratio_normalized > 0.2 && report.corrector_ratio_normalized < 5.0,
            "corrector constant {}",
            report.corrector_ratio_normalized
        );
        assert!(report.lambda_l2_drift < 0.01, "{report:?}");
        // Prefactor-normalized norms stay within factor 3 across lambda.
        for p in [1.0, 2.0, f64::INFINITY] {
            let rows: Vec<_> = report
                .norm_ratios
                .iter()
                .filter(|r| r.p == p)
                .collect();
            assert_eq!(rows.len(), 2);
            let q = rows[0].ratio / rows[1].ratio;
            assert!(q > 1.0 / 3.0 && q < 3.0, "p = {p}: ratio drift {q}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let fam = thin_family();
        let grid = Grid3::new(16).unwrap();
        match verify_jet_identities(&fam, grid, &[0.0]) {
            Err(Error::ResolutionError(_)) => {}
            other => panic!("expected resolution rejection, got {other:?}"),
        }
    }

    #[test]
    fn divergence_of_double_curl_vanishes_for_modulated_potential() {
        let fam = thin_family();
        let grid = Grid3::new(64).unwrap();
        let band = JetBand::for_kappa(fam.sigma, 21.0);
        let v = fam
            .scatter_vector(grid, 0, VectorPattern::V, band, 0.0, 0)
            .unwrap();
        let a = ScalarField::from_fn(grid, |x, y, z| 1.5 + x.cos() + 0.5 * (y + 2.0 * z).sin());
        let modulated = VectorField::new([
            ScalarField::from_real(
                grid,
                a.real()
                    .iter()
                    .zip(v.comps[0].real())
                    .map(|(&p, &q)| p * q)
                    .collect(),
            ),
            ScalarField::from_real(
                grid,
                a.real()
                    .iter()
                    .zip(v.comps[1].real())
                    .map(|(&p, &q)| p * q)
                    .collect(),
            ),
            ScalarField::from_real(
                grid,
                a.real()
                    .iter()
                    .zip(v.comps[2].real())
                    .map(|(&p, &q)| p * q)
                    .collect(),
            ),
        ]);
        let cc = ops::curl(&ops::curl(&modulated));
        let dv = ops::divergence(&cc);
        let dmax = dv.real().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let scale = vector_norm(&cc, NormKind::Linf).max(1e-300);
        assert!(dmax / scale < 1e-10, "div residual {}", dmax / scale);
    }
}
