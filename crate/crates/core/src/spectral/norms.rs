//! Norms and seminorm estimates.
//!
//! Lebesgue norms use the uniform-grid quadrature, which on the torus is
//! the trapezoid rule and is exact for band-limited integrands. Sobolev
//! norms are evaluated spectrally through the `(1 + |k|^2)^{s/2}`
//! multiplier. The `C^N` estimate takes the grid maximum over all spatial
//! derivatives of order at most `N`; for fields with content between the
//! grid points it is a lower bound on the true supremum.

use super::field::{ScalarField, StressField, VectorField};
use crate::BOX_VOLUME;
use num_complex::Complex64;

/// Deterministic pairwise sum, independent of chunking or thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Norm selector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    /// Lebesgue `L^p`, `1 <= p < infinity`.
    Lp(f64),
    /// Supremum over grid points.
    Linf,
    /// Sobolev `H^s` via the Bessel multiplier.
    Hs(f64),
    /// `||(I - Laplacian)^{1/2} f||_{L^p}`.
    W1p(f64),
    /// Grid maximum over all spatial derivatives of order `<= N`
    /// (a documented lower bound for the true `C^N` norm).
    CnEst(u32),
}

fn lp_from_magnitudes(mag_sq: impl Iterator<Item = f64>, len: usize, p: f64) -> f64 {
    let vals: Vec<f64> = mag_sq.map(|m| m.sqrt().powf(p)).collect();
    debug_assert_eq!(vals.len(), len);
    (pairwise_sum(&vals) / len as f64 * BOX_VOLUME).powf(1.0 / p)
}

fn spectral_weighted_l2(fields: &[&ScalarField], weight: impl Fn(f64) -> f64) -> f64 {
    let grid = fields[0].grid();
    let n = grid.n();
    let mut acc = Vec::with_capacity(grid.len());
    for iz in 0..n {
        let kz = grid.wavenumber(iz) as f64;
        for iy in 0..n {
            let ky = grid.wavenumber(iy) as f64;
            for ix in 0..n {
                let kx = grid.wavenumber(ix) as f64;
                let k2 = kx * kx + ky * ky + kz * kz;
                let w = weight(k2);
                let idx = grid.index(ix, iy, iz);
                let mut s = 0.0;
                for f in fields {
                    s += f.spec()[idx].norm_sqr();
                }
                acc.push(w * s);
            }
        }
    }
    (pairwise_sum(&acc) * BOX_VOLUME).sqrt()
}

fn bessel_multiplier(f: &ScalarField, s: f64) -> ScalarField {
    f.spec_map(|kx, ky, kz| {
        let k2 = kx * kx + ky * ky + kz * kz;
        Complex64::new((1.0 + k2).powf(s / 2.0), 0.0)
    })
}

fn cn_component_max(f: &ScalarField, order: u32) -> f64 {
    // Maximum over all derivative multi-indices of total order <= `order`.
    let mut best = 0.0f64;
    for ax in 0..=order {
        for ay in 0..=(order - ax) {
            for az in 0..=(order - ax - ay) {
                let d = f.spec_map(|kx, ky, kz| {
                    let mut m = Complex64::new(1.0, 0.0);
                    for _ in 0..ax {
                        m *= Complex64::new(0.0, kx);
                    }
                    for _ in 0..ay {
                        m *= Complex64::new(0.0, ky);
                    }
                    for _ in 0..az {
                        m *= Complex64::new(0.0, kz);
                    }
                    m
                });
                let mx = d.real().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                best = best.max(mx);
            }
        }
    }
    best
}

/// Norm of a scalar field.
pub fn scalar_norm(f: &ScalarField, kind: NormKind) -> f64 {
    match kind {
        NormKind::Lp(p) => {
            assert!(p >= 1.0);
            let r = f.real();
            lp_from_magnitudes(r.iter().map(|&v| v * v), r.len(), p)
        }
        NormKind::Linf => f.real().iter().fold(0.0f64, |m, &v| m.max(v.abs())),
        NormKind::Hs(s) => spectral_weighted_l2(&[f], |k2| (1.0 + k2).powf(s)),
        NormKind::W1p(p) => scalar_norm(&bessel_multiplier(f, 1.0), NormKind::Lp(p)),
        NormKind::CnEst(nn) => cn_component_max(f, nn),
    }
}

/// Norm of a vector field (pointwise Euclidean magnitude for Lebesgue
/// norms, component sum of squares for Sobolev, component maximum for the
/// `C^N` estimate).
pub fn vector_norm(v: &VectorField, kind: NormKind) -> f64 {
    match kind {
        NormKind::Lp(p) => {
            assert!(p >= 1.0);
            let (a, b, c) =
                (v.comps[0].real(), v.comps[1].real(), v.comps[2].real());
            lp_from_magnitudes(
                (0..a.len()).map(|i| a[i] * a[i] + b[i] * b[i] + c[i] * c[i]),
                a.len(),
                p,
            )
        }
        NormKind::Linf => {
            let (a, b, c) =
                (v.comps[0].real(), v.comps[1].real(), v.comps[2].real());
            (0..a.len())
                .map(|i| a[i] * a[i] + b[i] * b[i] + c[i] * c[i])
                .fold(0.0f64, f64::max)
                .sqrt()
        }
        NormKind::Hs(s) => spectral_weighted_l2(
            &[&v.comps[0], &v.comps[1], &v.comps[2]],
            |k2| (1.0 + k2).powf(s),
        ),
        NormKind::W1p(p) => {
            let w = VectorField::new([
                bessel_multiplier(&v.comps[0], 1.0),
                bessel_multiplier(&v.comps[1], 1.0),
                bessel_multiplier(&v.comps[2], 1.0),
            ]);
            vector_norm(&w, NormKind::Lp(p))
        }
        NormKind::CnEst(nn) => v
            .comps
            .iter()
            .map(|c| cn_component_max(c, nn))
            .fold(0.0, f64::max),
    }
}

/// Norm of a symmetric tensor field; off-diagonal components count twice
/// in quadratic quantities (Frobenius convention).
pub fn stress_norm(s: &StressField, kind: NormKind) -> f64 {
    match kind {
        NormKind::Lp(p) => {
            assert!(p >= 1.0);
            let r: Vec<&[f64]> = s.comps.iter().map(|c| c.real()).collect();
            let len = r[0].len();
            lp_from_magnitudes(
                (0..len).map(|i| {
                    let d = r[0][i] * r[0][i] + r[1][i] * r[1][i] + r[2][i] * r[2][i];
                    let o = r[3][i] * r[3][i] + r[4][i] * r[4][i] + r[5][i] * r[5][i];
                    d + 2.0 * o
                }),
                len,
                p,
            )
        }
        NormKind::Linf => {
            let r: Vec<&[f64]> = s.comps.iter().map(|c| c.real()).collect();
            let len = r[0].len();
            (0..len)
                .map(|i| {
                    let d = r[0][i] * r[0][i] + r[1][i] * r[1][i] + r[2][i] * r[2][i];
                    let o = r[3][i] * r[3][i] + r[4][i] * r[4][i] + r[5][i] * r[5][i];
                    d + 2.0 * o
                })
                .fold(0.0f64, f64::max)
                .sqrt()
        }
        NormKind::Hs(sv) => {
            // Weight off-diagonals by sqrt(2) through duplication.
            let refs: Vec<&ScalarField> = s.comps.iter().collect();
            let diag = spectral_weighted_l2(&refs[0..3], |k2| (1.0 + k2).powf(sv));
            let off = spectral_weighted_l2(&refs[3..6], |k2| (1.0 + k2).powf(sv));
            (diag * diag + 2.0 * off * off).sqrt()
        }
        NormKind::W1p(p) => {
            let w = StressField::new(std::array::from_fn(|i| {
                bessel_multiplier(&s.comps[i], 1.0)
            }));
            stress_norm(&w, NormKind::Lp(p))
        }
        NormKind::CnEst(nn) => s
            .comps
            .iter()
            .map(|c| cn_component_max(c, nn))
            .fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::Grid3;

    #[test]
    fn l2_of_sine_matches_closed_form() {
        let g = Grid3::new(16).unwrap();
        let f = ScalarField::from_fn(g, |x, _, _| x.sin());
        let got = scalar_norm(&f, NormKind::Lp(2.0));
        let expect = (BOX_VOLUME / 2.0).sqrt();
        assert!(
            (got - expect).abs() < 1e-10,
            "got {got}, expected {expect}"
        );
    }

    #[test]
    fn h1_of_sine_matches_closed_form() {
        let g = Grid3::new(16).unwrap();
        let f = ScalarField::from_fn(g, |x, _, _| x.sin());
        let got = scalar_norm(&f, NormKind::Hs(1.0));
        let expect = BOX_VOLUME.sqrt();
        assert!(
            (got - expect).abs() < 1e-10,
            "got {got}, expected {expect}"
        );
    }

    #[test]
    fn linf_and_cn_estimates() {
        let g = Grid3::new(32).unwrap();
        let f = ScalarField::from_fn(g, |x, y, _| (x.sin()) * (2.0 * y).cos());
        assert!((scalar_norm(&f, NormKind::Linf) - 1.0).abs() < 1e-9);
        // First derivatives reach 2 (the d/dy factor).
        let c1 = scalar_norm(&f, NormKind::CnEst(1));
        assert!((c1 - 2.0).abs() < 1e-9, "c1 = {c1}");
    }

    #[test]
    fn lp_monotone_in_p_for_probability_normalised() {
        let g = Grid3::new(8).unwrap();
        let f = ScalarField::from_fn(g, |x, _, _| 1.0 + 0.5 * x.sin());
        let l1 = scalar_norm(&f, NormKind::Lp(1.0)) / BOX_VOLUME;
        let l2 = scalar_norm(&f, NormKind::Lp(2.0)) / BOX_VOLUME.powf(0.5);
        // Normalised moments increase with p.
        assert!(l2 >= l1 - 1e-12);
    }
}
