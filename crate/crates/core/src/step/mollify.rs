//! One-sided space-time mollification on the sample lattice.
//!
//! Smoothing happens in two factored passes. Space is a Fourier
//! multiplier: the symbol of a tensor-product bump of width `ell`,
//! evaluated per axis, so it applies equally to dense spectra, compact
//! blocks, and sparse modal maps. Time is a strictly causal weighted sum
//! over earlier samples: lag `i` carries the bump weight at `i dt / ell`,
//! so the output at a sample uses inputs from `[t - ell, t)` only and a
//! perturbation at a time never reaches outputs before it.

use num_complex::Complex64;

use super::slim::{Compact, Modal, ModalStress, ModalVector};
use crate::spectral::{Grid3, ScalarField};
use crate::{Error, Result};

/// Smooth bump `exp(-1/(1 - u^2))` on `(-1, 1)`, zero outside.
fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Interior bump `exp(-1/(u(1-u)))` on `(0, 1)`, zero outside.
fn bump01(u: f64) -> f64 {
    if u > 0.0 && u < 1.0 {
        (-1.0 / (u * (1.0 - u))).exp()
    } else {
        0.0
    }
}

/// Simpson quadrature of `f` over `[a, b]` with `n` intervals (`n` even).
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Factored mollifier at width `ell` on a fixed grid and time lattice.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub ell: f64,
    pub dt: f64,
    /// Strictly positive lags and their convex weights (sum is one).
    lags: Vec<(usize, f64)>,
    /// Per-axis spatial symbol at integer wavenumbers `0..=n/2-1`.
    sym1d: Vec<f64>,
}

impl Mollifier {
    pub fn new(grid: Grid3, ell: f64, dt: f64) -> Result<Mollifier> {
        if !(ell > 0.0 && dt > 0.0) {
            return Err(Error::ConfigError(
                "mollification width and time step must be positive".into(),
            ));
        }
        if ell < 2.0 * dt {
            return Err(Error::ResolutionError(format!(
                "mollification width {ell} resolves no time lag: need ell >= 2 dt = {}",
                2.0 * dt
            )));
        }
        if ell < 2.0 * grid.spacing() {
            return Err(Error::ResolutionError(format!(
                "mollification width {ell} is below two grid spacings {}",
                2.0 * grid.spacing()
            )));
        }

        let m = (ell / dt).floor() as usize;
        let mut lags: Vec<(usize, f64)> = (1..=m)
            .map(|i| (i, bump01(i as f64 * dt / ell)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let total: f64 = lags.iter().map(|&(_, w)| w).sum();
        for (_, w) in &mut lags {
            *w /= total;
        }

        // Spatial symbol of the unit bump scaled to width ell, per axis:
        // sym(k) = int b(u) cos(ell k u / 2) du / int b(u) du over (-1, 1).
        // The k = 0 entry is exactly one by construction.
        let quad_n = 4096;
        let mass = simpson(bump, -1.0, 1.0, quad_n);
        let limit = grid.max_wavenumber();
        let sym1d: Vec<f64> = (0..=limit)
            .map(|k| {
                if k == 0 {
                    1.0
                } else {
                    let w = ell * k as f64 / 2.0;
                    simpson(|u| bump(u) * (w * u).cos(), -1.0, 1.0, quad_n) / mass
                }
            })
            .collect();

        Ok(Mollifier { ell, dt, lags, sym1d })
    }

    /// Causal lags (all at least one step back) with their weights.
    pub fn lags(&self) -> &[(usize, f64)] {
        &self.lags
    }

    /// Deepest lag; outputs exist only at samples with this much history.
    pub fn max_lag(&self) -> usize {
        self.lags.last().map(|&(i, _)| i).unwrap_or(0)
    }

    /// Left history (in time units) a window must provide.
    pub fn required_history(&self) -> f64 {
        self.max_lag() as f64 * self.dt
    }

    pub fn space_symbol_axis(&self, k: i64) -> f64 {
        let a = k.unsigned_abs() as usize;
        if a < self.sym1d.len() {
            self.sym1d[a]
        } else {
            0.0
        }
    }

    pub fn space_symbol(&self, k: [i64; 3]) -> f64 {
        self.space_symbol_axis(k[0]) * self.space_symbol_axis(k[1]) * self.space_symbol_axis(k[2])
    }

    /// Guard used by time-averaging helpers.
    pub fn check_history(&self, j: usize) -> Result<()> {
        if j < self.max_lag() {
            return Err(Error::WindowError(format!(
                "sample {j} lacks the {} causal lags the mollifier needs",
                self.max_lag()
            )));
        }
        Ok(())
    }

    /// Time-mollify a scalar trajectory at sample `j`.
    pub fn time_scalar(&self, j: usize, sample: impl Fn(usize) -> f64) -> Result<f64> {
        self.check_history(j)?;
        Ok(self.lags.iter().map(|&(i, w)| w * sample(j - i)).sum())
    }

    /// Time-mollify a modal trajectory at sample `j`; the space symbol is
    /// not applied here.
    pub fn time_modal(&self, j: usize, sample: impl Fn(usize) -> Modal) -> Result<Modal> {
        self.check_history(j)?;
        let mut out = Modal::new();
        for &(i, w) in &self.lags {
            out.add_assign_scaled(&sample(j - i), w);
        }
        Ok(out)
    }

    pub fn time_modal_vector(
        &self,
        j: usize,
        sample: impl Fn(usize) -> ModalVector,
    ) -> Result<ModalVector> {
        self.check_history(j)?;
        let mut out = ModalVector::default();
        for &(i, w) in &self.lags {
            let s = sample(j - i);
            for c in 0..3 {
                out.0[c].add_assign_scaled(&s.0[c], w);
            }
        }
        Ok(out)
    }

    pub fn time_modal_stress(
        &self,
        j: usize,
        sample: impl Fn(usize) -> ModalStress,
    ) -> Result<ModalStress> {
        self.check_history(j)?;
        let mut out = ModalStress::default();
        for &(i, w) in &self.lags {
            out.add_assign_scaled(&sample(j - i), w);
        }
        Ok(out)
    }

    pub fn time_compact(
        &self,
        j: usize,
        sample: impl Fn(usize) -> Compact,
    ) -> Result<Compact> {
        self.check_history(j)?;
        let mut acc: Option<Compact> = None;
        for &(i, w) in &self.lags {
            let s = sample(j - i);
            match &mut acc {
                None => acc = Some(s.scale(w)),
                Some(a) => a.add_assign_scaled(&s, w),
            }
        }
        Ok(acc.expect("mollifier has at least one lag"))
    }

    /// Apply the spatial symbol to each container kind.
    pub fn space_modal(&self, m: &Modal) -> Modal {
        m.map(|k, c| c * self.space_symbol(k))
    }

    pub fn space_modal_vector(&self, v: &ModalVector) -> ModalVector {
        ModalVector(std::array::from_fn(|i| self.space_modal(&v.0[i])))
    }

    pub fn space_modal_stress(&self, s: &ModalStress) -> ModalStress {
        ModalStress(std::array::from_fn(|i| self.space_modal(&s.0[i])))
    }

    pub fn space_compact(&self, c: &Compact) -> Compact {
        let mut out = c.clone();
        for (p, k) in c.ball.wavenumbers().iter().enumerate() {
            out.c[p] = c.c[p] * self.space_symbol(*k);
        }
        out
    }

    pub fn space_field(&self, f: &ScalarField) -> ScalarField {
        // The multiplier sees continuous wavenumbers with Nyquist rows
        // zeroed by the grid; round back to the integer symbol table.
        f.spec_map(|kx, ky, kz| {
            Complex64::new(
                self.space_symbol([
                    kx.round() as i64,
                    ky.round() as i64,
                    kz.round() as i64,
                ]),
                0.0,
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{norms, NormKind};

    #[test]
    fn rejects_underresolved_widths() {
        let grid = Grid3::new(32).unwrap();
        assert!(matches!(
            Mollifier::new(grid, 0.05, 0.1),
            Err(Error::ResolutionError(_))
        ));
        // Two spacings at n = 32 is about 0.39.
        assert!(matches!(
            Mollifier::new(grid, 0.2, 0.01),
            Err(Error::ResolutionError(_))
        ));
    }

    #[test]
    fn constant_trajectory_is_fixed() {
        let grid = Grid3::new(32).unwrap();
        let moll = Mollifier::new(grid, 0.4, 0.1).unwrap();
        let out = moll.time_scalar(10, |_| 2.75).unwrap();
        assert!((out - 2.75).abs() < 1e-13);
        // A constant field is spatially fixed too: its only mode is k = 0.
        assert_eq!(moll.space_symbol([0, 0, 0]), 1.0);
    }

    #[test]
    fn strictly_causal_in_time() {
        let grid = Grid3::new(32).unwrap();
        let moll = Mollifier::new(grid, 0.4, 0.1).unwrap();
        let spike = 17usize;
        let base = |_j: usize| 1.0;
        let bumped = |j: usize| if j == spike { 5.0 } else { 1.0 };
        for j in moll.max_lag()..30 {
            let a = moll.time_scalar(j, base).unwrap();
            let b = moll.time_scalar(j, bumped).unwrap();
            if j <= spike {
                assert_eq!(a, b, "output at {j} saw a future or same-time input");
            }
            if j > spike && j <= spike + moll.max_lag() {
                assert!(b > a, "output at {j} missed a past input");
            }
        }
    }

    #[test]
    fn window_guard_fires() {
        let grid = Grid3::new(32).unwrap();
        let moll = Mollifier::new(grid, 0.4, 0.1).unwrap();
        assert!(matches!(
            moll.time_scalar(moll.max_lag() - 1, |_| 0.0),
            Err(Error::WindowError(_))
        ));
    }

    #[test]
    fn sine_matches_quadrature_oracle() {
        let grid = Grid3::new(32).unwrap();
        let ell = 0.45;
        let moll = Mollifier::new(grid, ell, 0.1).unwrap();
        let f = ScalarField::from_fn(grid, |x, _, _| x.sin());
        let smoothed = moll.space_field(&f);

        // Independent oracle: trapezoid rule at a different resolution
        // for the width-ell bump symbol at k = 1.
        let n = 200_000usize;
        let h = 2.0 / n as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..=n {
            let u = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let b = bump(u);
            num += w * b * (ell * u / 2.0).cos();
            den += w * b;
        }
        let m_oracle = num / den;

        let want = f.scale(m_oracle);
        let diff = norms::scalar_norm(&smoothed.sub(&want), NormKind::Lp(2.0));
        let scale = norms::scalar_norm(&want, NormKind::Lp(2.0));
        assert!(
            diff <= 1e-8 * scale,
            "sine symbol mismatch: {diff:.3e} vs oracle {m_oracle:.12}"
        );
    }

    #[test]
    fn symbol_tensorizes_over_axes() {
        let grid = Grid3::new(32).unwrap();
        let moll = Mollifier::new(grid, 0.5, 0.1).unwrap();
        let s = moll.space_symbol([2, 3, 1]);
        let p = moll.space_symbol_axis(2) * moll.space_symbol_axis(3) * moll.space_symbol_axis(1);
        assert_eq!(s, p);
        assert!(s < 1.0 && s > 0.0);
    }
}
