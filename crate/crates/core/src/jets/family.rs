//! Jet family: scales, Fourier realization, evaluators and identity
//! checks.
//!
//! With `sigma = N_STAR * lambda * r_perp` (an integer by the validated
//! integrality `lambda r_perp in N`), a jet for direction `xi` is
//!
//! `W(t,x) = xi psi(sigma(x.xi + mu t)) phi(sigma(x-alpha).A, sigma(x-alpha).B)`
//!
//! where `psi`, `phi` are the 2pi-periodized scaled profiles. Because
//! `sigma xi`, `sigma A`, `sigma B` are integer vectors, the series of
//! the product lives on the integer lattice `k = m sigma xi + m1 sigma A
//! + m2 sigma B`, and `|k| = sigma sqrt(m^2 + m1^2 + m2^2)` by
//! orthonormality of the frame. The engine realizes jets as truncations
//! of that series to a box-disc band (axial harmonics `|m| <= M_ax`,
//! planar `m1^2 + m2^2 <= M_pl^2`), which keeps every quadratic pattern
//! separable, and time enters only through the axial phase
//! `exp(i m sigma mu t)`, so time derivatives of any order are exact
//! multiplier actions.

use super::placement;
use super::profiles::ProfileSet;
use crate::geometry::{self, N_STAR};
use crate::spectral::fft;
use crate::spectral::{Grid3, ScalarField, VectorField};
use crate::{Error, Result};
use num_complex::Complex64;

/// Scale parameters of one jet family.
#[derive(Clone, Copy, Debug)]
pub struct JetScales {
    pub lambda: f64,
    pub r_perp: f64,
    pub r_par: f64,
    pub mu: f64,
}

impl JetScales {
    /// Validate ranges and the integrality `lambda r_perp in N`.
    pub fn validate(&self) -> Result<()> {
        if !(self.r_perp > 0.0 && self.r_perp <= 1.0) {
            return Err(Error::ConfigError("r_perp must lie in (0, 1]".into()));
        }
        if !(self.r_par >= self.r_perp && self.r_par <= 1.0) {
            return Err(Error::ConfigError(
                "r_par must lie in [r_perp, 1]".into(),
            ));
        }
        if !(self.mu > 0.0) {
            return Err(Error::ConfigError("mu must be positive".into()));
        }
        let lr = self.lambda * self.r_perp;
        if lr < 1.0 - 1e-9 || (lr - lr.round()).abs() > 1e-9 {
            return Err(Error::ConfigError(format!(
                "lambda * r_perp = {lr} must be a positive integer"
            )));
        }
        Ok(())
    }

    /// `lambda r_perp` as the validated integer.
    pub fn lambda_r_perp(&self) -> i64 {
        (self.lambda * self.r_perp).round() as i64
    }

    /// Fundamental lattice scale `sigma = N_STAR * lambda * r_perp`.
    pub fn sigma(&self) -> i64 {
        N_STAR * self.lambda_r_perp()
    }
}

/// Truncation band of the realized series: axial `|m| <= m_axial`,
/// planar `m1^2 + m2^2 <= m_planar^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JetBand {
    pub m_axial: i64,
    pub m_planar: i64,
}

impl JetBand {
    /// Balanced band with every mode inside `|k| <= kappa`.
    pub fn for_kappa(sigma: i64, kappa: f64) -> JetBand {
        let rho = kappa / sigma as f64;
        let m = (rho / std::f64::consts::SQRT_2).floor().max(0.0) as i64;
        JetBand {
            m_axial: m,
            m_planar: m,
        }
    }

    /// Largest wavenumber any realized mode can reach.
    pub fn max_wavenumber(&self, sigma: i64) -> f64 {
        sigma as f64
            * ((self.m_axial * self.m_axial + self.m_planar * self.m_planar) as f64)
                .sqrt()
    }
}

/// Scalar patterns expressible on the jet lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// `psi phi`: the scalar intensity of the jet.
    PsiPhi,
    /// `psi^2 phi^2`: square of the realized intensity (band doubles).
    PsiSqPhiSq,
}

/// Vector patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorPattern {
    /// The jet itself, `xi psi phi`.
    W,
    /// Incompressibility corrector
    /// `r_perp^2 psi' (Phi_1 A + Phi_2 B)`.
    WCorrector,
    /// Potential with `curl curl V = W + W^c`:
    /// `(r_perp^2 / sigma^2) psi Phi xi`.
    V,
}

/// A jet family: shared profile coefficient tables plus per-direction
/// frames and shifts.
#[derive(Clone, Debug)]
pub struct JetFamily {
    pub profiles: ProfileSet,
    pub scales: JetScales,
    pub sigma: i64,
    /// Shifts per direction, found by placement.
    pub shifts: [[f64; 3]; 6],
    /// 1-D pulse coefficients, index `m + m_psi`.
    psi_hat: Vec<Complex64>,
    m_psi: i64,
    /// 2-D potential coefficients, row-major `(m1 + m_phi) + (2 m_phi + 1)(m2 + m_phi)`.
    cap_phi_hat: Vec<Complex64>,
    m_phi: i64,
}

const PSI_SAMPLES: usize = 8192;
const PHI_SAMPLES: usize = 1024;
const PSI_STORE: i64 = 512;
const PHI_STORE: i64 = 120;

fn wrap_to_pi(v: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = v % two_pi;
    if w >= std::f64::consts::PI {
        w -= two_pi;
    } else if w < -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

impl JetFamily {
    /// Build the family: validate scales, compute profile coefficient
    /// tables, and place shifts with grid-verified disjoint supports.
    pub fn build(profiles: ProfileSet, scales: JetScales, grid: Grid3) -> Result<Self> {
        let mut fam = Self::assemble(profiles, scales)?;
        fam.shifts = placement::place_shifts(fam.sigma, scales.r_perp, grid)?;
        Ok(fam)
    }

    /// Build with best-effort shifts: the worst pair margin is maximized
    /// but may be negative when disjointness is geometrically impossible
    /// at this radius. Identity checks and quadrature norms are
    /// unaffected; overlap shows up only in cross-direction products,
    /// which downstream consumers measure and absorb explicitly.
    pub fn build_best_effort(
        profiles: ProfileSet,
        scales: JetScales,
    ) -> Result<(Self, placement::PlacementDiag)> {
        let mut fam = Self::assemble(profiles, scales)?;
        let (shifts, diag) =
            placement::place_shifts_best_effort(fam.sigma, scales.r_perp);
        fam.shifts = shifts;
        Ok((fam, diag))
    }

    fn assemble(profiles: ProfileSet, scales: JetScales) -> Result<Self> {
        scales.validate()?;
        let sigma = scales.sigma();
        let mut fam = JetFamily {
            profiles,
            scales,
            sigma,
            shifts: [[0.0; 3]; 6],
            psi_hat: Vec::new(),
            m_psi: PSI_STORE,
            cap_phi_hat: Vec::new(),
            m_phi: PHI_STORE,
        };
        fam.compute_psi_coeffs();
        fam.compute_phi_coeffs();
        Ok(fam)
    }

    fn compute_psi_coeffs(&mut self) {
        let n = PSI_SAMPLES;
        let rp = self.scales.r_par;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let v = wrap_to_pi(2.0 * std::f64::consts::PI * j as f64 / n as f64);
                Complex64::new(self.profiles.psi(v / rp) / rp.sqrt(), 0.0)
            })
            .collect();
        fft::fft1(&mut buf, false);
        let m = self.m_psi;
        self.psi_hat = (-m..=m)
            .map(|mm| buf[((mm + n as i64) % n as i64) as usize])
            .collect();
    }

    fn compute_phi_coeffs(&mut self) {
        let n = PHI_SAMPLES;
        let rp = self.scales.r_perp;
        let mut buf = vec![Complex64::default(); n * n];
        for j2 in 0..n {
            let y2 = wrap_to_pi(2.0 * std::f64::consts::PI * j2 as f64 / n as f64) / rp;
            for j1 in 0..n {
                let y1 =
                    wrap_to_pi(2.0 * std::f64::consts::PI * j1 as f64 / n as f64) / rp;
                buf[j2 * n + j1] =
                    Complex64::new(self.profiles.cap_phi(y1, y2) / rp, 0.0);
            }
        }
        fft::fft2(&mut buf, n, false);
        let m = self.m_phi;
        let w = (2 * m + 1) as usize;
        let mut out = vec![Complex64::default(); w * w];
        for m2 in -m..=m {
            for m1 in -m..=m {
                let src = (((m2 + n as i64) % n as i64) * n as i64
                    + ((m1 + n as i64) % n as i64)) as usize;
                out[((m2 + m) * (2 * m + 1) + (m1 + m)) as usize] = buf[src];
            }
        }
        self.cap_phi_hat = out;
    }

    #[inline]
    fn psi_c(&self, m: i64) -> Complex64 {
        self.psi_hat[(m + self.m_psi) as usize]
    }

    #[inline]
    fn cap_phi_c(&self, m1: i64, m2: i64) -> Complex64 {
        self.cap_phi_hat
            [((m2 + self.m_phi) * (2 * self.m_phi + 1) + (m1 + self.m_phi)) as usize]
    }

    /// Coefficient of `phi = -r_perp^2 Laplacian(Phi)` in the periodic
    /// variables: `r_perp^2 |m|^2 Phi_hat`.
    #[inline]
    fn phi_c(&self, m1: i64, m2: i64) -> Complex64 {
        let r2 = self.scales.r_perp * self.scales.r_perp;
        self.cap_phi_c(m1, m2) * (r2 * (m1 * m1 + m2 * m2) as f64)
    }

    fn axial_list(&self, band: JetBand, deriv: u32) -> Vec<(i64, Complex64)> {
        (-band.m_axial..=band.m_axial)
            .map(|m| {
                let mut c = self.psi_c(m);
                for _ in 0..deriv {
                    c *= Complex64::new(0.0, m as f64);
                }
                (m, c)
            })
            .collect()
    }

    fn axial_square_list(&self, band: JetBand) -> Vec<(i64, Complex64)> {
        // Exact convolution of the band-restricted pulse with itself.
        let b = band.m_axial;
        let mut out = vec![Complex64::default(); (4 * b + 1) as usize];
        for m in -b..=b {
            let cm = self.psi_c(m);
            for m2 in -b..=b {
                out[(m + m2 + 2 * b) as usize] += cm * self.psi_c(m2);
            }
        }
        (-2 * b..=2 * b)
            .map(|m| (m, out[(m + 2 * b) as usize]))
            .collect()
    }

    fn planar_disc(&self, band: JetBand) -> Vec<(i64, i64)> {
        let b = band.m_planar;
        let mut v = Vec::new();
        for m2 in -b..=b {
            for m1 in -b..=b {
                if m1 * m1 + m2 * m2 <= b * b {
                    v.push((m1, m2));
                }
            }
        }
        v
    }

    fn planar_phi_list(&self, band: JetBand) -> Vec<(i64, i64, Complex64)> {
        self.planar_disc(band)
            .into_iter()
            .map(|(m1, m2)| (m1, m2, self.phi_c(m1, m2)))
            .collect()
    }

    fn planar_phi_square_list(&self, band: JetBand) -> Vec<(i64, i64, Complex64)> {
        let base = self.planar_phi_list(band);
        let b = band.m_planar;
        let w = (4 * b + 1) as usize;
        let mut out = vec![Complex64::default(); w * w];
        for &(a1, a2, ca) in &base {
            for &(b1, b2, cb) in &base {
                let i1 = (a1 + b1 + 2 * b) as usize;
                let i2 = (a2 + b2 + 2 * b) as usize;
                out[i2 * w + i1] += ca * cb;
            }
        }
        let mut v = Vec::new();
        for m2 in -2 * b..=2 * b {
            for m1 in -2 * b..=2 * b {
                let c = out[((m2 + 2 * b) * (4 * b + 1) as i64 + (m1 + 2 * b)) as usize];
                if c.norm_sqr() > 0.0 {
                    v.push((m1, m2, c));
                }
            }
        }
        v
    }

    /// Fraction of the pulse's squared mass beyond `|m| > m_cut`
    /// (within the stored coefficient range).
    pub fn axial_tail_energy(&self, m_cut: i64) -> f64 {
        let total: f64 = (-self.m_psi..=self.m_psi)
            .map(|m| self.psi_c(m).norm_sqr())
            .sum();
        let tail: f64 = (-self.m_psi..=self.m_psi)
            .filter(|m| m.abs() > m_cut)
            .map(|m| self.psi_c(m).norm_sqr())
            .sum();
        tail / total
    }

    /// Fraction of the bump's squared mass beyond `m1^2 + m2^2 > m_cut^2`.
    pub fn planar_tail_energy(&self, m_cut: i64) -> f64 {
        let mut total = 0.0;
        let mut tail = 0.0;
        for m2 in -self.m_phi..=self.m_phi {
            for m1 in -self.m_phi..=self.m_phi {
                let e = self.phi_c(m1, m2).norm_sqr();
                total += e;
                if m1 * m1 + m2 * m2 > m_cut * m_cut {
                    tail += e;
                }
            }
        }
        tail / total
    }

    /// Zero mode of the realized `psi^2 phi^2` pattern: the exact grid
    /// mean of `|W|^2` for the band-limited jet.
    pub fn realized_square_mean(&self, band: JetBand) -> f64 {
        let ax: f64 = (-band.m_axial..=band.m_axial)
            .map(|m| self.psi_c(m).norm_sqr())
            .sum();
        let pl: f64 = self
            .planar_disc(band)
            .into_iter()
            .map(|(m1, m2)| self.phi_c(m1, m2).norm_sqr())
            .sum();
        ax * pl
    }

    fn frame(&self, dir: usize) -> ([f64; 3], [f64; 3], [f64; 3], [i64; 3], [i64; 3], [i64; 3]) {
        let d = &geometry::directions()[dir];
        let s = self.scales.lambda_r_perp();
        let scale = |v: [i64; 3]| [v[0] * s, v[1] * s, v[2] * s];
        (
            d.xi_f64(),
            d.a_f64(),
            d.b_f64(),
            scale(d.xi_lattice()),
            scale(d.a_lattice()),
            scale(d.b_lattice()),
        )
    }

    /// Scatter one scalar pattern into a spectrum on `grid`.
    ///
    /// `dt_order` applies the analytic time derivative
    /// `(i m sigma mu)^order` to the axial phase.
    fn scatter_pattern(
        &self,
        grid: Grid3,
        dir: usize,
        axial: &[(i64, Complex64)],
        planar: &[(i64, i64, Complex64)],
        t: f64,
        dt_order: u32,
    ) -> Result<Vec<Complex64>> {
        let n = grid.n() as i64;
        let (_, _, _, kxi, ka, kb) = self.frame(dir);
        let alpha = self.shifts[dir];
        let smu = self.sigma as f64 * self.scales.mu;
        let mut spec = vec![Complex64::default(); grid.len()];
        for &(m, am) in axial {
            if am.norm_sqr() == 0.0 {
                continue;
            }
            // Axial phase and time-derivative factor.
            let mut c_ax = am * Complex64::from_polar(1.0, m as f64 * smu * t);
            for _ in 0..dt_order {
                c_ax *= Complex64::new(0.0, m as f64 * smu);
            }
            for &(m1, m2, pc) in planar {
                if pc.norm_sqr() == 0.0 {
                    continue;
                }
                let k = [
                    m * kxi[0] + m1 * ka[0] + m2 * kb[0],
                    m * kxi[1] + m1 * ka[1] + m2 * kb[1],
                    m * kxi[2] + m1 * ka[2] + m2 * kb[2],
                ];
                if k.iter().any(|&ki| ki.abs() > n / 2 - 1) {
                    return Err(Error::ResolutionError(format!(
                        "jet mode {k:?} exceeds the grid band (n = {n})"
                    )));
                }
                let shift_phase = -(m1 as f64
                    * (ka[0] as f64 * alpha[0]
                        + ka[1] as f64 * alpha[1]
                        + ka[2] as f64 * alpha[2])
                    + m2 as f64
                        * (kb[0] as f64 * alpha[0]
                            + kb[1] as f64 * alpha[1]
                            + kb[2] as f64 * alpha[2]));
                let c = c_ax * pc * Complex64::from_polar(1.0, shift_phase);
                let ix = ((k[0] % n + n) % n) as usize;
                let iy = ((k[1] % n + n) % n) as usize;
                let iz = ((k[2] % n + n) % n) as usize;
                spec[grid.index(ix, iy, iz)] += c;
            }
        }
        Ok(spec)
    }

    /// Realize a scalar pattern on the grid at time `t`.
    pub fn scatter_scalar(
        &self,
        grid: Grid3,
        dir: usize,
        pattern: Pattern,
        band: JetBand,
        t: f64,
        dt_order: u32,
    ) -> Result<ScalarField> {
        let spec = match pattern {
            Pattern::PsiPhi => self.scatter_pattern(
                grid,
                dir,
                &self.axial_list(band, 0),
                &self.planar_phi_list(band),
                t,
                dt_order,
            )?,
            Pattern::PsiSqPhiSq => self.scatter_pattern(
                grid,
                dir,
                &self.axial_square_list(band),
                &self.planar_phi_square_list(band),
                t,
                dt_order,
            )?,
        };
        Ok(ScalarField::from_spec(grid, spec))
    }

    /// Realize a vector pattern on the grid at time `t`.
    pub fn scatter_vector(
        &self,
        grid: Grid3,
        dir: usize,
        pattern: VectorPattern,
        band: JetBand,
        t: f64,
        dt_order: u32,
    ) -> Result<VectorField> {
        let (xi, a, b, _, _, _) = self.frame(dir);
        match pattern {
            VectorPattern::W => {
                let s = self.scatter_pattern(
                    grid,
                    dir,
                    &self.axial_list(band, 0),
                    &self.planar_phi_list(band),
                    t,
                    dt_order,
                )?;
                Ok(constant_direction(grid, &s, xi))
            }
            VectorPattern::V => {
                let r2 = self.scales.r_perp * self.scales.r_perp;
                let s2 = (self.sigma * self.sigma) as f64;
                let list: Vec<(i64, i64, Complex64)> = self
                    .planar_disc(band)
                    .into_iter()
                    .map(|(m1, m2)| (m1, m2, self.cap_phi_c(m1, m2) * (r2 / s2)))
                    .collect();
                let s = self.scatter_pattern(
                    grid,
                    dir,
                    &self.axial_list(band, 0),
                    &list,
                    t,
                    dt_order,
                )?;
                Ok(constant_direction(grid, &s, xi))
            }
            VectorPattern::WCorrector => {
                let r2 = self.scales.r_perp * self.scales.r_perp;
                let ax = self.axial_list(band, 1);
                let d1: Vec<(i64, i64, Complex64)> = self
                    .planar_disc(band)
                    .into_iter()
                    .map(|(m1, m2)| {
                        (m1, m2, self.cap_phi_c(m1, m2) * Complex64::new(0.0, m1 as f64) * r2)
                    })
                    .collect();
                let d2: Vec<(i64, i64, Complex64)> = self
                    .planar_disc(band)
                    .into_iter()
                    .map(|(m1, m2)| {
                        (m1, m2, self.cap_phi_c(m1, m2) * Complex64::new(0.0, m2 as f64) * r2)
                    })
                    .collect();
                let s1 = self.scatter_pattern(grid, dir, &ax, &d1, t, dt_order)?;
                let s2 = self.scatter_pattern(grid, dir, &ax, &d2, t, dt_order)?;
                let comp = |i: usize| {
                    let spec: Vec<Complex64> = s1
                        .iter()
                        .zip(&s2)
                        .map(|(&x, &y)| x * a[i] + y * b[i])
                        .collect();
                    ScalarField::from_spec(grid, spec)
                };
                Ok(VectorField::new([comp(0), comp(1), comp(2)]))
            }
        }
    }

    /// Analytic (profile-space) evaluation of the jet intensity
    /// `psi phi` at a point, for oracle tests against the realization.
    pub fn analytic_intensity(&self, dir: usize, t: f64, x: [f64; 3]) -> f64 {
        let (xi, a, b, _, _, _) = self.frame(dir);
        let alpha = self.shifts[dir];
        let s = self.sigma as f64;
        let dot = |p: [f64; 3], q: [f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
        let u = wrap_to_pi(s * (dot(x, xi) + self.scales.mu * t));
        let xa = [x[0] - alpha[0], x[1] - alpha[1], x[2] - alpha[2]];
        let y1 = wrap_to_pi(s * dot(xa, a));
        let y2 = wrap_to_pi(s * dot(xa, b));
        let rp = self.scales.r_par;
        let rq = self.scales.r_perp;
        (self.profiles.psi(u / rp) / rp.sqrt()) * (self.profiles.phi(y1 / rq, y2 / rq) / rq)
    }

    fn jet_arguments(&self, dir: usize, t: f64, x: [f64; 3]) -> (f64, f64, f64) {
        let (xi, a, b, _, _, _) = self.frame(dir);
        let alpha = self.shifts[dir];
        let s = self.sigma as f64;
        let dot = |p: [f64; 3], q: [f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
        let u = wrap_to_pi(s * (dot(x, xi) + self.scales.mu * t));
        let xa = [x[0] - alpha[0], x[1] - alpha[1], x[2] - alpha[2]];
        (u, wrap_to_pi(s * dot(xa, a)), wrap_to_pi(s * dot(xa, b)))
    }

    /// Closed-form jet vector `W = psi phi xi` at a point.
    pub fn analytic_w(&self, dir: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let v = self.analytic_intensity(dir, t, x);
        let (xi, ..) = self.frame(dir);
        [v * xi[0], v * xi[1], v * xi[2]]
    }

    /// Closed-form incompressibility corrector at a point:
    /// `psi' (Phi_1 A + Phi_2 B)` in profile coordinates, carrying the
    /// same prefactors as the realized pattern.
    pub fn analytic_w_corrector(&self, dir: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let (_, a, b, _, _, _) = self.frame(dir);
        let (u, y1, y2) = self.jet_arguments(dir, t, x);
        let rp = self.scales.r_par;
        let rq = self.scales.r_perp;
        let dpsi = self.profiles.psi_d1(u / rp) / rp.powf(1.5);
        let grad = self.profiles.cap_phi_grad(y1 / rq, y2 / rq);
        [
            dpsi * (grad[0] * a[0] + grad[1] * b[0]),
            dpsi * (grad[0] * a[1] + grad[1] * b[1]),
            dpsi * (grad[0] * a[2] + grad[1] * b[2]),
        ]
    }

    /// Closed-form vector potential `V` at a point.
    pub fn analytic_v(&self, dir: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let (xi, ..) = self.frame(dir);
        let (u, y1, y2) = self.jet_arguments(dir, t, x);
        let rp = self.scales.r_par;
        let rq = self.scales.r_perp;
        let s2 = (self.sigma * self.sigma) as f64;
        let v = (rq / s2)
            * (self.profiles.psi(u / rp) / rp.sqrt())
            * self.profiles.cap_phi(y1 / rq, y2 / rq);
        [v * xi[0], v * xi[1], v * xi[2]]
    }

    /// Closed-form time derivative of the axial pulse factor.
    pub fn analytic_psi_dt(&self, dir: usize, t: f64, x: [f64; 3]) -> f64 {
        let (u, ..) = self.jet_arguments(dir, t, x);
        let rp = self.scales.r_par;
        let s = self.sigma as f64;
        s * self.scales.mu * self.profiles.psi_d1(u / rp) / rp.powf(1.5)
    }

    /// Closed-form spatial gradient of the axial pulse factor.
    pub fn analytic_psi_grad(&self, dir: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let (xi, ..) = self.frame(dir);
        let (u, ..) = self.jet_arguments(dir, t, x);
        let rp = self.scales.r_par;
        let s = self.sigma as f64;
        let d = s * self.profiles.psi_d1(u / rp) / rp.powf(1.5);
        [d * xi[0], d * xi[1], d * xi[2]]
    }

    /// Support membership of the (analytic) jet tube at a point.
    pub fn in_support(&self, dir: usize, x: [f64; 3]) -> bool {
        let (_, a, b, _, _, _) = self.frame(dir);
        let alpha = self.shifts[dir];
        let s = self.sigma as f64;
        let xa = [x[0] - alpha[0], x[1] - alpha[1], x[2] - alpha[2]];
        let y1 = wrap_to_pi(s * (xa[0] * a[0] + xa[1] * a[1] + xa[2] * a[2]));
        let y2 = wrap_to_pi(s * (xa[0] * b[0] + xa[1] * b[1] + xa[2] * b[2]));
        y1 * y1 + y2 * y2 < self.scales.r_perp * self.scales.r_perp
    }

    /// Separable quadrature for `||W||_{L^p}` of the analytic jet
    /// (`p >= 1`); exact by the covering map between the torus and the
    /// jet coordinates.
    pub fn w_lp_norm(&self, p: f64) -> f64 {
        let rp = self.scales.r_par;
        let rq = self.scales.r_perp;
        let ax = simpson_mean(200_000, |u| {
            (self.profiles.psi(u / rp).abs() / rp.sqrt()).powf(p)
        });
        let pl = radial_mean(200_000, |s| {
            (self.profiles.phi_radial(s).abs() / rq).powf(p)
        }, rq);
        (crate::BOX_VOLUME * ax * pl).powf(1.0 / p)
    }

    /// Sup norm of the analytic jet.
    pub fn w_sup_norm(&self) -> f64 {
        let rp = self.scales.r_par;
        let rq = self.scales.r_perp;
        let mut smax = 0.0f64;
        for i in 0..20_001 {
            let u = -1.0 + 2.0 * i as f64 / 20_000.0;
            smax = smax.max(self.profiles.psi(u).abs());
        }
        let mut pmax = 0.0f64;
        for i in 0..20_001 {
            let s = i as f64 / 20_000.0;
            pmax = pmax.max(self.profiles.phi_radial(s).abs());
        }
        smax / rp.sqrt() * pmax / rq
    }

    /// `||W^c||_{L^2} / ||W||_{L^2}` from profile constants: equals
    /// `(r_perp / r_par) sqrt(C1 C2)` with `C1 = (1/2pi) int psi'^2` and
    /// `C2 = (1/4pi^2) int |grad Phi|^2`.
    pub fn corrector_l2_ratio(&self) -> f64 {
        let c1 = simpson01(100_000, |z| {
            let v = self.profiles.psi_d1(z);
            v * v
        }) / std::f64::consts::PI;
        let c2 = {
            let int = std::f64::consts::PI
                * simpson01(100_000, |s| {
                    let g = self.profiles.cap_phi_grad(s.sqrt(), 0.0)[0];
                    // |grad Phi|^2 at radius sqrt(s) equals (2 C g' sqrt(s))^2
                    // = component^2 evaluated along the first axis.
                    g * g
                });
            int / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
        };
        self.scales.r_perp / self.scales.r_par * (c1 * c2).sqrt()
    }
}

fn constant_direction(grid: Grid3, spec: &[Complex64], dir: [f64; 3]) -> VectorField {
    let comp = |i: usize| {
        ScalarField::from_spec(grid, spec.iter().map(|&c| c * dir[i]).collect())
    };
    VectorField::new([comp(0), comp(1), comp(2)])
}

/// Mean of `f` over one 2pi period, integrating the support `[-1, 1]`.
fn simpson_mean(panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    simpson_ab(-1.0, 1.0, panels, f) / (2.0 * std::f64::consts::PI)
}

fn simpson01(panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    simpson_ab(0.0, 1.0, panels, f)
}

fn simpson_ab(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Mean over the 2-D periodic cell of a radial function of `s = |y/rq|^2`
/// supported on `|y| <= rq`: `(1/4pi^2) pi rq^2 int_0^1 f(s) ds`.
fn radial_mean(panels: usize, f: impl Fn(f64) -> f64, rq: f64) -> f64 {
    std::f64::consts::PI * rq * rq * simpson_ab(0.0, 1.0, panels, f)
        / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::profiles::ProfileConfig;
    use crate::spectral::norms::{vector_norm, NormKind};
    use crate::spectral::ops;

    fn small_family() -> JetFamily {
        let profiles = ProfileSet::build(ProfileConfig::default()).unwrap();
        let scales = JetScales {
            lambda: 4.0,
            r_perp: 0.25,
            r_par: 0.5,
            mu: 3.0,
        };
        JetFamily::build_best_effort(profiles, scales).unwrap().0
    }

    #[test]
    fn corrected_jet_equals_curl_curl_potential() {
        let grid = Grid3::new(64).unwrap();
        let fam = small_family();
        let band = JetBand::for_kappa(fam.sigma, 21.0);
        let t = 0.37;
        for dir in [0usize, 3] {
            let v = fam
                .scatter_vector(grid, dir, VectorPattern::V, band, t, 0)
                .unwrap();
            let w = fam
                .scatter_vector(grid, dir, VectorPattern::W, band, t, 0)
                .unwrap();
            let wc = fam
                .scatter_vector(grid, dir, VectorPattern::WCorrector, band, t, 0)
                .unwrap();
            let cc = ops::curl(&ops::curl(&v));
            let total = w.add(&wc);
            let diff = cc.sub(&total);
            let rel = vector_norm(&diff, NormKind::Lp(2.0))
                / vector_norm(&w, NormKind::Lp(2.0));
            assert!(rel < 1e-12, "dir {dir}: rel {rel}");
            // And the corrected jet is exactly divergence-free.
            let dv = ops::divergence(&total);
            let dmax = dv.real().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let wmax = vector_norm(&w, NormKind::Linf);
            assert!(dmax / wmax < 1e-12, "dir {dir}: div {dmax}");
        }
    }

    #[test]
    fn transport_identity_is_exact() {
        // d_t W = mu (xi . grad) W for the realized jet: the tube
        // translates rigidly toward -xi at speed mu.
        let grid = Grid3::new(32).unwrap();
        let fam = small_family();
        let band = JetBand::for_kappa(fam.sigma, 10.0);
        let t = 0.11;
        let dir = 1;
        let dt = fam
            .scatter_vector(grid, dir, VectorPattern::W, band, t, 1)
            .unwrap();
        let w = fam
            .scatter_vector(grid, dir, VectorPattern::W, band, t, 0)
            .unwrap();
        let xi = geometry::directions()[dir].xi_f64();
        let mut adv = VectorField::zeros(grid);
        for i in 0..3 {
            let mut d = ops::derivative(&w.comps[i], 0).scale(xi[0]);
            d = d.add(&ops::derivative(&w.comps[i], 1).scale(xi[1]));
            d = d.add(&ops::derivative(&w.comps[i], 2).scale(xi[2]));
            adv.comps[i] = d.scale(fam.scales.mu);
        }
        let diff = dt.sub(&adv);
        let rel = vector_norm(&diff, NormKind::Lp(2.0))
            / vector_norm(&dt, NormKind::Lp(2.0)).max(1e-300);
        assert!(rel < 1e-12, "rel {rel}");
    }

    #[test]
    fn grid_mean_factorizes_through_jet_coordinates() {
        // The integer frame matrix is invertible mod n, so the grid mean
        // of the analytically sampled squared jet equals the product of
        // the 1-D and 2-D lattice means.
        let grid = Grid3::new(64).unwrap();
        let fam = small_family();
        let n = grid.n();
        let dir = 2;
        let t = 0.0;
        let mut total = 0.0;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let x = [grid.point(ix), grid.point(iy), grid.point(iz)];
                    let v = fam.analytic_intensity(dir, t, x);
                    total += v * v;
                }
            }
        }
        let grid_mean = total / grid.len() as f64;

        let (_, a, b, _, _, _) = fam.frame(dir);
        let alpha = fam.shifts[dir];
        let s = fam.sigma as f64;
        let rp = fam.scales.r_par;
        let rq = fam.scales.r_perp;
        // The integer frame rows have determinant sigma^3, coprime to n,
        // so j -> (K_xi.j, K_A.j, K_B.j) permutes (Z/n)^3 and the grid
        // sum splits into sums over the residue lattices 2 pi a / n with
        // the shift offsets carried into the planar arguments.
        let beta1 = s * (alpha[0] * a[0] + alpha[1] * a[1] + alpha[2] * a[2]);
        let beta2 = s * (alpha[0] * b[0] + alpha[1] * b[1] + alpha[2] * b[2]);
        let mut ax = 0.0;
        for j in 0..n {
            let u = wrap_to_pi(2.0 * std::f64::consts::PI * j as f64 / n as f64);
            let v = fam.profiles.psi(u / rp) / rp.sqrt();
            ax += v * v;
        }
        ax /= n as f64;
        let mut pl = 0.0;
        for j2 in 0..n {
            for j1 in 0..n {
                let y1 = wrap_to_pi(
                    2.0 * std::f64::consts::PI * j1 as f64 / n as f64 - beta1,
                );
                let y2 = wrap_to_pi(
                    2.0 * std::f64::consts::PI * j2 as f64 / n as f64 - beta2,
                );
                let v = fam.profiles.phi(y1 / rq, y2 / rq) / rq;
                pl += v * v;
            }
        }
        pl /= (n * n) as f64;
        let sep = ax * pl;
        assert!(
            (grid_mean - sep).abs() <= 1e-10 * grid_mean.abs().max(1.0),
            "grid mean {grid_mean} vs separable {sep}"
        );
    }

    #[test]
    fn realized_mean_tracks_quadrature_as_band_grows() {
        let fam = small_family();
        let m_small = fam.realized_square_mean(JetBand {
            m_axial: 3,
            m_planar: 3,
        });
        let m_mid = fam.realized_square_mean(JetBand {
            m_axial: 30,
            m_planar: 30,
        });
        let m_big = fam.realized_square_mean(JetBand {
            m_axial: 120,
            m_planar: 120,
        });
        assert!(m_small < m_mid && m_mid < m_big, "band growth must add energy");
        assert!(
            (m_big - 1.0).abs() < 1e-6,
            "wide-band mean should approach 1: {m_big}"
        );
    }

    #[test]
    fn scatter_rejects_unresolvable_band() {
        let grid = Grid3::new(16).unwrap();
        let profiles = ProfileSet::build(ProfileConfig::default()).unwrap();
        let scales = JetScales {
            lambda: 4.0,
            r_perp: 0.25,
            r_par: 0.5,
            mu: 3.0,
        };
        let fam = JetFamily::build_best_effort(profiles, scales).unwrap().0;
        let band = JetBand {
            m_axial: 4,
            m_planar: 4,
        };
        let err = fam.scatter_vector(grid, 0, VectorPattern::W, band, 0.0, 0);
        assert!(err.is_err());
    }

    #[test]
    fn thin_family_builds_with_certified_disjointness() {
        let profiles = ProfileSet::build(ProfileConfig::default()).unwrap();
        let scales = JetScales {
            lambda: 32.0,
            r_perp: 1.0 / 32.0,
            r_par: 0.5,
            mu: 3.0,
        };
        let fam = JetFamily::build(profiles, scales, Grid3::new(64).unwrap()).unwrap();
        assert_eq!(fam.sigma, 5);
        // Analytic supports certified disjoint: probe a few points of
        // each tube against the membership test of the others.
        for dir in 0..6 {
            let alpha = fam.shifts[dir];
            assert!(fam.in_support(dir, alpha));
            for other in 0..6 {
                if other != dir {
                    assert!(!fam.in_support(other, alpha));
                }
            }
        }
    }

    #[test]
    fn scale_validation_enforces_integrality() {
        let bad = JetScales {
            lambda: 4.3,
            r_perp: 0.25,
            r_par: 0.5,
            mu: 1.0,
        };
        assert!(bad.validate().is_err());
        let good = JetScales {
            lambda: 20.0,
            r_perp: 0.25,
            r_par: 0.5,
            mu: 40.0,
        };
        assert!(good.validate().is_ok());
        assert_eq!(good.sigma(), 25);
    }
}
