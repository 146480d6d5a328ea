//! Compact spectral storage for the step engine.
//!
//! Between time samples the stepper keeps two shapes of data. A [`Ball`]
//! aligned coefficient block ([`Compact`]) holds fields known to live
//! inside a fixed wavenumber radius; a [`Modal`] map holds genuinely
//! sparse spectra (noise modes, jet patterns, analytic base flows, and
//! their long mollification histories). Products with a `Modal` factor
//! run directly in coefficient space, so the per-sample cost of a step
//! stays dominated by a handful of FFTs instead of hundreds.
//!
//! Retention rule: every product keeps exactly the modes with all
//! `|k_i| <= n/2 - 1`. That reproduces what the padded grid product
//! followed by band truncation yields for Nyquist-free factors in the
//! band regimes the stepper uses, so spectral-side and FFT-side routes
//! to the same bilinear object agree to rounding. Content a padded
//! product would fold onto the Nyquist rows is dropped instead; the
//! residual only ever consumes such objects under a divergence, whose
//! multipliers zero the Nyquist rows anyway.

use std::collections::BTreeMap;
use std::rc::Rc;

use num_complex::Complex64;

use crate::spectral::{ops, Grid3, ScalarField, StressField, VectorField, SYM_PAIRS};
use crate::{Error, Result};

/// Index set of all grid modes with `|k| <= radius` (Euclidean) and every
/// component strictly below the Nyquist row, with a reverse lookup table.
#[derive(Debug)]
pub struct Ball {
    grid: Grid3,
    radius: f64,
    idx: Vec<usize>,
    k: Vec<[i64; 3]>,
    /// Dense spectrum index -> (position in `idx`) + 1; zero = absent.
    lookup: Vec<u32>,
    zero_pos: usize,
}

impl Ball {
    pub fn new(grid: Grid3, radius: f64) -> Rc<Ball> {
        let n = grid.n();
        let limit = grid.max_wavenumber();
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut idx = Vec::new();
        let mut k = Vec::new();
        let mut lookup = vec![0u32; grid.len()];
        let mut zero_pos = 0;
        for iz in 0..n {
            let kz = grid.wavenumber(iz);
            for iy in 0..n {
                let ky = grid.wavenumber(iy);
                for ix in 0..n {
                    let kx = grid.wavenumber(ix);
                    if kx.abs() > limit || ky.abs() > limit || kz.abs() > limit {
                        continue;
                    }
                    let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                    if k2 > r2 {
                        continue;
                    }
                    let di = grid.index(ix, iy, iz);
                    if kx == 0 && ky == 0 && kz == 0 {
                        zero_pos = idx.len();
                    }
                    lookup[di] = idx.len() as u32 + 1;
                    idx.push(di);
                    k.push([kx, ky, kz]);
                }
            }
        }
        Rc::new(Ball {
            grid,
            radius,
            idx,
            k,
            lookup,
            zero_pos,
        })
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn wavenumbers(&self) -> &[[i64; 3]] {
        &self.k
    }

    /// Position of dense index `di` inside the ball, if present.
    #[inline]
    fn position(&self, di: usize) -> Option<usize> {
        match self.lookup[di] {
            0 => None,
            p => Some(p as usize - 1),
        }
    }

    /// Dense spectrum index of integer wavenumber `k`, if representable
    /// below the Nyquist rows.
    pub fn spec_index(grid: Grid3, k: [i64; 3]) -> Option<usize> {
        let limit = grid.max_wavenumber();
        if k.iter().any(|c| c.abs() > limit) {
            return None;
        }
        let n = grid.n() as i64;
        let wrap = |c: i64| c.rem_euclid(n) as usize;
        Some(grid.index(wrap(k[0]), wrap(k[1]), wrap(k[2])))
    }
}

/// Coefficients aligned to a shared [`Ball`].
#[derive(Clone, Debug)]
pub struct Compact {
    pub ball: Rc<Ball>,
    pub c: Vec<Complex64>,
}

impl Compact {
    pub fn zeros(ball: &Rc<Ball>) -> Compact {
        Compact {
            ball: Rc::clone(ball),
            c: vec![Complex64::default(); ball.len()],
        }
    }

    /// Read the ball's modes out of a dense spectrum. Content outside the
    /// ball is ignored; callers use this as the band gate after FFT
    /// products whose reach they have already bounded.
    pub fn gather(ball: &Rc<Ball>, f: &ScalarField) -> Compact {
        let spec = f.spec();
        Compact {
            ball: Rc::clone(ball),
            c: ball.idx.iter().map(|&di| spec[di]).collect(),
        }
    }

    pub fn to_field(&self) -> ScalarField {
        let mut spec = vec![Complex64::default(); self.ball.grid.len()];
        for (p, &di) in self.ball.idx.iter().enumerate() {
            spec[di] = self.c[p];
        }
        ScalarField::from_spec(self.ball.grid, spec)
    }

    /// Add `scale * self` into a dense spectrum.
    pub fn scatter_add(&self, spec: &mut [Complex64], scale: f64) {
        for (p, &di) in self.ball.idx.iter().enumerate() {
            spec[di] += self.c[p] * scale;
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Compact, scale: f64) {
        debug_assert!(Rc::ptr_eq(&self.ball, &other.ball));
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b * scale;
        }
    }

    pub fn add_scaled(&self, other: &Compact, scale: f64) -> Compact {
        let mut out = self.clone();
        out.add_assign_scaled(other, scale);
        out
    }

    pub fn sub(&self, other: &Compact) -> Compact {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Compact {
        Compact {
            ball: Rc::clone(&self.ball),
            c: self.c.iter().map(|z| z * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|z| z.norm_sqr() == 0.0)
    }

    pub fn zero_mode(&self) -> Complex64 {
        self.c[self.ball.zero_pos]
    }

    pub fn remove_mean(&self) -> Compact {
        let mut out = self.clone();
        out.c[self.ball.zero_pos] = Complex64::default();
        out
    }

    /// `d/dx_axis`: multiply by `i k_axis`.
    pub fn derivative(&self, axis: usize) -> Compact {
        let mut out = Compact::zeros(&self.ball);
        for (p, k) in self.ball.k.iter().enumerate() {
            out.c[p] = self.c[p] * Complex64::new(0.0, k[axis] as f64);
        }
        out
    }

    /// `L^2` norm by Parseval.
    pub fn l2(&self) -> f64 {
        let s: f64 = self.c.iter().map(|z| z.norm_sqr()).sum();
        (crate::BOX_VOLUME * s).sqrt()
    }

    /// Copy into a (larger) ball; every occupied mode must fit.
    pub fn embed(&self, ball: &Rc<Ball>) -> Compact {
        if Rc::ptr_eq(&self.ball, ball) {
            return self.clone();
        }
        let mut out = Compact::zeros(ball);
        for (p, &di) in self.ball.idx.iter().enumerate() {
            if self.c[p].norm_sqr() == 0.0 {
                continue;
            }
            let pos = ball
                .position(di)
                .expect("embedding target ball misses an occupied mode");
            out.c[pos] += self.c[p];
        }
        out
    }

    /// Add a sparse spectrum in place; every mode must fit the ball.
    pub fn add_assign_modal(&mut self, m: &Modal, scale: f64) -> Result<()> {
        for (&k, &c) in &m.0 {
            let pos = Ball::spec_index(self.ball.grid, k)
                .and_then(|di| self.ball.position(di))
                .ok_or_else(|| {
                    Error::ResolutionError(format!(
                        "mode {:?} outside the radius-{:.2} ball",
                        k, self.ball.radius
                    ))
                })?;
            self.c[pos] += c * scale;
        }
        Ok(())
    }
}

/// Three-component compact field.
pub type CompactVec = [Compact; 3];

pub fn compact_vec_zeros(ball: &Rc<Ball>) -> CompactVec {
    std::array::from_fn(|_| Compact::zeros(ball))
}

pub fn compact_vec_add_scaled(a: &CompactVec, b: &CompactVec, s: f64) -> CompactVec {
    std::array::from_fn(|i| a[i].add_scaled(&b[i], s))
}

pub fn compact_vec_to_field(v: &CompactVec) -> VectorField {
    VectorField::new([v[0].to_field(), v[1].to_field(), v[2].to_field()])
}

pub fn compact_vec_l2(v: &CompactVec) -> f64 {
    let s: f64 = v.iter().map(|c| c.c.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
    (crate::BOX_VOLUME * s).sqrt()
}

/// `curl curl F` on the ball: `|k|^2 F - k (k . F)` per mode.
pub fn compact_curl_curl(v: &CompactVec) -> CompactVec {
    let ball = &v[0].ball;
    let mut out = compact_vec_zeros(ball);
    for (p, k) in ball.k.iter().enumerate() {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
        let dot = kf[0] * v[0].c[p] + kf[1] * v[1].c[p] + kf[2] * v[2].c[p];
        for i in 0..3 {
            out[i].c[p] = v[i].c[p] * k2 - dot * kf[i];
        }
    }
    out
}

/// Leray projection on the ball; the zero mode is removed.
pub fn compact_leray(v: &CompactVec) -> CompactVec {
    let ball = &v[0].ball;
    let mut out = compact_vec_zeros(ball);
    for (p, k) in ball.k.iter().enumerate() {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
        if k2 == 0.0 {
            continue;
        }
        let dot = kf[0] * v[0].c[p] + kf[1] * v[1].c[p] + kf[2] * v[2].c[p];
        for i in 0..3 {
            out[i].c[p] = v[i].c[p] - kf[i] * (dot / k2);
        }
    }
    out
}

pub fn compact_laplacian(v: &CompactVec) -> CompactVec {
    let ball = &v[0].ball;
    let mut out = compact_vec_zeros(ball);
    for (p, k) in ball.k.iter().enumerate() {
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        for i in 0..3 {
            out[i].c[p] = -v[i].c[p] * k2;
        }
    }
    out
}

/// Symmetric trace-free potential of a mean-free compact vector, row by
/// row; the zero mode maps to zero.
pub fn compact_potential(v: &CompactVec) -> [Compact; 6] {
    let ball = &v[0].ball;
    let mut out: [Compact; 6] = std::array::from_fn(|_| Compact::zeros(ball));
    for (p, k) in ball.k.iter().enumerate() {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let row = ops::inverse_divergence_row(kf, [v[0].c[p], v[1].c[p], v[2].c[p]]);
        for s in 0..6 {
            out[s].c[p] = row[s];
        }
    }
    out
}

/// Deviatoric part of a compact symmetric tensor.
pub fn compact_deviatoric(s: &[Compact; 6]) -> [Compact; 6] {
    let third = 1.0 / 3.0;
    std::array::from_fn(|slot| {
        if slot < 3 {
            let mut out = s[slot].clone();
            for p in 0..out.c.len() {
                let tr = s[0].c[p] + s[1].c[p] + s[2].c[p];
                out.c[p] -= tr * third;
            }
            out
        } else {
            s[slot].clone()
        }
    })
}

pub fn compact_stress_to_field(s: &[Compact; 6]) -> StressField {
    StressField::new(std::array::from_fn(|slot| s[slot].to_field()))
}

/// Row divergence `(div S)_i = sum_j d_j S_{ij}` of a compact symmetric
/// tensor whose six slots share one ball.
pub fn compact_stress_div(s: &[Compact; 6]) -> CompactVec {
    let ball = &s[0].ball;
    debug_assert!(s.iter().all(|c| Rc::ptr_eq(&c.ball, ball)));
    let mut out = compact_vec_zeros(ball);
    for (p, k) in ball.k.iter().enumerate() {
        for i in 0..3 {
            let mut acc = Complex64::default();
            for j in 0..3 {
                acc += s[crate::spectral::sym_slot(i, j)].c[p] * Complex64::new(0.0, k[j] as f64);
            }
            out[i].c[p] = acc;
        }
    }
    out
}

/// Genuinely sparse spectrum: integer wavenumber -> coefficient.
#[derive(Clone, Debug, Default)]
pub struct Modal(pub BTreeMap<[i64; 3], Complex64>);

impl Modal {
    pub fn new() -> Modal {
        Modal(BTreeMap::new())
    }

    pub fn insert_add(&mut self, k: [i64; 3], c: Complex64) {
        if c.norm_sqr() == 0.0 {
            return;
        }
        *self.0.entry(k).or_default() += c;
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|z| z.norm_sqr() == 0.0)
    }

    pub fn scale(&self, s: f64) -> Modal {
        Modal(self.0.iter().map(|(&k, &c)| (k, c * s)).collect())
    }

    pub fn add_scaled(&self, other: &Modal, s: f64) -> Modal {
        let mut out = self.clone();
        out.add_assign_scaled(other, s);
        out
    }

    pub fn add_assign_scaled(&mut self, other: &Modal, s: f64) {
        for (&k, &c) in &other.0 {
            *self.0.entry(k).or_default() += c * s;
        }
    }

    pub fn sub(&self, other: &Modal) -> Modal {
        self.add_scaled(other, -1.0)
    }

    pub fn mean(&self) -> Complex64 {
        self.0.get(&[0, 0, 0]).copied().unwrap_or_default()
    }

    pub fn remove_mean(&self) -> Modal {
        let mut out = self.clone();
        out.0.remove(&[0, 0, 0]);
        out
    }

    /// Map coefficients through `f(k, c)`.
    pub fn map(&self, f: impl Fn([i64; 3], Complex64) -> Complex64) -> Modal {
        let mut out = Modal::new();
        for (&k, &c) in &self.0 {
            out.insert_add(k, f(k, c));
        }
        out
    }

    pub fn derivative(&self, axis: usize) -> Modal {
        self.map(|k, c| c * Complex64::new(0.0, k[axis] as f64))
    }

    /// Full convolution product (no truncation). Exact for the true
    /// product of the two represented fields.
    pub fn conv(&self, other: &Modal) -> Modal {
        let mut out = Modal::new();
        for (&ka, &ca) in &self.0 {
            for (&kb, &cb) in &other.0 {
                out.insert_add([ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]], ca * cb);
            }
        }
        out
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.0.values().map(|z| z.norm_sqr()).sum();
        (crate::BOX_VOLUME * s).sqrt()
    }

    pub fn max_wavenumber(&self) -> i64 {
        self.0
            .keys()
            .flat_map(|k| k.iter())
            .map(|c| c.abs())
            .max()
            .unwrap_or(0)
    }

    pub fn realize(&self, grid: Grid3) -> Result<ScalarField> {
        let mut spec = vec![Complex64::default(); grid.len()];
        for (&k, &c) in &self.0 {
            match Ball::spec_index(grid, k) {
                Some(di) => spec[di] += c,
                None => {
                    return Err(Error::ResolutionError(format!(
                        "mode {:?} exceeds the band of an n = {} grid",
                        k,
                        grid.n()
                    )))
                }
            }
        }
        Ok(ScalarField::from_spec(grid, spec))
    }

    pub fn to_compact(&self, ball: &Rc<Ball>) -> Result<Compact> {
        let mut out = Compact::zeros(ball);
        for (&k, &c) in &self.0 {
            let di = Ball::spec_index(ball.grid, k).and_then(|di| ball.position(di));
            match di {
                Some(p) => out.c[p] += c,
                None => {
                    return Err(Error::ResolutionError(format!(
                        "mode {:?} outside the radius-{:.2} ball",
                        k, ball.radius
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Collect every nonzero mode of a dense spectrum.
    pub fn collect(f: &ScalarField) -> Modal {
        let grid = f.grid();
        let n = grid.n();
        let spec = f.spec();
        let mut out = Modal::new();
        for iz in 0..n {
            let kz = grid.wavenumber(iz);
            for iy in 0..n {
                let ky = grid.wavenumber(iy);
                for ix in 0..n {
                    let c = spec[grid.index(ix, iy, iz)];
                    if c.norm_sqr() > 0.0 {
                        out.insert_add([grid.wavenumber(ix), ky, kz], c);
                    }
                }
            }
        }
        out
    }
}

/// Three-component sparse field.
#[derive(Clone, Debug, Default)]
pub struct ModalVector(pub [Modal; 3]);

impl ModalVector {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Modal::is_zero)
    }

    pub fn scale(&self, s: f64) -> ModalVector {
        ModalVector(std::array::from_fn(|i| self.0[i].scale(s)))
    }

    pub fn add_scaled(&self, other: &ModalVector, s: f64) -> ModalVector {
        ModalVector(std::array::from_fn(|i| self.0[i].add_scaled(&other.0[i], s)))
    }

    pub fn add(&self, other: &ModalVector) -> ModalVector {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &ModalVector) -> ModalVector {
        self.add_scaled(other, -1.0)
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.0.iter().map(|m| m.0.values().map(|z| z.norm_sqr()).sum::<f64>()).sum();
        (crate::BOX_VOLUME * s).sqrt()
    }

    /// Parseval inner product with another sparse vector.
    pub fn inner(&self, other: &ModalVector) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for (k, c) in &self.0[i].0 {
                if let Some(d) = other.0[i].0.get(k) {
                    acc += (c.conj() * d).re;
                }
            }
        }
        crate::BOX_VOLUME * acc
    }

    /// Symmetric tensor product `(u_i w_j + u_j w_i) / 2` by convolution.
    pub fn sym_outer(&self, other: &ModalVector) -> ModalStress {
        ModalStress(std::array::from_fn(|slot| {
            let (i, j) = SYM_PAIRS[slot];
            let a = self.0[i].conv(&other.0[j]);
            if i == j {
                a
            } else {
                a.add_scaled(&other.0[i].conv(&self.0[j]), 1.0).scale(0.5)
            }
        }))
    }

    pub fn leray(&self) -> ModalVector {
        let mut out = ModalVector::default();
        let keys: Vec<[i64; 3]> = self.keys();
        for k in keys {
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            if k2 == 0.0 {
                continue;
            }
            let v: Vec<Complex64> = (0..3)
                .map(|i| self.0[i].0.get(&k).copied().unwrap_or_default())
                .collect();
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let dot = kf[0] * v[0] + kf[1] * v[1] + kf[2] * v[2];
            for i in 0..3 {
                out.0[i].insert_add(k, v[i] - kf[i] * (dot / k2));
            }
        }
        out
    }

    pub fn laplacian(&self) -> ModalVector {
        ModalVector(std::array::from_fn(|i| {
            self.0[i].map(|k, c| -c * ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64))
        }))
    }

    /// Symmetric trace-free potential, row by row; zero mode dropped.
    pub fn potential(&self) -> ModalStress {
        let mut out = ModalStress::default();
        for k in self.keys() {
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let v: [Complex64; 3] =
                std::array::from_fn(|i| self.0[i].0.get(&k).copied().unwrap_or_default());
            let row = ops::inverse_divergence_row(kf, v);
            for s in 0..6 {
                out.0[s].insert_add(k, row[s]);
            }
        }
        out
    }

    pub fn realize(&self, grid: Grid3) -> Result<VectorField> {
        Ok(VectorField::new([
            self.0[0].realize(grid)?,
            self.0[1].realize(grid)?,
            self.0[2].realize(grid)?,
        ]))
    }

    pub fn to_compact(&self, ball: &Rc<Ball>) -> Result<CompactVec> {
        Ok([
            self.0[0].to_compact(ball)?,
            self.0[1].to_compact(ball)?,
            self.0[2].to_compact(ball)?,
        ])
    }

    fn keys(&self) -> Vec<[i64; 3]> {
        let mut keys: Vec<[i64; 3]> = Vec::new();
        for m in &self.0 {
            keys.extend(m.0.keys().copied());
        }
        keys.sort_unstable();
        keys.dedup();
        keys
    }
}

/// Six-slot sparse symmetric tensor.
#[derive(Clone, Debug, Default)]
pub struct ModalStress(pub [Modal; 6]);

impl ModalStress {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Modal::is_zero)
    }

    pub fn scale(&self, s: f64) -> ModalStress {
        ModalStress(std::array::from_fn(|i| self.0[i].scale(s)))
    }

    pub fn add_scaled(&self, other: &ModalStress, s: f64) -> ModalStress {
        ModalStress(std::array::from_fn(|i| self.0[i].add_scaled(&other.0[i], s)))
    }

    pub fn add_assign_scaled(&mut self, other: &ModalStress, s: f64) {
        for i in 0..6 {
            self.0[i].add_assign_scaled(&other.0[i], s);
        }
    }

    pub fn sub(&self, other: &ModalStress) -> ModalStress {
        self.add_scaled(other, -1.0)
    }

    pub fn deviatoric(&self) -> ModalStress {
        let tr = self.0[0].add_scaled(&self.0[1], 1.0).add_scaled(&self.0[2], 1.0);
        let third = tr.scale(1.0 / 3.0);
        ModalStress(std::array::from_fn(|slot| {
            if slot < 3 {
                self.0[slot].sub(&third)
            } else {
                self.0[slot].clone()
            }
        }))
    }

    pub fn realize(&self, grid: Grid3) -> Result<StressField> {
        Ok(StressField::new([
            self.0[0].realize(grid)?,
            self.0[1].realize(grid)?,
            self.0[2].realize(grid)?,
            self.0[3].realize(grid)?,
            self.0[4].realize(grid)?,
            self.0[5].realize(grid)?,
        ]))
    }

    /// Row divergence `(div S)_i = sum_j d_j S_{ij}`.
    pub fn divergence(&self) -> ModalVector {
        let mut out = ModalVector::default();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i]
                    .add_assign_scaled(&self.0[crate::spectral::sym_slot(i, j)].derivative(j), 1.0);
            }
        }
        out
    }
}

/// Accumulate `scale * (a * modal)` into `out`, both compact on the same
/// ball family: every pairing of a coefficient of `a` with a modal entry
/// lands at the sum of the wavenumbers. Pairings that leave the strict
/// band (any `|k_i| >= n/2`) are dropped, matching the engine-wide
/// retention rule. Pairings inside the band must fit in `out`'s ball;
/// anything else is a caller bug.
pub fn sparse_mul_acc(out: &mut Compact, a: &Compact, modal: &Modal, scale: Complex64) {
    let grid = out.ball.grid;
    let limit = grid.max_wavenumber();
    let n = grid.n() as i64;
    let out_ball = Rc::clone(&out.ball);
    for (&km, &cm) in &modal.0 {
        let w = cm * scale;
        if w.norm_sqr() == 0.0 {
            continue;
        }
        for (p, ka) in a.ball.k.iter().enumerate() {
            let ca = a.c[p];
            if ca.norm_sqr() == 0.0 {
                continue;
            }
            let t = [ka[0] + km[0], ka[1] + km[1], ka[2] + km[2]];
            if t[0].abs() > limit || t[1].abs() > limit || t[2].abs() > limit {
                continue;
            }
            let wrap = |c: i64| c.rem_euclid(n) as usize;
            let di = grid.index(wrap(t[0]), wrap(t[1]), wrap(t[2]));
            let pos = out_ball
                .position(di)
                .expect("sparse product target outside the output ball");
            out.c[pos] += ca * w;
        }
    }
}

/// `sparse_mul_acc` into a fresh compact field.
pub fn sparse_mul(a: &Compact, modal: &Modal, out_ball: &Rc<Ball>) -> Compact {
    let mut out = Compact::zeros(out_ball);
    sparse_mul_acc(&mut out, a, modal, Complex64::new(1.0, 0.0));
    out
}

/// Self-convolution `T(a^2)` of a compact field whose doubled band still
/// fits the strict band; exact (no truncation occurs).
pub fn compact_self_conv(a: &Compact, out_ball: &Rc<Ball>) -> Compact {
    let grid = out_ball.grid;
    let limit = grid.max_wavenumber();
    let n = grid.n() as i64;
    let mut out = Compact::zeros(out_ball);
    let ks = a.ball.k.clone();
    for (pa, ka) in ks.iter().enumerate() {
        let ca = a.c[pa];
        if ca.norm_sqr() == 0.0 {
            continue;
        }
        for (pb, kb) in ks.iter().enumerate() {
            let cb = a.c[pb];
            if cb.norm_sqr() == 0.0 {
                continue;
            }
            let t = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]];
            debug_assert!(t.iter().all(|c| c.abs() <= limit));
            let wrap = |c: i64| c.rem_euclid(n) as usize;
            let di = grid.index(wrap(t[0]), wrap(t[1]), wrap(t[2]));
            let pos = out
                .ball
                .position(di)
                .expect("squared amplitude outside the output ball");
            out.c[pos] += ca * cb;
        }
    }
    out
}

/// Symmetric tensor product of a compact vector with a sparse vector:
/// slot `(i, j)` receives `(u_i m_j + u_j m_i) / 2`.
pub fn sym_outer_sparse(u: &CompactVec, m: &ModalVector, out_ball: &Rc<Ball>) -> [Compact; 6] {
    let half = Complex64::new(0.5, 0.0);
    let one = Complex64::new(1.0, 0.0);
    std::array::from_fn(|slot| {
        let (i, j) = SYM_PAIRS[slot];
        let mut out = Compact::zeros(out_ball);
        if i == j {
            sparse_mul_acc(&mut out, &u[i], &m.0[j], one);
        } else {
            sparse_mul_acc(&mut out, &u[i], &m.0[j], half);
            sparse_mul_acc(&mut out, &u[j], &m.0[i], half);
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{norms, NormKind};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_band_field(grid: Grid3, ball: &Rc<Ball>, seed: u64) -> ScalarField {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut c = Compact::zeros(ball);
        for (p, k) in ball.k.iter().enumerate() {
            if *k == [0, 0, 0] {
                continue;
            }
            c.c[p] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        // Make it a real field: symmetrize against the conjugate mirror.
        let f = c.to_field();
        let real = ScalarField::from_real(grid, f.real().to_vec());
        real
    }

    #[test]
    fn sparse_product_matches_padded_fft_product() {
        let grid = Grid3::new(32).unwrap();
        let ball_a = Ball::new(grid, 4.0);
        let ball_out = Ball::new(grid, 40.0);
        let a = random_band_field(grid, &ball_a, 7);
        // Sparse factor: a handful of modes inside |k| <= 9.
        let mut m = Modal::new();
        for (k, re, im) in [
            ([3i64, -2, 1], 0.7, 0.1),
            ([-3, 2, -1], 0.7, -0.1),
            ([0, 5, 4], -0.3, 0.2),
            ([0, -5, -4], -0.3, -0.2),
            ([9, 0, 0], 0.11, 0.0),
            ([-9, 0, 0], 0.11, 0.0),
        ] {
            m.insert_add(k, Complex64::new(re, im));
        }
        let b = m.realize(grid).unwrap();
        let direct = ops::mul_dealiased(&a, &b);
        let ac = Compact::gather(&ball_a, &a);
        let sparse = sparse_mul(&ac, &m, &ball_out).to_field();
        let diff = norms::scalar_norm(&direct.sub(&sparse), NormKind::Lp(2.0));
        let scale = norms::scalar_norm(&direct, NormKind::Lp(2.0));
        assert!(
            diff <= 1e-12 * scale.max(1.0),
            "sparse/dense mismatch {diff:.3e} vs {scale:.3e}"
        );
    }

    #[test]
    fn self_conv_matches_unpadded_square() {
        let grid = Grid3::new(32).unwrap();
        let ball_a = Ball::new(grid, 4.0);
        let ball_out = Ball::new(grid, 9.0);
        let a = random_band_field(grid, &ball_a, 11);
        let ac = Compact::gather(&ball_a, &a);
        let sq = compact_self_conv(&ac, &ball_out).to_field();
        let direct = ops::mul_unpadded(&a, &a);
        let diff = norms::scalar_norm(&direct.sub(&sq), NormKind::Lp(2.0));
        assert!(diff <= 1e-12, "self-conv mismatch {diff:.3e}");
    }

    #[test]
    fn compact_curl_curl_matches_operator_route() {
        let grid = Grid3::new(16).unwrap();
        let ball = Ball::new(grid, 5.0);
        let f = VectorField::new([
            random_band_field(grid, &ball, 1),
            random_band_field(grid, &ball, 2),
            random_band_field(grid, &ball, 3),
        ]);
        let compact: CompactVec =
            std::array::from_fn(|i| Compact::gather(&ball, &f.comps[i]));
        let ours = compact_vec_to_field(&compact_curl_curl(&compact));
        let theirs = ops::curl(&ops::curl(&f));
        let diff = norms::vector_norm(&ours.sub(&theirs), NormKind::Lp(2.0));
        assert!(diff <= 1e-12, "curl curl mismatch {diff:.3e}");
    }

    #[test]
    fn modal_potential_inverts_divergence() {
        let grid = Grid3::new(16).unwrap();
        let mut v = ModalVector::default();
        for (i, k) in [(0usize, [2i64, 1, 0]), (1, [0, 3, -1]), (2, [1, 1, 2])] {
            v.0[i].insert_add(k, Complex64::new(0.4, -0.2));
            v.0[i].insert_add([-k[0], -k[1], -k[2]], Complex64::new(0.4, 0.2));
        }
        let v = v.leray(); // mean-free and divergence-free not required, but keep it tame
        let pot = v.potential().realize(grid).unwrap();
        let back = ops::div_stress(&pot);
        let want = v.realize(grid).unwrap();
        let diff = norms::vector_norm(&back.sub(&want), NormKind::Lp(2.0));
        let scale = norms::vector_norm(&want, NormKind::Lp(2.0));
        assert!(diff <= 1e-12 * scale, "potential mismatch {diff:.3e}");
    }

    #[test]
    fn modal_conv_matches_grid_product() {
        let grid = Grid3::new(16).unwrap();
        let mut a = Modal::new();
        a.insert_add([1, 0, 0], Complex64::new(0.5, 0.25));
        a.insert_add([-1, 0, 0], Complex64::new(0.5, -0.25));
        a.insert_add([0, 2, 1], Complex64::new(-0.2, 0.1));
        a.insert_add([0, -2, -1], Complex64::new(-0.2, -0.1));
        let b = a.scale(0.8);
        let conv = a.conv(&b).realize(grid).unwrap();
        let direct = ops::mul_unpadded(&a.realize(grid).unwrap(), &b.realize(grid).unwrap());
        let diff = norms::scalar_norm(&conv.sub(&direct), NormKind::Lp(2.0));
        assert!(diff <= 1e-13, "conv mismatch {diff:.3e}");
    }

    #[test]
    fn gather_scatter_roundtrip_and_mean() {
        let grid = Grid3::new(16).unwrap();
        let ball = Ball::new(grid, 6.0);
        let f = random_band_field(grid, &ball, 9).add_scaled(
            &ScalarField::from_fn(grid, |_, _, _| 1.0),
            2.5,
        );
        let c = Compact::gather(&ball, &f);
        assert!((c.zero_mode().re - 2.5).abs() < 1e-12);
        let back = c.to_field();
        let diff = norms::scalar_norm(&back.sub(&f), NormKind::Lp(2.0));
        assert!(diff <= 1e-12);
        assert!(c.remove_mean().zero_mode().norm_sqr() == 0.0);
    }
}
