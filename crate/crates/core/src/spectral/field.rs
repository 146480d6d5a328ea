//! Real fields with a lazily synchronised spectral mirror.
//!
//! A field is immutable after construction: whichever representation it was
//! built from is authoritative, the other is materialised on first use and
//! cached. All operations produce new fields, so the two representations
//! can never drift apart.

use super::fft;
use super::grid::Grid3;
use num_complex::Complex64;
use once_cell::sync::OnceCell;

/// Index pairs of the six stored components of a symmetric 3x3 field, in
/// storage order: xx, yy, zz, xy, xz, yz.
pub const SYM_PAIRS: [(usize, usize); 6] =
    [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Position of `(i, j)` (either order) in [`SYM_PAIRS`] storage.
#[inline]
pub fn sym_slot(i: usize, j: usize) -> usize {
    match if i <= j { (i, j) } else { (j, i) } {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        (1, 2) => 5,
        _ => unreachable!("bad symmetric index"),
    }
}

/// Scalar field on a [`Grid3`].
pub struct ScalarField {
    grid: Grid3,
    real: OnceCell<Vec<f64>>,
    spec: OnceCell<Vec<Complex64>>,
}

impl Clone for ScalarField {
    fn clone(&self) -> Self {
        let f = ScalarField {
            grid: self.grid,
            real: OnceCell::new(),
            spec: OnceCell::new(),
        };
        if let Some(r) = self.real.get() {
            let _ = f.real.set(r.clone());
        }
        if let Some(s) = self.spec.get() {
            let _ = f.spec.set(s.clone());
        }
        f
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.grid.n())
            .field("real", &self.real.get().map(|_| "..."))
            .field("spec", &self.spec.get().map(|_| "..."))
            .finish()
    }
}

impl ScalarField {
    pub fn from_real(grid: Grid3, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len());
        let f = ScalarField {
            grid,
            real: OnceCell::new(),
            spec: OnceCell::new(),
        };
        f.real.set(data).unwrap();
        f
    }

    pub fn from_spec(grid: Grid3, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.len());
        let f = ScalarField {
            grid,
            real: OnceCell::new(),
            spec: OnceCell::new(),
        };
        f.spec.set(data).unwrap();
        f
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self::from_spec(grid, vec![Complex64::default(); grid.len()])
    }

    /// Sample a function of the physical coordinates.
    pub fn from_fn(grid: Grid3, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut data = vec![0.0f64; grid.len()];
        for iz in 0..n {
            let z = grid.point(iz);
            for iy in 0..n {
                let y = grid.point(iy);
                let row = (iz * n + iy) * n;
                for ix in 0..n {
                    data[row + ix] = f(grid.point(ix), y, z);
                }
            }
        }
        Self::from_real(grid, data)
    }

    #[inline]
    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    /// Point values, materialising them from the spectrum if necessary.
    pub fn real(&self) -> &[f64] {
        self.real
            .get_or_init(|| fft::inverse_real(self.spec.get().unwrap(), self.grid.n()))
    }

    /// Normalised Fourier coefficients, materialising them if necessary.
    pub fn spec(&self) -> &[Complex64] {
        self.spec
            .get_or_init(|| fft::forward_real(self.real.get().unwrap(), self.grid.n()))
    }

    pub fn has_real(&self) -> bool {
        self.real.get().is_some()
    }

    pub fn has_spec(&self) -> bool {
        self.spec.get().is_some()
    }

    /// Spatial mean, read off the zero mode when available.
    pub fn mean(&self) -> f64 {
        if let Some(s) = self.spec.get() {
            s[0].re
        } else {
            let r = self.real();
            crate::spectral::norms::pairwise_sum(r) / r.len() as f64
        }
    }

    /// New field from a spectral multiplier `m(kx, ky, kz)` applied with
    /// differentiation wavenumbers (Nyquist zeroed).
    pub fn spec_map(&self, m: impl Fn(f64, f64, f64) -> Complex64) -> ScalarField {
        let n = self.grid.n();
        let kd = self.grid.wavenumbers_d();
        let src = self.spec();
        let mut out = vec![Complex64::default(); self.grid.len()];
        for iz in 0..n {
            let kz = kd[iz];
            for iy in 0..n {
                let ky = kd[iy];
                let row = (iz * n + iy) * n;
                for ix in 0..n {
                    out[row + ix] = src[row + ix] * m(kd[ix], ky, kz);
                }
            }
        }
        ScalarField::from_spec(self.grid, out)
    }

    fn zip_real(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        let a = self.real();
        let b = other.real();
        ScalarField::from_real(
            self.grid,
            a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect(),
        )
    }

    fn zip_spec(
        &self,
        other: &ScalarField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        let a = self.spec.get().unwrap();
        let b = other.spec.get().unwrap();
        ScalarField::from_spec(
            self.grid,
            a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect(),
        )
    }

    /// Linear combination `self + c * other`, done in whichever
    /// representation both operands already share (spectral preferred).
    pub fn add_scaled(&self, other: &ScalarField, c: f64) -> ScalarField {
        if self.has_spec() && other.has_spec() {
            self.zip_spec(other, |a, b| a + c * b)
        } else {
            self.zip_real(other, |a, b| a + c * b)
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        if self.has_spec() {
            let s = self.spec.get().unwrap();
            ScalarField::from_spec(self.grid, s.iter().map(|&v| c * v).collect())
        } else {
            let r = self.real.get().unwrap();
            ScalarField::from_real(self.grid, r.iter().map(|&v| c * v).collect())
        }
    }

    /// Remove the spatial mean.
    pub fn remove_mean(&self) -> ScalarField {
        if self.has_spec() {
            let mut s = self.spec.get().unwrap().clone();
            s[0] = Complex64::default();
            ScalarField::from_spec(self.grid, s)
        } else {
            let m = self.mean();
            let r = self.real.get().unwrap();
            ScalarField::from_real(self.grid, r.iter().map(|&v| v - m).collect())
        }
    }
}

/// Vector field: three scalar components.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub comps: [ScalarField; 3],
}

impl VectorField {
    pub fn new(comps: [ScalarField; 3]) -> Self {
        assert_eq!(comps[0].grid(), comps[1].grid());
        assert_eq!(comps[0].grid(), comps[2].grid());
        VectorField { comps }
    }

    pub fn zeros(grid: Grid3) -> Self {
        VectorField::new([
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        ])
    }

    pub fn from_fns(
        grid: Grid3,
        f: impl Fn(f64, f64, f64) -> [f64; 3],
    ) -> Self {
        let n = grid.n();
        let mut data = [
            vec![0.0f64; grid.len()],
            vec![0.0f64; grid.len()],
            vec![0.0f64; grid.len()],
        ];
        for iz in 0..n {
            let z = grid.point(iz);
            for iy in 0..n {
                let y = grid.point(iy);
                let row = (iz * n + iy) * n;
                for ix in 0..n {
                    let v = f(grid.point(ix), y, z);
                    for c in 0..3 {
                        data[c][row + ix] = v[c];
                    }
                }
            }
        }
        let [a, b, c] = data;
        VectorField::new([
            ScalarField::from_real(grid, a),
            ScalarField::from_real(grid, b),
            ScalarField::from_real(grid, c),
        ])
    }

    #[inline]
    pub fn grid(&self) -> Grid3 {
        self.comps[0].grid()
    }

    pub fn add_scaled(&self, other: &VectorField, c: f64) -> VectorField {
        VectorField::new([
            self.comps[0].add_scaled(&other.comps[0], c),
            self.comps[1].add_scaled(&other.comps[1], c),
            self.comps[2].add_scaled(&other.comps[2], c),
        ])
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> VectorField {
        VectorField::new([
            self.comps[0].scale(c),
            self.comps[1].scale(c),
            self.comps[2].scale(c),
        ])
    }

    pub fn mean(&self) -> [f64; 3] {
        [self.comps[0].mean(), self.comps[1].mean(), self.comps[2].mean()]
    }

    /// Largest zero-mode magnitude over the components.
    pub fn mean_magnitude(&self) -> f64 {
        self.mean().iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Symmetric 3x3 tensor field stored as six scalar components in the order
/// of [`SYM_PAIRS`].
#[derive(Clone, Debug)]
pub struct StressField {
    pub comps: [ScalarField; 6],
}

impl StressField {
    pub fn new(comps: [ScalarField; 6]) -> Self {
        let g = comps[0].grid();
        for c in &comps {
            assert_eq!(c.grid(), g);
        }
        StressField { comps }
    }

    pub fn zeros(grid: Grid3) -> Self {
        StressField::new(std::array::from_fn(|_| ScalarField::zeros(grid)))
    }

    #[inline]
    pub fn grid(&self) -> Grid3 {
        self.comps[0].grid()
    }

    /// Component `(i, j)` of the symmetric tensor.
    pub fn comp(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[sym_slot(i, j)]
    }

    pub fn add_scaled(&self, other: &StressField, c: f64) -> StressField {
        StressField::new(std::array::from_fn(|i| {
            self.comps[i].add_scaled(&other.comps[i], c)
        }))
    }

    pub fn add(&self, other: &StressField) -> StressField {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &StressField) -> StressField {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> StressField {
        StressField::new(std::array::from_fn(|i| self.comps[i].scale(c)))
    }

    /// Pointwise trace field.
    pub fn trace(&self) -> ScalarField {
        self.comps[0].add(&self.comps[1]).add(&self.comps[2])
    }

    /// Subtract `trace/3` from the diagonal, making the field trace-free.
    pub fn deviatoric(&self) -> StressField {
        let t = self.trace().scale(1.0 / 3.0);
        StressField::new([
            self.comps[0].sub(&t),
            self.comps[1].sub(&t),
            self.comps[2].sub(&t),
            self.comps[3].clone(),
            self.comps[4].clone(),
            self.comps[5].clone(),
        ])
    }

    /// Largest pointwise trace magnitude relative to the largest component
    /// magnitude (0 when the field vanishes).
    pub fn relative_trace_residual(&self) -> f64 {
        let t = self.trace();
        let tmax = t.real().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let cmax = self
            .comps
            .iter()
            .flat_map(|c| c.real().iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        if cmax == 0.0 {
            0.0
        } else {
            tmax / cmax
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_mirror() {
        let g = Grid3::new(16).unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| {
            (x).sin() + 0.3 * (2.0 * y).cos() + 0.1 * (z + x).sin()
        });
        let spec = f.spec().to_vec();
        let g2 = ScalarField::from_spec(g, spec);
        let err = f
            .real()
            .iter()
            .zip(g2.real())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "mirror round trip error {err}");
    }

    #[test]
    fn mean_free_zero_mode() {
        let g = Grid3::new(8).unwrap();
        let f = ScalarField::from_fn(g, |x, _, _| x.sin());
        assert!(f.spec()[0].norm() <= 1e-13);
        assert!(f.mean().abs() <= 1e-13);
    }

    #[test]
    fn trace_free_deviatoric() {
        let g = Grid3::new(8).unwrap();
        let s = StressField::new(std::array::from_fn(|i| {
            ScalarField::from_fn(g, |x, y, _| (x + i as f64 * y).sin() + i as f64)
        }));
        let d = s.deviatoric();
        assert!(d.relative_trace_residual() < 1e-10);
    }

    #[test]
    fn sym_slot_layout() {
        assert_eq!(sym_slot(2, 0), 4);
        assert_eq!(sym_slot(0, 2), 4);
        assert_eq!(sym_slot(1, 2), 5);
        for (s, (i, j)) in SYM_PAIRS.iter().enumerate() {
            assert_eq!(sym_slot(*i, *j), s);
        }
    }
}
