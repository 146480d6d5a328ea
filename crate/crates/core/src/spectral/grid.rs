//! The periodic sampling grid.

use crate::{Error, Result};

/// Uniform `n^3` grid on `[0, 2pi)^3`, `n` a power of two and at least 4.
///
/// Wavenumbers follow the usual DFT layout: storage index `j` along an axis
/// carries the integer wavenumber `j` for `j <= n/2` and `j - n` above, so
/// the band is centred at zero with a single unpaired Nyquist row at
/// `j = n/2`. Differentiation multipliers zero that row.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Grid3 {
    n: usize,
}

impl Grid3 {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::ConfigError(format!(
                "grid size must be a power of two >= 4, got {n}"
            )));
        }
        Ok(Grid3 { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of sample points, `n^3`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `2pi / n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    /// Physical coordinate of sample index `j` along one axis.
    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        self.spacing() * j as f64
    }

    /// Integer wavenumber carried by storage index `j` (Nyquist positive).
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        debug_assert!(j < self.n);
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Wavenumber used by differentiation multipliers: as
    /// [`Self::wavenumber`] but with the Nyquist row zeroed.
    #[inline]
    pub fn wavenumber_d(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumber(j) as f64
        }
    }

    /// Per-axis differentiation wavenumbers as a table.
    pub fn wavenumbers_d(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber_d(j)).collect()
    }

    /// Flat storage index of `(ix, iy, iz)`, x-fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n + iy) * self.n + ix
    }

    /// Largest integer wavenumber magnitude representable without the
    /// Nyquist row, `n/2 - 1`.
    #[inline]
    pub fn max_wavenumber(&self) -> i64 {
        (self.n / 2 - 1) as i64
    }

    /// Dealiasing band limit `n/3`: products of two fields band-limited to
    /// this radius evaluate alias-free on the grid.
    #[inline]
    pub fn dealias_band(&self) -> f64 {
        self.n as f64 / 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid3::new(3).is_err());
        assert!(Grid3::new(2).is_err());
        assert!(Grid3::new(12).is_err());
        assert!(Grid3::new(4).is_ok());
        assert!(Grid3::new(256).is_ok());
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid3::new(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|j| g.wavenumber(j)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.wavenumber_d(4), 0.0);
        assert_eq!(g.wavenumber_d(5), -3.0);
        assert!((g.spacing() - std::f64::consts::PI / 4.0).abs() < 1e-15);
    }
}
