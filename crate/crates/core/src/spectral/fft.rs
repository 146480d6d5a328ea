//! Shared FFT plans and 3-D complex transforms.
//!
//! rustfft plans are cached per length in a global table; the 3-D transform
//! applies 1-D passes along each axis. Forward transforms return normalised
//! coefficients (division by the point count), inverse transforms undo that,
//! so `forward` then `inverse` is the identity up to rounding.
//!
//! Two real fields can share one complex transform: `forward_pair` packs
//! them as real and imaginary parts and separates the two Hermitian spectra
//! afterwards, `inverse_pair` runs the same trick backwards. This halves the
//! transform count for the batched real data the rest of the crate moves
//! around.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

struct PlanTable {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

static PLANS: Lazy<Mutex<PlanTable>> = Lazy::new(|| {
    Mutex::new(PlanTable {
        planner: FftPlanner::new(),
        plans: HashMap::new(),
    })
});

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut table = PLANS.lock().unwrap();
    if let Some(p) = table.plans.get(&(len, inverse)) {
        return p.clone();
    }
    let p = if inverse {
        table.planner.plan_fft_inverse(len)
    } else {
        table.planner.plan_fft_forward(len)
    };
    table.plans.insert((len, inverse), p.clone());
    p
}

/// In-place 3-D transform of an `n^3` complex array, x-fastest layout.
///
/// `inverse = false` produces normalised coefficients; `inverse = true`
/// consumes them and leaves point values.
pub fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let p = plan(n, inverse);
    let mut scratch =
        vec![Complex64::default(); p.get_inplace_scratch_len().max(4 * n)];

    // Axis 0: contiguous lines.
    for line in data.chunks_exact_mut(n) {
        p.process_with_scratch(line, &mut scratch);
    }

    // Axes 1 and 2: gather strided lines into a scratch buffer. Lines with
    // the same y (resp. z) start index are batched per xy-plane to keep the
    // working set small.
    let n2 = n * n;
    let (line_buf, fft_scratch) = scratch.split_at_mut(n);
    for iz in 0..n {
        let plane = &mut data[iz * n2..(iz + 1) * n2];
        for ix in 0..n {
            for iy in 0..n {
                line_buf[iy] = plane[iy * n + ix];
            }
            p.process_with_scratch(line_buf, fft_scratch);
            for iy in 0..n {
                plane[iy * n + ix] = line_buf[iy];
            }
        }
    }
    for iy in 0..n {
        for ix in 0..n {
            let base = iy * n + ix;
            for iz in 0..n {
                line_buf[iz] = data[iz * n2 + base];
            }
            p.process_with_scratch(line_buf, fft_scratch);
            for iz in 0..n {
                data[iz * n2 + base] = line_buf[iz];
            }
        }
    }

    if !inverse {
        let scale = 1.0 / (n2 * n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// In-place 1-D transform; forward divides by the length.
pub fn fft1(data: &mut [Complex64], inverse: bool) {
    let p = plan(data.len(), inverse);
    let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
    p.process_with_scratch(data, &mut scratch);
    if !inverse {
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// In-place 2-D transform of an `n x n` complex array, x-fastest layout;
/// forward divides by `n^2`.
pub fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n);
    let p = plan(n, inverse);
    let mut scratch =
        vec![Complex64::default(); p.get_inplace_scratch_len().max(2 * n)];
    for line in data.chunks_exact_mut(n) {
        p.process_with_scratch(line, &mut scratch);
    }
    let (line_buf, fft_scratch) = scratch.split_at_mut(n);
    for ix in 0..n {
        for iy in 0..n {
            line_buf[iy] = data[iy * n + ix];
        }
        p.process_with_scratch(line_buf, fft_scratch);
        for iy in 0..n {
            data[iy * n + ix] = line_buf[iy];
        }
    }
    if !inverse {
        let scale = 1.0 / (n * n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Forward transform of one real field.
pub fn forward_real(real: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> =
        real.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    fft3(&mut buf, n, false);
    buf
}

/// Inverse transform of one Hermitian spectrum, discarding the imaginary
/// residue (rounding-level for genuinely Hermitian input).
pub fn inverse_real(spec: &[Complex64], n: usize) -> Vec<f64> {
    let mut buf = spec.to_vec();
    fft3(&mut buf, n, true);
    buf.iter().map(|c| c.re).collect()
}

/// Forward transforms of two real fields through one complex FFT.
pub fn forward_pair(
    a: &[f64],
    b: &[f64],
    n: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    assert_eq!(a.len(), b.len());
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    fft3(&mut buf, n, false);
    let total = n * n * n;
    let mut sa = vec![Complex64::default(); total];
    let mut sb = vec![Complex64::default(); total];
    let n2 = n * n;
    for iz in 0..n {
        let jz = (n - iz) % n;
        for iy in 0..n {
            let jy = (n - iy) % n;
            let row = iz * n2 + iy * n;
            let jrow = jz * n2 + jy * n;
            for ix in 0..n {
                let h = buf[row + ix];
                let hm = buf[jrow + (n - ix) % n].conj();
                sa[row + ix] = 0.5 * (h + hm);
                sb[row + ix] = Complex64::new(0.0, -0.5) * (h - hm);
            }
        }
    }
    (sa, sb)
}

/// Inverse transforms of two Hermitian spectra through one complex FFT.
pub fn inverse_pair(
    sa: &[Complex64],
    sb: &[Complex64],
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(sa.len(), sb.len());
    let mut buf: Vec<Complex64> = sa
        .iter()
        .zip(sb)
        .map(|(&x, &y)| x + Complex64::new(0.0, 1.0) * y)
        .collect();
    fft3(&mut buf, n, true);
    (
        buf.iter().map(|c| c.re).collect(),
        buf.iter().map(|c| c.im).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_identity() {
        let n = 16;
        let total = n * n * n;
        let mut rng = 123u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let data: Vec<f64> = (0..total).map(|_| next()).collect();
        let spec = forward_real(&data, n);
        let back = inverse_real(&spec, n);
        let err = data
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-13, "round trip error {err}");
    }

    #[test]
    fn forward_matches_analytic_mode() {
        // f(x) = cos(2 x1) has coefficients 1/2 at k = (+-2, 0, 0).
        let n = 8;
        let mut data = vec![0.0f64; n * n * n];
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let x = 2.0 * std::f64::consts::PI * ix as f64 / n as f64;
                    data[iz * n * n + iy * n + ix] = (2.0 * x).cos();
                }
            }
        }
        let spec = forward_real(&data, n);
        assert!((spec[2] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((spec[n - 2] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let stray: f64 = spec
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 2 && *i != n - 2)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(stray < 1e-13);
    }

    #[test]
    fn pair_transforms_agree_with_single() {
        let n = 8;
        let total = n * n * n;
        let a: Vec<f64> = (0..total).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let b: Vec<f64> = (0..total).map(|i| ((i * 53 % 97) as f64).cos()).collect();
        let (sa, sb) = forward_pair(&a, &b, n);
        let ra = forward_real(&a, n);
        let rb = forward_real(&b, n);
        let ea = sa
            .iter()
            .zip(&ra)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        let eb = sb
            .iter()
            .zip(&rb)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        assert!(ea < 1e-13 && eb < 1e-13, "pair split errors {ea} {eb}");
        let (ba, bb) = inverse_pair(&sa, &sb, n);
        let ia = a
            .iter()
            .zip(&ba)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        let ib = b
            .iter()
            .zip(&bb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(ia < 1e-13 && ib < 1e-13);
    }
}
