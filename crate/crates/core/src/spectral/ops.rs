//! Fourier-side operator calculus: projections, derivatives, the
//! inverse-divergence potential and the bilinear antidivergence.
//!
//! All multipliers act on normalized coefficients. Derivative operators
//! use Nyquist-zeroed wavenumbers so that repeated differentiation never
//! manufactures unpaired Nyquist content; the projections use the true
//! integer wavenumbers and are exact orthogonal projections in `L^2`.

use super::fft;
use super::field::{ScalarField, StressField, VectorField};
use crate::{Error, Result};
use num_complex::Complex64;

/// Sharp Fourier cutoff: keeps modes with `|k| <= kappa` (closed shell;
/// modes with `|k|` exactly equal to `kappa` are retained). `kappa = 0`
/// keeps only the zero mode.
pub fn lowpass_scalar(f: &ScalarField, kappa: f64) -> ScalarField {
    let k2max = kappa * kappa;
    let grid = f.grid();
    let n = grid.n();
    let spec = f.spec();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    for iz in 0..n {
        let kz = grid.wavenumber(iz) as f64;
        for iy in 0..n {
            let ky = grid.wavenumber(iy) as f64;
            for ix in 0..n {
                let kx = grid.wavenumber(ix) as f64;
                if kx * kx + ky * ky + kz * kz <= k2max * (1.0 + 1e-12) {
                    let idx = grid.index(ix, iy, iz);
                    out[idx] = spec[idx];
                }
            }
        }
    }
    ScalarField::from_spec(grid, out)
}

/// Componentwise sharp cutoff of a vector field.
pub fn lowpass_vector(v: &VectorField, kappa: f64) -> VectorField {
    VectorField::new(std::array::from_fn(|i| lowpass_scalar(&v.comps[i], kappa)))
}

/// Componentwise sharp cutoff of a symmetric tensor field.
pub fn lowpass_stress(s: &StressField, kappa: f64) -> StressField {
    StressField::new(std::array::from_fn(|i| lowpass_scalar(&s.comps[i], kappa)))
}

/// Leray projection onto mean-free divergence-free fields:
/// `v - grad(inv_laplacian(div v))`, mode by mode `v_hat - k (k . v_hat)/|k|^2`,
/// with the zero mode removed.
pub fn leray_project(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let n = grid.n();
    let sx = v.comps[0].spec();
    let sy = v.comps[1].spec();
    let sz = v.comps[2].spec();
    let mut ox = vec![Complex64::new(0.0, 0.0); sx.len()];
    let mut oy = ox.clone();
    let mut oz = ox.clone();
    for iz in 0..n {
        let kz = grid.wavenumber(iz) as f64;
        for iy in 0..n {
            let ky = grid.wavenumber(iy) as f64;
            for ix in 0..n {
                let kx = grid.wavenumber(ix) as f64;
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    continue;
                }
                let idx = grid.index(ix, iy, iz);
                let dot = kx * sx[idx] + ky * sy[idx] + kz * sz[idx];
                let f = dot / k2;
                ox[idx] = sx[idx] - kx * f;
                oy[idx] = sy[idx] - ky * f;
                oz[idx] = sz[idx] - kz * f;
            }
        }
    }
    VectorField::new([
        ScalarField::from_spec(grid, ox),
        ScalarField::from_spec(grid, oy),
        ScalarField::from_spec(grid, oz),
    ])
}

/// Spectral partial derivative along `axis`.
pub fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    f.spec_map(|kx, ky, kz| {
        let k = [kx, ky, kz][axis];
        Complex64::new(0.0, k)
    })
}

/// Gradient of a scalar field.
pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField::new([derivative(f, 0), derivative(f, 1), derivative(f, 2)])
}

/// Divergence of a vector field.
pub fn divergence(v: &VectorField) -> ScalarField {
    derivative(&v.comps[0], 0)
        .add(&derivative(&v.comps[1], 1))
        .add(&derivative(&v.comps[2], 2))
}

/// Curl of a vector field.
pub fn curl(v: &VectorField) -> VectorField {
    let d = |i: usize, a: usize| derivative(&v.comps[i], a);
    VectorField::new([
        d(2, 1).sub(&d(1, 2)),
        d(0, 2).sub(&d(2, 0)),
        d(1, 0).sub(&d(0, 1)),
    ])
}

/// Laplacian of a scalar field.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.spec_map(|kx, ky, kz| Complex64::new(-(kx * kx + ky * ky + kz * kz), 0.0))
}

/// Componentwise Laplacian of a vector field.
pub fn laplacian_vector(v: &VectorField) -> VectorField {
    VectorField::new(std::array::from_fn(|i| laplacian(&v.comps[i])))
}

/// Inverse Laplacian with zero mean (the zero mode maps to zero).
pub fn inv_laplacian(f: &ScalarField) -> ScalarField {
    f.spec_map(|kx, ky, kz| {
        let k2 = kx * kx + ky * ky + kz * kz;
        if k2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-1.0 / k2, 0.0)
        }
    })
}

/// Row divergence of a symmetric tensor: `(div S)_j = d_i S_{ij}`.
pub fn div_stress(s: &StressField) -> VectorField {
    let comp = |j: usize| {
        derivative(s.comp(0, j), 0)
            .add(&derivative(s.comp(1, j), 1))
            .add(&derivative(s.comp(2, j), 2))
    };
    VectorField::new([comp(0), comp(1), comp(2)])
}

/// Report from [`inverse_divergence`]: magnitude of any removed mean.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanRemoval {
    /// Euclidean magnitude of the input's mean, removed before inversion.
    pub removed_mean: f64,
}

/// One Fourier row of the divergence inverse: the six symmetric
/// trace-free potential coefficients for wavenumber `k` and vector
/// coefficient `vh`. Returns zeros when `|k| = 0` (zero mode and
/// Nyquist-degenerate rows carry no invertible content).
pub fn inverse_divergence_row(k: [f64; 3], vh: [Complex64; 3]) -> [Complex64; 6] {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if k2 == 0.0 {
        return [Complex64::new(0.0, 0.0); 6];
    }
    let kdv = k[0] * vh[0] + k[1] * vh[1] + k[2] * vh[2];
    std::array::from_fn(|slot| {
        let (i, j) = super::field::SYM_PAIRS[slot];
        let sym = k[i] * vh[j] + k[j] * vh[i];
        let delta = if i == j { 1.0 } else { 0.0 };
        let trace_fix = kdv * (delta * k2 + k[i] * k[j]) / (2.0 * k2 * k2);
        Complex64::new(0.0, -1.0) * sym / k2 + Complex64::new(0.0, 1.0) * trace_fix
    })
}

/// Symmetric trace-free potential with `div(inverse_divergence(v)) = v`
/// for mean-free `v`. A nonzero input mean is removed and reported; an
/// identically zero input is rejected.
pub fn inverse_divergence(v: &VectorField) -> Result<(StressField, MeanRemoval)> {
    let grid = v.grid();
    let n = grid.n();
    let specs = [v.comps[0].spec(), v.comps[1].spec(), v.comps[2].spec()];
    let sup = specs
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |m, c| m.max(c.norm_sqr()));
    if sup == 0.0 {
        return Err(Error::DegenerateInput(
            "inverse divergence of the zero field".into(),
        ));
    }
    let zero = grid.index(0, 0, 0);
    let mean = [specs[0][zero], specs[1][zero], specs[2][zero]];
    let removed = (mean[0].norm_sqr() + mean[1].norm_sqr() + mean[2].norm_sqr()).sqrt();

    let mut out: [Vec<Complex64>; 6] =
        std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); specs[0].len()]);
    for iz in 0..n {
        let kz = grid.wavenumber_d(iz);
        for iy in 0..n {
            let ky = grid.wavenumber_d(iy);
            for ix in 0..n {
                let kx = grid.wavenumber_d(ix);
                let k = [kx, ky, kz];
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    // Zero mode and Nyquist-degenerate rows carry no
                    // invertible content; they map to zero.
                    continue;
                }
                let idx = grid.index(ix, iy, iz);
                let vh = [specs[0][idx], specs[1][idx], specs[2][idx]];
                let row = inverse_divergence_row(k, vh);
                for (slot, value) in row.into_iter().enumerate() {
                    out[slot][idx] = value;
                }
            }
        }
    }
    let stress = StressField::new(std::array::from_fn(|s| {
        ScalarField::from_spec(grid, std::mem::take(&mut out[s]))
    }));
    Ok((stress, MeanRemoval { removed_mean: removed }))
}

/// Pointwise product of two scalar fields with 3/2-rule dealiasing:
/// both factors are zero-padded to an `m = 3n/2` grid, multiplied there,
/// and the result truncated back to the original band. Exact (alias-free)
/// whenever the factors are band-limited to `|k_i| < n/2`.
pub fn mul_dealiased(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let grid = a.grid();
    assert_eq!(grid, b.grid());
    let n = grid.n();
    let m = 3 * n / 2;
    let pa = pad_spectrum(a.spec(), n, m);
    let pb = pad_spectrum(b.spec(), n, m);
    let (ra, rb) = fft::inverse_pair(&pa, &pb, m);
    let prod: Vec<f64> = ra.iter().zip(&rb).map(|(&x, &y)| x * y).collect();
    let ps = fft::forward_real(&prod, m);
    ScalarField::from_spec(grid, truncate_spectrum(&ps, m, n))
}

/// Pointwise product without padding. Exact only when the factors'
/// bands sum within the grid (for instance both limited to `|k_i| <= n/3`);
/// the engine uses it in that regime, where it coincides with the padded
/// product.
pub fn mul_unpadded(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let grid = a.grid();
    assert_eq!(grid, b.grid());
    let prod: Vec<f64> = a
        .real()
        .iter()
        .zip(b.real().iter())
        .map(|(&x, &y)| x * y)
        .collect();
    ScalarField::from_real(grid, prod)
}

/// Zero-pad a normalized spectrum from an `n`-grid to an `m`-grid
/// (`m >= n`). Nyquist-plane coefficients split evenly between the `+n/2`
/// and `-n/2` planes of the target so real fields stay real.
pub fn pad_spectrum(spec: &[Complex64], n: usize, m: usize) -> Vec<Complex64> {
    assert!(m >= n);
    let mut out = vec![Complex64::new(0.0, 0.0); m * m * m];
    let half = n / 2;
    // Target indices for source index j: returns (index, weight) pairs.
    let targets = |j: usize| -> [(usize, f64); 2] {
        let k = if j <= half { j as i64 } else { j as i64 - n as i64 };
        if j == half && m > n {
            // Nyquist split across +half and -half.
            [(half, 0.5), (m - half, 0.5)]
        } else {
            let t = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
            [(t, 1.0), (0, 0.0)]
        }
    };
    for jz in 0..n {
        for (tz, wz) in targets(jz) {
            if wz == 0.0 {
                continue;
            }
            for jy in 0..n {
                for (ty, wy) in targets(jy) {
                    if wy == 0.0 {
                        continue;
                    }
                    for jx in 0..n {
                        let src = (jz * n + jy) * n + jx;
                        let val = spec[src];
                        if val.norm_sqr() == 0.0 {
                            continue;
                        }
                        for (tx, wx) in targets(jx) {
                            if wx == 0.0 {
                                continue;
                            }
                            out[(tz * m + ty) * m + tx] += val * (wx * wy * wz);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Truncate a normalized spectrum from an `m`-grid back to an `n`-grid,
/// folding the `+n/2` and `-n/2` planes into the stored Nyquist plane.
pub fn truncate_spectrum(spec: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    assert!(m >= n);
    let half = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n * n];
    // Source indices contributing to target index j.
    let sources = |j: usize| -> [(usize, f64); 2] {
        let k = if j <= half { j as i64 } else { j as i64 - n as i64 };
        if j == half && m > n {
            [(half, 1.0), (m - half, 1.0)]
        } else {
            let s = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
            [(s, 1.0), (0, 0.0)]
        }
    };
    for jz in 0..n {
        for jy in 0..n {
            for jx in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (sz, wz) in sources(jz) {
                    if wz == 0.0 {
                        continue;
                    }
                    for (sy, wy) in sources(jy) {
                        if wy == 0.0 {
                            continue;
                        }
                        for (sx, wx) in sources(jx) {
                            if wx == 0.0 {
                                continue;
                            }
                            acc += spec[(sz * m + sy) * m + sx] * (wx * wy * wz);
                        }
                    }
                }
                out[(jz * n + jy) * n + jx] = acc;
            }
        }
    }
    out
}

/// Contraction `(v . S)_j = v_i S_{ij}` of a vector with a symmetric
/// tensor, with dealiased products.
pub fn contract_vs(v: &VectorField, s: &StressField, padded: bool) -> VectorField {
    let mul = if padded { mul_dealiased } else { mul_unpadded };
    let comp = |j: usize| {
        mul(&v.comps[0], s.comp(0, j))
            .add(&mul(&v.comps[1], s.comp(1, j)))
            .add(&mul(&v.comps[2], s.comp(2, j)))
    };
    VectorField::new([comp(0), comp(1), comp(2)])
}

/// Symmetric part of the tensor product `u (x) w`, slot by slot, with
/// dealiased products: `(u_i w_j + u_j w_i)/2`.
pub fn sym_tensor_product(u: &VectorField, w: &VectorField, padded: bool) -> StressField {
    let mul = if padded { mul_dealiased } else { mul_unpadded };
    StressField::new(std::array::from_fn(|slot| {
        let (i, j) = super::field::SYM_PAIRS[slot];
        let a = mul(&u.comps[i], &w.comps[j]);
        if i != j {
            a.add(&mul(&u.comps[j], &w.comps[i])).scale(0.5)
        } else {
            a
        }
    }))
}

/// Bilinear antidivergence `B(v, A)`: a symmetric tensor with
/// `div B(v, A) = v A - mean(v A)` whenever `A` is mean-free.
///
/// Construction: with `R A_j` the potential of the `j`-th column,
/// `T_{kj} = v_i (R A_j)_{ik} - R( P_{neq 0} (d_k v_i) (R A_j)_{ik} )_{kj}`
/// satisfies the divergence identity but need not be symmetric; the
/// antisymmetric remainder has divergence `curl c` for a dual vector `c`
/// and is replaced by its own potential `R(curl c)`, which preserves the
/// divergence.
///
/// The output is not trace-free: removing the trace would change the
/// divergence by the gradient `grad(tr/3)`. Callers that need a
/// trace-free stress take `deviatoric()` afterwards and let the pressure
/// absorb that gradient.
pub fn bilinear_antidiv(v: &VectorField, a: &StressField, padded: bool) -> Result<StressField> {
    let grid = v.grid();
    let mul = if padded { mul_dealiased } else { mul_unpadded };

    // Potentials of the three columns of A (column means removed; for a
    // mean-free A they already vanish).
    let mut col_pot: Vec<StressField> = Vec::with_capacity(3);
    for j in 0..3 {
        let col = VectorField::new([
            a.comp(0, j).remove_mean(),
            a.comp(1, j).remove_mean(),
            a.comp(2, j).remove_mean(),
        ]);
        let (pot, _) = inverse_divergence(&col)?;
        col_pot.push(pot);
    }

    // Gradient of v, needed for the correction term.
    let dv: Vec<VectorField> = (0..3).map(|i| gradient(&v.comps[i])).collect();

    // T1_{kj} = v_i M_{ikj}, and s_j = (d_k v_i) M_{ikj}.
    let mut t_cols: Vec<VectorField> = Vec::with_capacity(3);
    let mut s_comps: Vec<ScalarField> = Vec::with_capacity(3);
    for j in 0..3 {
        let m = &col_pot[j];
        let mut t1 = VectorField::zeros(grid);
        let mut s = ScalarField::zeros(grid);
        for i in 0..3 {
            for k in 0..3 {
                let mik = m.comp(i, k);
                t1.comps[k] = t1.comps[k].add(&mul(&v.comps[i], mik));
                s = s.add(&mul(&dv[i].comps[k], mik));
            }
        }
        t_cols.push(t1);
        s_comps.push(s.remove_mean());
    }

    // Correction tensor T2 = R(s) for the vector s = (s_0, s_1, s_2).
    let s_vec = VectorField::new([
        s_comps[0].clone(),
        s_comps[1].clone(),
        s_comps[2].clone(),
    ]);
    let s_zero = s_vec
        .comps
        .iter()
        .all(|c| c.spec().iter().all(|z| z.norm_sqr() == 0.0));
    let t2 = if s_zero {
        StressField::zeros(grid)
    } else {
        inverse_divergence(&s_vec)?.0
    };

    // Full (possibly asymmetric) T_{kj} = T1_{kj} - T2_{kj}; T2 is
    // symmetric, so its column j is T2 e_j.
    let t = |k: usize, j: usize| -> ScalarField { t_cols[j].comps[k].sub(t2.comp(k, j)) };
    let sym = StressField::new(std::array::from_fn(|slot| {
        let (i, j) = super::field::SYM_PAIRS[slot];
        if i == j {
            t(i, j)
        } else {
            t(i, j).add(&t(j, i)).scale(0.5)
        }
    }));

    // Antisymmetric remainder C = (T - T^T)/2 with C_{ij} = -eps_{ijk} c_k,
    // so c_1 = C_{32}, c_2 = C_{13}, c_3 = C_{21} (1-based labels). Its
    // divergence equals curl c; replacing C by R(curl c) keeps the row
    // divergence while restoring symmetry.
    let anti = |i: usize, j: usize| -> ScalarField { t(i, j).sub(&t(j, i)).scale(0.5) };
    let c = VectorField::new([anti(2, 1), anti(0, 2), anti(1, 0)]);
    let c_mag = c
        .comps
        .iter()
        .flat_map(|f| f.spec().iter())
        .fold(0.0f64, |m, z| m.max(z.norm_sqr()));
    let sym = if c_mag > 1e-300 {
        let cc = VectorField::new(curl(&c).comps.map(|f| f.remove_mean()));
        let all_zero = cc
            .comps
            .iter()
            .all(|f| f.spec().iter().all(|z| z.norm_sqr() == 0.0));
        if all_zero {
            sym
        } else {
            sym.add(&inverse_divergence(&cc)?.0)
        }
    } else {
        sym
    };

    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::Grid3;
    use crate::spectral::norms::{vector_norm, NormKind};

    fn random_bandlimited_vector(grid: Grid3, kmax: i64, seed: u64) -> VectorField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = grid.n();
        let mut comps = Vec::new();
        for _ in 0..3 {
            let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
            for kz in -kmax..=kmax {
                for ky in -kmax..=kmax {
                    for kx in -kmax..=kmax {
                        if kx == 0 && ky == 0 && kz == 0 {
                            continue;
                        }
                        let re: f64 = rng.gen_range(-1.0..1.0);
                        let im: f64 = rng.gen_range(-1.0..1.0);
                        let jx = ((kx + n as i64) % n as i64) as usize;
                        let jy = ((ky + n as i64) % n as i64) as usize;
                        let jz = ((kz + n as i64) % n as i64) as usize;
                        spec[grid.index(jx, jy, jz)] = Complex64::new(re, im);
                    }
                }
            }
            // Enforce Hermitian symmetry so the field is real.
            let mut herm = spec.clone();
            for jz in 0..n {
                for jy in 0..n {
                    for jx in 0..n {
                        let cj = (n - jz) % n;
                        let bj = (n - jy) % n;
                        let aj = (n - jx) % n;
                        let a = spec[grid.index(jx, jy, jz)];
                        let b = spec[grid.index(aj, bj, cj)].conj();
                        herm[grid.index(jx, jy, jz)] = 0.5 * (a + b);
                    }
                }
            }
            comps.push(ScalarField::from_spec(grid, herm));
        }
        VectorField::new([comps.remove(0), comps.remove(0), comps.remove(0)])
    }

    #[test]
    fn inverse_divergence_of_sine_matches_closed_form() {
        // v = (0, sin x1, 0): the potential has only the (1,2) entries,
        // equal to -cos(x1).
        let g = Grid3::new(16).unwrap();
        let v = VectorField::from_fns(g, |x, _, _| [0.0, x.sin(), 0.0]);
        let (r, rep) = inverse_divergence(&v).unwrap();
        assert!(rep.removed_mean < 1e-14);
        let expected = ScalarField::from_fn(g, |x, _, _| -x.cos());
        let diff = r.comp(0, 1).sub(&expected);
        let err = diff.real().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(err < 1e-12, "offdiag error {err}");
        for &(i, j) in &[(0usize, 0usize), (1, 1), (2, 2), (0, 2), (1, 2)] {
            let mx = r.comp(i, j).real().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            assert!(mx < 1e-12, "entry ({i},{j}) should vanish, got {mx}");
        }
    }

    #[test]
    fn div_of_inverse_divergence_is_identity() {
        let g = Grid3::new(16).unwrap();
        let v0 = random_bandlimited_vector(g, 3, 7);
        // Add a gradient part too: the identity does not require div-free.
        let p = ScalarField::from_fn(g, |x, y, _| (x + 2.0 * y).sin());
        let v = leray_project(&v0).add_scaled(&gradient(&p), 0.3);
        let (r, _) = inverse_divergence(&v).unwrap();
        let dv = div_stress(&r);
        let diff = dv.sub(&v);
        let rel = vector_norm(&diff, NormKind::Lp(2.0)) / vector_norm(&v, NormKind::Lp(2.0));
        assert!(rel < 1e-12, "relative error {rel}");
        // Trace-free and symmetric by construction.
        assert!(r.relative_trace_residual() < 1e-12);
    }

    #[test]
    fn leray_is_idempotent_projection() {
        let g = Grid3::new(16).unwrap();
        let v = random_bandlimited_vector(g, 4, 11);
        let p1 = leray_project(&v);
        let p2 = leray_project(&p1);
        let diff = p2.sub(&p1);
        assert!(vector_norm(&diff, NormKind::Lp(2.0)) < 1e-12);
        let d = divergence(&p1);
        let dmax = d.real().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(dmax < 1e-10, "divergence sup {dmax}");
    }

    #[test]
    fn dealiased_product_matches_exact_coefficients() {
        // cos(3x) * cos(3x) = 1/2 + cos(6x)/2. On an n = 8 grid the k = 6
        // content aliases to k = -2 without padding; with padding it is
        // cleanly truncated away.
        let g = Grid3::new(8).unwrap();
        let f = ScalarField::from_fn(g, |x, _, _| (3.0 * x).cos());
        let prod = mul_dealiased(&f, &f);
        let spec = prod.spec();
        let mean = spec[g.index(0, 0, 0)];
        assert!((mean.re - 0.5).abs() < 1e-12);
        // The aliased slot k = (-2, 0, 0) must stay empty.
        let alias = spec[g.index(6, 0, 0)];
        assert!(alias.norm() < 1e-12, "alias leak {}", alias.norm());
    }

    #[test]
    fn bilinear_antidiv_divergence_identity() {
        let g = Grid3::new(16).unwrap();
        let v = random_bandlimited_vector(g, 2, 3);
        let a_vec = random_bandlimited_vector(g, 2, 5);
        let a = StressField::new(
            sym_tensor_product(&a_vec, &a_vec, true)
                .deviatoric()
                .comps
                .map(|c| c.remove_mean()),
        );
        let b = bilinear_antidiv(&v, &a, true).unwrap();
        let got = div_stress(&b);
        let want = VectorField::new(
            contract_vs(&v, &a, true).comps.map(|c| c.remove_mean()),
        );
        let diff = got.sub(&want);
        let rel =
            vector_norm(&diff, NormKind::Lp(2.0)) / vector_norm(&want, NormKind::Lp(2.0));
        assert!(rel < 1e-9, "relative error {rel}");
    }
}
