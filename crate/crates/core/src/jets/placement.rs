//! Placement of jet tube shifts: exact pairwise feasibility analysis,
//! a targeted deterministic sweep, and grid-level verification masks.
//!
//! The tubes of direction `xi` have axes on the affine lattice `alpha +
//! R xi + Gamma`, with `Gamma` generated by `2 pi Z^3` and `(2 pi /
//! sigma)(Z A + Z B)`. For two directions the distance between any two
//! axes is `|(delta + g) . w| / |w|` with `w = xi_i x xi_j` and `g`
//! ranging over the combined translation lattice, so the achievable
//! separations are distances to a rank-one lattice of scalars whose gap
//! is computable exactly in integers: with `W = 25 w` (an integer
//! vector for the five-smooth direction family) every generator
//! projects to a multiple of `2 pi / (125 sigma)`, and the gap is the
//! gcd of those integer multiples. A pair can be made disjoint if and
//! only if half that gap exceeds the sum of the tube radii
//! `r_perp / sigma`; for transversal pairs of this direction family the
//! feasibility ceiling works out to `r_perp < pi G / (10 |W|)`, about
//! `0.0716`, which is why moderate desk radii are rejected while thin
//! tubes place cleanly. The sweep then solves for offsets inside the
//! feasible windows of every placed pair by maximizing the worst
//! margin; random or lattice candidates would almost never hit the
//! windows, whose joint measure is tiny.

use crate::geometry::{self, N_STAR};
use crate::spectral::Grid3;
use crate::{Error, Result};
use num_integer::Integer;

/// Bitset with one bit per grid point.
pub type Mask = Vec<u64>;

/// Exact separation data of one direction pair.
#[derive(Clone, Copy, Debug)]
pub struct PairGap {
    pub i: usize,
    pub j: usize,
    /// Integer normal `25 (xi_i x xi_j)`.
    pub w25: [i64; 3],
    /// Euclidean norm of `w25`.
    pub w_norm: f64,
    /// Gap of the projected translation lattice in the `W`-scalar.
    pub d_w: f64,
    /// Largest achievable axis separation (geometric).
    pub max_distance: f64,
    /// Required separation: sum of the two tube radii.
    pub required: f64,
}

impl PairGap {
    pub fn feasible(&self) -> bool {
        self.max_distance > self.required
    }

    /// Largest `r_perp` (shared by both tubes) this pair could accept.
    pub fn r_perp_ceiling(&self, sigma: i64) -> f64 {
        0.5 * self.max_distance * sigma as f64
    }
}

fn cross_i64(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot_i64(a: [i64; 3], b: [i64; 3]) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Exact pair analysis for directions `i`, `j` at scale `sigma` and
/// common tube radius `r_perp`.
pub fn pair_gap(sigma: i64, r_perp: f64, i: usize, j: usize) -> PairGap {
    let ds = geometry::directions();
    let (di, dj) = (&ds[i], &ds[j]);
    // W = 25 (xi_i x xi_j) = (5 xi_i) x (5 xi_j), integer.
    let w25 = cross_i64(di.xi_lattice(), dj.xi_lattice());
    let w_norm = (dot_i64(w25, w25) as f64).sqrt();
    // Generator projections in units of 2 pi / (125 sigma):
    // torus translations give 5 sigma W_l, the in-family planar
    // translations give a_lattice . W and b_lattice . W.
    let mut g: i64 = 0;
    for l in 0..3 {
        g = g.gcd(&(5 * sigma * w25[l]));
    }
    for d in [di, dj] {
        g = g.gcd(&dot_i64(d.a_lattice(), w25));
        g = g.gcd(&dot_i64(d.b_lattice(), w25));
    }
    let d_w = 2.0 * std::f64::consts::PI * g as f64 / (125.0 * sigma as f64) * 25.0;
    let max_distance = 0.5 * d_w / w_norm;
    PairGap {
        i,
        j,
        w25,
        w_norm,
        d_w,
        max_distance,
        required: 2.0 * r_perp / sigma as f64,
    }
}

/// Diagnostics of a placement run.
#[derive(Clone, Debug)]
pub struct PlacementDiag {
    /// Worst achieved axis margin over all pairs (negative when the
    /// placement could not be disjoint).
    pub min_margin: f64,
    /// Pairs whose lattice gap cannot accommodate the radii at all,
    /// with their separation ceiling `(i, j, max_distance, required)`.
    pub infeasible_pairs: Vec<(usize, usize, f64, f64)>,
}

fn margin_for(
    pair: &PairGap,
    alpha_i: [f64; 3],
    alpha_j: [f64; 3],
) -> f64 {
    let c_w = (alpha_j[0] - alpha_i[0]) * pair.w25[0] as f64
        + (alpha_j[1] - alpha_i[1]) * pair.w25[1] as f64
        + (alpha_j[2] - alpha_i[2]) * pair.w25[2] as f64;
    let r = c_w.rem_euclid(pair.d_w);
    let dist = r.min(pair.d_w - r) / pair.w_norm;
    dist - pair.required
}

fn alpha_from_offsets(dir: usize, sigma: i64, b1: f64, b2: f64) -> [f64; 3] {
    let d = &geometry::directions()[dir];
    let a = d.a_f64();
    let b = d.b_f64();
    let s = sigma as f64;
    [
        (b1 * a[0] + b2 * b[0]) / s,
        (b1 * a[1] + b2 * b[1]) / s,
        (b1 * a[2] + b2 * b[2]) / s,
    ]
}

/// Maximize the worst pair margin for direction `dir` against the
/// already placed shifts: coarse offset scan plus two zoom rounds.
fn sweep_direction(
    dir: usize,
    sigma: i64,
    placed: &[(usize, [f64; 3])],
    pairs: &[PairGap],
) -> (f64, f64, f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let score = |b1: f64, b2: f64| -> f64 {
        let alpha = alpha_from_offsets(dir, sigma, b1, b2);
        let mut worst = f64::INFINITY;
        for &(i, alpha_i) in placed {
            let pair = pairs
                .iter()
                .find(|p| (p.i == i && p.j == dir) || (p.i == dir && p.j == i))
                .expect("pair table covers all pairs");
            worst = worst.min(margin_for(pair, alpha_i, alpha));
        }
        worst
    };
    if placed.is_empty() {
        return (0.0, 0.0, f64::INFINITY);
    }
    let k1 = 128;
    let mut best = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for i in 0..k1 {
        for j in 0..k1 {
            let b1 = two_pi * (i as f64 + 0.5) / k1 as f64;
            let b2 = two_pi * (j as f64 + 0.5) / k1 as f64;
            let s = score(b1, b2);
            if s > best.2 {
                best = (b1, b2, s);
            }
        }
    }
    let mut span = two_pi / k1 as f64;
    for _ in 0..2 {
        let (c1, c2, _) = best;
        for i in -16..=16 {
            for j in -16..=16 {
                let b1 = c1 + span * i as f64 / 16.0;
                let b2 = c2 + span * j as f64 / 16.0;
                let s = score(b1, b2);
                if s > best.2 {
                    best = (b1, b2, s);
                }
            }
        }
        span /= 16.0;
    }
    best
}

fn run_placement(sigma: i64, r_perp: f64) -> ([[f64; 3]; 6], PlacementDiag) {
    let nd = geometry::DIRECTION_COUNT;
    let mut pairs = Vec::new();
    for i in 0..nd {
        for j in i + 1..nd {
            pairs.push(pair_gap(sigma, r_perp, i, j));
        }
    }
    let infeasible: Vec<(usize, usize, f64, f64)> = pairs
        .iter()
        .filter(|p| !p.feasible())
        .map(|p| (p.i, p.j, p.max_distance, p.required))
        .collect();
    let mut shifts = [[0.0f64; 3]; 6];
    let mut placed: Vec<(usize, [f64; 3])> = Vec::new();
    let mut min_margin = f64::INFINITY;
    for dir in 0..nd {
        let (b1, b2, margin) = sweep_direction(dir, sigma, &placed, &pairs);
        shifts[dir] = alpha_from_offsets(dir, sigma, b1, b2);
        placed.push((dir, shifts[dir]));
        min_margin = min_margin.min(margin);
    }
    (
        shifts,
        PlacementDiag {
            min_margin,
            infeasible_pairs: infeasible,
        },
    )
}

/// Best-effort placement: maximize the worst margin even when true
/// disjointness is impossible at this radius.
pub fn place_shifts_best_effort(sigma: i64, r_perp: f64) -> ([[f64; 3]; 6], PlacementDiag) {
    run_placement(sigma, r_perp)
}

/// Place shifts for all six directions with certified disjoint tubes.
///
/// Errors with [`Error::PlacementError`] when some pair's translation
/// lattice cannot separate the tubes at this radius (the exact
/// geometric obstruction) or, defensively, if the grid masks of the
/// placed tubes are found to share a point.
pub fn place_shifts(sigma: i64, r_perp: f64, grid: Grid3) -> Result<[[f64; 3]; 6]> {
    if !(r_perp > 0.0 && r_perp < std::f64::consts::PI) {
        return Err(Error::PlacementError(format!(
            "tube radius r_perp = {r_perp} must lie in (0, pi) for \
             within-family separation"
        )));
    }
    if sigma <= 0 || sigma % N_STAR != 0 {
        return Err(Error::PlacementError(format!(
            "sigma = {sigma} must be a positive multiple of {N_STAR}"
        )));
    }
    let (shifts, diag) = run_placement(sigma, r_perp);
    if let Some(&(i, j, max_d, req)) = diag.infeasible_pairs.first() {
        let ceiling = 0.5 * max_d * sigma as f64;
        return Err(Error::PlacementError(format!(
            "directions {i} and {j} cannot have disjoint tubes: achievable \
             axis separation {max_d:.3e} < required {req:.3e} \
             (largest feasible r_perp for this pair is {ceiling:.4})"
        )));
    }
    if diag.min_margin <= 0.0 {
        return Err(Error::PlacementError(format!(
            "sweep found no jointly disjoint offsets (worst margin \
             {:.3e})",
            diag.min_margin
        )));
    }
    // Defensive grid certificate: the masks are subsets of the disjoint
    // continuum tubes, so they must also be disjoint.
    let masks: Vec<Mask> = (0..geometry::DIRECTION_COUNT)
        .map(|d| support_mask(grid, sigma, r_perp, d, shifts[d]))
        .collect();
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            let overlap = mask_overlap(&masks[i], &masks[j]);
            if overlap != 0 {
                return Err(Error::PlacementError(format!(
                    "grid masks of directions {i} and {j} share {overlap} \
                     points despite positive continuum margins"
                )));
            }
        }
    }
    Ok(shifts)
}

fn mask_words(grid: Grid3) -> usize {
    grid.len().div_ceil(64)
}

/// Number of set points in a mask.
pub fn mask_count(mask: &Mask) -> usize {
    mask.iter().map(|w| w.count_ones() as usize).sum()
}

/// Number of points two masks share.
pub fn mask_overlap(a: &Mask, b: &Mask) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum()
}

/// Exact grid-point support mask of the tube for `dir` shifted by
/// `alpha`: points with `wrap(sigma (x-alpha).A)^2 + wrap(sigma
/// (x-alpha).B)^2 <= r_perp^2`.
pub fn support_mask(
    grid: Grid3,
    sigma: i64,
    r_perp: f64,
    dir: usize,
    alpha: [f64; 3],
) -> Mask {
    let d = &geometry::directions()[dir];
    let a = d.a_f64();
    let b = d.b_f64();
    let s = sigma as f64;
    let beta1 = s * (alpha[0] * a[0] + alpha[1] * a[1] + alpha[2] * a[2]);
    let beta2 = s * (alpha[0] * b[0] + alpha[1] * b[1] + alpha[2] * b[2]);

    let n = grid.n() as i64;
    let norm = |v: i64| ((v % n) + n) % n;
    let sl = sigma / N_STAR;
    let ka: Vec<i64> = d.a_lattice().iter().map(|&v| norm(v * sl)).collect();
    let kb: Vec<i64> = d.b_lattice().iter().map(|&v| norm(v * sl)).collect();

    let nn = grid.n();
    let r2 = r_perp * r_perp;
    let wrap = |v: f64| {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut w = v % two_pi;
        if w >= std::f64::consts::PI {
            w -= two_pi;
        } else if w < -std::f64::consts::PI {
            w += two_pi;
        }
        w
    };
    // In-disc lookup over the residue pair of the planar lattice forms.
    let mut disc = vec![false; nn * nn];
    for q in 0..nn {
        let v2 = wrap(2.0 * std::f64::consts::PI * q as f64 / nn as f64 - beta2);
        if v2 * v2 > r2 {
            continue;
        }
        for p in 0..nn {
            let v1 = wrap(2.0 * std::f64::consts::PI * p as f64 / nn as f64 - beta1);
            disc[q * nn + p] = v1 * v1 + v2 * v2 <= r2;
        }
    }

    let mut mask = vec![0u64; mask_words(grid)];
    let mut idx = 0usize;
    for iz in 0..nn {
        let pz = norm(ka[2] * iz as i64);
        let qz = norm(kb[2] * iz as i64);
        for iy in 0..nn {
            let mut p = norm(pz + ka[1] * iy as i64) as usize;
            let mut q = norm(qz + kb[1] * iy as i64) as usize;
            let dp = ka[0] as usize;
            let dq = kb[0] as usize;
            for _ix in 0..nn {
                if disc[q * nn + p] {
                    mask[idx >> 6] |= 1u64 << (idx & 63);
                }
                idx += 1;
                p += dp;
                if p >= nn {
                    p -= nn;
                }
                q += dq;
                if q >= nn {
                    q -= nn;
                }
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_tubes_place_with_certified_masks() {
        let grid = Grid3::new(64).unwrap();
        let shifts = place_shifts(5, 1.0 / 32.0, grid).unwrap();
        let masks: Vec<Mask> = (0..6)
            .map(|d| support_mask(grid, 5, 1.0 / 32.0, d, shifts[d]))
            .collect();
        for i in 0..6 {
            for j in i + 1..6 {
                assert_eq!(mask_overlap(&masks[i], &masks[j]), 0);
            }
        }
    }

    #[test]
    fn transversal_pairs_cap_the_radius() {
        // The coplanar pair (0, 1) tolerates fat tubes; the transversal
        // pair (0, 2) has a hard ceiling near 0.0716.
        let coplanar = pair_gap(25, 0.25, 0, 1);
        assert!(coplanar.feasible());
        let transversal = pair_gap(25, 0.25, 0, 2);
        assert!(!transversal.feasible());
        let ceiling = transversal.r_perp_ceiling(25);
        assert!(
            (ceiling - 0.0716).abs() < 5e-4,
            "ceiling {ceiling} should be near 0.0716"
        );
        // The ceiling is scale invariant.
        let other = pair_gap(5, 0.25, 0, 2);
        assert!((other.r_perp_ceiling(5) - ceiling).abs() < 1e-12);
    }

    #[test]
    fn fat_tubes_fail_placement() {
        let grid = Grid3::new(64).unwrap();
        for r in [0.9f64, 0.25] {
            match place_shifts(5 * ((20.0 * r).round() as i64), r, grid) {
                Err(Error::PlacementError(_)) => {}
                other => panic!("expected placement failure at r_perp = {r}, got {other:?}"),
            }
        }
    }

    #[test]
    fn best_effort_reports_negative_margin_when_infeasible() {
        let (_, diag) = place_shifts_best_effort(25, 0.25);
        assert!(!diag.infeasible_pairs.is_empty());
        assert!(diag.min_margin < 0.0);
    }

    #[test]
    fn rejects_bad_geometry_parameters() {
        let grid = Grid3::new(16).unwrap();
        assert!(place_shifts(5, 4.0, grid).is_err());
        assert!(place_shifts(7, 0.25, grid).is_err());
    }
}
