//! Rational direction family on the unit sphere and the convex
//! decomposition of symmetric matrices over it.
//!
//! Six unit vectors with rational coordinates (the 3-4-5 family) carry
//! rational orthonormal companion frames. Their dyads `xi (x) xi` form a
//! basis of the symmetric 3x3 matrices, so every symmetric `R` has unique
//! coefficients `c_xi(R)` with `sum c_xi(R) xi (x) xi = R`; the map is
//! linear and `c_xi(Id) = 1/2` for every direction. All structural facts
//! are established in exact rational arithmetic and consumed by the
//! floating-point evaluator the cascade uses per grid point.

use crate::spectral::SYM_PAIRS;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use once_cell::sync::Lazy;

/// Exact rational triple.
pub type Rat3 = [BigRational; 3];

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rat3(v: [(i64, i64); 3]) -> Rat3 {
    [rat(v[0].0, v[0].1), rat(v[1].0, v[1].1), rat(v[2].0, v[2].1)]
}

fn dot(a: &Rat3, b: &Rat3) -> BigRational {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

fn cross(a: &Rat3, b: &Rat3) -> Rat3 {
    [
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

/// One direction `xi` with its orthonormal companions `a` and `b = xi x a`.
/// All three are exact rational unit vectors, and `N_STAR` times any of
/// them is an integer vector.
#[derive(Clone, Debug)]
pub struct Direction {
    pub xi: Rat3,
    pub a: Rat3,
    pub b: Rat3,
    // Float and integer images, converted once at construction: the
    // accessors sit in per-grid-point evaluation loops.
    xi_f: [f64; 3],
    a_f: [f64; 3],
    b_f: [f64; 3],
    xi_l: [i64; 3],
    a_l: [i64; 3],
    b_l: [i64; 3],
}

impl Direction {
    fn to_f64(v: &Rat3) -> [f64; 3] {
        std::array::from_fn(|i| {
            let n = v[i].numer();
            let d = v[i].denom();
            // Components are tiny rationals; direct conversion is exact.
            n.to_string().parse::<f64>().unwrap() / d.to_string().parse::<f64>().unwrap()
        })
    }

    pub fn xi_f64(&self) -> [f64; 3] {
        self.xi_f
    }

    pub fn a_f64(&self) -> [f64; 3] {
        self.a_f
    }

    pub fn b_f64(&self) -> [f64; 3] {
        self.b_f
    }

    fn lattice(v: &Rat3) -> [i64; 3] {
        std::array::from_fn(|i| {
            let s = &v[i] * BigRational::from(BigInt::from(N_STAR));
            assert!(s.is_integer(), "direction scaled by N_STAR must be integer");
            let (sign, digits) = s.numer().to_u64_digits();
            let mag = *digits.first().unwrap_or(&0) as i64;
            match sign {
                num_bigint::Sign::Minus => -mag,
                _ => mag,
            }
        })
    }

    /// `N_STAR * xi`, an integer vector.
    pub fn xi_lattice(&self) -> [i64; 3] {
        self.xi_l
    }

    /// `N_STAR * a`, an integer vector.
    pub fn a_lattice(&self) -> [i64; 3] {
        self.a_l
    }

    /// `N_STAR * b`, an integer vector.
    pub fn b_lattice(&self) -> [i64; 3] {
        self.b_l
    }
}

/// Smallest positive integer scaling every direction and companion to an
/// integer vector (verified minimal by exhaustive search in the tests).
pub const N_STAR: i64 = 5;

/// Number of directions in the family.
pub const DIRECTION_COUNT: usize = 6;

static DIRECTIONS: Lazy<[Direction; 6]> = Lazy::new(|| {
    let raw: [([(i64, i64); 3], [(i64, i64); 3]); 6] = [
        ([(3, 5), (4, 5), (0, 1)], [(-4, 5), (3, 5), (0, 1)]),
        ([(3, 5), (-4, 5), (0, 1)], [(4, 5), (3, 5), (0, 1)]),
        ([(0, 1), (3, 5), (4, 5)], [(0, 1), (-4, 5), (3, 5)]),
        ([(0, 1), (3, 5), (-4, 5)], [(0, 1), (4, 5), (3, 5)]),
        ([(4, 5), (0, 1), (3, 5)], [(-3, 5), (0, 1), (4, 5)]),
        ([(-4, 5), (0, 1), (3, 5)], [(3, 5), (0, 1), (4, 5)]),
    ];
    raw.map(|(x, a)| {
        let xi = rat3(x);
        let a = rat3(a);
        let b = cross(&xi, &a);
        let one = BigRational::one();
        assert!(dot(&xi, &xi) == one && dot(&a, &a) == one && dot(&b, &b) == one);
        assert!(dot(&xi, &a).is_zero() && dot(&xi, &b).is_zero() && dot(&a, &b).is_zero());
        Direction {
            xi_f: Direction::to_f64(&xi),
            a_f: Direction::to_f64(&a),
            b_f: Direction::to_f64(&b),
            xi_l: Direction::lattice(&xi),
            a_l: Direction::lattice(&a),
            b_l: Direction::lattice(&b),
            xi,
            a,
            b,
        }
    })
});

/// The direction family.
pub fn directions() -> &'static [Direction; 6] {
    &DIRECTIONS
}

/// Symmetric 3x3 matrix in slot order `(11, 22, 33, 12, 13, 23)`,
/// matching the tensor-field storage layout.
pub type Sym6 = [f64; 6];

/// Exact version of [`Sym6`].
pub type Sym6Exact = [BigRational; 6];

fn dyad_exact(xi: &Rat3) -> Sym6Exact {
    std::array::from_fn(|slot| {
        let (i, j) = SYM_PAIRS[slot];
        &xi[i] * &xi[j]
    })
}

/// Solve the 6x6 rational system `M c = r` by Gaussian elimination with
/// exact pivoting. `M` is given columnwise.
fn solve_exact(cols: &[Sym6Exact; 6], r: &Sym6Exact) -> [BigRational; 6] {
    let mut m: Vec<Vec<BigRational>> = (0..6)
        .map(|row| {
            let mut line: Vec<BigRational> = (0..6).map(|c| cols[c][row].clone()).collect();
            line.push(r[row].clone());
            line
        })
        .collect();
    for col in 0..6 {
        let pivot_row = (col..6)
            .find(|&r2| !m[r2][col].is_zero())
            .expect("dyad basis must be nonsingular");
        m.swap(col, pivot_row);
        let pivot = m[col][col].clone();
        for c in col..7 {
            m[col][c] = &m[col][c] / &pivot;
        }
        for r2 in 0..6 {
            if r2 != col && !m[r2][col].is_zero() {
                let factor = m[r2][col].clone();
                for c in col..7 {
                    let delta = &factor * &m[col][c];
                    m[r2][c] = &m[r2][c] - delta;
                }
            }
        }
    }
    std::array::from_fn(|i| m[i][6].clone())
}

/// The inverse decomposition map: row `q` gives the linear functional
/// `R -> c_q(R)` in slot coordinates.
pub struct Decomposition {
    rows_exact: [Sym6Exact; 6],
    rows: [[f64; 6]; 6],
    r_pos: f64,
    r_pos_sq_exact: BigRational,
}

static DECOMPOSITION: Lazy<Decomposition> = Lazy::new(|| {
    let cols: [Sym6Exact; 6] = std::array::from_fn(|q| dyad_exact(&DIRECTIONS[q].xi));
    // Rows of the inverse: solve M c = e_slot for each slot and collect
    // the coefficients as functions of the slot.
    let mut rows_exact: [Sym6Exact; 6] =
        std::array::from_fn(|_| std::array::from_fn(|_| BigRational::zero()));
    for slot in 0..6 {
        let mut e: Sym6Exact = std::array::from_fn(|_| BigRational::zero());
        e[slot] = BigRational::one();
        let c = solve_exact(&cols, &e);
        for (q, cq) in c.into_iter().enumerate() {
            rows_exact[q][slot] = cq;
        }
    }
    let rows: [[f64; 6]; 6] = std::array::from_fn(|q| {
        std::array::from_fn(|slot| {
            let v = &rows_exact[q][slot];
            v.numer().to_string().parse::<f64>().unwrap()
                / v.denom().to_string().parse::<f64>().unwrap()
        })
    });
    // Positivity radius in the Frobenius norm: |c_q(R) - 1/2| is bounded
    // by ||M_q||_F ||R - Id||_F where M_q is the symmetric matrix of the
    // functional (off-diagonal slot weights halved). The radius is
    // (1/2) / max_q ||M_q||_F.
    let mut max_frob_sq = BigRational::zero();
    for row in rows_exact.iter() {
        let mut fs = BigRational::zero();
        for slot in 0..6 {
            let w = &row[slot];
            let contrib = if slot < 3 {
                w * w
            } else {
                // Two symmetric entries each of magnitude w/2.
                let half = w / BigRational::from(BigInt::from(2));
                let sq = &half * &half;
                &sq + &sq
            };
            fs += contrib;
        }
        if fs > max_frob_sq {
            max_frob_sq = fs;
        }
    }
    let quarter = rat(1, 4);
    let r_pos_sq_exact = &quarter / &max_frob_sq;
    let r_pos = (r_pos_sq_exact.numer().to_string().parse::<f64>().unwrap()
        / r_pos_sq_exact.denom().to_string().parse::<f64>().unwrap())
    .sqrt();
    Decomposition {
        rows_exact,
        rows,
        r_pos,
        r_pos_sq_exact,
    }
});

/// Shared decomposition instance.
pub fn decomposition() -> &'static Decomposition {
    &DECOMPOSITION
}

impl Decomposition {
    /// Coefficients `c_q(R)` for a symmetric matrix in slot form.
    pub fn coefficients(&self, r: &Sym6) -> [f64; 6] {
        std::array::from_fn(|q| self.coefficient(q, r))
    }

    /// Single coefficient `c_q(R)`.
    #[inline]
    pub fn coefficient(&self, q: usize, r: &Sym6) -> f64 {
        let row = &self.rows[q];
        row[0] * r[0] + row[1] * r[1] + row[2] * r[2] + row[3] * r[3] + row[4] * r[4]
            + row[5] * r[5]
    }

    /// Exact coefficients for rational input.
    pub fn coefficients_exact(&self, r: &Sym6Exact) -> [BigRational; 6] {
        std::array::from_fn(|q| {
            let mut acc = BigRational::zero();
            for slot in 0..6 {
                acc += &self.rows_exact[q][slot] * &r[slot];
            }
            acc
        })
    }

    /// Frobenius distance from the identity in slot form.
    pub fn frobenius_distance_from_id(r: &Sym6) -> f64 {
        let d0 = r[0] - 1.0;
        let d1 = r[1] - 1.0;
        let d2 = r[2] - 1.0;
        (d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * (r[3] * r[3] + r[4] * r[4] + r[5] * r[5]))
            .sqrt()
    }

    /// Radius of the Frobenius ball around the identity on which every
    /// coefficient is guaranteed positive.
    pub fn positivity_radius(&self) -> f64 {
        self.r_pos
    }

    /// Exact square of the positivity radius.
    pub fn positivity_radius_squared_exact(&self) -> &BigRational {
        &self.r_pos_sq_exact
    }

    /// Coefficients with the ball precondition enforced.
    pub fn coefficients_checked(&self, r: &Sym6) -> Result<[f64; 6]> {
        let dist = Self::frobenius_distance_from_id(r);
        if dist >= self.r_pos {
            return Err(Error::OutsidePositivityBall(format!(
                "Frobenius distance {dist:.6} exceeds radius {:.6}",
                self.r_pos
            )));
        }
        Ok(self.coefficients(r))
    }

    /// Time derivative of `sqrt(c_q(R(t)))` given `R(t)` and `R'(t)` in
    /// slot form. Valid inside the positivity ball where `c_q > 0`.
    pub fn sqrt_coefficient_derivative(&self, q: usize, r: &Sym6, rdot: &Sym6) -> f64 {
        let c = self.coefficient(q, r);
        let cdot = {
            let row = &self.rows[q];
            row[0] * rdot[0]
                + row[1] * rdot[1]
                + row[2] * rdot[2]
                + row[3] * rdot[3]
                + row[4] * rdot[4]
                + row[5] * rdot[5]
        };
        cdot / (2.0 * c.sqrt())
    }
}

/// Exhaustive search for the smallest integer scaling making all
/// directions and companions integer vectors; used by the tests to pin
/// down `N_STAR`.
pub fn minimal_integer_scaling(limit: i64) -> Option<i64> {
    'outer: for s in 1..=limit {
        let sb = BigRational::from(BigInt::from(s));
        for d in directions().iter() {
            for v in [&d.xi, &d.a, &d.b] {
                for comp in v.iter() {
                    if !(comp * &sb).is_integer() {
                        continue 'outer;
                    }
                }
            }
        }
        return Some(s);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn frames_are_exactly_orthonormal() {
        for d in directions().iter() {
            let one = BigRational::one();
            assert_eq!(dot(&d.xi, &d.xi), one);
            assert_eq!(dot(&d.a, &d.a), one);
            assert_eq!(dot(&d.b, &d.b), one);
            assert!(dot(&d.xi, &d.a).is_zero());
            assert!(dot(&d.xi, &d.b).is_zero());
            assert!(dot(&d.a, &d.b).is_zero());
            let b = cross(&d.xi, &d.a);
            assert_eq!(b, d.b);
        }
    }

    #[test]
    fn identity_coefficients_are_exactly_half() {
        let id: Sym6Exact = [
            BigRational::one(),
            BigRational::one(),
            BigRational::one(),
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        ];
        let c = decomposition().coefficients_exact(&id);
        for cq in c.iter() {
            assert_eq!(*cq, rat(1, 2));
        }
    }

    #[test]
    fn reconstruction_is_exact_for_rational_input() {
        // Small rational perturbations of the identity.
        let cases: [[(i64, i64); 6]; 3] = [
            [(21, 20), (19, 20), (1, 1), (1, 40), (-1, 50), (1, 100)],
            [(1, 1), (1, 1), (1, 1), (1, 30), (1, 30), (1, 30)],
            [(9, 10), (11, 10), (1, 1), (0, 1), (1, 25), (-1, 25)],
        ];
        for case in cases {
            let r: Sym6Exact = std::array::from_fn(|s| rat(case[s].0, case[s].1));
            let c = decomposition().coefficients_exact(&r);
            // Rebuild sum c_q xi (x) xi and compare slotwise.
            let mut rebuilt: Sym6Exact = std::array::from_fn(|_| BigRational::zero());
            for (q, d) in directions().iter().enumerate() {
                let dy = dyad_exact(&d.xi);
                for slot in 0..6 {
                    rebuilt[slot] += &c[q] * &dy[slot];
                }
            }
            assert_eq!(rebuilt, r);
        }
    }

    #[test]
    fn lattice_scaling_is_minimal() {
        assert_eq!(minimal_integer_scaling(100), Some(N_STAR));
        for d in directions().iter() {
            let lx = d.xi_lattice();
            let xf = d.xi_f64();
            for i in 0..3 {
                assert!((lx[i] as f64 - N_STAR as f64 * xf[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn diagonal_block_determinant_matches_pinned_value() {
        // Summing the +/- partners eliminates off-diagonal slots; the
        // remaining 3x3 integer matrix (entries scaled by 25) has a known
        // nonzero determinant.
        let m: [[i64; 3]; 3] = [[9, 0, 16], [16, 9, 0], [0, 16, 9]];
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert_eq!(det, 4825);
        // And the scaled dyad columns reproduce those integers.
        let dy = dyad_exact(&directions()[0].xi);
        assert_eq!(&dy[0] * rat(25, 1), rat(9, 1));
        assert_eq!(&dy[1] * rat(25, 1), rat(16, 1));
    }

    #[test]
    fn coefficients_positive_inside_ball() {
        let dec = decomposition();
        let rad = dec.positivity_radius();
        assert!(rad > 0.0 && rad < 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            // Random symmetric deviation scaled to sit strictly inside.
            let dev: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let norm = (dev[0] * dev[0]
                + dev[1] * dev[1]
                + dev[2] * dev[2]
                + 2.0 * (dev[3] * dev[3] + dev[4] * dev[4] + dev[5] * dev[5]))
                .sqrt();
            let scale = rng.gen_range(0.0..0.999) * rad / norm;
            let r: Sym6 = [
                1.0 + dev[0] * scale,
                1.0 + dev[1] * scale,
                1.0 + dev[2] * scale,
                dev[3] * scale,
                dev[4] * scale,
                dev[5] * scale,
            ];
            let c = dec.coefficients_checked(&r).unwrap();
            for cq in c {
                assert!(cq > 0.0, "coefficient not positive: {cq}");
            }
        }
    }

    #[test]
    fn checked_coefficients_reject_outside_ball() {
        let dec = decomposition();
        let rad = dec.positivity_radius();
        let r: Sym6 = [1.0 + 2.0 * rad, 1.0, 1.0, 0.0, 0.0, 0.0];
        assert!(dec.coefficients_checked(&r).is_err());
    }

    #[test]
    fn sqrt_coefficient_derivative_matches_finite_difference() {
        let dec = decomposition();
        let rad = dec.positivity_radius();
        let s: Sym6 = [0.3, -0.2, 0.1, 0.15, -0.05, 0.1];
        let snorm = Decomposition::frobenius_distance_from_id(&[
            1.0 + s[0],
            1.0 + s[1],
            1.0 + s[2],
            s[3],
            s[4],
            s[5],
        ]);
        let amp = 0.5 * rad / snorm;
        let at = |t: f64| -> Sym6 {
            [
                1.0 + t * amp * s[0],
                1.0 + t * amp * s[1],
                1.0 + t * amp * s[2],
                t * amp * s[3],
                t * amp * s[4],
                t * amp * s[5],
            ]
        };
        let rdot: Sym6 = std::array::from_fn(|i| amp * s[i]);
        let t0 = 0.6;
        let h = 1e-6;
        for q in 0..6 {
            let analytic = dec.sqrt_coefficient_derivative(q, &at(t0), &rdot);
            let fd = (dec.coefficient(q, &at(t0 + h)).sqrt()
                - dec.coefficient(q, &at(t0 - h)).sqrt())
                / (2.0 * h);
            assert!(
                (analytic - fd).abs() < 1e-7,
                "direction {q}: analytic {analytic} vs fd {fd}"
            );
        }
    }
}
