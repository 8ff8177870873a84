//! Slow reference implementations used to cross-check the fast paths.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::matrices::{CMatrix, MatrixTuple};
use crate::words::StarMonomial;
use crate::zones::{CenterSet, ConstraintMode, ProductPart, ZoneDescriptor};

/// Adaptive Simpson quadrature of `f` on [a, b]. The first few levels are
/// always refined so symmetric integrands cannot stop on a lucky estimate.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const FORCED: u32 = 4;
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || (depth < 50 - FORCED && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// (2/π) ∫_{-1}^{1} t^p √(1 - t²) dt, with t = sin θ to remove the endpoint
/// singularity of the derivative.
pub fn semicircle_moment_quadrature(p: usize) -> f64 {
    let f = move |theta: f64| {
        let c = theta.cos();
        theta.sin().powi(p as i32) * c * c
    };
    2.0 / PI * adaptive_simpson(&f, -PI / 2.0, PI / 2.0, 1e-14)
}

/// Number of pairings of positions whose pairs connect equal labels and do
/// not cross, by enumerating every pairing.
pub fn brute_force_noncrossing_pairings(labels: &[usize]) -> u64 {
    fn go(free: &mut Vec<usize>, pairs: &mut Vec<(usize, usize)>, labels: &[usize]) -> u64 {
        let Some(&first) = free.first() else {
            let crossing = pairs.iter().any(|&(a, b)| {
                pairs
                    .iter()
                    .any(|&(c, d)| a < c && c < b && b < d)
            });
            return u64::from(!crossing);
        };
        let mut total = 0;
        for idx in 1..free.len() {
            let partner = free[idx];
            if labels[first] != labels[partner] {
                continue;
            }
            let rest: Vec<usize> = free
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != 0 && i != idx)
                .map(|(_, &v)| v)
                .collect();
            let saved = std::mem::replace(free, rest);
            pairs.push((first, partner));
            total += go(free, pairs, labels);
            pairs.pop();
            *free = saved;
        }
        total
    }
    if labels.len() % 2 == 1 {
        return 0;
    }
    go(&mut (0..labels.len()).collect(), &mut Vec::new(), labels)
}

/// Entry-by-entry product.
pub fn naive_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (r, inner, c) = (a.nrows(), a.ncols(), b.ncols());
    assert_eq!(inner, b.nrows(), "inner dimensions differ");
    CMatrix::from_fn(r, c, |i, j| (0..inner).map(|l| a[(i, l)] * b[(l, j)]).sum())
}

/// w(ξ) by left-to-right naive products.
pub fn naive_word(xi: &MatrixTuple, w: &StarMonomial) -> CMatrix {
    let k = xi.k();
    let mut acc = CMatrix::identity(k, k);
    for letter in w.letters() {
        let a = xi.coord(letter.index - 1);
        let m = if letter.starred { a.adjoint() } else { a.clone() };
        acc = naive_product(&acc, &m);
    }
    acc
}

/// Sum of diagonal entries over k.
pub fn entry_sum_trace(a: &CMatrix) -> Complex64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum::<Complex64>() / a.nrows() as f64
}

/// Largest singular value by power iteration on A*A.
pub fn power_iteration_norm(a: &CMatrix, iters: usize) -> f64 {
    let k = a.ncols();
    let g = a.adjoint() * a;
    let mut v = nalgebra::DVector::<Complex64>::from_fn(k, |i, _| {
        Complex64::new(1.0 + 0.37 * i as f64, 0.11 * (i as f64).sin())
    });
    let mut lambda = 0.0;
    for _ in 0..iters {
        let next = &g * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / v.norm();
        v = next.unscale(norm);
    }
    lambda.sqrt()
}

/// Whether a 2×2 Hermitian matrix has operator norm ≤ 1, from its
/// closed-form eigenvalues.
pub fn hermitian2_in_unit_ball(a: f64, d: f64, off: Complex64) -> bool {
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt();
    mean.abs() + rad <= 1.0
}

/// Fraction of uniform box points in the 2×2 Hermitian unit ball, times the
/// box volume 2⁴, with its standard error.
pub fn rejection_volume_k2<R: Rng + ?Sized>(proposals: usize, rng: &mut R) -> (f64, f64) {
    let mut hits = 0usize;
    for _ in 0..proposals {
        let a = rng.random_range(-1.0..1.0);
        let d = rng.random_range(-1.0..1.0);
        let off = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if hermitian2_in_unit_ball(a, d, off) {
            hits += 1;
        }
    }
    let p = hits as f64 / proposals as f64;
    let se = (p * (1.0 - p) / proposals as f64).sqrt();
    (16.0 * p, 16.0 * se)
}

/// A random certified zone descriptor over n variables with nesting depth at
/// most `depth`.
pub fn random_descriptor<R: Rng + ?Sized>(rng: &mut R, n: usize, depth: usize) -> ZoneDescriptor {
    let leaf = |rng: &mut R| ZoneDescriptor::Ball {
        radius: rng.random_range(0.5..1.5),
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.random_range(0..6) {
        0 => leaf(rng),
        1 => ZoneDescriptor::Microstate {
            spec: crate::moments::MomentSpec::free_semicircle_family(n).expect("n ≥ 1"),
        },
        2 => {
            let degree = rng.random_range(1..=3);
            let word = StarMonomial::new(
                (0..degree)
                    .map(|_| crate::words::StarLetter::new(rng.random_range(1..=n), rng.random_bool(0.3)))
                    .collect(),
            );
            let center = Complex64::new(rng.random_range(-0.5..0.5), 0.0);
            let mode = if rng.random_bool(0.5) {
                ConstraintMode::Neighborhood
            } else {
                ConstraintMode::Exact
            };
            ZoneDescriptor::Intersect {
                children: vec![
                    leaf(rng),
                    ZoneDescriptor::MomentConstraint {
                        word,
                        set: CenterSet::disc(center, rng.random_range(0.0..0.3)),
                        mode,
                    },
                ],
            }
        }
        3 => ZoneDescriptor::Intersect {
            children: vec![
                random_descriptor(rng, n, depth - 1),
                random_descriptor(rng, n, depth - 1),
            ],
        },
        4 => ZoneDescriptor::Union {
            children: vec![
                random_descriptor(rng, n, depth - 1),
                random_descriptor(rng, n, depth - 1),
            ],
        },
        _ => {
            if n >= 2 {
                let split = rng.random_range(1..n);
                ZoneDescriptor::Product {
                    parts: vec![
                        ProductPart {
                            n: split,
                            zone: random_descriptor(rng, split, depth - 1),
                        },
                        ProductPart {
                            n: n - split,
                            zone: random_descriptor(rng, n - split, depth - 1),
                        },
                    ],
                }
            } else {
                ZoneDescriptor::ComplementWithinBall {
                    inner: Box::new(random_descriptor(rng, n, depth - 1)),
                    radius: rng.random_range(0.5..1.5),
                    m: rng.random_range(1..=3),
                    gamma: rng.random_range(0.05..0.5),
                }
            }
        }
    }
}

/// A random self-adjoint tuple that lands near semicircular moments often
/// enough to exercise membership on both sides.
pub fn random_probe_tuple<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> MatrixTuple {
    let variance = rng.random_range(0.1..0.5);
    let mats = (0..n)
        .map(|_| crate::matrices::sample_gue(k, variance, rng).expect("k ≥ 1"))
        .collect();
    MatrixTuple::new(mats, true).expect("hermitian coordinates")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials() {
        let v = adaptive_simpson(&|x| x * x * x - x, 0.0, 2.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pairing_counts_by_hand() {
        assert_eq!(brute_force_noncrossing_pairings(&[1, 1, 1, 1]), 2);
        assert_eq!(brute_force_noncrossing_pairings(&[1, 2, 1, 2]), 0);
        assert_eq!(brute_force_noncrossing_pairings(&[1, 1, 2, 2]), 1);
        assert_eq!(brute_force_noncrossing_pairings(&[1; 6]), 5);
    }

    #[test]
    fn two_by_two_ball_test() {
        assert!(hermitian2_in_unit_ball(1.0, -1.0, Complex64::new(0.0, 0.0)));
        assert!(!hermitian2_in_unit_ball(0.5, 0.5, Complex64::new(0.6, 0.0)));
    }
}
