//! Multi-precision reals and the few dense kernels that need them.
//!
//! Exact rationals are rounded exactly once, at the boundary, to
//! `PRECISION` mantissa bits.

use num_bigint::BigInt;
use num_rational::BigRational;
use rug::{Float, Integer, Rational};

pub type Real = Float;

/// Mantissa bits of every `Real` produced by this crate.
pub const PRECISION: u32 = 100;

pub fn zero() -> Real {
    Float::new(PRECISION)
}

pub fn real(x: f64) -> Real {
    Float::with_val(PRECISION, x)
}

fn to_rug_int(n: &BigInt) -> Integer {
    Integer::from_str_radix(&n.to_str_radix(16), 16).expect("hex digits")
}

/// Correctly rounded conversion.
pub fn from_rational(q: &BigRational) -> Real {
    let r = Rational::from((to_rug_int(q.numer()), to_rug_int(q.denom())));
    Float::with_val(PRECISION, r)
}

pub fn from_int(n: &BigInt) -> Real {
    Float::with_val(PRECISION, to_rug_int(n))
}

pub fn to_f64(x: &Real) -> f64 {
    x.to_f64()
}

/// Scientific notation with `digits` significant digits. Depends only on
/// the value, so it is safe to put in reproducible output.
pub fn to_decimal(x: &Real, digits: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    x.to_string_radix(10, Some(digits))
}

pub fn rational_to_decimal(q: &BigRational, digits: usize) -> String {
    to_decimal(&from_rational(q), digits)
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching unit eigenvectors
/// (`vectors[k]` belongs to `values[k]`).
pub fn symmetric_eigen(matrix: &[Vec<Real>]) -> (Vec<Real>, Vec<Vec<Real>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<Real>> = matrix.to_vec();
    let mut v: Vec<Vec<Real>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { real(1.0) } else { zero() }).collect())
        .collect();

    let frob = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(zero(), |acc, x| acc + x.clone().square());
    let eps = Float::with_val(PRECISION, Float::i_exp(1, -(2 * PRECISION as i32)));
    let threshold = frob * eps;

    for _sweep in 0..100 {
        let mut off = zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q].clone().square();
            }
        }
        if off <= threshold || off.is_zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].is_zero() {
                    continue;
                }
                let theta = (a[q][q].clone() - &a[p][p]) / (a[p][q].clone() * 2u32);
                let denom = theta.clone().abs() + (theta.clone().square() + 1u32).sqrt();
                let mut t = denom.recip();
                if theta.is_sign_negative() {
                    t = -t;
                }
                let c = (t.clone().square() + 1u32).sqrt().recip();
                let s = t * &c;
                for k in 0..n {
                    let akp = a[k][p].clone();
                    let akq = a[k][q].clone();
                    a[k][p] = c.clone() * &akp - s.clone() * &akq;
                    a[k][q] = s.clone() * &akp + c.clone() * &akq;
                }
                for k in 0..n {
                    let apk = a[p][k].clone();
                    let aqk = a[q][k].clone();
                    a[p][k] = c.clone() * &apk - s.clone() * &aqk;
                    a[q][k] = s.clone() * &apk + c.clone() * &aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p].clone();
                    let vkq = row[q].clone();
                    row[p] = c.clone() * &vkp - s.clone() * &vkq;
                    row[q] = s.clone() * &vkp + c.clone() * &vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[i][i].clone()).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i].clone()).collect())
        .collect();
    (values, vectors)
}
