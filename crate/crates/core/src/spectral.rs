//! Spectral measures on the circle seen through their Fourier coefficients.
//!
//! A sequence `c(k) = <U^k f, f>` is the coefficient sequence of the spectral
//! measure of `f`. Fejer smoothing turns a window of it into a nonnegative
//! density, and convolving measures multiplies coefficients.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::float::Constant;
use rug::Float;

use crate::error::{Error, Result};
use crate::real::{self, Real, PRECISION};
use crate::tower::{Construction, CorrelationSequence, Correlator, StepFn, Q};

/// `c(k) = <U^k f, f>` for `|k| <= max_lag`. Uses `c(-k) = c(k)`.
pub fn autocorrelation(c: &Construction, f: &StepFn, max_lag: u64, tol: &Q) -> Result<CorrelationSequence> {
    let half = Correlator::new(c).sequence(f, f, 0..=max_lag as i64, tol)?;
    let mirror = |xs: &[Q]| -> Vec<Q> { xs.iter().skip(1).rev().chain(xs.iter()).cloned().collect() };
    Ok(CorrelationSequence::new(
        -(max_lag as i64),
        mirror(half.values()),
        mirror(half.bounds()),
        "autocorrelation",
    ))
}

/// Zero-mean combination of stage-`stage` level indicators with seeded
/// pseudo-random rational coefficients.
pub fn random_test_vector(c: &Construction, stage: usize, seed: u64) -> Result<StepFn> {
    let h = c.height(stage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..h)
        .map(|_| {
            let n: i64 = rng.gen_range(-32..=32);
            let d: i64 = rng.gen_range(1..=32);
            Q::new(n.into(), d.into())
        })
        .collect();
    StepFn::new(c, stage, coeffs, Q::zero(), Q::zero())?.zero_mean(c)
}

#[derive(Debug, Clone)]
pub struct PositiveDefiniteCheck {
    pub window: usize,
    pub min_eigenvalue: Real,
    /// The true minimum eigenvalue lies within this distance of the estimate.
    pub error_radius: Real,
}

impl PositiveDefiniteCheck {
    pub fn is_plausibly_positive(&self) -> bool {
        self.min_eigenvalue.clone() + &self.error_radius >= 0
    }
}

/// Smallest eigenvalue of the `(window + 1)`-square Toeplitz matrix of `c`
/// (symmetrized if the input is not).
pub fn check_positive_definite(c: &CorrelationSequence, window: usize) -> Result<PositiveDefiniteCheck> {
    let available = c.symmetric_extent().unwrap_or(0);
    if c.symmetric_extent().is_none() || window > available {
        return Err(Error::WindowTooLarge { window, available });
    }
    let n = window + 1;
    let entry = |d: i64| -> Real {
        let (a, _) = c.get(d).expect("lag inside extent");
        let (b, _) = c.get(-d).expect("lag inside extent");
        real::from_rational(&((a + b) / Q::from_integer(2.into())))
    };
    let matrix: Vec<Vec<Real>> = (0..n)
        .map(|i| (0..n).map(|j| entry(i as i64 - j as i64)).collect())
        .collect();
    let (values, _) = real::symmetric_eigen(&matrix);

    let input: Q = (-(window as i64)..=window as i64)
        .map(|k| c.get(k).unwrap().1.clone())
        .fold(Q::zero(), |a, b| a + b);
    let frob = matrix
        .iter()
        .flatten()
        .fold(real::zero(), |a, x| a + x.clone().square())
        .sqrt();
    let rounding = frob * Float::with_val(PRECISION, Float::i_exp(1, -(PRECISION as i32) + 8)) * n as u32;
    Ok(PositiveDefiniteCheck {
        window,
        min_eigenvalue: values[0].clone(),
        error_radius: real::from_rational(&input) + rounding,
    })
}

/// Density of a trigonometric polynomial on a uniform grid of the circle.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub order: usize,
    pub grid: usize,
    pub density: Vec<Real>,
    /// Worst-case effect of the input error bounds on any density value.
    pub eps_est: Real,
    pub source: String,
}

impl SpectralEstimate {
    pub fn grid_mean(&self) -> Real {
        let sum = self.density.iter().fold(real::zero(), |a, x| a + x);
        sum / self.grid as u32
    }

    pub fn min_density(&self) -> Real {
        self.density
            .iter()
            .cloned()
            .reduce(|a, b| if b < a { b } else { a })
            .unwrap_or_else(real::zero)
    }
}

fn cos_table(grid: usize) -> Vec<Real> {
    let two_pi = Float::with_val(PRECISION, Constant::Pi) * 2u32;
    (0..grid)
        .map(|j| (two_pi.clone() * j as u32 / grid as u32).cos())
        .collect()
}

/// `sum_{|k|<m} weight(|k|) c(k) e^{ik theta}` on `grid` points (real part).
fn weighted_density(
    c: &CorrelationSequence,
    m: usize,
    grid: usize,
    weight: impl Fn(usize) -> Q + Sync,
    source: String,
) -> Result<SpectralEstimate> {
    if m == 0 || grid == 0 {
        return Err(Error::BadParameter("Fejer order and grid size must be positive".into()));
    }
    let available = c.symmetric_extent().unwrap_or(0);
    if c.symmetric_extent().is_none() || m - 1 > available {
        return Err(Error::ResolutionExceedsData {
            order: m,
            needed: m - 1,
            available,
        });
    }
    // cos k theta_j depends only on k j mod grid
    let table = cos_table(grid);
    let mut coeffs: Vec<Real> = Vec::with_capacity(m);
    let mut eps = Q::zero();
    for k in 0..m {
        let w = weight(k);
        let (plus, e_plus) = c.get(k as i64).unwrap();
        if k == 0 {
            coeffs.push(real::from_rational(&(&w * plus)));
            eps += &w * e_plus;
        } else {
            let (minus, e_minus) = c.get(-(k as i64)).unwrap();
            coeffs.push(real::from_rational(&(&w * (plus + minus))));
            eps += &w * (e_plus + e_minus);
        }
    }
    let density = (0..grid)
        .into_par_iter()
        .map(|j| {
            let mut acc = coeffs[0].clone();
            for (k, a) in coeffs.iter().enumerate().skip(1) {
                acc += a.clone() * &table[(k * j) % grid];
            }
            acc
        })
        .collect();
    Ok(SpectralEstimate {
        order: m,
        grid,
        density,
        eps_est: real::from_rational(&eps),
        source,
    })
}

fn fejer_weight(m: usize) -> impl Fn(usize) -> Q + Sync {
    move |k| Q::one() - Q::new((k as i64).into(), (m as i64).into())
}

/// Fejer mean of order `m` of the measure with coefficients `c`.
pub fn fejer_density(c: &CorrelationSequence, m: usize, grid: usize) -> Result<SpectralEstimate> {
    weighted_density(c, m, grid, fejer_weight(m), format!("fejer(m={m}) of {}", c.description()))
}

/// Same coefficients weighted by the squared Fejer kernel coefficients.
/// This is what the circular self-convolution of `fejer_density(c)`
/// should reproduce for the squared sequence.
pub fn squared_fejer_density(c_sq: &CorrelationSequence, m: usize, grid: usize) -> Result<SpectralEstimate> {
    let w = fejer_weight(m);
    weighted_density(c_sq, m, grid, move |k| w(k).pow(2), format!("fejer^2(m={m}) of {}", c_sq.description()))
}

/// `(1/G) sum_l rho(theta_l) rho(theta_j - theta_l)`.
pub fn circular_self_convolution(e: &SpectralEstimate) -> SpectralEstimate {
    let g = e.grid;
    let density = (0..g)
        .into_par_iter()
        .map(|j| {
            let mut acc = real::zero();
            for l in 0..g {
                acc += e.density[l].clone() * &e.density[(j + g - l) % g];
            }
            acc / g as u32
        })
        .collect();
    let total: Real = e.density.iter().fold(real::zero(), |a, x| a + x.clone().abs()) / g as u32;
    SpectralEstimate {
        order: e.order,
        grid: g,
        density,
        eps_est: e.eps_est.clone() * total * 2u32 + e.eps_est.clone().square(),
        source: format!("self-convolution of {}", e.source),
    }
}

/// Coefficients of the `n`-fold convolution power.
pub fn convolution_power(c: &CorrelationSequence, n: u32) -> Result<CorrelationSequence> {
    if n == 0 {
        return Err(Error::BadPower(n));
    }
    let values: Vec<Q> = c.values().iter().map(|x| x.pow(n as i32)).collect();
    let bounds = c
        .values()
        .iter()
        .zip(c.bounds())
        .map(|(x, e)| {
            if e.is_zero() {
                return Q::zero();
            }
            // |x^n - y^n| <= n max(|x|, |y|)^(n-1) |x - y| with |y| <= |x| + e
            Q::from_integer(n.into()) * (x.abs() + e).pow(n as i32 - 1) * e
        })
        .collect();
    Ok(CorrelationSequence::new(
        c.first_lag(),
        values,
        bounds,
        format!("convolution power {n} of {}", c.description()),
    ))
}

/// Divides by `c(0)`, turning the measure into a probability measure.
pub fn renormalize(c: &CorrelationSequence) -> Result<CorrelationSequence> {
    let (c0, _) = c
        .get(0)
        .ok_or_else(|| Error::BadParameter("sequence has no lag 0".into()))?;
    if !c0.is_positive() {
        return Err(Error::BadParameter(format!("c(0) = {c0} is not positive")));
    }
    let c0 = c0.clone();
    // |x/y - x'/y'| is not bounded by the input bounds alone once c(0) itself
    // is inexact, so only exact lag-0 values are accepted.
    if !c.get(0).unwrap().1.is_zero() {
        return Err(Error::BadParameter("c(0) carries an error bound".into()));
    }
    Ok(CorrelationSequence::new(
        c.first_lag(),
        c.values().iter().map(|x| x / &c0).collect(),
        c.bounds().iter().map(|x| x / &c0).collect(),
        format!("normalized {}", c.description()),
    ))
}

/// `w1 c1 + w2 c2`, entry by entry.
pub fn mixture(c1: &CorrelationSequence, c2: &CorrelationSequence, w1: &Q, w2: &Q) -> Result<CorrelationSequence> {
    if c1.first_lag() != c2.first_lag() || c1.len() != c2.len() {
        return Err(Error::RangeMismatch(c1.len(), c2.len()));
    }
    let values = c1.values().iter().zip(c2.values()).map(|(a, b)| w1 * a + w2 * b).collect();
    let bounds = c1
        .bounds()
        .iter()
        .zip(c2.bounds())
        .map(|(a, b)| w1.abs() * a + w2.abs() * b)
        .collect();
    Ok(CorrelationSequence::new(
        c1.first_lag(),
        values,
        bounds,
        format!("mixture of {} and {}", c1.description(), c2.description()),
    ))
}

/// Hellinger affinity of the two densities (negative values clamped to 0).
pub fn affinity(e1: &SpectralEstimate, e2: &SpectralEstimate) -> Result<Real> {
    if e1.grid != e2.grid || e1.order != e2.order {
        return Err(Error::GridMismatch);
    }
    let pos = |x: &Real| if x.is_sign_negative() { real::zero() } else { x.clone() };
    let mut cross = real::zero();
    let mut m1 = real::zero();
    let mut m2 = real::zero();
    for (a, b) in e1.density.iter().zip(&e2.density) {
        let (a, b) = (pos(a), pos(b));
        cross += (a.clone() * &b).sqrt();
        m1 += a;
        m2 += b;
    }
    if m1.is_zero() || m2.is_zero() {
        return Ok(real::zero());
    }
    // the 1/G quadrature weights cancel
    let value = cross / (m1 * m2).sqrt();
    Ok(value.clamp(&real::zero(), &real::real(1.0)))
}

#[derive(Debug, Clone)]
pub struct OverlapPoint {
    pub resolution: usize,
    pub affinity: Real,
    pub eps_first: Real,
    pub eps_second: Real,
}

/// Affinity of the `n`-th and `m`-th convolution powers at each resolution.
/// A decreasing series is evidence of disjointness, never a proof.
pub fn overlap_trend(c: &CorrelationSequence, orders: (u32, u32), resolutions: &[usize]) -> Result<Vec<OverlapPoint>> {
    let first = convolution_power(c, orders.0)?;
    let second = convolution_power(c, orders.1)?;
    resolutions
        .iter()
        .map(|&r| {
            let e1 = fejer_density(&first, r, 4 * r)?;
            let e2 = fejer_density(&second, r, 4 * r)?;
            Ok(OverlapPoint {
                resolution: r,
                affinity: affinity(&e1, &e2)?,
                eps_first: e1.eps_est,
                eps_second: e2.eps_est,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::{build_construction, indicator, q, RankOneSpec};

    fn constant_seq(k: usize, v: Q) -> CorrelationSequence {
        CorrelationSequence::exact_symmetric(vec![v; 2 * k + 1], "test")
    }

    fn delta_seq(k: usize) -> CorrelationSequence {
        let vals = (0..2 * k + 1).map(|i| if i == k { Q::one() } else { Q::zero() }).collect();
        CorrelationSequence::exact_symmetric(vals, "delta")
    }

    fn close(a: &Real, b: f64, tol: f64) -> bool {
        (a.to_f64() - b).abs() <= tol
    }

    #[test]
    fn toeplitz_examples() {
        let r = check_positive_definite(&constant_seq(5, Q::one()), 4).unwrap();
        assert!(close(&r.min_eigenvalue, 0.0, 1e-25));
        let r = check_positive_definite(&delta_seq(5), 5).unwrap();
        assert!(close(&r.min_eigenvalue, 1.0, 1e-25));
        let bad = CorrelationSequence::exact_symmetric(vec![q(2, 1), Q::one(), q(2, 1)], "bad");
        let r = check_positive_definite(&bad, 1).unwrap();
        assert!(close(&r.min_eigenvalue, -1.0, 1e-25));
        assert!(!r.is_plausibly_positive());
        assert!(matches!(
            check_positive_definite(&delta_seq(3), 4),
            Err(Error::WindowTooLarge { window: 4, available: 3 })
        ));
    }

    #[test]
    fn fejer_examples() {
        let e = fejer_density(&delta_seq(10), 8, 32).unwrap();
        assert!(e.density.iter().all(|x| close(x, 1.0, 1e-25)));
        let e = fejer_density(&constant_seq(10, Q::one()), 8, 32).unwrap();
        assert!(close(&e.density[0], 8.0, 1e-25));
        assert!(close(&e.grid_mean(), 1.0, 1e-25));
        assert!(matches!(
            fejer_density(&delta_seq(3), 5, 20),
            Err(Error::ResolutionExceedsData { order: 5, .. })
        ));
    }

    #[test]
    fn point_masses_convolve() {
        // c(k) = (-1)^k is the point mass at pi; its square is the point mass at 0
        let k = 6;
        let vals = (0..2 * k + 1).map(|i| if (i + k) % 2 == 0 { Q::one() } else { -Q::one() }).collect();
        let c = CorrelationSequence::exact_symmetric(vals, "atom");
        assert_eq!(convolution_power(&c, 1).unwrap().values(), c.values());
        assert_eq!(convolution_power(&c, 2).unwrap().values(), constant_seq(k, Q::one()).values());
        assert_eq!(convolution_power(&c, 0).unwrap_err(), Error::BadPower(0));

        let at_pi = fejer_density(&c, 6, 24).unwrap();
        let at_zero = fejer_density(&convolution_power(&c, 2).unwrap(), 6, 24).unwrap();
        assert!(close(&at_pi.density[12], 6.0, 1e-25));
        assert!(close(&affinity(&at_pi, &at_pi).unwrap(), 1.0, 1e-6));
        let a_small = affinity(&at_pi, &at_zero).unwrap();
        let big = 40;
        let vals = (0..2 * big + 1).map(|i| if (i + big) % 2 == 0 { Q::one() } else { -Q::one() }).collect();
        let c = CorrelationSequence::exact_symmetric(vals, "atom");
        let a_big = affinity(
            &fejer_density(&c, 40, 160).unwrap(),
            &fejer_density(&convolution_power(&c, 2).unwrap(), 40, 160).unwrap(),
        )
        .unwrap();
        assert!(a_big < a_small);
    }

    #[test]
    fn mixture_rules() {
        let c = constant_seq(3, q(1, 2));
        let d = delta_seq(3);
        assert_eq!(mixture(&c, &d, &Q::one(), &Q::zero()).unwrap().values(), c.values());
        let sq = convolution_power(&c, 2).unwrap();
        let m = mixture(&c, &sq, &Q::one(), &Q::one()).unwrap();
        assert!(m.values().iter().all(|v| v == &q(3, 4)));
        assert_eq!(mixture(&c, &delta_seq(4), &Q::one(), &Q::one()).unwrap_err(), Error::RangeMismatch(7, 9));
    }

    #[test]
    fn staircase_density_is_positive_and_normalized() {
        let c = build_construction(&RankOneSpec::staircase(1, &[2, 3, 4, 5, 6, 7]).unwrap(), 6).unwrap();
        let f = indicator(&c, 2, &[1]).unwrap().zero_mean(&c).unwrap();
        let seq = autocorrelation(&c, &f, 12, &q(1, 100)).unwrap();
        assert_eq!(seq.get(0).unwrap().0, &f.norm_sq(&c).unwrap());
        let e = fejer_density(&seq, 12, 48).unwrap();
        assert!(e.min_density() >= -e.eps_est.clone());
        let c0 = real::from_rational(seq.get(0).unwrap().0);
        assert!(((e.grid_mean() - &c0) / &c0).abs().to_f64() < 1e-9);
    }

    #[test]
    fn overlap_of_equal_orders_is_one() {
        let c = build_construction(&RankOneSpec::staircase(1, &[2, 3, 4, 5, 6, 7]).unwrap(), 6).unwrap();
        let f = random_test_vector(&c, 2, 7).unwrap();
        assert!(f.integral(&c).unwrap().is_zero());
        let seq = autocorrelation(&c, &f, 16, &q(1, 100)).unwrap();
        for p in overlap_trend(&seq, (1, 1), &[4, 8, 16]).unwrap() {
            assert!(close(&p.affinity, 1.0, 1e-20));
        }
        assert!(matches!(
            overlap_trend(&seq, (2, 3), &[32]),
            Err(Error::ResolutionExceedsData { .. })
        ));
    }
}
