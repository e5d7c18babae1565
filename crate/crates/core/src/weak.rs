//! Candidate weak limits of `U^k` and finite-family distances to them.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::{self, Real};
use crate::tower::{Construction, CorrelationResult, Correlator, StepFn, Q};

/// `sum_j c_j U^{m_j} + theta * Theta`, where `Theta` projects onto constants.
/// `tail_bound` accounts for terms dropped by truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorExpr {
    terms: Vec<(i64, Q)>,
    theta: Q,
    tail_bound: Q,
    label: String,
}

impl OperatorExpr {
    pub fn new(terms: Vec<(i64, Q)>, theta: Q, tail_bound: Q, label: impl Into<String>) -> Result<Self> {
        if tail_bound.is_negative() {
            return Err(Error::BadParameter(format!("negative tail bound {tail_bound}")));
        }
        Ok(OperatorExpr {
            terms,
            theta,
            tail_bound,
            label: label.into(),
        })
    }

    pub fn power(k: i64) -> Self {
        OperatorExpr {
            terms: vec![(k, Q::one())],
            theta: Q::zero(),
            tail_bound: Q::zero(),
            label: format!("U^{k}"),
        }
    }

    pub fn identity() -> Self {
        let mut e = Self::power(0);
        e.label = "I".into();
        e
    }

    pub fn theta() -> Self {
        OperatorExpr {
            terms: Vec::new(),
            theta: Q::one(),
            tail_bound: Q::zero(),
            label: "Theta".into(),
        }
    }

    /// `(I + Theta) / 2`, the limit shape of a half-mixing sequence.
    pub fn half_mixing() -> Self {
        let half = Q::new(1.into(), 2.into());
        OperatorExpr {
            terms: vec![(0, half.clone())],
            theta: half,
            tail_bound: Q::zero(),
            label: "(I+Theta)/2".into(),
        }
    }

    /// `a I + (1 - a) U`.
    pub fn affine(a: &Q) -> Self {
        OperatorExpr {
            terms: vec![(0, a.clone()), (1, Q::one() - a)],
            theta: Q::zero(),
            tail_bound: Q::zero(),
            label: format!("{a} I + {} U", Q::one() - a),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn terms(&self) -> &[(i64, Q)] {
        &self.terms
    }

    pub fn theta_coeff(&self) -> &Q {
        &self.theta
    }

    pub fn tail_bound(&self) -> &Q {
        &self.tail_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn coeff_mass(&self) -> Q {
        self.terms.iter().fold(Q::zero(), |acc, (_, c)| acc + c.abs())
    }
}

/// `P_q = (I + U + ... + U^{q-2} + Theta) / q`.
pub fn cesaro_expr(q: i64) -> Result<OperatorExpr> {
    if q < 2 {
        return Err(Error::DegenerateOrder(q));
    }
    let c = Q::new(1.into(), q.into());
    Ok(OperatorExpr {
        terms: (0..q - 1).map(|k| (k, c.clone())).collect(),
        theta: c,
        tail_bound: Q::zero(),
        label: format!("P_{q}"),
    })
}

/// First `k` terms of `(1 - a)(I - a U)^{-1} = (1 - a) sum a^j U^j`.
pub fn geometric_expr(a: &Q, k: usize) -> Result<OperatorExpr> {
    if !a.is_positive() || a >= &Q::one() {
        return Err(Error::BadParameter(format!("a = {a} not in (0, 1)")));
    }
    if k < 1 {
        return Err(Error::BadParameter("truncation length must be at least 1".into()));
    }
    let mut terms = Vec::with_capacity(k);
    let mut power = Q::one();
    for j in 0..k {
        terms.push((j as i64, (Q::one() - a) * &power));
        power *= a;
    }
    Ok(OperatorExpr {
        terms,
        theta: Q::zero(),
        tail_bound: power,
        label: format!("P[a={a},K={k}]"),
    })
}

/// `<e f, g>` with an aggregated rigorous error bound.
pub fn expr_matrix_element(c: &Construction, e: &OperatorExpr, f: &StepFn, g: &StepFn, tol: &Q) -> Result<CorrelationResult> {
    expr_element(&Correlator::new(c), e, f, g, tol)
}

fn expr_element(cor: &Correlator, e: &OperatorExpr, f: &StepFn, g: &StepFn, tol: &Q) -> Result<CorrelationResult> {
    let c = cor.construction();
    let mass = e.coeff_mass();
    let term_tol = if mass.is_zero() { tol.clone() } else { tol / &mass };
    let mut value = Q::zero();
    let mut error = Q::zero();
    let mut stage = f.stage().max(g.stage());
    for (k, coeff) in &e.terms {
        if coeff.is_zero() {
            continue;
        }
        let r = cor.correlation(f, g, *k, &term_tol)?;
        value += coeff * &r.value;
        error += coeff.abs() * &r.error_bound;
        stage = stage.max(r.resolved_stage);
    }
    if !e.theta.is_zero() {
        value += &e.theta * f.integral(c)? * g.integral(c)?;
    }
    error += &e.tail_bound * f.sup_abs() * g.sup_abs();
    Ok(CorrelationResult {
        value,
        error_bound: error,
        resolved_stage: stage,
    })
}

/// Finite set of `(f, g)` pairs standing in for the weak topology.
#[derive(Debug, Clone)]
pub struct TestFamily {
    stage: usize,
    pairs: Vec<(StepFn, StepFn)>,
    normalized: bool,
}

impl TestFamily {
    pub fn new(c: &Construction, stage: usize, pairs: Vec<(StepFn, StepFn)>, normalized: bool) -> Result<Self> {
        for (f, g) in &pairs {
            f.integral(c)?;
            g.integral(c)?;
        }
        Ok(TestFamily {
            stage,
            pairs,
            normalized,
        })
    }

    /// All ordered pairs of zero-meaned level indicators of stage `m`;
    /// distances are reported for the normalized vectors.
    pub fn level_indicators(c: &Construction, m: usize) -> Result<Self> {
        let h = c.height(m)?;
        let fns = (0..h)
            .map(|i| crate::tower::indicator(c, m, &[i])?.zero_mean(c))
            .collect::<Result<Vec<_>>>()?;
        let pairs = fns
            .iter()
            .flat_map(|f| fns.iter().map(move |g| (f.clone(), g.clone())))
            .collect();
        Self::new(c, m, pairs, true)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn pairs(&self) -> &[(StepFn, StepFn)] {
        &self.pairs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Per-pair scale `||f|| ||g||` (1 when unnormalized).
    fn scales(&self, c: &Construction) -> Result<Vec<Real>> {
        self.pairs
            .iter()
            .map(|(f, g)| {
                if !self.normalized {
                    return Ok(real::real(1.0));
                }
                Ok(real::from_rational(&(f.norm_sq(c)? * g.norm_sq(c)?)).sqrt())
            })
            .collect()
    }
}

/// Rational lower bound for a positive real, used to turn a tolerance on
/// normalized values into one on raw correlations.
fn rational_below(x: &Real) -> Q {
    let v = x.to_f64() * (1.0 - 1e-12);
    BigRational::from_float(v.max(0.0)).unwrap_or_else(Q::zero)
}

#[derive(Debug, Clone)]
pub struct WeakDistance {
    pub power: i64,
    pub distance: Real,
    pub error_bound: Real,
    /// Index of the pair attaining the maximum.
    pub worst_pair: usize,
}

/// `max |<U^k f, g> - <e f, g>|` over the family (normalized if the family is).
pub fn weak_distance(c: &Construction, k: i64, e: &OperatorExpr, fam: &TestFamily, tol: &Q) -> Result<WeakDistance> {
    weak_distance_with(&Correlator::new(c), k, e, fam, tol)
}

pub fn weak_distance_with(cor: &Correlator, k: i64, e: &OperatorExpr, fam: &TestFamily, tol: &Q) -> Result<WeakDistance> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let c = cor.construction();
    let scales = fam.scales(c)?;
    let half = Q::new(1.into(), 2.into());
    let cells: Vec<(Real, Real)> = fam
        .pairs
        .par_iter()
        .zip(&scales)
        .map(|((f, g), scale)| {
            let pair_tol = rational_below(scale) * tol * &half;
            let lhs = cor.correlation(f, g, k, &pair_tol)?;
            let rhs = expr_element(cor, e, f, g, &pair_tol)?;
            let d = real::from_rational(&(lhs.value - rhs.value).abs()) / scale;
            let err = real::from_rational(&(lhs.error_bound + rhs.error_bound)) / scale;
            Ok((d, err))
        })
        .collect::<Result<_>>()?;

    let mut worst = 0;
    for (i, (d, _)) in cells.iter().enumerate() {
        if d > &cells[worst].0 {
            worst = i;
        }
    }
    let error_bound = cells
        .iter()
        .map(|(_, e)| e.clone())
        .fold(real::zero(), |a, b| if b > a { b } else { a });
    Ok(WeakDistance {
        power: k,
        distance: cells[worst].0.clone(),
        error_bound,
        worst_pair: worst,
    })
}

#[derive(Debug, Clone)]
pub struct ScanCell {
    pub power: i64,
    pub candidate: usize,
    pub label: String,
    pub distance: Real,
    pub error_bound: Real,
}

/// Every (power, candidate) distance, sorted by distance. Ties keep
/// candidate order, then power order.
pub fn scan_weak_limits(
    c: &Construction,
    powers: &[i64],
    candidates: &[OperatorExpr],
    fam: &TestFamily,
    tol: &Q,
) -> Result<Vec<ScanCell>> {
    if powers.is_empty() || candidates.is_empty() {
        return Err(Error::EmptyScan);
    }
    let cor = Correlator::new(c);
    let grid: Vec<(usize, i64)> = (0..candidates.len())
        .flat_map(|ci| powers.iter().map(move |&p| (ci, p)))
        .collect();
    let mut cells: Vec<ScanCell> = grid
        .par_iter()
        .map(|&(ci, p)| {
            let d = weak_distance_with(&cor, p, &candidates[ci], fam, tol)?;
            Ok(ScanCell {
                power: p,
                candidate: ci,
                label: candidates[ci].label.clone(),
                distance: d.distance,
                error_bound: d.error_bound,
            })
        })
        .collect::<Result<_>>()?;
    cells.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap_or(Ordering::Equal));
    Ok(cells)
}

/// Distances at `+h` and `-h`, and which sign comes out closer.
#[derive(Debug, Clone)]
pub struct SignScan {
    pub plus: WeakDistance,
    pub minus: WeakDistance,
}

impl SignScan {
    /// `+1` or `-1`, whichever power is closer to the candidate.
    pub fn closer_sign(&self) -> i64 {
        if self.minus.distance <= self.plus.distance {
            -1
        } else {
            1
        }
    }

    pub fn closer(&self) -> &WeakDistance {
        if self.closer_sign() < 0 {
            &self.minus
        } else {
            &self.plus
        }
    }
}

pub fn scan_both_signs(cor: &Correlator, h: u64, e: &OperatorExpr, fam: &TestFamily, tol: &Q) -> Result<SignScan> {
    let h = h as i64;
    Ok(SignScan {
        plus: weak_distance_with(cor, h, e, fam, tol)?,
        minus: weak_distance_with(cor, -h, e, fam, tol)?,
    })
}

#[derive(Debug, Clone)]
pub struct TwoTermFit {
    pub a: Real,
    /// Root-mean-square misfit.
    pub residual: Real,
    /// Largest correlation error bound among the inputs.
    pub input_error: Real,
}

/// Least-squares `a` in `<U^k f, g> ~ a <f, g> + (1 - a) <U f, g>`.
pub fn fit_two_term(c: &Construction, k: i64, fam: &TestFamily, tol: &Q) -> Result<TwoTermFit> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let cor = Correlator::new(c);
    let scales = fam.scales(c)?;
    let rows: Vec<(Q, Q, Q, Q)> = fam
        .pairs
        .par_iter()
        .map(|(f, g)| {
            let y = cor.correlation(f, g, k, tol)?;
            let x1 = cor.correlation(f, g, 0, tol)?;
            let x2 = cor.correlation(f, g, 1, tol)?;
            let err = y.error_bound + x1.error_bound + x2.error_bound;
            Ok((y.value, x1.value, x2.value, err))
        })
        .collect::<Result<_>>()?;
    if rows.iter().all(|(_, x1, x2, _)| x1 == x2) {
        return Err(Error::DegenerateFit);
    }
    let mut num = real::zero();
    let mut den = real::zero();
    let mut input_error = real::zero();
    let scaled: Vec<(Real, Real)> = rows
        .iter()
        .zip(&scales)
        .map(|((y, x1, x2, err), s)| {
            let u = real::from_rational(&(x1 - x2)) / s;
            let v = real::from_rational(&(y - x2)) / s;
            let e = real::from_rational(err) / s;
            if e > input_error {
                input_error = e;
            }
            (u, v)
        })
        .collect();
    for (u, v) in &scaled {
        num += u.clone() * v;
        den += u.clone().square();
    }
    let a = num / den;
    let mut sq = real::zero();
    for (u, v) in &scaled {
        sq += (v.clone() - a.clone() * u).square();
    }
    let residual = (sq / scaled.len() as u32).sqrt();
    Ok(TwoTermFit {
        a,
        residual,
        input_error,
    })
}

/// `(1/n) sum_{k<n} <U^k f, g>` with its error bound.
pub fn cesaro_average(c: &Construction, f: &StepFn, g: &StepFn, n: u64, tol: &Q) -> Result<(Q, Q)> {
    cesaro_average_with(&Correlator::new(c), f, g, n, tol)
}

pub fn cesaro_average_with(cor: &Correlator, f: &StepFn, g: &StepFn, n: u64, tol: &Q) -> Result<(Q, Q)> {
    if n == 0 {
        return Err(Error::BadParameter("empty average".into()));
    }
    let seq = cor.sequence(f, g, 0..=(n as i64 - 1), tol)?;
    let count = Q::from_integer(n.into());
    let sum = seq.values().iter().fold(Q::zero(), |a, v| a + v);
    let err = seq.bounds().iter().fold(Q::zero(), |a, v| a + v);
    Ok((sum / &count, err / count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::{build_construction, indicator, q, RankOneSpec};

    fn example() -> Construction {
        build_construction(&RankOneSpec::staircase(1, &[2, 3, 4]).unwrap(), 3).unwrap()
    }

    #[test]
    fn cesaro_constructor() {
        let p2 = cesaro_expr(2).unwrap();
        assert_eq!(p2.terms(), &[(0, q(1, 2))]);
        assert_eq!(p2.theta_coeff(), &q(1, 2));
        let p3 = cesaro_expr(3).unwrap();
        assert_eq!(p3.terms(), &[(0, q(1, 3)), (1, q(1, 3))]);
        assert_eq!(p3.theta_coeff(), &q(1, 3));
        assert!(p3.tail_bound().is_zero());
        assert_eq!(cesaro_expr(1).unwrap_err(), Error::DegenerateOrder(1));
    }

    #[test]
    fn geometric_constructor() {
        let e = geometric_expr(&q(1, 2), 3).unwrap();
        let coeffs: Vec<Q> = e.terms().iter().map(|t| t.1.clone()).collect();
        assert_eq!(coeffs, vec![q(1, 2), q(1, 4), q(1, 8)]);
        assert_eq!(e.tail_bound(), &q(1, 8));
        let e = geometric_expr(&q(1, 10), 1).unwrap();
        assert_eq!(e.terms(), &[(0, q(9, 10))]);
        assert_eq!(e.tail_bound(), &q(1, 10));
        assert!(matches!(geometric_expr(&q(1, 1), 3), Err(Error::BadParameter(_))));
        assert!(matches!(geometric_expr(&q(1, 3), 0), Err(Error::BadParameter(_))));
        for k in 1..8 {
            let e = geometric_expr(&q(2, 7), k).unwrap();
            let total = e.terms().iter().fold(Q::zero(), |a, t| a + &t.1);
            assert_eq!(total, Q::one() - e.tail_bound());
        }
    }

    #[test]
    fn matrix_elements() {
        let c = example();
        let f = indicator(&c, 2, &[0]).unwrap().zero_mean(&c).unwrap();
        let tol = Q::zero();
        let half = expr_matrix_element(&c, &OperatorExpr::half_mixing(), &f, &f, &tol).unwrap();
        assert_eq!(half.value, f.norm_sq(&c).unwrap() / Q::from_integer(2.into()));
        let g = indicator(&c, 3, &[1, 2]).unwrap();
        let th = expr_matrix_element(&c, &OperatorExpr::theta(), &g, &g, &tol).unwrap();
        assert_eq!(th.value, g.integral(&c).unwrap() * g.integral(&c).unwrap());
        assert!(th.error_bound.is_zero());
        let p3 = expr_matrix_element(&c, &cesaro_expr(3).unwrap(), &f, &f, &tol).unwrap();
        let c0 = crate::tower::correlation(&c, &f, &f, 0, &tol).unwrap().value;
        let c1 = crate::tower::correlation(&c, &f, &f, 1, &tol).unwrap().value;
        assert_eq!(p3.value, (c0 + c1) / Q::from_integer(3.into()));
    }

    #[test]
    fn distance_to_own_power_is_zero() {
        let c = example();
        let fam = TestFamily::level_indicators(&c, 2).unwrap();
        for k in [-3, 0, 2, 5] {
            let d = weak_distance(&c, k, &OperatorExpr::power(k), &fam, &q(1, 2)).unwrap();
            assert!(d.distance.is_zero());
        }
        let empty = TestFamily::new(&c, 2, Vec::new(), true).unwrap();
        assert_eq!(
            weak_distance(&c, 0, &OperatorExpr::identity(), &empty, &q(1, 2)).unwrap_err(),
            Error::EmptyFamily
        );
    }

    #[test]
    fn theta_distance_at_lag_zero_is_max_inner_product() {
        let c = example();
        let fam = TestFamily::level_indicators(&c, 2).unwrap();
        let d = weak_distance(&c, 0, &OperatorExpr::theta(), &fam, &Q::zero()).unwrap();
        // diagonal pairs are unit vectors after normalization
        assert!((d.distance.to_f64() - 1.0).abs() < 1e-25);
    }

    #[test]
    fn trivial_fits() {
        let c = example();
        let fam = TestFamily::level_indicators(&c, 2).unwrap();
        let fit0 = fit_two_term(&c, 0, &fam, &Q::zero()).unwrap();
        assert!((fit0.a.to_f64() - 1.0).abs() < 1e-25);
        assert!(fit0.residual.to_f64().abs() < 1e-25);
        let fit1 = fit_two_term(&c, 1, &fam, &Q::zero()).unwrap();
        assert!(fit1.a.to_f64().abs() < 1e-25);
        assert!(fit1.residual.to_f64().abs() < 1e-25);
    }

    #[test]
    fn scan_orders_by_distance() {
        let c = example();
        let fam = TestFamily::level_indicators(&c, 2).unwrap();
        let cells = scan_weak_limits(&c, &[0], &[OperatorExpr::theta(), OperatorExpr::identity()], &fam, &Q::zero()).unwrap();
        assert_eq!(cells[0].label, "I");
        assert!(cells[0].distance.is_zero());
        assert_eq!(scan_weak_limits(&c, &[0], &[], &fam, &Q::zero()).unwrap_err(), Error::EmptyScan);
    }
}
