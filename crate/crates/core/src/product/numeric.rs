use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use rug::Float;

use super::tensor::{apply_r, apply_r_inverse, BaseRegistry, FormalTensor, Sym};
use crate::error::Result;
use crate::real::{self, Real, PRECISION};
use crate::tower::{Construction, CorrelationResult, Correlator, Q};

/// Numeric inner products of formal tensors on a concrete construction.
///
/// `<a (x) b, a' (x) b'> = <a, a'> <b, b'>`, and each factor is a 1-D
/// correlation `<U^{i-j} x, y>` evaluated at tolerance `tol`. Correlations
/// are memoized by `(x, y, lag)`.
pub struct TensorPairing<'a> {
    cor: Correlator<'a>,
    reg: &'a BaseRegistry,
    tol: Q,
    cache: Mutex<HashMap<(usize, usize, i64), (Q, Q, usize)>>,
}

impl<'a> TensorPairing<'a> {
    pub fn new(c: &'a Construction, reg: &'a BaseRegistry, tol: Q) -> Self {
        TensorPairing {
            cor: Correlator::new(c),
            reg,
            tol,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// `(value, error bound, resolved stage)` of `<a, b>`.
    fn factor(&self, a: Sym, b: Sym) -> Result<(Q, Q, usize)> {
        match (a, b) {
            (Sym::One, Sym::One) => Ok((Q::one(), Q::zero(), 1)),
            (Sym::One, Sym::Base { id, .. }) | (Sym::Base { id, .. }, Sym::One) => {
                self.reg.function(id)?;
                Ok((self.reg.integral(id)?.clone(), Q::zero(), 1))
            }
            (Sym::Base { id: x, power: i }, Sym::Base { id: y, power: j }) => {
                let key = (x, y, i - j);
                if let Some(hit) = self.cache.lock().unwrap().get(&key) {
                    return Ok(hit.clone());
                }
                let r = self
                    .cor
                    .correlation(self.reg.function(x)?, self.reg.function(y)?, i - j, &self.tol)?;
                let entry = (r.value, r.error_bound, r.resolved_stage);
                self.cache.lock().unwrap().insert(key, entry.clone());
                Ok(entry)
            }
        }
    }

    pub fn inner(&self, t1: &FormalTensor, t2: &FormalTensor) -> Result<CorrelationResult> {
        let mut value = Q::zero();
        let mut error = Q::zero();
        let mut stage = 1;
        for (a, b, c) in t1.terms() {
            for (a2, b2, c2) in t2.terms() {
                let (x, ex, sx) = self.factor(*a, *a2)?;
                let (y, ey, sy) = self.factor(*b, *b2)?;
                let w = c * c2;
                error += w.abs() * (x.abs() * &ey + y.abs() * &ex + &ex * &ey);
                value += w * x * y;
                stage = stage.max(sx).max(sy);
            }
        }
        Ok(CorrelationResult {
            value,
            error_bound: error,
            resolved_stage: stage,
        })
    }

    /// Distinct 1-D correlations evaluated so far.
    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// `<t1, t2>` with every 1-D factor resolved to `tol`.
pub fn tensor_inner(c: &Construction, reg: &BaseRegistry, t1: &FormalTensor, t2: &FormalTensor, tol: &Q) -> Result<CorrelationResult> {
    TensorPairing::new(c, reg, tol.clone()).inner(t1, t2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CyclicOp {
    UxU,
    R,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// The eigenvalue cutoff discarded more than half of the Gram spectrum.
    IllConditioned { discarded: usize, total: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::IllConditioned { discarded, total } => {
                write!(f, "IllConditioned: cutoff discarded {discarded} of {total} Gram eigenvalues")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CyclicResidual {
    pub span: usize,
    /// Distance from the target to the span, clamped to `[0, ||target||]`.
    pub residual: Real,
    pub target_norm: Real,
    pub max_eigenvalue: Real,
    pub min_kept_eigenvalue: Real,
    pub kept: usize,
    pub discarded: usize,
    /// Sum of the error bounds of every Gram, cross and norm entry.
    pub error_budget: Q,
    pub warnings: Vec<Warning>,
}

impl CyclicResidual {
    pub fn relative(&self) -> Real {
        if self.target_norm.is_zero() {
            return real::zero();
        }
        self.residual.clone() / &self.target_norm
    }
}

fn orbit(generator: &FormalTensor, op: CyclicOp, span: usize) -> Vec<FormalTensor> {
    let m = span as i64;
    match op {
        CyclicOp::UxU => (-m..=m).map(|i| generator.shift(i, i)).collect(),
        CyclicOp::R => {
            let mut back = vec![generator.clone()];
            for _ in 0..span {
                back.push(apply_r_inverse(back.last().unwrap()));
            }
            let mut fwd = vec![generator.clone()];
            for _ in 0..span {
                fwd.push(apply_r(fwd.last().unwrap()));
            }
            back.into_iter().rev().chain(fwd.into_iter().skip(1)).collect()
        }
    }
}

/// Distance from `target` to `span{op^i generator : |i| <= span}`.
///
/// The Gram matrix is assembled from exact correlations, rounded once, and
/// pseudo-inverted with eigenvalues below `cutoff * lambda_max` dropped.
pub fn cyclic_residual(
    pairing: &TensorPairing,
    generator: &FormalTensor,
    op: CyclicOp,
    span: usize,
    target: &FormalTensor,
    cutoff: f64,
) -> Result<CyclicResidual> {
    let vs = orbit(generator, op, span);
    let n = vs.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let gram_entries: Vec<CorrelationResult> = cells
        .par_iter()
        .map(|&(i, j)| pairing.inner(&vs[i], &vs[j]))
        .collect::<Result<_>>()?;
    let cross: Vec<CorrelationResult> = vs
        .par_iter()
        .map(|v| pairing.inner(target, v))
        .collect::<Result<_>>()?;
    let tt = pairing.inner(target, target)?;

    let mut budget = tt.error_bound.clone();
    let mut gram = vec![vec![real::zero(); n]; n];
    for ((i, j), r) in cells.iter().zip(&gram_entries) {
        let x = real::from_rational(&r.value);
        gram[*i][*j] = x.clone();
        gram[*j][*i] = x;
        budget += &r.error_bound;
    }
    let b: Vec<Real> = cross
        .iter()
        .map(|r| {
            budget += &r.error_bound;
            real::from_rational(&r.value)
        })
        .collect();

    let (values, vectors) = real::symmetric_eigen(&gram);
    let lambda_max = values.last().cloned().unwrap_or_else(real::zero);
    let threshold = lambda_max.clone() * Float::with_val(PRECISION, cutoff);
    let mut projected = real::zero();
    let mut kept = 0;
    let mut min_kept = lambda_max.clone();
    for (lambda, v) in values.iter().zip(&vectors) {
        if lambda <= &threshold || !lambda.is_sign_positive() || lambda.is_zero() {
            continue;
        }
        kept += 1;
        if lambda < &min_kept {
            min_kept = lambda.clone();
        }
        let dot = v.iter().zip(&b).fold(real::zero(), |acc, (x, y)| acc + x.clone() * y);
        projected += dot.square() / lambda;
    }
    let norm_sq = real::from_rational(&tt.value);
    let mut res_sq = norm_sq.clone() - projected;
    if res_sq.is_sign_negative() {
        res_sq = real::zero();
    }
    if res_sq > norm_sq {
        res_sq = norm_sq.clone();
    }
    let discarded = n - kept;
    let mut warnings = Vec::new();
    if 2 * discarded > n {
        warnings.push(Warning::IllConditioned { discarded, total: n });
    }
    Ok(CyclicResidual {
        span,
        residual: res_sq.sqrt(),
        target_norm: norm_sq.sqrt(),
        max_eigenvalue: lambda_max,
        min_kept_eigenvalue: min_kept,
        kept,
        discarded,
        error_budget: budget,
        warnings,
    })
}
