//! Exact matrix elements `<U^k f, g>` with `U f = f o T^{-1}`.
//!
//! At stage `M` the column of stage `m` appears as a set of copies with
//! bottom offsets `O`. A level-`i` point of the copy at `o` sits at position
//! `o + i` and `T^k` moves it to `o + i + k` as long as that stays below
//! `h_M`. Everything reduces to counting offset pairs `(o, o')` with
//! `o' - o = d` plus a few one-sided counts, all in exact integers. Points
//! that leave the column, and the residual set `Y_M` when it carries mass of
//! `f`, are not resolved at stage `M`; their total mass times the sup norms
//! of the non-constant parts is the error bound.

use std::borrow::Cow;
use std::collections::HashMap;
use std::ops::RangeInclusive;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;

use super::construction::Construction;
use super::spec::{qi, Q};
use super::stepfn::StepFn;
use crate::error::{Error, Result};

/// Largest offset table the correlator materializes (8 bytes per entry).
pub const MAX_TABLE_ENTRIES: u64 = 1 << 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationResult {
    pub value: Q,
    /// Rigorous bound on `|true value - value|`.
    pub error_bound: Q,
    pub resolved_stage: usize,
}

/// Values and error bounds of a sequence indexed by consecutive lags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationSequence {
    first_lag: i64,
    values: Vec<Q>,
    bounds: Vec<Q>,
    description: String,
}

impl CorrelationSequence {
    pub fn new(first_lag: i64, values: Vec<Q>, bounds: Vec<Q>, description: impl Into<String>) -> Self {
        assert_eq!(values.len(), bounds.len());
        CorrelationSequence {
            first_lag,
            values,
            bounds,
            description: description.into(),
        }
    }

    /// Exact sequence (all error bounds zero) over `-max_lag..=max_lag`.
    pub fn exact_symmetric(values: Vec<Q>, description: impl Into<String>) -> Self {
        assert!(values.len() % 2 == 1);
        let k = (values.len() / 2) as i64;
        let bounds = vec![Q::zero(); values.len()];
        Self::new(-k, values, bounds, description)
    }

    pub fn first_lag(&self) -> i64 {
        self.first_lag
    }

    pub fn last_lag(&self) -> i64 {
        self.first_lag + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn bounds(&self) -> &[Q] {
        &self.bounds
    }

    pub fn get(&self, k: i64) -> Option<(&Q, &Q)> {
        let idx = k - self.first_lag;
        if idx < 0 || idx as usize >= self.values.len() {
            return None;
        }
        Some((&self.values[idx as usize], &self.bounds[idx as usize]))
    }

    /// Largest `K` such that every lag in `-K..=K` is present.
    pub fn symmetric_extent(&self) -> Option<usize> {
        if self.first_lag > 0 || self.last_lag() < 0 {
            return None;
        }
        Some((-self.first_lag).min(self.last_lag()) as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Q, &Q)> {
        self.values
            .iter()
            .zip(&self.bounds)
            .enumerate()
            .map(move |(i, (v, b))| (self.first_lag + i as i64, v, b))
    }
}

/// Single matrix element, building whatever offset tables it needs.
pub fn correlation(c: &Construction, f: &StepFn, g: &StepFn, k: i64, tol: &Q) -> Result<CorrelationResult> {
    Correlator::new(c).correlation(f, g, k, tol)
}

pub fn correlation_sequence(
    c: &Construction,
    f: &StepFn,
    g: &StepFn,
    lags: RangeInclusive<i64>,
    tol: &Q,
) -> Result<CorrelationSequence> {
    Correlator::new(c).sequence(f, g, lags, tol)
}

#[derive(Debug)]
struct CountWindow {
    lo: i64,
    counts: Vec<u64>,
}

impl CountWindow {
    fn covers(&self, lo: i64, hi: i64) -> bool {
        self.lo <= lo && hi < self.lo + self.counts.len() as i64
    }

    fn get(&self, d: i64) -> u64 {
        self.counts[(d - self.lo) as usize]
    }
}

/// Integer numerators over a common denominator.
struct Scaled {
    nums: Vec<(i64, BigInt)>,
    den: BigInt,
}

impl Scaled {
    fn from_sparse(entries: Vec<(i64, Q)>) -> Self {
        let den = entries
            .iter()
            .fold(BigInt::one(), |acc, (_, q)| acc.lcm(q.denom()));
        let nums = entries
            .into_iter()
            .map(|(i, q)| (i, q.numer() * (&den / q.denom())))
            .collect();
        Scaled { nums, den }
    }
}

/// Oriented pair `(x, y)` at a common stage, evaluating `sum_p x(p) y(p + k)` for `k >= 0`.
struct Prepared {
    m: usize,
    h_m: i64,
    cross: Vec<(i64, BigInt)>,
    cross_den: BigInt,
    alpha: Vec<(i64, Q)>,
    beta: Vec<(i64, Q)>,
    rho_x: Q,
    rho_y: Q,
    support_x: Vec<i64>,
    sup_product: Q,
    constant: Q,
}

impl Prepared {
    fn new(c: &Construction, x: &StepFn, y: &StepFn) -> Result<Self> {
        let m = x.stage();
        let stage = c.stage(m)?;
        let ix = x.varying_integral(c)?;
        let iy = y.varying_integral(c)?;
        let constant = x.gamma() * y.gamma() + x.gamma() * &iy + y.gamma() * &ix;

        let sparse = |f: &StepFn| -> Vec<(i64, Q)> {
            f.coeffs()
                .iter()
                .enumerate()
                .filter_map(|(i, a)| {
                    let v = a - f.rho();
                    (!v.is_zero()).then_some((i as i64, v))
                })
                .collect()
        };
        let alpha = sparse(x);
        let beta = sparse(y);

        let sa = Scaled::from_sparse(alpha.clone());
        let sb = Scaled::from_sparse(beta.clone());
        let mut cross: HashMap<i64, BigInt> = HashMap::new();
        for (i, a) in &sa.nums {
            for (j, b) in &sb.nums {
                *cross.entry(i - j).or_insert_with(BigInt::zero) += a * b;
            }
        }
        let mut cross: Vec<(i64, BigInt)> = cross.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        cross.sort_by_key(|(e, _)| *e);

        let support_x = x
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, _)| i as i64)
            .collect();

        Ok(Prepared {
            m,
            h_m: stage.h as i64,
            cross,
            cross_den: sa.den * sb.den,
            alpha,
            beta,
            rho_x: x.rho().clone(),
            rho_y: y.rho().clone(),
            support_x,
            sup_product: x.sup_varying() * y.sup_varying(),
            constant,
        })
    }
}

/// Correlation engine over one construction. Offset tables and pair-count
/// windows are memoized, so evaluating many pairs or lags against the same
/// stages is cheap. Safe to share across threads.
pub struct Correlator<'a> {
    c: &'a Construction,
    tables: Mutex<HashMap<(usize, usize), Arc<Vec<u64>>>>,
    windows: Mutex<HashMap<(usize, usize), Vec<Arc<CountWindow>>>>,
}

impl<'a> Correlator<'a> {
    pub fn new(c: &'a Construction) -> Self {
        Correlator {
            c,
            tables: Mutex::new(HashMap::new()),
            windows: Mutex::new(HashMap::new()),
        }
    }

    pub fn construction(&self) -> &'a Construction {
        self.c
    }

    fn offsets(&self, m: usize, big_m: usize) -> Result<Arc<Vec<u64>>> {
        if let Some(t) = self.tables.lock().unwrap().get(&(m, big_m)) {
            return Ok(Arc::clone(t));
        }
        let copies = self.c.copies_between(m, big_m)?;
        if copies > MAX_TABLE_ENTRIES {
            return Err(Error::TableTooLarge {
                from: m,
                to: big_m,
                copies,
                limit: MAX_TABLE_ENTRIES,
            });
        }
        let table = Arc::new(self.c.offsets_between(m, big_m)?);
        self.tables
            .lock()
            .unwrap()
            .entry((m, big_m))
            .or_insert_with(|| Arc::clone(&table));
        Ok(table)
    }

    fn window(&self, m: usize, big_m: usize, lo: i64, hi: i64) -> Result<Arc<CountWindow>> {
        if let Some(list) = self.windows.lock().unwrap().get(&(m, big_m)) {
            if let Some(w) = list.iter().find(|w| w.covers(lo, hi)) {
                return Ok(Arc::clone(w));
            }
        }
        let offsets = self.offsets(m, big_m)?;
        let w = Arc::new(pair_counts(&offsets, lo, hi));
        self.windows
            .lock()
            .unwrap()
            .entry((m, big_m))
            .or_default()
            .push(Arc::clone(&w));
        Ok(w)
    }

    /// Computes and caches offset-pair counts for differences in `lo..=hi`
    /// between stage-`m` copies inside stage `big_m`.
    pub fn prefetch(&self, m: usize, big_m: usize, lo: i64, hi: i64) -> Result<()> {
        self.window(m, big_m, lo, hi).map(|_| ())
    }

    fn align<'f>(&self, f: &'f StepFn, g: &'f StepFn) -> Result<(Cow<'f, StepFn>, Cow<'f, StepFn>)> {
        f.check(self.c)?;
        g.check(self.c)?;
        let m = f.stage().max(g.stage());
        let f = if f.stage() < m {
            Cow::Owned(f.refine(self.c, m)?)
        } else {
            Cow::Borrowed(f)
        };
        let g = if g.stage() < m {
            Cow::Owned(g.refine(self.c, m)?)
        } else {
            Cow::Borrowed(g)
        };
        Ok((f, g))
    }

    fn inner_product(&self, f: &StepFn, g: &StepFn) -> Result<CorrelationResult> {
        let stage = self.c.stage(f.stage())?;
        let mut value = f
            .coeffs()
            .iter()
            .zip(g.coeffs())
            .fold(Q::zero(), |acc, (a, b)| acc + (a + f.gamma()) * (b + g.gamma()));
        value *= &stage.w;
        value += (f.rho() + f.gamma()) * (g.rho() + g.gamma()) * &stage.y;
        Ok(CorrelationResult {
            value,
            error_bound: Q::zero(),
            resolved_stage: f.stage(),
        })
    }

    fn error_bound(&self, p: &Prepared, k: u64, big_m: usize) -> Result<Q> {
        if p.sup_product.is_zero() {
            return Ok(Q::zero());
        }
        let stage = self.c.stage(big_m)?;
        let h_big = stage.h as i64;
        let k = k as i64;
        let t = h_big - k;
        let mut count: u64 = 0;
        for &i in &p.support_x {
            count += self.c.count_offsets_at_least(p.m, big_m, t - i)?;
        }
        let rho_live = !p.rho_x.is_zero();
        if rho_live {
            let len = k.min(h_big);
            let start = h_big - len;
            let mut copy_positions = 0u64;
            for i in 0..p.h_m {
                copy_positions += self.c.count_offsets_at_least(p.m, big_m, start - i)?;
            }
            count += len as u64 - copy_positions;
        }
        let mut mass = qi(count) * &stage.w;
        if rho_live {
            mass += &stage.y;
        }
        Ok(mass * &p.sup_product)
    }

    fn value_at(&self, p: &Prepared, k: u64, big_m: usize) -> Result<Q> {
        let stage = self.c.stage(big_m)?;
        let h_big = stage.h as i64;
        let k = k as i64;
        let mut total = Q::zero();

        if !p.cross.is_empty() {
            let lo = k + p.cross.first().unwrap().0;
            let hi = k + p.cross.last().unwrap().0;
            let w = self.window(p.m, big_m, lo.min(k - p.h_m + 1), hi.max(k + p.h_m - 1))?;
            let mut acc = BigInt::zero();
            for (e, x) in &p.cross {
                let d = w.get(e + k);
                if d != 0 {
                    acc += x * BigInt::from(d);
                }
            }
            total += Q::new(acc, p.cross_den.clone());
        }
        if !p.rho_y.is_zero() && !p.alpha.is_empty() {
            let copies = self.c.copies_between(p.m, big_m)?;
            let mut acc = Q::zero();
            for (i, a) in &p.alpha {
                let stay = copies - self.c.count_offsets_at_least(p.m, big_m, h_big - i - k)?;
                acc += a * qi(stay);
            }
            total += acc * &p.rho_y;
        }
        if !p.rho_x.is_zero() && !p.beta.is_empty() {
            let mut acc = Q::zero();
            for (j, b) in &p.beta {
                acc += b * qi(self.c.count_offsets_at_least(p.m, big_m, k - j)?);
            }
            total += acc * &p.rho_x;
        }
        if !p.rho_x.is_zero() && !p.rho_y.is_zero() && h_big > k {
            total += &p.rho_x * &p.rho_y * qi((h_big - k) as u64);
        }
        Ok(&p.constant + total * &stage.w)
    }

    fn oriented<'f>(&self, f: &'f StepFn, g: &'f StepFn, k: i64) -> (&'f StepFn, &'f StepFn, u64) {
        if k >= 0 {
            (f, g, k as u64)
        } else {
            (g, f, k.unsigned_abs())
        }
    }

    /// Matrix element resolved at a fixed stage (at least the stage of `f` and `g`).
    pub fn correlation_at(&self, f: &StepFn, g: &StepFn, k: i64, stage: usize) -> Result<CorrelationResult> {
        let (f, g) = self.align(f, g)?;
        if stage < f.stage() {
            return Err(Error::OutOfRange(format!(
                "resolution stage {stage} is shallower than the functions' stage {}",
                f.stage()
            )));
        }
        self.c.stage(stage)?;
        if k == 0 {
            return self.inner_product(&f, &g);
        }
        let (x, y, lag) = self.oriented(&f, &g, k);
        let p = Prepared::new(self.c, x, y)?;
        Ok(CorrelationResult {
            value: self.value_at(&p, lag, stage)?,
            error_bound: self.error_bound(&p, lag, stage)?,
            resolved_stage: stage,
        })
    }

    /// `<U^k f, g>` at the shallowest stage whose error bound is within `tol`
    /// (`tol = 0` demands an exact answer).
    pub fn correlation(&self, f: &StepFn, g: &StepFn, k: i64, tol: &Q) -> Result<CorrelationResult> {
        let (f, g) = self.align(f, g)?;
        if k == 0 {
            return self.inner_product(&f, &g);
        }
        let (x, y, lag) = self.oriented(&f, &g, k);
        let p = Prepared::new(self.c, x, y)?;
        let big_m = self.select_stage(&p, lag, tol, k)?;
        Ok(CorrelationResult {
            value: self.value_at(&p, lag, big_m.0)?,
            error_bound: big_m.1,
            resolved_stage: big_m.0,
        })
    }

    fn select_stage(&self, p: &Prepared, lag: u64, tol: &Q, k: i64) -> Result<(usize, Q)> {
        let mut best = None;
        for big_m in p.m..=self.c.depth() {
            let bound = self.error_bound(p, lag, big_m)?;
            if &bound <= tol {
                return Ok((big_m, bound));
            }
            best = Some(bound);
        }
        Err(Error::StageBudgetExceeded {
            lag: k,
            best_bound: best.map(|b| b.to_string()).unwrap_or_default(),
        })
    }

    /// Correlations for every lag in `lags`. Lags are evaluated in parallel;
    /// the result does not depend on the thread count.
    pub fn sequence(&self, f: &StepFn, g: &StepFn, lags: RangeInclusive<i64>, tol: &Q) -> Result<CorrelationSequence> {
        let (f, g) = self.align(f, g)?;
        let lag_list: Vec<i64> = lags.clone().collect();
        let forward = Prepared::new(self.c, &f, &g)?;
        let backward = Prepared::new(self.c, &g, &f)?;
        let pick = |k: i64| if k >= 0 { &forward } else { &backward };

        let stages: Vec<(usize, Q)> = lag_list
            .par_iter()
            .map(|&k| {
                if k == 0 {
                    Ok((f.stage(), Q::zero()))
                } else {
                    self.select_stage(pick(k), k.unsigned_abs(), tol, k)
                }
            })
            .collect::<Result<_>>()?;

        // one pair-count window per resolution stage, covering all its lags
        let mut spans: HashMap<usize, (i64, i64)> = HashMap::new();
        for (&k, (big_m, _)) in lag_list.iter().zip(&stages) {
            if k == 0 {
                continue;
            }
            let a = k.abs();
            let e = spans.entry(*big_m).or_insert((a, a));
            e.0 = e.0.min(a);
            e.1 = e.1.max(a);
        }
        let h_m = forward.h_m;
        let mut span_list: Vec<_> = spans.into_iter().collect();
        span_list.sort();
        for (big_m, (lo, hi)) in span_list {
            if hi - lo <= 1 << 22 {
                self.prefetch(f.stage(), big_m, lo - h_m + 1, hi + h_m - 1)?;
            }
        }

        let values: Vec<Q> = lag_list
            .par_iter()
            .zip(&stages)
            .map(|(&k, (big_m, _))| {
                if k == 0 {
                    Ok(self.inner_product(&f, &g)?.value)
                } else {
                    self.value_at(pick(k), k.unsigned_abs(), *big_m)
                }
            })
            .collect::<Result<_>>()?;
        let bounds = stages.into_iter().map(|(_, b)| b).collect();
        Ok(CorrelationSequence::new(
            *lags.start(),
            values,
            bounds,
            "correlation sequence",
        ))
    }
}

/// `counts[d - lo]` = number of offset pairs `(o, o')` with `o' - o = d`, for `d` in `lo..=hi`.
fn pair_counts(offsets: &[u64], lo: i64, hi: i64) -> CountWindow {
    let len = (hi - lo + 1).max(0) as usize;
    let mut counts = vec![0u64; len];
    let mut start = 0usize;
    for &o in offsets {
        let o = o as i64;
        while start < offsets.len() && (offsets[start] as i64) < o + lo {
            start += 1;
        }
        let mut idx = start;
        while idx < offsets.len() && (offsets[idx] as i64) <= o + hi {
            counts[(offsets[idx] as i64 - o - lo) as usize] += 1;
            idx += 1;
        }
    }
    CountWindow { lo, counts }
}
