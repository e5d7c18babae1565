//! Brute-force reference for correlations: an explicit realization of the
//! construction on `[0, 1)` with exact rational endpoints.
//!
//! Stage 1 stacks `[i w1, (i + 1) w1)`, the rest of the unit interval is the
//! reservoir. Each cut splits every level into equal subintervals left to
//! right, and spacers are carved from the left end of the reservoir. Step
//! functions are evaluated by locating points in these intervals, and the
//! map moves a stage-`M` level onto the next one by translation. Nothing here
//! shares code with the offset arithmetic of the correlation engine.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::tower::{Construction, StepFn, Q};

pub struct IntervalModel {
    /// Left endpoints of every level, per stage, in level order.
    lefts: Vec<Vec<Q>>,
    widths: Vec<Q>,
    reservoir_start: Vec<Q>,
}

impl IntervalModel {
    pub fn new(c: &Construction) -> Self {
        let spec = c.spec();
        let w1 = spec.w1().clone();
        let mut lefts = vec![(0..spec.h1()).map(|i| Q::from_integer(i.into()) * &w1).collect::<Vec<_>>()];
        let mut widths = vec![w1.clone()];
        let mut reservoir_start = vec![Q::from_integer(spec.h1().into()) * &w1];
        for cut in spec.stages().iter().take(c.depth() - 1) {
            let prev = lefts.last().unwrap();
            let w = widths.last().unwrap() / Q::from_integer(cut.cuts().into());
            let mut cursor = reservoir_start.last().unwrap().clone();
            let mut next = Vec::new();
            for (j, &s) in cut.spacers().iter().enumerate() {
                let shift = Q::from_integer(j.into()) * &w;
                next.extend(prev.iter().map(|a| a + &shift));
                for _ in 0..s {
                    next.push(cursor.clone());
                    cursor += &w;
                }
            }
            lefts.push(next);
            widths.push(w);
            reservoir_start.push(cursor);
        }
        IntervalModel {
            lefts,
            widths,
            reservoir_start,
        }
    }

    /// Value of `f` at the point `x`.
    pub fn eval(&self, f: &StepFn, x: &Q) -> Q {
        let m = f.stage();
        let w = &self.widths[m - 1];
        let hit = self.lefts[m - 1]
            .iter()
            .position(|a| a <= x && x < &(a + w));
        match hit {
            Some(i) => f.gamma() + &f.coeffs()[i],
            None => f.gamma() + f.rho(),
        }
    }

    fn tower_values(&self, f: &StepFn, stage: usize) -> Vec<Q> {
        let mut sorted: Vec<(Q, usize)> = self.lefts[f.stage() - 1]
            .iter()
            .cloned()
            .zip(0..)
            .collect();
        sorted.sort();
        let w = &self.widths[f.stage() - 1];
        self.lefts[stage - 1]
            .iter()
            .map(|x| {
                let idx = sorted.partition_point(|(a, _)| a <= x);
                match idx.checked_sub(1).map(|i| &sorted[i]) {
                    Some((a, level)) if x < &(a + w) => f.gamma() + &f.coeffs()[*level],
                    _ => f.gamma() + f.rho(),
                }
            })
            .collect()
    }

    /// `<U^k f, g> = int f(x) g(T^k x) dx` computed by shifting stage-`stage`
    /// levels. Only meaningful when the non-constant part of the function
    /// being shifted vanishes on points that leave the tower and on the
    /// reservoir, i.e. exactly when the engine reports a zero error bound.
    /// At `k = 0` it is the plain inner product.
    pub fn correlation(&self, c: &Construction, f: &StepFn, g: &StepFn, k: i64, stage: usize) -> Result<Q> {
        if stage < f.stage().max(g.stage()) || stage > self.lefts.len() {
            return Err(Error::OutOfRange(format!("oracle stage {stage}")));
        }
        let _ = c.stage(stage)?;
        let (x, y, k) = if k >= 0 { (f, g, k as usize) } else { (g, f, k.unsigned_abs() as usize) };
        if y.rho().is_zero() && y.coeffs().iter().all(|v| v.is_zero()) {
            // a constant partner does not care where the mass of `x` lands
            let w = &self.widths[x.stage() - 1];
            let levels = x.coeffs().iter().fold(Q::zero(), |acc, v| acc + v) * w;
            let y_mass = Q::from_integer(1.into()) - &self.reservoir_start[x.stage() - 1];
            return Ok(y.gamma() * (x.gamma() + levels + x.rho() * y_mass));
        }
        let xv = self.tower_values(x, stage);
        let yv = self.tower_values(y, stage);
        let w = &self.widths[stage - 1];
        let h = xv.len();
        let y_mass = Q::from_integer(1.into()) - &self.reservoir_start[stage - 1];
        let y_res = y.gamma() + y.rho();

        let mut inside = Q::zero();
        for p in 0..h.saturating_sub(k) {
            inside += &xv[p] * &yv[p + k];
        }
        let integral_y = yv.iter().fold(Q::zero(), |acc, v| acc + v) * w + &y_res * &y_mass;
        let mut landed = Q::zero();
        for v in yv.iter().skip(k) {
            landed += v;
        }
        if k == 0 {
            // nothing moves, so the residual set pairs with itself
            return Ok(inside * w + (x.gamma() + x.rho()) * y_res * y_mass);
        }
        Ok(inside * w + x.gamma() * (integral_y - landed * w))
    }
}
