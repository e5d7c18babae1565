use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::tensor::{BaseRegistry, FormalTensor, Sym};
use crate::error::Result;
use crate::tower::Q;

/// `sum_p c_p U^p + theta Theta`. Products follow `U Theta = Theta U = Theta`
/// and `Theta^2 = Theta`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    powers: BTreeMap<i64, Q>,
    theta: Q,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::monomial(0, Q::one())
    }

    pub fn monomial(p: i64, c: Q) -> Self {
        let mut out = Self::zero();
        out.add_power(p, c);
        out
    }

    pub fn theta() -> Self {
        Poly {
            powers: BTreeMap::new(),
            theta: Q::one(),
        }
    }

    /// `a I + b U`.
    pub fn affine(a: &Q, b: &Q) -> Self {
        let mut out = Self::monomial(0, a.clone());
        out.add_power(1, b.clone());
        out
    }

    fn add_power(&mut self, p: i64, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.powers.entry(p).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.powers.remove(&p);
        }
    }

    pub fn powers(&self) -> impl Iterator<Item = (i64, &Q)> {
        self.powers.iter().map(|(p, c)| (*p, c))
    }

    pub fn theta_coeff(&self) -> &Q {
        &self.theta
    }

    fn power_sum(&self) -> Q {
        self.powers.values().fold(Q::zero(), |a, c| a + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, c) in other.powers() {
            out.add_power(p, c.clone());
        }
        out.theta += &other.theta;
        out
    }

    pub fn scaled(&self, s: &Q) -> Self {
        let mut out = Self::zero();
        for (p, c) in self.powers() {
            out.add_power(p, c * s);
        }
        out.theta = &self.theta * s;
        out
    }

    /// Operator product `self * other` (apply `other` first).
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (p, c) in self.powers() {
            for (q, d) in other.powers() {
                out.add_power(p + q, c * d);
            }
        }
        out.theta = &self.theta * other.power_sum() + &other.theta * self.power_sum() + &self.theta * &other.theta;
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::identity(), |acc, _| acc.mul(self))
    }

    /// Image of a single symbol, as `(symbol, coefficient)` pairs.
    pub fn apply_sym(&self, s: Sym, reg: &BaseRegistry) -> Result<Vec<(Sym, Q)>> {
        let mut out: Vec<(Sym, Q)> = self.powers().map(|(p, c)| (s.shifted(p), c.clone())).collect();
        if !self.theta.is_zero() {
            let integral = match s {
                Sym::One => Q::one(),
                Sym::Base { id, .. } => reg.integral(id)?.clone(),
            };
            out.push((Sym::One, &self.theta * integral));
        }
        Ok(out)
    }
}

/// `left (x) right`, applied factor-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorPoly {
    pub left: Poly,
    pub right: Poly,
}

impl OperatorPoly {
    pub fn new(left: Poly, right: Poly) -> Self {
        OperatorPoly { left, right }
    }

    pub fn diagonal(p: Poly) -> Self {
        OperatorPoly {
            left: p.clone(),
            right: p,
        }
    }

    pub fn identity() -> Self {
        Self::diagonal(Poly::identity())
    }
}

pub fn apply_poly(p: &OperatorPoly, t: &FormalTensor, reg: &BaseRegistry) -> Result<FormalTensor> {
    let mut out = FormalTensor::zero();
    for (a, b, c) in t.terms() {
        let la = p.left.apply_sym(*a, reg)?;
        let rb = p.right.apply_sym(*b, reg)?;
        for (x, cx) in &la {
            for (y, cy) in &rb {
                out.add_term(*x, *y, c * cx * cy);
            }
        }
    }
    Ok(out)
}
