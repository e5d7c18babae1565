use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::tower::{Construction, StepFn, Q};

pub type BaseId = usize;

/// `U^power` applied to a registered base function, or the constant 1
/// (which `U` fixes, so it carries no power).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    One,
    Base { id: BaseId, power: i64 },
}

impl Sym {
    pub fn base(id: BaseId, power: i64) -> Self {
        Sym::Base { id, power }
    }

    pub fn shifted(self, k: i64) -> Self {
        match self {
            Sym::One => Sym::One,
            Sym::Base { id, power } => Sym::Base { id, power: power + k },
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::One => write!(f, "1"),
            Sym::Base { id, power: 0 } => write!(f, "x{id}"),
            Sym::Base { id, power } => write!(f, "U^{power} x{id}"),
        }
    }
}

/// Finite combination of elementary tensors `a (x) b`, kept canonical:
/// ordered by symbol pair, like terms merged, zeros dropped. Two tensors
/// are equal exactly when their canonical forms are.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FormalTensor {
    terms: BTreeMap<(Sym, Sym), Q>,
}

impl FormalTensor {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn pure(a: Sym, b: Sym) -> Self {
        let mut t = Self::zero();
        t.add_term(a, b, Q::from_integer(1.into()));
        t
    }

    /// `V_{m,n} = U^m f (x) U^n f`.
    pub fn v(f: BaseId, m: i64, n: i64) -> Self {
        Self::pure(Sym::base(f, m), Sym::base(f, n))
    }

    /// `F_{i,j} = U^i 1_B (x) U^j 1_B + U^j 1_B (x) U^i 1_B`.
    pub fn f_sym(b: BaseId, i: i64, j: i64) -> Self {
        Self::v(b, i, j).add(&Self::v(b, j, i))
    }

    pub fn add_term(&mut self, a: Sym, b: Sym, coeff: Q) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry((a, b)).or_insert_with(Q::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&(a, b));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Sym, &Sym, &Q)> {
        self.terms.iter().map(|((a, b), c)| (a, b, c))
    }

    pub fn coefficient(&self, a: Sym, b: Sym) -> Q {
        self.terms.get(&(a, b)).cloned().unwrap_or_else(Q::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b, c) in other.terms() {
            out.add_term(*a, *b, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(&Q::from_integer((-1).into())))
    }

    pub fn scaled(&self, s: &Q) -> Self {
        let mut out = Self::zero();
        for (a, b, c) in self.terms() {
            out.add_term(*a, *b, c * s);
        }
        out
    }

    /// `(U^i (x) U^j) t`.
    pub fn shift(&self, i: i64, j: i64) -> Self {
        let mut out = Self::zero();
        for (a, b, c) in self.terms() {
            out.add_term(a.shifted(i), b.shifted(j), c.clone());
        }
        out
    }

    /// Sum of absolute coefficients.
    pub fn mass(&self) -> Q {
        self.terms.values().fold(Q::zero(), |acc, c| acc + c.abs())
    }

    pub fn bases(&self) -> Vec<BaseId> {
        let mut ids: Vec<BaseId> = self
            .terms
            .keys()
            .flat_map(|(a, b)| [*a, *b])
            .filter_map(|s| match s {
                Sym::Base { id, .. } => Some(id),
                Sym::One => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

impl fmt::Display for FormalTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (n, (a, b, c)) in self.terms().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c}) {a} (x) {b}")?;
        }
        Ok(())
    }
}

/// `R(a (x) b) = b (x) U a`, so `R V_{m,n} = V_{n,m+1}` and `R^2 = U (x) U`.
pub fn apply_r(t: &FormalTensor) -> FormalTensor {
    let mut out = FormalTensor::zero();
    for (a, b, c) in t.terms() {
        out.add_term(*b, a.shifted(1), c.clone());
    }
    out
}

/// Inverse of `apply_r`: `a (x) b` to `U^{-1} b (x) a`.
pub fn apply_r_inverse(t: &FormalTensor) -> FormalTensor {
    let mut out = FormalTensor::zero();
    for (a, b, c) in t.terms() {
        out.add_term(b.shifted(-1), *a, c.clone());
    }
    out
}

/// Base functions known to the tensor algebra: each has an exact integral
/// (needed by `Theta`) and, for numeric work, a bound step function.
#[derive(Debug, Clone, Default)]
pub struct BaseRegistry {
    names: Vec<String>,
    integrals: Vec<Q>,
    bound: Vec<Option<StepFn>>,
}

impl BaseRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, integral: Q) -> BaseId {
        self.names.push(name.into());
        self.integrals.push(integral);
        self.bound.push(None);
        self.names.len() - 1
    }

    /// Registers `f` under `name` with its exact integral and binds it.
    pub fn register_bound(&mut self, c: &Construction, name: impl Into<String>, f: StepFn) -> Result<BaseId> {
        let id = self.register(name, f.integral(c)?);
        self.bound[id] = Some(f);
        Ok(id)
    }

    pub fn bind(&mut self, c: &Construction, id: BaseId, f: StepFn) -> Result<()> {
        let integral = self.integral(id)?.clone();
        if f.integral(c)? != integral {
            return Err(Error::BadParameter(format!(
                "base {id} was registered with integral {integral}, bound function has {}",
                f.integral(c)?
            )));
        }
        self.bound[id] = Some(f);
        Ok(())
    }

    pub fn integral(&self, id: BaseId) -> Result<&Q> {
        self.integrals.get(id).ok_or(Error::UnboundBase(id))
    }

    pub fn name(&self, id: BaseId) -> Result<&str> {
        self.names.get(id).map(|s| s.as_str()).ok_or(Error::UnboundBase(id))
    }

    pub fn function(&self, id: BaseId) -> Result<&StepFn> {
        self.bound
            .get(id)
            .and_then(|f| f.as_ref())
            .ok_or(Error::UnboundBase(id))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::q;

    #[test]
    fn canonical_form_merges_and_drops() {
        let mut t = FormalTensor::zero();
        t.add_term(Sym::base(0, 1), Sym::One, q(1, 2));
        t.add_term(Sym::base(0, 1), Sym::One, q(-1, 2));
        assert!(t.is_zero());
        let a = FormalTensor::v(0, 1, 2).add(&FormalTensor::v(0, 0, 0));
        let b = FormalTensor::v(0, 0, 0).add(&FormalTensor::v(0, 1, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn r_examples() {
        for (m, n) in [(0, 0), (2, -1), (-3, 5)] {
            assert_eq!(apply_r(&FormalTensor::v(0, m, n)), FormalTensor::v(0, n, m + 1));
        }
        let t = FormalTensor::v(0, 1, 2).add(&FormalTensor::pure(Sym::One, Sym::base(1, 0)).scaled(&q(3, 5)));
        assert_eq!(apply_r(&apply_r(&t)), t.shift(1, 1));
        assert_eq!(apply_r_inverse(&apply_r(&t)), t);
        assert_eq!(
            apply_r(&FormalTensor::pure(Sym::One, Sym::base(0, 0))),
            FormalTensor::pure(Sym::base(0, 0), Sym::One)
        );
    }
}
