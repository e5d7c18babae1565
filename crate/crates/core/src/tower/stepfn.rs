use num_traits::{Signed, Zero};

use super::construction::Construction;
use super::spec::{qi, Q};
use crate::error::{Error, Result};

/// A function constant on the levels of one stage, plus a global constant
/// `gamma` and an extra value `rho` on the residual set of that stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepFn {
    construction: u64,
    stage: usize,
    coeffs: Vec<Q>,
    gamma: Q,
    rho: Q,
}

/// Indicator of a union of stage-`stage` levels.
pub fn indicator(c: &Construction, stage: usize, levels: &[u64]) -> Result<StepFn> {
    StepFn::indicator(c, stage, levels)
}

impl StepFn {
    pub fn new(c: &Construction, stage: usize, coeffs: Vec<Q>, gamma: Q, rho: Q) -> Result<Self> {
        let h = c.height(stage)?;
        if coeffs.len() as u64 != h {
            return Err(Error::OutOfRange(format!(
                "{} coefficients for a stage of height {h}",
                coeffs.len()
            )));
        }
        Ok(StepFn {
            construction: c.id(),
            stage,
            coeffs,
            gamma,
            rho,
        })
    }

    pub fn indicator(c: &Construction, stage: usize, levels: &[u64]) -> Result<Self> {
        let h = c.height(stage)?;
        let mut coeffs = vec![Q::zero(); h as usize];
        for &l in levels {
            if l >= h {
                return Err(Error::OutOfRange(format!("level {l} not below height {h}")));
            }
            coeffs[l as usize] = qi(1);
        }
        Self::new(c, stage, coeffs, Q::zero(), Q::zero())
    }

    pub fn constant(c: &Construction, value: Q) -> Result<Self> {
        let h = c.height(1)?;
        Self::new(c, 1, vec![Q::zero(); h as usize], value, Q::zero())
    }

    pub fn construction_id(&self) -> u64 {
        self.construction
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn gamma(&self) -> &Q {
        &self.gamma
    }

    pub fn rho(&self) -> &Q {
        &self.rho
    }

    pub(crate) fn check(&self, c: &Construction) -> Result<()> {
        if self.construction != c.id() {
            return Err(Error::MismatchedConstruction);
        }
        Ok(())
    }

    /// Integral of the non-constant part.
    pub fn varying_integral(&self, c: &Construction) -> Result<Q> {
        self.check(c)?;
        let stage = c.stage(self.stage)?;
        let levels: Q = self.coeffs.iter().fold(Q::zero(), |acc, a| acc + a);
        Ok(levels * &stage.w + &self.rho * &stage.y)
    }

    pub fn integral(&self, c: &Construction) -> Result<Q> {
        Ok(self.varying_integral(c)? + &self.gamma)
    }

    /// `<f, f>`, exact.
    pub fn norm_sq(&self, c: &Construction) -> Result<Q> {
        self.check(c)?;
        let stage = c.stage(self.stage)?;
        let levels = self.coeffs.iter().fold(Q::zero(), |acc, a| {
            let v = a + &self.gamma;
            acc + &v * &v
        });
        let res = &self.rho + &self.gamma;
        Ok(levels * &stage.w + &res * &res * &stage.y)
    }

    /// Largest absolute value of the non-constant part.
    pub fn sup_varying(&self) -> Q {
        self.coeffs
            .iter()
            .chain(std::iter::once(&self.rho))
            .map(|a| a.abs())
            .max()
            .unwrap_or_else(Q::zero)
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_abs(&self) -> Q {
        self.gamma.abs() + self.sup_varying()
    }

    pub fn is_constant(&self) -> bool {
        self.rho.is_zero() && self.coeffs.iter().all(|a| a.is_zero())
    }

    /// Same function with its mean removed.
    pub fn zero_mean(&self, c: &Construction) -> Result<Self> {
        let mean = self.integral(c)?;
        let mut out = self.clone();
        out.gamma -= mean;
        Ok(out)
    }

    pub fn scaled(&self, s: &Q) -> Self {
        StepFn {
            construction: self.construction,
            stage: self.stage,
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
            gamma: &self.gamma * s,
            rho: &self.rho * s,
        }
    }

    /// Pointwise sum; the shallower operand is refined first.
    pub fn add(&self, other: &Self, c: &Construction) -> Result<Self> {
        self.check(c)?;
        other.check(c)?;
        let stage = self.stage.max(other.stage);
        let a = self.refine(c, stage)?;
        let b = other.refine(c, stage)?;
        Ok(StepFn {
            construction: self.construction,
            stage,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
            gamma: &a.gamma + &b.gamma,
            rho: &a.rho + &b.rho,
        })
    }

    /// Re-expresses the function on the levels of a deeper stage. Spacer
    /// levels drawn from the residual inherit `rho`.
    pub fn refine(&self, c: &Construction, target: usize) -> Result<Self> {
        self.check(c)?;
        if target < self.stage {
            return Err(Error::OutOfRange(format!(
                "cannot refine stage {} to shallower stage {target}",
                self.stage
            )));
        }
        if target == self.stage {
            return Ok(self.clone());
        }
        let h_target = c.height(target)? as usize;
        let mut coeffs = vec![self.rho.clone(); h_target];
        for o in c.offsets_between(self.stage, target)? {
            for (i, a) in self.coeffs.iter().enumerate() {
                coeffs[o as usize + i] = a.clone();
            }
        }
        Ok(StepFn {
            construction: self.construction,
            stage: target,
            coeffs,
            gamma: self.gamma.clone(),
            rho: self.rho.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::construction::build_construction;
    use crate::tower::spec::{q, RankOneSpec};

    fn example() -> Construction {
        build_construction(&RankOneSpec::staircase(1, &[2, 3, 4]).unwrap(), 3).unwrap()
    }

    #[test]
    fn indicator_integrals() {
        let c = example();
        assert_eq!(indicator(&c, 2, &[0]).unwrap().integral(&c).unwrap(), q(1, 8));
        assert_eq!(indicator(&c, 1, &[0]).unwrap().integral(&c).unwrap(), q(1, 4));
        assert_eq!(indicator(&c, 2, &[0, 1, 2]).unwrap().integral(&c).unwrap(), q(3, 8));
        assert!(indicator(&c, 2, &[3]).is_err());
        assert!(indicator(&c, 7, &[0]).is_err());
    }

    #[test]
    fn refinement_preserves_integral_and_norm() {
        let c = example();
        let f = StepFn::new(&c, 1, vec![q(2, 3)], q(-1, 5), q(7, 2)).unwrap();
        for target in 1..=4 {
            let r = f.refine(&c, target).unwrap();
            assert_eq!(r.integral(&c).unwrap(), f.integral(&c).unwrap());
            assert_eq!(r.norm_sq(&c).unwrap(), f.norm_sq(&c).unwrap());
        }
    }

    #[test]
    fn zero_mean_has_zero_integral() {
        let c = example();
        let f = indicator(&c, 3, &[1, 4]).unwrap().zero_mean(&c).unwrap();
        assert!(f.integral(&c).unwrap().is_zero());
        assert_eq!(f.gamma(), &q(-1, 12));
    }

    #[test]
    fn foreign_construction_rejected() {
        let c = example();
        let other = build_construction(&RankOneSpec::chacon(1, 2).unwrap(), 2).unwrap();
        let f = indicator(&other, 1, &[0]).unwrap();
        assert_eq!(f.integral(&c).unwrap_err(), Error::MismatchedConstruction);
    }
}
