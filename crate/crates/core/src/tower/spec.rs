use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub(crate) fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn qi(n: u64) -> Q {
    Q::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Subcolumn `j` (0-based) receives `j` spacers.
    Staircase,
    /// Three cuts, one spacer on the middle subcolumn.
    Chacon,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Staircase => "staircase",
            Preset::Chacon => "chacon",
            Preset::Custom => "custom",
        }
    }
}

/// One cutting-and-stacking step: cut the column into `spacers.len()`
/// subcolumns and place `spacers[j]` spacer levels on top of subcolumn `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StageSpec {
    spacers: Vec<u64>,
}

impl StageSpec {
    pub fn new(spacers: Vec<u64>) -> Result<Self> {
        if spacers.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "a stage needs at least 2 cuts, got {}",
                spacers.len()
            )));
        }
        Ok(StageSpec { spacers })
    }

    pub fn staircase(cuts: usize) -> Result<Self> {
        Self::new((0..cuts as u64).collect())
    }

    pub fn chacon() -> Self {
        StageSpec {
            spacers: vec![0, 1, 0],
        }
    }

    pub fn cuts(&self) -> usize {
        self.spacers.len()
    }

    pub fn spacers(&self) -> &[u64] {
        &self.spacers
    }

    pub fn spacer_total(&self) -> u64 {
        self.spacers.iter().sum()
    }

    fn is_staircase(&self) -> bool {
        self.spacers.iter().enumerate().all(|(j, &s)| s == j as u64)
    }
}

/// Declarative description of a rank-one construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankOneSpec {
    preset: Preset,
    h1: u64,
    w1: Q,
    y1: Q,
    stages: Vec<StageSpec>,
}

impl RankOneSpec {
    /// Staircase construction driven by a cut sequence, with the default
    /// measure split `w1 = 1/(4 h1)`, `y1 = 3/4`.
    pub fn staircase(h1: u64, cuts: &[usize]) -> Result<Self> {
        let stages = cuts
            .iter()
            .map(|&r| StageSpec::staircase(r))
            .collect::<Result<Vec<_>>>()?;
        Self::with_default_measure(Preset::Staircase, h1, stages)
    }

    pub fn chacon(h1: u64, stage_count: usize) -> Result<Self> {
        Self::with_default_measure(Preset::Chacon, h1, vec![StageSpec::chacon(); stage_count])
    }

    pub fn custom(h1: u64, spacers: Vec<Vec<u64>>) -> Result<Self> {
        let stages = spacers
            .into_iter()
            .map(StageSpec::new)
            .collect::<Result<Vec<_>>>()?;
        Self::with_default_measure(Preset::Custom, h1, stages)
    }

    fn with_default_measure(preset: Preset, h1: u64, stages: Vec<StageSpec>) -> Result<Self> {
        if h1 == 0 {
            return Err(Error::InvalidSpec("h1 must be positive".into()));
        }
        let spec = RankOneSpec {
            preset,
            h1,
            w1: q(1, 4 * h1 as i64),
            y1: q(3, 4),
            stages,
        };
        spec.validate_shape()?;
        Ok(spec)
    }

    /// Replaces the default measure split. `h1 * w1 + y1` must equal 1.
    pub fn with_measure(mut self, w1: Q, y1: Q) -> Result<Self> {
        self.w1 = w1;
        self.y1 = y1;
        self.validate_shape()?;
        Ok(self)
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn h1(&self) -> u64 {
        self.h1
    }

    pub fn w1(&self) -> &Q {
        &self.w1
    }

    pub fn y1(&self) -> &Q {
        &self.y1
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    /// Checks the shape invariants and pre-scans every declared stage for
    /// reservoir exhaustion.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        let mut w = self.w1.clone();
        let mut y = self.y1.clone();
        for (idx, stage) in self.stages.iter().enumerate() {
            w /= qi(stage.cuts() as u64);
            y -= &w * qi(stage.spacer_total());
            if y.is_negative() {
                return Err(Error::ReservoirExhausted { stage: idx + 1 });
            }
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<()> {
        if self.h1 == 0 {
            return Err(Error::InvalidSpec("h1 must be positive".into()));
        }
        if !self.w1.is_positive() || self.w1 > Q::one() {
            return Err(Error::InvalidSpec(format!("w1 = {} not in (0, 1]", self.w1)));
        }
        if self.y1.is_negative() {
            return Err(Error::InvalidSpec(format!("y1 = {} is negative", self.y1)));
        }
        if qi(self.h1) * &self.w1 + &self.y1 != Q::one() {
            return Err(Error::InvalidSpec(format!(
                "h1*w1 + y1 = {} (must be exactly 1)",
                qi(self.h1) * &self.w1 + &self.y1
            )));
        }
        for (idx, stage) in self.stages.iter().enumerate() {
            if stage.cuts() < 2 {
                return Err(Error::InvalidSpec(format!("stage {} has fewer than 2 cuts", idx + 1)));
            }
            let ok = match self.preset {
                Preset::Staircase => stage.is_staircase(),
                Preset::Chacon => stage.spacers() == [0, 1, 0],
                Preset::Custom => true,
            };
            if !ok {
                return Err(Error::InvalidSpec(format!(
                    "stage {} spacers {:?} do not match the {} preset",
                    idx + 1,
                    stage.spacers(),
                    self.preset.name()
                )));
            }
        }
        Ok(())
    }
}
