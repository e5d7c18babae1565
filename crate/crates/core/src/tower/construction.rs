use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use num_traits::Signed;

use super::spec::{qi, RankOneSpec, Q};
use crate::error::{Error, Result};

/// Heights are kept below this so that signed position arithmetic never overflows.
pub const MAX_HEIGHT: u64 = 1 << 62;

/// One built stage of the tower. Stage numbering starts at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub n: usize,
    pub h: u64,
    pub w: Q,
    pub y: Q,
    /// Bottom level (inside stage `n + 1`) of each subcolumn copy; absent on the final stage.
    pub offsets: Option<Vec<u64>>,
}

/// An immutable, fully built rank-one construction.
#[derive(Debug, Clone)]
pub struct Construction {
    spec: RankOneSpec,
    stages: Vec<Stage>,
    id: u64,
}

/// Applies `stage_budget` cutting-and-stacking steps to the spec.
pub fn build_construction(spec: &RankOneSpec, stage_budget: usize) -> Result<Construction> {
    if stage_budget == 0 {
        return Err(Error::InvalidSpec("stage budget must be at least 1".into()));
    }
    if stage_budget > spec.stages().len() {
        return Err(Error::InvalidSpec(format!(
            "stage budget {} exceeds the {} declared stages",
            stage_budget,
            spec.stages().len()
        )));
    }
    spec.validate()?;

    let mut stages = Vec::with_capacity(stage_budget + 1);
    let mut h = spec.h1();
    let mut w = spec.w1().clone();
    let mut y = spec.y1().clone();
    for (idx, cut) in spec.stages()[..stage_budget].iter().enumerate() {
        let n = idx + 1;
        let mut offsets = Vec::with_capacity(cut.cuts());
        let mut top: u64 = 0;
        for &s in cut.spacers() {
            offsets.push(top);
            top = top
                .checked_add(h)
                .and_then(|t| t.checked_add(s))
                .filter(|&t| t < MAX_HEIGHT)
                .ok_or_else(|| Error::InvalidSpec(format!("height overflow cutting stage {n}")))?;
        }
        let next_w = &w / qi(cut.cuts() as u64);
        let next_y = &y - &next_w * qi(cut.spacer_total());
        if next_y.is_negative() {
            return Err(Error::ReservoirExhausted { stage: n });
        }
        stages.push(Stage {
            n,
            h,
            w,
            y,
            offsets: Some(offsets),
        });
        h = top;
        w = next_w;
        y = next_y;
    }
    stages.push(Stage {
        n: stage_budget + 1,
        h,
        w,
        y,
        offsets: None,
    });

    let mut hasher = DefaultHasher::new();
    spec.hash(&mut hasher);
    stage_budget.hash(&mut hasher);
    Ok(Construction {
        spec: spec.clone(),
        stages,
        id: hasher.finish(),
    })
}

impl Construction {
    pub fn spec(&self) -> &RankOneSpec {
        &self.spec
    }

    /// Identity used to reject step functions built for another construction.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Index of the deepest built stage.
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, n: usize) -> Result<&Stage> {
        if n == 0 || n > self.stages.len() {
            return Err(Error::OutOfRange(format!(
                "stage {n} not in 1..={}",
                self.stages.len()
            )));
        }
        Ok(&self.stages[n - 1])
    }

    pub fn height(&self, n: usize) -> Result<u64> {
        Ok(self.stage(n)?.h)
    }

    pub fn heights(&self) -> Vec<u64> {
        self.stages.iter().map(|s| s.h).collect()
    }

    fn cut_offsets(&self, n: usize) -> &[u64] {
        self.stages[n - 1]
            .offsets
            .as_deref()
            .expect("non-final stage carries offsets")
    }

    fn check_span(&self, from: usize, to: usize) -> Result<()> {
        self.stage(from)?;
        self.stage(to)?;
        if to < from {
            return Err(Error::OutOfRange(format!("target stage {to} precedes stage {from}")));
        }
        Ok(())
    }

    /// Number of copies of the stage-`from` column inside the stage-`to` column.
    pub fn copies_between(&self, from: usize, to: usize) -> Result<u64> {
        self.check_span(from, to)?;
        Ok((from..to).map(|n| self.cut_offsets(n).len() as u64).product())
    }

    /// Bottom positions of the stage-`from` copies inside the stage-`to`
    /// column, ascending.
    pub fn offsets_between(&self, from: usize, to: usize) -> Result<Vec<u64>> {
        self.check_span(from, to)?;
        let mut current = vec![0u64];
        for n in from..to {
            let cut = self.cut_offsets(n);
            let mut next = Vec::with_capacity(current.len() * cut.len());
            for &base in cut {
                next.extend(current.iter().map(|&o| base + o));
            }
            current = next;
        }
        Ok(current)
    }

    /// Counts copy offsets `o` of stage `from` inside stage `to` with `o >= t`,
    /// without materializing them.
    pub fn count_offsets_at_least(&self, from: usize, to: usize, t: i64) -> Result<u64> {
        self.check_span(from, to)?;
        let h_from = self.stages[from - 1].h as i64;
        let mut total = 0u64;
        let mut t = t;
        let mut n = to;
        loop {
            if t <= 0 {
                total += self.copies_between(from, n)?;
                break;
            }
            if n == from {
                break;
            }
            let span = self.stages[n - 1].h as i64 - h_from;
            if t > span {
                break;
            }
            let cut = self.cut_offsets(n - 1);
            let below = cut.partition_point(|&o| (o as i64) < t);
            let full = (cut.len() - below) as u64;
            total += full * self.copies_between(from, n - 1)?;
            if below == 0 {
                break;
            }
            t -= cut[below - 1] as i64;
            n -= 1;
        }
        Ok(total)
    }

    /// Stage-(n+1) levels descending from level `i` of stage `n`.
    pub fn genealogy(&self, n: usize, i: u64) -> Result<Vec<u64>> {
        let stage = self.stage(n)?;
        if i >= stage.h {
            return Err(Error::OutOfRange(format!("level {i} not below height {}", stage.h)));
        }
        let offsets = stage
            .offsets
            .as_ref()
            .ok_or_else(|| Error::OutOfRange(format!("stage {n} is the final stage")))?;
        Ok(offsets.iter().map(|o| o + i).collect())
    }

    /// Descendants of level `(n, i)` at `target` with their widths.
    pub fn refine_level(&self, n: usize, i: u64, target: usize) -> Result<Vec<(u64, Q)>> {
        let stage = self.stage(n)?;
        if i >= stage.h {
            return Err(Error::OutOfRange(format!("level {i} not below height {}", stage.h)));
        }
        self.check_span(n, target)?;
        let w = self.stages[target - 1].w.clone();
        Ok(self
            .offsets_between(n, target)?
            .into_iter()
            .map(|o| (o + i, w.clone()))
            .collect())
    }

    /// True when level `idx` of stage `n` is a spacer inserted by the last cut.
    pub fn is_spacer(&self, n: usize, idx: u64) -> Result<bool> {
        if n < 2 {
            return Ok(false);
        }
        let stage = self.stage(n)?;
        if idx >= stage.h {
            return Err(Error::OutOfRange(format!("level {idx} not below height {}", stage.h)));
        }
        let prev_h = self.stages[n - 2].h;
        let cut = self.cut_offsets(n - 1);
        let j = cut.partition_point(|&o| o <= idx) - 1;
        Ok(idx - cut[j] >= prev_h)
    }
}
