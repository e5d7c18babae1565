//! Cutting-and-stacking constructions and exact correlations on them.

mod construction;
mod correlation;
mod spec;
mod stepfn;

pub use construction::{build_construction, Construction, Stage, MAX_HEIGHT};
pub use correlation::{
    correlation, correlation_sequence, CorrelationResult, CorrelationSequence, Correlator,
    MAX_TABLE_ENTRIES,
};
pub use spec::{Preset, RankOneSpec, StageSpec, Q};

#[cfg(test)]
pub(crate) use spec::q;
pub use stepfn::{indicator, StepFn};

