//! Report records and their serialized forms. Everything except the `run`
//! section is a pure function of the config and the code version.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::Zero;
use rankone::real::{self, Real};
use rankone::{CorrelationSequence, Q};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::write_atomic;
use crate::config::Kind;
use crate::error::CliError;

/// Significant digits of every decimal rendering.
pub const DIGITS: usize = 20;

/// A value as an exact fraction (when it is one) plus a decimal rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Number {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub decimal: String,
}

impl Number {
    pub fn exact(q: &Q) -> Self {
        Number {
            exact: Some(q.to_string()),
            decimal: real::rational_to_decimal(q, DIGITS),
        }
    }

    pub fn int(n: impl Into<i128>) -> Self {
        let n = n.into();
        Number {
            exact: Some(n.to_string()),
            decimal: n.to_string(),
        }
    }

    pub fn real(x: &Real) -> Self {
        Number {
            exact: None,
            decimal: real::to_decimal(x, DIGITS),
        }
    }

    pub fn float(x: f64) -> Self {
        Number::real(&real::real(x))
    }

    pub fn zero() -> Self {
        Number::int(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Computed in exact arithmetic with a zero error bound.
    Exact,
    /// Exact arithmetic on a finite stage; the bound covers the truncation.
    Truncated,
    /// Passed through a rounded, regularized dense solve.
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    pub value: Number,
    pub error_bound: Number,
    pub provenance: Provenance,
    /// Outcome of a check, for records that are one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
}

impl Record {
    pub fn new(name: &str, value: Number, error_bound: Number, provenance: Provenance) -> Self {
        Record {
            name: name.to_string(),
            params: BTreeMap::new(),
            value,
            error_bound,
            provenance,
            verdict: None,
        }
    }

    /// Exact value with zero bound.
    pub fn exact(name: &str, q: &Q) -> Self {
        Self::new(name, Number::exact(q), Number::zero(), Provenance::Exact)
    }

    /// Exact-arithmetic value with a truncation bound; provenance follows
    /// from whether the bound vanishes.
    pub fn bounded(name: &str, q: &Q, bound: &Q) -> Self {
        let p = if bound.is_zero() { Provenance::Exact } else { Provenance::Truncated };
        Self::new(name, Number::exact(q), Number::exact(bound), p)
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), v.into());
        self
    }

    pub fn verdict(mut self, ok: bool) -> Self {
        self.verdict = Some(ok);
        self
    }
}

/// A CSV table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Columns `k, value_numerator, value_denominator, value_decimal, error_bound`.
    pub fn series(name: &str, seq: &CorrelationSequence) -> Self {
        let mut t = Table::new(name, &["k", "value_numerator", "value_denominator", "value_decimal", "error_bound"]);
        for (k, v, e) in seq.iter() {
            t.rows.push(vec![
                k.to_string(),
                v.numer().to_string(),
                v.denom().to_string(),
                real::rational_to_decimal(v, DIGITS),
                e.to_string(),
            ]);
        }
        t
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::io(format!("encoding {}", self.name), e.into());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(format!("encoding {}", self.name), e.into_error()))?;
        write_atomic(path, &bytes)
    }
}

/// What one item produces; this is also the cached payload.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemOutput {
    pub records: Vec<Record>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemReport {
    pub index: usize,
    pub kind: Kind,
    pub cache_key: String,
    pub seed: u64,
    pub records: Vec<Record>,
    /// CSV files written next to the report.
    pub tables: Vec<String>,
    pub warnings: Vec<String>,
}

/// Volatile facts about one run. Excluded from reproducibility checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub threads: usize,
    pub cache_dir: String,
    pub cache_hits: Vec<bool>,
    pub timings_ms: Vec<u128>,
    pub total_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub code_version: String,
    pub kind: Kind,
    /// The resolved items, defaults filled in.
    pub config: Value,
    pub items: Vec<ItemReport>,
    pub run: RunInfo,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report without its `run` section, as pretty JSON.
    pub fn payload_json(&self) -> String {
        payload_of(&serde_json::to_value(self).expect("report serializes"))
    }
}

/// Strips `run` from a parsed report.
pub fn payload_of(report: &Value) -> String {
    let mut v = report.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("run");
    }
    serde_json::to_string_pretty(&v).expect("value serializes")
}
