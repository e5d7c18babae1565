//! Experiment configuration: a TOML document, validated with the path of
//! the offending key in every error.

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use rankone::{RankOneSpec, StageSpec, Q};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::CliError;

pub const DEFAULT_TOL: &str = "1/1000";
pub const DEFAULT_SEED: u64 = 20260101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Build,
    Correlate,
    Weaklimit,
    Spectrum,
    Convolution,
    Cyclic,
    Lemma,
    Report,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Build => "build",
            Kind::Correlate => "correlate",
            Kind::Weaklimit => "weaklimit",
            Kind::Spectrum => "spectrum",
            Kind::Convolution => "convolution",
            Kind::Cyclic => "cyclic",
            Kind::Lemma => "lemma",
            Kind::Report => "report",
        }
    }
}

/// Exact rational. Written in configs as an integer or as a string such as
/// `"3/4"`, `"0.001"` or `"1e-6"`; always echoed as a reduced fraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rat(pub Q);

impl Rat {
    pub fn parse(s: &str) -> Option<Rat> {
        let s = s.trim();
        if s.contains('/') {
            return Q::from_str(s).ok().map(Rat);
        }
        let (mantissa, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
            None => (s, 0),
        };
        let (neg, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if int.is_empty() && frac.is_empty() || !(int.chars().chain(frac.chars())).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let numer = Q::from_str(&format!("{int}{frac}")).ok()?;
        let scale = exp - frac.len() as i32;
        let ten = Q::from_integer(10.into());
        let value = if scale >= 0 { numer * ten.pow(scale) } else { numer / ten.pow(-scale) };
        Some(Rat(if neg { -value } else { value }))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RatVisitor;
        impl Visitor<'_> for RatVisitor {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a rational such as 3, \"3/4\", \"0.001\" or \"1e-6\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
                Ok(Rat(Q::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
                Ok(Rat(Q::from_integer(v.into())))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
                Rat::parse(v).ok_or_else(|| E::custom(format!("cannot read {v:?} as a rational")))
            }
        }
        d.deserialize_any(RatVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Staircase,
    Chacon,
    Custom,
}

/// Cut sequences described by a rule instead of a list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CutRule {
    /// `r_n = r` for `count` stages.
    Constant { r: u64, count: usize },
    /// `r_n = start + step (n - 1)`.
    Linear { start: u64, step: u64, count: usize },
    /// `base, between[0], base, between[1], ...`.
    Interleave { base: u64, between: Vec<u64> },
}

impl CutRule {
    fn cuts(&self) -> Vec<u64> {
        match self {
            CutRule::Constant { r, count } => vec![*r; *count],
            CutRule::Linear { start, step, count } => (0..*count as u64).map(|i| start + step * i).collect(),
            CutRule::Interleave { base, between } => between.iter().flat_map(|&b| [*base, b]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionConfig {
    pub preset: PresetName,
    #[serde(default = "one")]
    pub h1: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y1: Option<Rat>,
    /// Staircase cut sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<CutRule>,
    /// Chacon stage count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    /// Custom spacer counts, one list per stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacers: Option<Vec<Vec<u64>>>,
    /// Number of cuts to apply; defaults to every declared stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_budget: Option<usize>,
}

fn one() -> u64 {
    1
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ConstructionConfig {
    /// Spec plus stage budget. Shape problems are config errors; reservoir
    /// exhaustion is left to the build.
    pub fn to_spec(&self, path: &str) -> Result<(RankOneSpec, usize), CliError> {
        if self.h1 == 0 {
            return Err(config_err(format!("{path}.h1"), "must be positive"));
        }
        let set = [
            ("cuts", self.cuts.is_some()),
            ("rule", self.rule.is_some()),
            ("stages", self.stages.is_some()),
            ("spacers", self.spacers.is_some()),
        ];
        let allowed: &[&str] = match self.preset {
            PresetName::Staircase => &["cuts", "rule"],
            PresetName::Chacon => &["stages"],
            PresetName::Custom => &["spacers"],
        };
        for (key, present) in set {
            if present && !allowed.contains(&key) {
                return Err(config_err(format!("{path}.{key}"), format!("not used by this preset (use {})", allowed.join(" or "))));
            }
        }
        if set.iter().filter(|(_, p)| *p).count() != 1 {
            return Err(config_err(path, format!("exactly one of {} is required", allowed.join(" or "))));
        }

        let spec = match self.preset {
            PresetName::Staircase => {
                let (cuts, key) = match (&self.cuts, &self.rule) {
                    (Some(c), _) => (c.clone(), "cuts"),
                    (_, Some(r)) => (r.cuts(), "rule"),
                    _ => unreachable!(),
                };
                if cuts.is_empty() {
                    return Err(config_err(format!("{path}.{key}"), "no stages"));
                }
                for (i, &r) in cuts.iter().enumerate() {
                    if r < 2 {
                        return Err(config_err(format!("{path}.{key}[{i}]"), format!("cut count {r} is below 2")));
                    }
                }
                let cuts: Vec<usize> = cuts.iter().map(|&r| r as usize).collect();
                RankOneSpec::staircase(self.h1, &cuts)
            }
            PresetName::Chacon => {
                let n = self.stages.unwrap();
                if n == 0 {
                    return Err(config_err(format!("{path}.stages"), "must be positive"));
                }
                RankOneSpec::chacon(self.h1, n)
            }
            PresetName::Custom => {
                let sp = self.spacers.clone().unwrap();
                if sp.is_empty() {
                    return Err(config_err(format!("{path}.spacers"), "no stages"));
                }
                for (i, s) in sp.iter().enumerate() {
                    if let Err(e) = StageSpec::new(s.clone()) {
                        return Err(config_err(format!("{path}.spacers[{i}]"), e.to_string()));
                    }
                }
                RankOneSpec::custom(self.h1, sp)
            }
        }
        .map_err(|e| config_err(path, e.to_string()))?;

        let spec = match (&self.w1, &self.y1) {
            (None, None) => spec,
            (Some(w), Some(y)) => spec
                .with_measure(w.0.clone(), y.0.clone())
                .map_err(|e| config_err(format!("{path}.w1"), e.to_string()))?,
            (Some(_), None) => return Err(config_err(format!("{path}.y1"), "required together with w1")),
            (None, Some(_)) => return Err(config_err(format!("{path}.w1"), "required together with y1")),
        };
        let declared = spec.stages().len();
        let budget = self.stage_budget.unwrap_or(declared);
        if budget == 0 || budget > declared {
            return Err(config_err(
                format!("{path}.stage_budget"),
                format!("{budget} is not between 1 and the {declared} declared stages"),
            ));
        }
        Ok((spec, budget))
    }
}

/// A step function on the construction: an indicator of levels, explicit
/// coefficients, or the seeded random test vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub stage: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Rat>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub random: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Rat>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub zero_mean: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl FunctionSpec {
    pub fn levels(stage: usize, levels: &[u64]) -> Self {
        FunctionSpec {
            stage,
            levels: Some(levels.to_vec()),
            coeffs: None,
            random: false,
            gamma: None,
            rho: None,
            zero_mean: false,
        }
    }

    pub fn random(stage: usize) -> Self {
        FunctionSpec {
            stage,
            levels: None,
            coeffs: None,
            random: true,
            gamma: None,
            rho: None,
            zero_mean: false,
        }
    }

    fn check_shape(&self, path: &str) -> Result<(), CliError> {
        if self.stage == 0 {
            return Err(config_err(format!("{path}.stage"), "stages start at 1"));
        }
        let sources = [self.levels.is_some(), self.coeffs.is_some(), self.random];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(config_err(path, "exactly one of levels, coeffs or random = true is required"));
        }
        if self.random && (self.gamma.is_some() || self.rho.is_some()) {
            return Err(config_err(path, "random vectors are already zero-mean; gamma and rho are not allowed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateParams {
    pub f: FunctionSpec,
    /// Defaults to `f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FunctionSpec>,
    #[serde(default = "default_lags")]
    pub lags: [i64; 2],
}

fn default_lags() -> [i64; 2] {
    [0, 20]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    /// `P_q`.
    Cesaro,
    /// `a I + (1 - a) U`.
    Affine,
    /// `(I + Theta) / 2`.
    HalfMixing,
    Theta,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakLimitParams {
    #[serde(default = "two")]
    pub family_stage: usize,
    #[serde(default = "default_target")]
    pub target: TargetName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Rat>,
    /// Stages `n` whose heights give the probed powers `+-h_n`. Defaults to
    /// the stages cut into `q` pieces (Cesaro target) or every cut stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub fit: bool,
}

impl Default for WeakLimitParams {
    fn default() -> Self {
        WeakLimitParams {
            family_stage: 2,
            target: TargetName::Cesaro,
            q: None,
            a: None,
            stages: None,
            fit: false,
        }
    }
}

fn two() -> usize {
    2
}

fn default_target() -> TargetName {
    TargetName::Cesaro
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(default = "default_vector")]
    pub f: FunctionSpec,
    #[serde(default = "default_max_lag")]
    pub max_lag: u64,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_grid_factor")]
    pub grid_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_window: Option<usize>,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            f: default_vector(),
            max_lag: default_max_lag(),
            orders: default_orders(),
            grid_factor: default_grid_factor(),
            pd_window: None,
        }
    }
}

fn default_vector() -> FunctionSpec {
    FunctionSpec::random(2)
}

fn default_max_lag() -> u64 {
    256
}

fn default_orders() -> Vec<usize> {
    vec![16, 32, 64, 128]
}

fn default_grid_factor() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionParams {
    #[serde(default = "default_vector")]
    pub f: FunctionSpec,
    #[serde(default = "default_max_lag")]
    pub max_lag: u64,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    /// Convolution powers compared by affinity.
    #[serde(default = "default_pairs")]
    pub pairs: Vec<[u32; 2]>,
    #[serde(default = "default_two_path_order")]
    pub two_path_order: usize,
    #[serde(default = "default_two_path_tol")]
    pub two_path_tol: f64,
}

impl Default for ConvolutionParams {
    fn default() -> Self {
        ConvolutionParams {
            f: default_vector(),
            max_lag: default_max_lag(),
            orders: default_orders(),
            pairs: default_pairs(),
            two_path_order: default_two_path_order(),
            two_path_tol: default_two_path_tol(),
        }
    }
}

fn default_pairs() -> Vec<[u32; 2]> {
    vec![[1, 2], [2, 3]]
}

fn default_two_path_order() -> usize {
    64
}

fn default_two_path_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpName {
    Uxu,
    R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicParams {
    /// The set `B`, as an indicator. Defaults to the stage-2 base.
    #[serde(default = "default_base")]
    pub base: FunctionSpec,
    /// `(i, j)` of the target `F_{i,j}`.
    #[serde(default = "default_target_ij")]
    pub target: [i64; 2],
    #[serde(default = "default_op")]
    pub op: OpName,
    #[serde(default = "default_spans")]
    pub spans: Vec<usize>,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

impl Default for CyclicParams {
    fn default() -> Self {
        CyclicParams {
            base: default_base(),
            target: default_target_ij(),
            op: default_op(),
            spans: default_spans(),
            cutoff: default_cutoff(),
        }
    }
}

fn default_base() -> FunctionSpec {
    FunctionSpec::levels(2, &[0])
}

fn default_target_ij() -> [i64; 2] {
    [1, 0]
}

fn default_op() -> OpName {
    OpName::Uxu
}

fn default_spans() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_cutoff() -> f64 {
    1e-24
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaParams {
    #[serde(default = "default_qs")]
    pub qs: Vec<i64>,
    #[serde(default = "default_mus")]
    pub mus: Vec<Rat>,
    #[serde(default = "default_up_a")]
    pub up_a: Rat,
    #[serde(default = "default_up_b")]
    pub up_b: Rat,
    #[serde(default = "default_up_ps")]
    pub up_ps: Vec<u32>,
    #[serde(default = "default_w_a")]
    pub w_a: Rat,
    #[serde(default = "default_w_k")]
    pub w_k: u32,
    #[serde(default = "default_w_ns")]
    pub w_ns: Vec<u32>,
}

impl Default for LemmaParams {
    fn default() -> Self {
        LemmaParams {
            qs: default_qs(),
            mus: default_mus(),
            up_a: default_up_a(),
            up_b: default_up_b(),
            up_ps: default_up_ps(),
            w_a: default_w_a(),
            w_k: default_w_k(),
            w_ns: default_w_ns(),
        }
    }
}

fn rat(s: &str) -> Rat {
    Rat::parse(s).expect("literal rational")
}

fn default_qs() -> Vec<i64> {
    (1..=6).collect()
}

fn default_mus() -> Vec<Rat> {
    vec![rat("1/8"), rat("1/10"), rat("3/7")]
}

fn default_up_a() -> Rat {
    rat("1/3")
}

fn default_up_b() -> Rat {
    rat("2/3")
}

fn default_up_ps() -> Vec<u32> {
    vec![1, 2, 3]
}

fn default_w_a() -> Rat {
    rat("1/2")
}

fn default_w_k() -> u32 {
    20
}

fn default_w_ns() -> Vec<u32> {
    vec![1, 2, 3]
}

/// The document as written. Kind-specific tables are optional and fall
/// back to defaults; `items` is only read by `report`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub tol: Option<Rat>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub construction: Option<ConstructionConfig>,
    #[serde(default)]
    pub correlate: Option<CorrelateParams>,
    #[serde(default)]
    pub weaklimit: Option<WeakLimitParams>,
    #[serde(default)]
    pub spectrum: Option<SpectrumParams>,
    #[serde(default)]
    pub convolution: Option<ConvolutionParams>,
    #[serde(default)]
    pub cyclic: Option<CyclicParams>,
    #[serde(default)]
    pub lemma: Option<LemmaParams>,
    #[serde(default)]
    pub items: Vec<ExperimentConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().to_string();
            config_err(if path == "." { "(root)".to_string() } else { path }, message)
        })
    }
}

/// Command-line values that replace config values in every item.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub stages: Option<usize>,
    pub tol: Option<Rat>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Params {
    Build,
    Correlate(CorrelateParams),
    Weaklimit(WeakLimitParams),
    Spectrum(SpectrumParams),
    Convolution(ConvolutionParams),
    Cyclic(CyclicParams),
    Lemma(LemmaParams),
}

/// One fully resolved unit of work. Its canonical JSON form is the cache
/// fragment, so every input that can change the output lives here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Item {
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionConfig>,
    pub tol: Rat,
    pub seed: u64,
    pub params: Params,
}

/// Resolves the config for the subcommand `kind` into work items.
pub fn resolve(cfg: &ExperimentConfig, kind: Kind, ov: &Overrides) -> Result<Vec<Item>, CliError> {
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(config_err("kind", format!("config is for {}, subcommand is {}", k.name(), kind.name())));
        }
    }
    if kind != Kind::Report {
        if !cfg.items.is_empty() {
            return Err(config_err("items", "only the report subcommand runs item lists"));
        }
        return Ok(vec![resolve_item(cfg, None, kind, ov, "")?]);
    }
    if cfg.items.is_empty() {
        return Err(config_err("items", "report needs at least one item"));
    }
    cfg.items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let path = format!("items[{i}]");
            let k = item.kind.ok_or_else(|| config_err(format!("{path}.kind"), "missing"))?;
            if k == Kind::Report {
                return Err(config_err(format!("{path}.kind"), "items cannot nest reports"));
            }
            if !item.items.is_empty() {
                return Err(config_err(format!("{path}.items"), "items cannot nest"));
            }
            resolve_item(item, Some(cfg), k, ov, &format!("{path}."))
        })
        .collect()
}

fn resolve_item(cfg: &ExperimentConfig, parent: Option<&ExperimentConfig>, kind: Kind, ov: &Overrides, prefix: &str) -> Result<Item, CliError> {
    let tol = ov
        .tol
        .clone()
        .or_else(|| cfg.tol.clone())
        .or_else(|| parent.and_then(|p| p.tol.clone()))
        .unwrap_or_else(|| rat(DEFAULT_TOL));
    if tol.0.is_negative() {
        return Err(config_err(format!("{prefix}tol"), "must not be negative"));
    }
    let seed = ov.seed.or(cfg.seed).or_else(|| parent.and_then(|p| p.seed)).unwrap_or(DEFAULT_SEED);
    let (mut construction, cpath) = match (&cfg.construction, parent.and_then(|p| p.construction.as_ref())) {
        (Some(c), _) => (Some(c.clone()), format!("{prefix}construction")),
        (None, Some(c)) => (Some(c.clone()), "construction".to_string()),
        (None, None) => (None, format!("{prefix}construction")),
    };
    if let (Some(c), Some(n)) = (construction.as_mut(), ov.stages) {
        c.stage_budget = Some(n);
    }
    let params = match kind {
        Kind::Build => Params::Build,
        Kind::Correlate => Params::Correlate(
            cfg.correlate
                .clone()
                .ok_or_else(|| config_err(format!("{prefix}correlate"), "missing (needs at least f)"))?,
        ),
        Kind::Weaklimit => Params::Weaklimit(cfg.weaklimit.clone().unwrap_or_default()),
        Kind::Spectrum => Params::Spectrum(cfg.spectrum.clone().unwrap_or_default()),
        Kind::Convolution => Params::Convolution(cfg.convolution.clone().unwrap_or_default()),
        Kind::Cyclic => Params::Cyclic(cfg.cyclic.clone().unwrap_or_default()),
        Kind::Lemma => Params::Lemma(cfg.lemma.clone().unwrap_or_default()),
        Kind::Report => unreachable!(),
    };
    if kind == Kind::Lemma {
        construction = None;
    } else {
        match &construction {
            Some(c) => {
                c.to_spec(&cpath)?;
            }
            None => return Err(config_err(cpath, "missing")),
        }
    }
    check_params(&params, prefix)?;
    Ok(Item {
        kind,
        construction,
        tol,
        seed,
        params,
    })
}

fn check_params(p: &Params, prefix: &str) -> Result<(), CliError> {
    match p {
        Params::Build => {}
        Params::Correlate(c) => {
            c.f.check_shape(&format!("{prefix}correlate.f"))?;
            if let Some(g) = &c.g {
                g.check_shape(&format!("{prefix}correlate.g"))?;
            }
            if c.lags[0] > c.lags[1] {
                return Err(config_err(format!("{prefix}correlate.lags"), "lower lag exceeds upper lag"));
            }
        }
        Params::Weaklimit(w) => {
            let path = format!("{prefix}weaklimit");
            if w.family_stage == 0 {
                return Err(config_err(format!("{path}.family_stage"), "stages start at 1"));
            }
            match w.target {
                TargetName::Cesaro => match w.q {
                    Some(q) if q >= 2 => {}
                    Some(q) => return Err(config_err(format!("{path}.q"), format!("order {q} is below 2"))),
                    None => return Err(config_err(format!("{path}.q"), "required for the cesaro target")),
                },
                TargetName::Affine => match &w.a {
                    Some(a) if a.0.is_positive() && a.0 < Q::from_integer(1.into()) => {}
                    Some(a) => return Err(config_err(format!("{path}.a"), format!("{a} is not in (0, 1)"))),
                    None => return Err(config_err(format!("{path}.a"), "required for the affine target")),
                },
                _ => {}
            }
        }
        Params::Spectrum(s) => {
            s.f.check_shape(&format!("{prefix}spectrum.f"))?;
            check_orders(&s.orders, s.max_lag, &format!("{prefix}spectrum"))?;
            if s.grid_factor < 2 {
                return Err(config_err(format!("{prefix}spectrum.grid_factor"), "must be at least 2"));
            }
        }
        Params::Convolution(c) => {
            let path = format!("{prefix}convolution");
            c.f.check_shape(&format!("{path}.f"))?;
            check_orders(&c.orders, c.max_lag, &path)?;
            for (i, pair) in c.pairs.iter().enumerate() {
                if pair.contains(&0) {
                    return Err(config_err(format!("{path}.pairs[{i}]"), "convolution powers start at 1"));
                }
            }
            if c.two_path_order == 0 || c.two_path_order as u64 > c.max_lag + 1 {
                return Err(config_err(format!("{path}.two_path_order"), "must be between 1 and max_lag + 1"));
            }
            if c.two_path_tol.is_nan() || c.two_path_tol <= 0.0 {
                return Err(config_err(format!("{path}.two_path_tol"), "must be positive"));
            }
        }
        Params::Cyclic(c) => {
            let path = format!("{prefix}cyclic");
            c.base.check_shape(&format!("{path}.base"))?;
            if c.spans.is_empty() {
                return Err(config_err(format!("{path}.spans"), "no spans"));
            }
            if c.cutoff.is_nan() || c.cutoff < 0.0 || c.cutoff >= 1.0 {
                return Err(config_err(format!("{path}.cutoff"), "must be in [0, 1)"));
            }
        }
        Params::Lemma(l) => {
            for (i, q) in l.qs.iter().enumerate() {
                if *q < 0 {
                    return Err(config_err(format!("{prefix}lemma.qs[{i}]"), "must not be negative"));
                }
            }
            for (i, mu) in l.mus.iter().enumerate() {
                if mu.0.is_negative() || mu.0.is_zero() {
                    return Err(config_err(format!("{prefix}lemma.mus[{i}]"), "must be positive"));
                }
            }
            if l.w_k == 0 {
                return Err(config_err(format!("{prefix}lemma.w_k"), "must be at least 1"));
            }
        }
    }
    Ok(())
}

fn check_orders(orders: &[usize], max_lag: u64, path: &str) -> Result<(), CliError> {
    if orders.is_empty() {
        return Err(config_err(format!("{path}.orders"), "no Fejer orders"));
    }
    for (i, &m) in orders.iter().enumerate() {
        if m == 0 || m as u64 > max_lag + 1 {
            return Err(config_err(format!("{path}.orders[{i}]"), format!("order {m} needs lags up to {}", m.saturating_sub(1))));
        }
    }
    Ok(())
}
