//! One runner per experiment kind. Each turns a resolved item into records
//! and tables; orchestration and caching live in `lib.rs`.

use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rankone::product::{
    cyclic_residual, verify_lemma_identity, verify_up_expansion, verify_w_relation, BaseRegistry, CyclicOp, FormalTensor,
    TensorPairing,
};
use rankone::real::{self, Real};
use rankone::spectral::{
    autocorrelation, check_positive_definite, circular_self_convolution, convolution_power, fejer_density, overlap_trend,
    random_test_vector, renormalize, squared_fejer_density, SpectralEstimate,
};
use rankone::weak::{cesaro_expr, fit_two_term, scan_both_signs, OperatorExpr, TestFamily};
use rankone::{build_construction, Construction, CorrelationSequence, Correlator, StepFn, Q};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cache::Cache;
use crate::config::{
    ConvolutionParams, CorrelateParams, CyclicParams, FunctionSpec, Item, LemmaParams, OpName, Params, SpectrumParams,
    TargetName, WeakLimitParams,
};
use crate::error::{CliError, Context};
use crate::report::{ItemOutput, Number, Provenance, Record, Table};

pub fn run_item(item: &Item, cache: &Cache) -> Result<ItemOutput, CliError> {
    match &item.params {
        Params::Build => build(item),
        Params::Correlate(p) => correlate(item, p),
        Params::Weaklimit(p) => weaklimit(item, p),
        Params::Spectrum(p) => spectrum(item, p, cache),
        Params::Convolution(p) => convolution(item, p, cache),
        Params::Cyclic(p) => cyclic(item, p),
        Params::Lemma(p) => lemma(p),
    }
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn construct(item: &Item) -> Result<Construction, CliError> {
    let cfg = item.construction.as_ref().expect("resolved items carry a construction");
    let (spec, budget) = cfg.to_spec("construction")?;
    build_construction(&spec, budget).context(|| "building the construction".into())
}

/// Builds the step function described by `spec`, checking it against the
/// built stages.
fn step_function(c: &Construction, spec: &FunctionSpec, seed: u64, path: &str) -> Result<StepFn, CliError> {
    if spec.stage > c.depth() {
        return Err(config_err(
            format!("{path}.stage"),
            format!("stage {} not built (depth {})", spec.stage, c.depth()),
        ));
    }
    let h = c.height(spec.stage).context(|| path.to_string())?;
    if spec.random {
        return random_test_vector(c, spec.stage, seed).context(|| format!("{path}: random vector"));
    }
    let coeffs: Vec<Q> = if let Some(levels) = &spec.levels {
        let mut v = vec![Q::zero(); h as usize];
        for (i, &l) in levels.iter().enumerate() {
            if l >= h {
                return Err(config_err(format!("{path}.levels[{i}]"), format!("level {l} not below height {h}")));
            }
            v[l as usize] = Q::one();
        }
        v
    } else {
        let coeffs = spec.coeffs.as_ref().expect("shape checked");
        if coeffs.len() as u64 != h {
            return Err(config_err(
                format!("{path}.coeffs"),
                format!("{} coefficients for a stage of height {h}", coeffs.len()),
            ));
        }
        coeffs.iter().map(|r| r.0.clone()).collect()
    };
    let gamma = spec.gamma.as_ref().map(|r| r.0.clone()).unwrap_or_else(Q::zero);
    let rho = spec.rho.as_ref().map(|r| r.0.clone()).unwrap_or_else(Q::zero);
    let f = StepFn::new(c, spec.stage, coeffs, gamma, rho).context(|| path.to_string())?;
    if spec.zero_mean {
        return f.zero_mean(c).context(|| path.to_string());
    }
    Ok(f)
}

fn build(item: &Item) -> Result<ItemOutput, CliError> {
    let c = construct(item)?;
    let mut out = ItemOutput::default();
    let mut table = Table::new("stages", &["n", "height", "width", "residual", "cuts"]);
    for st in c.stages() {
        let cuts = c.spec().stages().get(st.n - 1).filter(|_| st.n < c.depth()).map(|s| s.cuts());
        let h = Q::from_integer(st.h.into());
        let closure = &h * &st.w + &st.y;
        out.records.push(Record::new("height", Number::int(st.h), Number::zero(), Provenance::Exact).with("stage", st.n));
        out.records.push(Record::exact("width", &st.w).with("stage", st.n));
        out.records.push(Record::exact("residual", &st.y).with("stage", st.n));
        out.records.push(Record::exact("mass_closure", &closure).with("stage", st.n).verdict(closure.is_one()));
        if let Some(r) = cuts {
            out.records.push(Record::new("cuts", Number::int(r as u64), Number::zero(), Provenance::Exact).with("stage", st.n));
        }
        table.rows.push(vec![
            st.n.to_string(),
            st.h.to_string(),
            st.w.to_string(),
            st.y.to_string(),
            cuts.map(|r| r.to_string()).unwrap_or_default(),
        ]);
    }
    out.tables.push(table);
    Ok(out)
}

fn correlate(item: &Item, p: &CorrelateParams) -> Result<ItemOutput, CliError> {
    let c = construct(item)?;
    let f = step_function(&c, &p.f, item.seed, "correlate.f")?;
    let g = match &p.g {
        Some(g) => step_function(&c, g, item.seed, "correlate.g")?,
        None => f.clone(),
    };
    let cor = Correlator::new(&c);
    let seq = cor
        .sequence(&f, &g, p.lags[0]..=p.lags[1], &item.tol.0)
        .context(|| format!("correlations over lags {}..={}", p.lags[0], p.lags[1]))?;
    let mut out = ItemOutput::default();
    let mut worst = Q::zero();
    for (k, v, e) in seq.iter() {
        out.records.push(Record::bounded("correlation", v, e).with("k", k));
        if e > &worst {
            worst = e.clone();
        }
    }
    out.records.push(Record::exact("max_error_bound", &worst));
    out.tables.push(Table::series("correlation", &seq));
    Ok(out)
}

fn target_expr(p: &WeakLimitParams) -> Result<OperatorExpr, CliError> {
    Ok(match p.target {
        TargetName::Cesaro => cesaro_expr(p.q.expect("checked")).context(|| "weaklimit.q".into())?,
        TargetName::Affine => OperatorExpr::affine(&p.a.as_ref().expect("checked").0),
        TargetName::HalfMixing => OperatorExpr::half_mixing(),
        TargetName::Theta => OperatorExpr::theta(),
        TargetName::Identity => OperatorExpr::identity(),
    })
}

fn weaklimit(item: &Item, p: &WeakLimitParams) -> Result<ItemOutput, CliError> {
    let c = construct(item)?;
    if p.family_stage > c.depth() {
        return Err(config_err("weaklimit.family_stage", format!("stage {} not built", p.family_stage)));
    }
    let fam = TestFamily::level_indicators(&c, p.family_stage).context(|| "test family".into())?;
    let e = target_expr(p)?;
    // stage n is cut into r_n pieces; the last built stage is never cut
    let cut = |n: usize| c.spec().stages()[n - 1].cuts();
    let stages: Vec<usize> = match &p.stages {
        Some(list) => {
            for (i, &n) in list.iter().enumerate() {
                if n == 0 || n > c.depth() {
                    return Err(config_err(format!("weaklimit.stages[{i}]"), format!("stage {n} not built")));
                }
            }
            list.clone()
        }
        None => {
            let all = 1..c.depth();
            match p.target {
                TargetName::Cesaro => {
                    let q = p.q.expect("checked") as usize;
                    let hits: Vec<usize> = all.filter(|&n| cut(n) == q).collect();
                    if hits.is_empty() {
                        return Err(config_err("weaklimit.stages", format!("no built stage is cut into {q} pieces")));
                    }
                    hits
                }
                _ => all.collect(),
            }
        }
    };

    let cor = Correlator::new(&c);
    let mut out = ItemOutput::default();
    let mut table = Table::new(
        "weak_distances",
        &["stage", "height", "cuts", "distance_plus", "bound_plus", "distance_minus", "bound_minus", "closer_sign"],
    );
    for &n in &stages {
        let h = c.height(n).context(|| format!("stage {n}"))?;
        let scan = scan_both_signs(&cor, h, &e, &fam, &item.tol.0)
            .context(|| format!("weak distance to {} at powers +-{h}", e.label()))?;
        for d in [&scan.plus, &scan.minus] {
            out.records.push(
                Record::new("weak_distance", Number::real(&d.distance), Number::real(&d.error_bound), Provenance::Truncated)
                    .with("stage", n)
                    .with("power", d.power)
                    .with("target", e.label()),
            );
        }
        let sign = scan.closer_sign();
        out.records.push(
            Record::new("closer_sign", Number::int(sign), Number::zero(), Provenance::Exact)
                .with("stage", n)
                .with("target", e.label()),
        );
        if p.fit {
            let fit = fit_two_term(&c, sign * h as i64, &fam, &item.tol.0).context(|| format!("two-term fit at stage {n}"))?;
            out.records.push(
                Record::new("two_term_a", Number::real(&fit.a), Number::real(&fit.input_error), Provenance::Truncated)
                    .with("stage", n)
                    .with("power", sign * h as i64),
            );
            out.records.push(
                Record::new("two_term_residual", Number::real(&fit.residual), Number::real(&fit.input_error), Provenance::Truncated)
                    .with("stage", n),
            );
        }
        let cuts = if n < c.depth() { cut(n).to_string() } else { String::new() };
        table.rows.push(vec![
            n.to_string(),
            h.to_string(),
            cuts,
            real::to_decimal(&scan.plus.distance, crate::report::DIGITS),
            real::to_decimal(&scan.plus.error_bound, crate::report::DIGITS),
            real::to_decimal(&scan.minus.distance, crate::report::DIGITS),
            real::to_decimal(&scan.minus.error_bound, crate::report::DIGITS),
            sign.to_string(),
        ]);
    }
    out.tables.push(table);
    Ok(out)
}

/// Cached form of a correlation sequence: exact fraction strings.
#[derive(Serialize, Deserialize)]
struct StoredSequence {
    first_lag: i64,
    description: String,
    values: Vec<String>,
    bounds: Vec<String>,
}

impl StoredSequence {
    fn from_seq(s: &CorrelationSequence) -> Self {
        StoredSequence {
            first_lag: s.first_lag(),
            description: s.description().to_string(),
            values: s.values().iter().map(|v| v.to_string()).collect(),
            bounds: s.bounds().iter().map(|v| v.to_string()).collect(),
        }
    }

    fn to_seq(&self) -> Option<CorrelationSequence> {
        let parse = |v: &Vec<String>| v.iter().map(|x| Q::from_str(x).ok()).collect::<Option<Vec<Q>>>();
        Some(CorrelationSequence::new(
            self.first_lag,
            parse(&self.values)?,
            parse(&self.bounds)?,
            self.description.clone(),
        ))
    }
}

/// Autocorrelation of `f` on `-max_lag..=max_lag`, shared between spectrum
/// and convolution items through the cache.
fn cached_autocorrelation(item: &Item, spec: &FunctionSpec, max_lag: u64, path: &str, cache: &Cache) -> Result<(Construction, CorrelationSequence), CliError> {
    let c = construct(item)?;
    let f = step_function(&c, spec, item.seed, path)?;
    let fragment = json!({
        "sub": "autocorrelation",
        "construction": item.construction,
        "f": spec,
        "seed": if spec.random { Some(item.seed) } else { None },
        "max_lag": max_lag,
        "tol": item.tol,
    });
    if let Some(seq) = cache.get::<StoredSequence>(&fragment).and_then(|s| s.to_seq()) {
        return Ok((c, seq));
    }
    let seq = autocorrelation(&c, &f, max_lag, &item.tol.0).context(|| format!("autocorrelation up to lag {max_lag}"))?;
    cache.put(&fragment, &StoredSequence::from_seq(&seq))?;
    Ok((c, seq))
}

fn density_table(name: &str, e: &SpectralEstimate) -> Table {
    let mut t = Table::new(name, &["j", "theta_over_2pi", "density", "eps_est"]);
    let eps = real::to_decimal(&e.eps_est, crate::report::DIGITS);
    for (j, d) in e.density.iter().enumerate() {
        t.rows.push(vec![
            j.to_string(),
            Q::new((j as i64).into(), (e.grid as i64).into()).to_string(),
            real::to_decimal(d, crate::report::DIGITS),
            eps.clone(),
        ]);
    }
    t
}

fn spectrum(item: &Item, p: &SpectrumParams, cache: &Cache) -> Result<ItemOutput, CliError> {
    let (_, seq) = cached_autocorrelation(item, &p.f, p.max_lag, "spectrum.f", cache)?;
    let mut out = ItemOutput::default();
    let (c0, c0_err) = seq.get(0).expect("lag 0 present");
    out.records.push(Record::bounded("c0", c0, c0_err));
    let c0r = real::from_rational(c0);
    for &m in &p.orders {
        let est = fejer_density(&seq, m, p.grid_factor * m).context(|| format!("Fejer density of order {m}"))?;
        let min = est.min_density();
        out.records.push(
            Record::new("min_density", Number::real(&min), Number::real(&est.eps_est), Provenance::Truncated)
                .with("order", m)
                .verdict(min.clone() + &est.eps_est >= 0),
        );
        let mean = est.grid_mean();
        let rel = if c0.is_zero() { mean.clone().abs() } else { ((mean.clone() - &c0r) / &c0r).abs() };
        out.records.push(
            Record::new("grid_mean", Number::real(&mean), Number::real(&est.eps_est), Provenance::Truncated)
                .with("order", m)
                .with("relative_gap_to_c0", real::to_decimal(&rel, crate::report::DIGITS))
                .verdict(rel <= 1e-9),
        );
        out.tables.push(density_table(&format!("fejer_m{m}"), &est));
    }
    if let Some(w) = p.pd_window {
        let pd = check_positive_definite(&seq, w).context(|| format!("Toeplitz window {w}"))?;
        out.records.push(
            Record::new("toeplitz_min_eigenvalue", Number::real(&pd.min_eigenvalue), Number::real(&pd.error_radius), Provenance::Regularized)
                .with("window", w)
                .verdict(pd.is_plausibly_positive()),
        );
    }
    out.tables.insert(0, Table::series("autocorrelation", &seq));
    Ok(out)
}

fn convolution(item: &Item, p: &ConvolutionParams, cache: &Cache) -> Result<ItemOutput, CliError> {
    let (_, seq) = cached_autocorrelation(item, &p.f, p.max_lag, "convolution.f", cache)?;
    let norm = renormalize(&seq).context(|| "normalizing by c(0)".into())?;
    let sq = convolution_power(&norm, 2).context(|| "convolution square".into())?;
    let mut out = ItemOutput::default();
    let squares_match = sq.values().iter().zip(norm.values()).all(|(a, b)| a == &(b * b));
    out.records.push(
        Record::new("square_coefficients", Number::int(sq.len() as u64), Number::zero(), Provenance::Exact).verdict(squares_match),
    );

    let mut table = Table::new("affinity", &["first", "second", "order", "affinity", "eps_first", "eps_second"]);
    for pair in &p.pairs {
        let (a, b) = (pair[0], pair[1]);
        let trend = overlap_trend(&norm, (a, b), &p.orders).context(|| format!("affinity of powers {a} and {b}"))?;
        let mut nonincreasing = true;
        for (i, pt) in trend.iter().enumerate() {
            if i > 0 && pt.affinity > trend[i - 1].affinity {
                nonincreasing = false;
            }
            let eps = pt.eps_first.clone() + &pt.eps_second;
            out.records.push(
                Record::new("affinity", Number::real(&pt.affinity), Number::real(&eps), Provenance::Truncated)
                    .with("powers", vec![a, b])
                    .with("order", pt.resolution),
            );
            table.rows.push(vec![
                a.to_string(),
                b.to_string(),
                pt.resolution.to_string(),
                real::to_decimal(&pt.affinity, crate::report::DIGITS),
                real::to_decimal(&pt.eps_first, crate::report::DIGITS),
                real::to_decimal(&pt.eps_second, crate::report::DIGITS),
            ]);
        }
        out.records.push(
            Record::new("affinity_nonincreasing", Number::int(trend.len() as u64), Number::zero(), Provenance::Exact)
                .with("powers", vec![a, b])
                .verdict(nonincreasing),
        );
    }
    out.tables.push(table);

    let m = p.two_path_order;
    let grid = 4 * m;
    let e = fejer_density(&norm, m, grid).context(|| format!("Fejer density of order {m}"))?;
    let conv = circular_self_convolution(&e);
    let direct = squared_fejer_density(&sq, m, grid).context(|| format!("squared Fejer density of order {m}"))?;
    let gap = conv
        .density
        .iter()
        .zip(&direct.density)
        .map(|(x, y)| (x.clone() - y).abs())
        .fold(real::zero(), |a, b| if b > a { b } else { a });
    let bound: Real = conv.eps_est.clone() + &direct.eps_est;
    out.records.push(
        Record::new("two_path_gap", Number::real(&gap), Number::real(&bound), Provenance::Truncated)
            .with("order", m)
            .with("tolerance", p.two_path_tol)
            .verdict(gap <= p.two_path_tol),
    );
    Ok(out)
}

fn cyclic(item: &Item, p: &CyclicParams) -> Result<ItemOutput, CliError> {
    let c = construct(item)?;
    let base = step_function(&c, &p.base, item.seed, "cyclic.base")?;
    let mut reg = BaseRegistry::new();
    let b = reg.register_bound(&c, "B", base).context(|| "registering B".into())?;
    let generator = FormalTensor::v(b, 0, 0);
    let target = FormalTensor::f_sym(b, p.target[0], p.target[1]);
    let op = match p.op {
        OpName::Uxu => CyclicOp::UxU,
        OpName::R => CyclicOp::R,
    };
    let pairing = TensorPairing::new(&c, &reg, item.tol.0.clone());
    let mut out = ItemOutput::default();
    let mut table = Table::new("residuals", &["span", "residual", "relative", "kept", "discarded", "error_budget"]);
    let mut previous: Option<Real> = None;
    let mut nonincreasing = true;
    for &m in &p.spans {
        let r = cyclic_residual(&pairing, &generator, op, m, &target, p.cutoff).context(|| format!("cyclic residual at span {m}"))?;
        let rel = r.relative();
        if let Some(prev) = &previous {
            // the only slack is the rounding of the dense solve
            if rel.clone() > prev.clone() + 1e-12 {
                nonincreasing = false;
            }
        }
        previous = Some(rel.clone());
        out.records.push(
            Record::new("residual", Number::real(&r.residual), Number::exact(&r.error_budget), Provenance::Regularized)
                .with("span", m)
                .with("kept", r.kept)
                .with("discarded", r.discarded),
        );
        out.records.push(
            Record::new("relative_residual", Number::real(&rel), Number::exact(&r.error_budget), Provenance::Regularized).with("span", m),
        );
        for w in &r.warnings {
            out.warnings.push(format!("span {m}: {w}"));
        }
        if out.records.iter().all(|r| r.name != "target_norm") {
            out.records.push(Record::new("target_norm", Number::real(&r.target_norm), Number::zero(), Provenance::Regularized));
        }
        table.rows.push(vec![
            m.to_string(),
            real::to_decimal(&r.residual, crate::report::DIGITS),
            real::to_decimal(&rel, crate::report::DIGITS),
            r.kept.to_string(),
            r.discarded.to_string(),
            r.error_budget.to_string(),
        ]);
    }
    out.records.push(
        Record::new("residual_nonincreasing", Number::int(p.spans.len() as u64), Number::zero(), Provenance::Exact).verdict(nonincreasing),
    );
    out.tables.push(table);
    Ok(out)
}

fn lemma(p: &LemmaParams) -> Result<ItemOutput, CliError> {
    let mut out = ItemOutput::default();
    for &q in &p.qs {
        for mu in &p.mus {
            let r = verify_lemma_identity(0, q, &mu.0).context(|| format!("lemma identity at q = {q}"))?;
            let value = match &r.constant {
                Some(k) => Number::exact(k),
                None => Number {
                    exact: None,
                    decimal: "not proportional".into(),
                },
            };
            out.records.push(
                Record::new("lemma_constant", value, Number::zero(), Provenance::Exact)
                    .with("q", q)
                    .with("mu", mu.to_string())
                    .with("expected", r.expected_constant.to_string())
                    .verdict(r.holds),
            );
        }
    }
    for &pw in &p.up_ps {
        let e = verify_up_expansion(&p.up_a.0, &p.up_b.0, pw);
        out.records.push(
            Record::exact("up_corner", &e.corner)
                .with("p", pw)
                .with("a", p.up_a.to_string())
                .with("b", p.up_b.to_string())
                .with("terms", e.table.len())
                .verdict(e.holds),
        );
    }
    for &n in &p.w_ns {
        let w = verify_w_relation(0, &p.w_a.0, p.w_k, n).context(|| format!("W relation at n = {n}"))?;
        let relative = if w.base_mass.is_positive() { &w.tail_mass / &w.base_mass } else { Q::zero() };
        out.records.push(
            Record::exact("w_tail_operator_mass", &w.tail_operator_mass)
                .with("n", n)
                .with("a", p.w_a.to_string())
                .with("K", p.w_k)
                .with("bound", w.bound.to_string())
                .with("scalar", w.scalar.to_string())
                .with("factorizes", w.tail_factorizes)
                .verdict(w.holds()),
        );
        out.records.push(Record::exact("w_tail_relative_mass", &relative).with("n", n).verdict(relative <= w.bound));
    }
    Ok(out)
}
