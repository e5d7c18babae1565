use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rankone_cli::cache::Cache;
use rankone_cli::config::{ExperimentConfig, Kind, Overrides, Rat};
use rankone_cli::error::CliError;
use rankone_cli::{load_config, run, RunOptions};

/// Exact experiments on rank-one cutting-and-stacking transformations.
#[derive(Parser)]
#[command(name = "rankone", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the towers and report heights, widths and residual mass.
    Build(Common),
    /// Correlations <U^k f, g> over a lag range.
    Correlate(Common),
    /// Distances from U^{+-h_n} to a candidate weak limit.
    Weaklimit(Common),
    /// Autocorrelation and Fejer density estimates.
    Spectrum(Common),
    /// Convolution powers and their Hellinger affinities.
    Convolution(Common),
    /// Residuals of a target tensor against a finite cyclic span.
    Cyclic(Common),
    /// Symbolic tensor identities (no construction needed).
    Lemma(Common),
    /// Several items from one config, run concurrently.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and CSV tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the stage budget of every construction.
    #[arg(long)]
    stages: Option<usize>,
    /// Override the tolerance, e.g. 1/1000 or 1e-6.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Do not read cached results (new results are still stored).
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(kind: Kind, args: Common) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let tol = match &args.tol {
        Some(t) => Some(Rat::parse(t).ok_or_else(|| CliError::Config {
            path: "--tol".into(),
            message: format!("cannot read {t:?} as a rational"),
        })?),
        None => None,
    };
    if args.threads == Some(0) {
        return Err(CliError::Config {
            path: "--threads".into(),
            message: "must be at least 1".into(),
        });
    }
    let ov = Overrides {
        stages: args.stages,
        tol,
        seed: args.seed,
    };
    let opts = RunOptions {
        out: args.out.clone(),
        cache: Cache::new(Cache::default_dir(), !args.no_cache),
        threads: args.threads,
    };
    let report = run(&cfg, kind, &ov, &opts)?;
    let hits = report.run.cache_hits.iter().filter(|h| **h).count();
    eprintln!(
        "{}: {} item(s), {} cached, report in {}",
        kind.name(),
        report.items.len(),
        hits,
        args.out.join("report.json").display()
    );
    for item in &report.items {
        for w in &item.warnings {
            eprintln!("warning (item {}): {w}", item.index);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, args) = match cli.command {
        Command::Build(a) => (Kind::Build, a),
        Command::Correlate(a) => (Kind::Correlate, a),
        Command::Weaklimit(a) => (Kind::Weaklimit, a),
        Command::Spectrum(a) => (Kind::Spectrum, a),
        Command::Convolution(a) => (Kind::Convolution, a),
        Command::Cyclic(a) => (Kind::Cyclic, a),
        Command::Lemma(a) => (Kind::Lemma, a),
        Command::Report(a) => (Kind::Report, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
