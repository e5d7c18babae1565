//! Batch front end: reads an experiment config, runs it on the core
//! library and writes a JSON report plus CSV tables.

pub mod cache;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use cache::{cache_key, write_atomic, Cache, CODE_VERSION};
use config::{ExperimentConfig, Item, Kind, Overrides};
use error::CliError;
use report::{ItemOutput, ItemReport, Report, RunInfo};

pub struct RunOptions {
    pub out: PathBuf,
    pub cache: Cache,
    /// Worker threads; `None` uses one per core.
    pub threads: Option<usize>,
}

/// The cache fragment of an item: its canonical JSON form.
pub fn item_fragment(item: &Item) -> serde_json::Value {
    json!({ "item": item })
}

struct Done {
    output: ItemOutput,
    key: String,
    hit: bool,
    millis: u128,
}

fn run_one(item: &Item, cache: &Cache) -> Result<Done, CliError> {
    let start = Instant::now();
    let fragment = item_fragment(item);
    let (output, hit) = cache.fetch(&fragment, || experiments::run_item(item, cache))?;
    Ok(Done {
        output,
        key: cache_key(&fragment),
        hit,
        millis: start.elapsed().as_millis(),
    })
}

fn table_file(index: usize, kind: Kind, name: &str, many: bool) -> String {
    if many {
        format!("{index:02}-{}-{name}.csv", kind.name())
    } else {
        format!("{name}.csv")
    }
}

/// Resolves `cfg` for `kind`, runs every item (concurrently for reports)
/// and writes `report.json` and the CSV tables into `opts.out`.
pub fn run(cfg: &ExperimentConfig, kind: Kind, ov: &Overrides, opts: &RunOptions) -> Result<Report, CliError> {
    let start = Instant::now();
    let items = config::resolve(cfg, kind, ov)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::io("starting worker threads", std::io::Error::other(e.to_string())))?;
    let threads = pool.current_num_threads();
    let results: Vec<Result<Done, CliError>> = pool.install(|| items.par_iter().map(|item| run_one(item, &opts.cache)).collect());
    let done = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(&opts.out).map_err(|e| CliError::io(format!("creating {}", opts.out.display()), e))?;
    let many = items.len() > 1;
    let mut reports = Vec::with_capacity(items.len());
    for (index, (item, d)) in items.iter().zip(&done).enumerate() {
        let mut files = Vec::new();
        for t in &d.output.tables {
            let file = table_file(index, item.kind, &t.name, many);
            t.write_csv(&opts.out.join(&file))?;
            files.push(file);
        }
        reports.push(ItemReport {
            index,
            kind: item.kind,
            cache_key: d.key.clone(),
            seed: item.seed,
            records: d.output.records.clone(),
            tables: files,
            warnings: d.output.warnings.clone(),
        });
    }
    let report = Report {
        code_version: CODE_VERSION.to_string(),
        kind,
        config: serde_json::to_value(&items).expect("items serialize"),
        items: reports,
        run: RunInfo {
            threads,
            cache_dir: opts.cache.dir().display().to_string(),
            cache_hits: done.iter().map(|d| d.hit).collect(),
            timings_ms: done.iter().map(|d| d.millis).collect(),
            total_ms: start.elapsed().as_millis(),
        },
    };
    write_atomic(&opts.out.join("report.json"), report.to_json().as_bytes())?;
    Ok(report)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: format!("cannot read: {e}"),
    })?;
    ExperimentConfig::from_toml(&text)
}
