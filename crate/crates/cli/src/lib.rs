//! Reproducible command-line runs: a JSON config in, CSV curves, JSON
//! results and a run manifest out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod presets;
pub mod table;
pub mod tasks;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{load_config, parse_config, RunConfig};
pub use error::{CliError, CliResult};
pub use tasks::run_task;

/// Everything needed to repeat a run bit for bit.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub task: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: RunConfig,
    pub outputs: Vec<PathBuf>,
    pub timings_s: Timings,
    pub summary: serde_json::Value,
    pub status: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub compute: f64,
    pub total: f64,
}

/// Runs `config` into `dir` and writes `manifest.json` next to the outputs.
/// A fit that stops without converging still writes everything and then
/// reports [`CliError::NonConvergence`].
pub fn execute(config: &RunConfig, dir: &Path, threads: Option<usize>) -> CliResult<Manifest> {
    let t0 = Instant::now();
    let out = run_task(config, dir)?;
    let compute = t0.elapsed().as_secs_f64();
    let manifest = Manifest {
        tool: "dimerlab",
        version: env!("CARGO_PKG_VERSION"),
        core_version: dimerlab_core::VERSION,
        task: config.task.name(),
        seed: config.seed,
        threads,
        config: config.clone(),
        outputs: out.files,
        timings_s: Timings { compute, total: t0.elapsed().as_secs_f64() },
        summary: out.summary,
        status: if out.non_converged.is_some() { "not_converged" } else { "ok" },
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    match out.non_converged {
        Some(msg) => Err(CliError::NonConvergence(msg)),
        None => Ok(manifest),
    }
}
