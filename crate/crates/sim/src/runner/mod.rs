//! Orchestration: one entry point per experiment kind, all writing through a
//! [`RunDir`].
//!
//! Seeds: every random work item draws from `subseed(master, label)`, where
//! the labels are fixed per kind (documented next to each use). Work items
//! never share a stream, so results do not depend on the thread count.

mod ensemble;
mod entropic;
mod evolve;
mod geometry;
mod limits;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ensemble::{CheckpointRow, EnsembleReport, ProcessSummary};
pub use entropic::EntropicReport;
pub use evolve::{EvolveReport, ObservableRow};
pub use geometry::{GeometryReport, PropertyResult};
pub use limits::LimitsReport;

use crate::artifacts::{Manifest, RunDir};
use crate::config::{ExperimentConfig, Kind};
use crate::error::{field, Result, SimError};
use crate::report::{self, ReportSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Evolve(EvolveReport),
    Ensemble(EnsembleReport),
    GeometryCheck(GeometryReport),
    Limits(LimitsReport),
    EntropicStep(EntropicReport),
    Report(ReportSummary),
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub manifest: Manifest,
    pub outcome: Outcome,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn subseed(master: u64, label: u64) -> u64 {
    mix(master ^ mix(label))
}

/// Run `cfg` into `out`. The seed is resolved first if the config has none.
/// `threads = None` uses one worker per core.
pub fn run(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<RunResult> {
    cfg.validate()?;
    let cfg = cfg.clone().resolve_seed(None)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(field("threads", "must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| field("threads", e.to_string()))?;
    let dir = RunDir::create(out, &cfg)?;
    let result = pool.install(|| dispatch(&cfg, &dir));
    match result {
        Ok(outcome) => {
            let manifest = dir.finish(&cfg)?;
            Ok(RunResult { manifest, outcome })
        }
        Err(e) => {
            dir.fail(&e);
            Err(e)
        }
    }
}

fn dispatch(cfg: &ExperimentConfig, dir: &RunDir) -> Result<Outcome> {
    let outcome = match cfg.kind {
        Kind::Evolve => Outcome::Evolve(evolve::run(cfg, dir)?),
        Kind::Ensemble => Outcome::Ensemble(ensemble::run(cfg, dir)?),
        Kind::GeometryCheck => Outcome::GeometryCheck(geometry::run(cfg, dir)?),
        Kind::Limits => Outcome::Limits(limits::run(cfg, dir)?),
        Kind::EntropicStep => Outcome::EntropicStep(entropic::run(cfg, dir)?),
        Kind::Report => {
            let runs = &cfg.report.as_ref().ok_or_else(|| field("report", "missing"))?.runs;
            let paths: Vec<std::path::PathBuf> = runs.iter().map(Into::into).collect();
            Outcome::Report(report::merge(&paths, dir)?)
        }
    };
    Ok(outcome)
}

/// Outcome written to `outcome.json` so that later tools need not re-parse
/// individual artifacts.
pub(crate) fn write_outcome<T: Serialize>(dir: &RunDir, value: &T) -> Result<()> {
    dir.write_json("outcome.json", "outcome", value)
}

pub(crate) fn fmt(x: f64) -> String {
    x.to_string()
}

pub(crate) fn missing(section: &str) -> SimError {
    field(section, "missing")
}
