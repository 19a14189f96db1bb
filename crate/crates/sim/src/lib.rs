//! Configuration, orchestration and file formats for `ed-core` experiments.
//!
//! A run takes an [`ExperimentConfig`] (TOML, or one of the named
//! [`config::PRESETS`]) and writes a directory of artifacts: CSV time series,
//! JSON reports, snapshots, a JSONL ledger and `manifest.json` with the config
//! hash, the seed and a SHA-256 for every file. The same config and seed give
//! byte-identical directories whatever the thread count.
//!
//! ```no_run
//! let cfg = ed_sim::config::preset("free-1d").unwrap();
//! let out = ed_sim::run(&cfg, std::path::Path::new("runs/free-1d"), None).unwrap();
//! println!("{}", out.manifest.config_hash);
//! ```

pub mod artifacts;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod setup;
pub mod snapshot;

pub use config::{ExperimentConfig, Kind};
pub use error::{Result, SimError};
pub use runner::{run, Outcome, RunResult};
