//! Run directories: artifact files with their digests, the run ledger and the
//! manifest written on success.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Sender};
use std::sync::Mutex;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{IoContext, Result, SimError};

pub const MANIFEST: &str = "manifest.json";
pub const LEDGER: &str = "ledger.jsonl";
pub const PARTIAL: &str = "PARTIAL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    /// Canonical config text; its SHA-256 is `config_hash`.
    pub config: String,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).at(&path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("ed-sim".to_string(), env!("CARGO_PKG_VERSION").to_string());
    v.insert("schema".to_string(), SCHEMA_VERSION.to_string());
    v
}

/// One JSON line of the run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub config_hash: String,
    pub run: String,
    pub section: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub detail: serde_json::Value,
}

/// Single writer for the ledger. Rows carry a sequence key and are written in
/// key order whatever order the workers finish in.
pub struct Ledger {
    tx: Option<Sender<(u64, LedgerRow)>>,
    writer: Option<JoinHandle<std::io::Result<()>>>,
    path: PathBuf,
}

#[derive(Clone)]
pub struct LedgerHandle {
    tx: Sender<(u64, LedgerRow)>,
}

impl LedgerHandle {
    pub fn record(&self, seq: u64, row: LedgerRow) {
        // the receiver only goes away once the ledger is closed
        let _ = self.tx.send((seq, row));
    }
}

impl Ledger {
    fn open(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).at(&path)?;
        let (tx, rx) = channel::<(u64, LedgerRow)>();
        let writer = std::thread::spawn(move || {
            let mut out = BufWriter::new(file);
            let mut pending = BTreeMap::new();
            for (seq, row) in rx {
                pending.insert(seq, row);
            }
            for row in pending.values() {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n")?;
            }
            out.flush()
        });
        Ok(Self {
            tx: Some(tx),
            writer: Some(writer),
            path,
        })
    }

    pub fn handle(&self) -> LedgerHandle {
        LedgerHandle {
            tx: self.tx.clone().expect("ledger already closed"),
        }
    }

    fn close(&mut self) -> Result<()> {
        self.tx.take();
        if let Some(w) = self.writer.take() {
            w.join()
                .map_err(|_| SimError::Report("ledger writer panicked".into()))?
                .at(&self.path)?;
        }
        Ok(())
    }
}

impl Drop for Ledger {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

pub struct RunDir {
    root: PathBuf,
    config_hash: String,
    name: String,
    artifacts: Mutex<BTreeMap<String, ArtifactEntry>>,
    ledger: Ledger,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    /// Create the directory, leave a partial-run marker and open the ledger.
    pub fn create(root: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(root).at(root)?;
        let stale = root.join(MANIFEST);
        if stale.exists() {
            std::fs::remove_file(&stale).at(&stale)?;
        }
        let marker = root.join(PARTIAL);
        std::fs::write(&marker, b"run in progress\n").at(&marker)?;
        let ledger = Ledger::open(root.join(LEDGER))?;
        Ok(Self {
            root: root.to_path_buf(),
            config_hash: cfg.hash()?,
            name: cfg.name.clone(),
            artifacts: Mutex::new(BTreeMap::new()),
            ledger,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn ledger(&self) -> LedgerHandle {
        self.ledger.handle()
    }

    pub fn row(&self, section: &str, name: impl Into<String>) -> LedgerRow {
        LedgerRow {
            config_hash: self.config_hash.clone(),
            run: self.name.clone(),
            section: section.to_string(),
            name: name.into(),
            value: None,
            threshold: None,
            passed: None,
            detail: serde_json::Value::Null,
        }
    }

    fn record(&self, rel: &str, bytes: &[u8]) {
        let entry = ArtifactEntry {
            path: rel.to_string(),
            sha256: digest(bytes),
            bytes: bytes.len() as u64,
        };
        self.artifacts.lock().unwrap().insert(rel.to_string(), entry);
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).at(parent)?;
        }
        std::fs::write(&path, bytes).at(&path)?;
        self.record(rel, bytes);
        Ok(())
    }

    /// CSV with a leading `# config_hash=...` comment line.
    pub fn write_csv(&self, rel: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut buf = format!("# config_hash={}\n", self.config_hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush().map_err(|e| SimError::Report(e.to_string()))?;
        }
        self.write_bytes(rel, &buf)
    }

    /// Pretty JSON object `{"config_hash": ..., "<key>": value}`.
    pub fn write_json<T: Serialize>(&self, rel: &str, key: &str, value: &T) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), self.config_hash.clone().into());
        obj.insert(key.into(), serde_json::to_value(value)?);
        let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(obj))?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    /// Close the ledger, write the manifest and drop the partial marker.
    pub fn finish(mut self, cfg: &ExperimentConfig) -> Result<Manifest> {
        self.ledger.close()?;
        let lp = self.root.join(LEDGER);
        let bytes = std::fs::read(&lp).at(&lp)?;
        self.record(LEDGER, &bytes);
        let manifest = Manifest {
            schema: SCHEMA_VERSION,
            name: cfg.name.clone(),
            kind: cfg.kind.as_str().to_string(),
            config_hash: self.config_hash.clone(),
            seed: cfg.seed(),
            versions: versions(),
            config: cfg.canonical()?,
            artifacts: self.artifacts.lock().unwrap().values().cloned().collect(),
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        let mp = self.root.join(MANIFEST);
        std::fs::write(&mp, text).at(&mp)?;
        let marker = self.root.join(PARTIAL);
        std::fs::remove_file(&marker).at(&marker)?;
        Ok(manifest)
    }

    /// Leave the marker in place with the failure reason.
    pub fn fail(mut self, err: &SimError) {
        let _ = self.ledger.close();
        let _ = std::fs::write(self.root.join(PARTIAL), format!("run failed: {err}\n"));
    }
}
