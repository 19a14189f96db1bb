//! Merging finished runs: one ledger, a summary table and side-by-side
//! divergence columns for ensemble runs.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifacts::{LedgerRow, Manifest, RunDir, LEDGER, PARTIAL};
use crate::error::{IoContext, Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRef {
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub schema: u32,
    pub runs: Vec<RunRef>,
    pub rows: usize,
    pub passed: usize,
    pub failed: usize,
    /// Column labels of `divergence.csv` after the checkpoint and time columns.
    pub divergence_columns: Vec<String>,
}

pub fn read_ledger(dir: &Path) -> Result<Vec<LedgerRow>> {
    let path = dir.join(LEDGER);
    let file = std::fs::File::open(&path).at(&path)?;
    let mut rows = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.at(&path)?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}

/// Merge the ledgers of `runs` (in the given order) into `out`.
pub fn merge(runs: &[PathBuf], out: &RunDir) -> Result<ReportSummary> {
    if runs.is_empty() {
        return Err(SimError::Report("no run directories given".into()));
    }
    let mut manifests = Vec::new();
    for dir in runs {
        if dir.join(PARTIAL).exists() {
            return Err(SimError::Report(format!("{} is an incomplete run", dir.display())));
        }
        manifests.push(Manifest::read(dir)?);
    }
    let schema = manifests[0].schema;
    if let Some(m) = manifests.iter().find(|m| m.schema != schema) {
        return Err(SimError::Report(format!(
            "mixed schema versions: {} has {}, {} has {}",
            manifests[0].name, schema, m.name, m.schema
        )));
    }

    let mut merged = Vec::new();
    let mut owner = Vec::new();
    let mut refs = Vec::new();
    for (k, (dir, m)) in runs.iter().zip(&manifests).enumerate() {
        let rows = read_ledger(dir)?;
        owner.extend(std::iter::repeat_n(k, rows.len()));
        refs.push(RunRef {
            name: m.name.clone(),
            kind: m.kind.clone(),
            config_hash: m.config_hash.clone(),
            rows: rows.len(),
        });
        merged.extend(rows);
    }

    let mut jsonl = Vec::new();
    for r in &merged {
        serde_json::to_writer(&mut jsonl, r)?;
        jsonl.push(b'\n');
    }
    out.write_bytes("merged_ledger.jsonl", &jsonl)?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let header: Vec<String> = ["run", "config_hash", "section", "name", "value", "threshold", "passed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table: Vec<Vec<String>> = merged
        .iter()
        .map(|r| {
            vec![
                r.run.clone(),
                r.config_hash.clone(),
                r.section.clone(),
                r.name.clone(),
                opt(r.value),
                opt(r.threshold),
                r.passed.map(|p| p.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    out.write_csv("summary.csv", &header, &table)?;

    // divergence rows are named "<process>/<checkpoint>"
    let mut columns: Vec<String> = Vec::new();
    let mut cells: BTreeMap<usize, (f64, BTreeMap<String, [String; 3]>)> = BTreeMap::new();
    for (i, r) in merged.iter().enumerate().filter(|(_, r)| r.section == "divergence") {
        let Some((process, cp)) = r.name.split_once('/') else { continue };
        let Ok(cp) = cp.parse::<usize>() else { continue };
        // runs are labelled by position as well as name: two runs may share a name
        let label = format!("{}:{}/{process}", owner[i], refs[owner[i]].name);
        if !columns.contains(&label) {
            columns.push(label.clone());
        }
        let time = r.detail.get("time").and_then(|t| t.as_f64()).unwrap_or(f64::NAN);
        let entry = cells.entry(cp).or_insert_with(|| (time, BTreeMap::new()));
        entry.1.insert(
            label,
            [
                opt(r.value),
                opt(r.threshold),
                r.passed.map(|p| if p { "pass" } else { "fail" }.to_string()).unwrap_or_default(),
            ],
        );
    }
    if !columns.is_empty() {
        let mut header = vec!["checkpoint".to_string(), "time".to_string()];
        for c in &columns {
            header.push(format!("{c}:total_variation"));
            header.push(format!("{c}:noise_band"));
            header.push(format!("{c}:verdict"));
        }
        let rows: Vec<Vec<String>> = cells
            .iter()
            .map(|(cp, (time, by))| {
                let mut row = vec![cp.to_string(), time.to_string()];
                for c in &columns {
                    match by.get(c) {
                        Some(v) => row.extend(v.iter().cloned()),
                        None => row.extend([String::new(), String::new(), String::new()]),
                    }
                }
                row
            })
            .collect();
        out.write_csv("divergence.csv", &header, &rows)?;
    }

    let passed = merged.iter().filter(|r| r.passed == Some(true)).count();
    let failed = merged.iter().filter(|r| r.passed == Some(false)).count();
    let summary = ReportSummary {
        schema,
        runs: refs,
        rows: merged.len(),
        passed,
        failed,
        divergence_columns: columns,
    };
    let mut row = out.row("report", "merged_rows");
    row.value = Some(merged.len() as f64);
    out.ledger().record(0, row);
    out.write_json("outcome.json", "outcome", &summary)?;
    Ok(summary)
}
