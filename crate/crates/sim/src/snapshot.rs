//! Snapshot container: the magic `EDSNAP01`, a little-endian `u64` header
//! length, a JSON header with the grid metadata, then `(re, im)` pairs of
//! little-endian `f64`, one per grid point in flat order.

use std::io::{Read, Write};
use std::path::Path;

use ed_core::grid::{ComplexField, GridSpec};
use ed_core::quantum::WaveState;
use ed_core::system::ParticleSystem;
use ed_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result, SimError};

pub const MAGIC: &[u8; 8] = b"EDSNAP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub config_hash: String,
    pub step: usize,
    pub time: f64,
    pub grid: GridSpec,
    pub system: ParticleSystem,
    pub encoding: String,
    pub values: usize,
}

pub fn encode(state: &WaveState, step: usize, config_hash: &str) -> Result<Vec<u8>> {
    let header = SnapshotHeader {
        config_hash: config_hash.to_string(),
        step,
        time: state.time(),
        grid: state.grid().spec().clone(),
        system: state.system().clone(),
        encoding: "complex-f64-le".to_string(),
        values: state.grid().len(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 16 * header.values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for z in state.psi().values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(SnapshotHeader, WaveState)> {
    let bad = |m: &str| SimError::Snapshot(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a snapshot (bad magic)"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = 16usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: SnapshotHeader = serde_json::from_slice(&bytes[16..body])?;
    if header.encoding != "complex-f64-le" {
        return Err(bad("unknown value encoding"));
    }
    let data = &bytes[body..];
    if data.len() != 16 * header.values {
        return Err(bad("value block does not match the header"));
    }
    let psi: Vec<Complex64> = data
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let grid = ed_core::grid::ConfigGrid::new(header.grid.clone())?;
    let field = ComplexField::new(grid, psi)?;
    let state = WaveState::new(field, header.system.clone(), header.time)?;
    Ok((header, state))
}

pub fn write(path: &Path, state: &WaveState, step: usize, config_hash: &str) -> Result<()> {
    let bytes = encode(state, step, config_hash)?;
    std::fs::File::create(path).and_then(|mut f| f.write_all(&bytes)).at(path)
}

pub fn read(path: &Path) -> Result<(SnapshotHeader, WaveState)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).at(path)?;
    decode(&bytes)
}

/// One line of the grid along `axis` through the point `through` (its own
/// coordinate on `axis` is ignored), as CSV `x, re, im, rho, phase`.
pub fn slice_csv<W: Write>(state: &WaveState, axis: usize, through: &[usize], out: W) -> Result<()> {
    let grid = state.grid();
    grid.check_axis(axis)?;
    if through.len() != grid.dim() {
        return Err(SimError::Snapshot("slice anchor has the wrong dimension".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "re", "im", "rho", "phase"])?;
    let mut at = through.to_vec();
    for i in 0..grid.points()[axis] {
        at[axis] = i;
        let z = state.psi().values()[grid.index(&at)];
        w.write_record(&[
            grid.coordinate(axis, i).to_string(),
            z.re.to_string(),
            z.im.to_string(),
            z.norm_sqr().to_string(),
            z.arg().to_string(),
        ])?;
    }
    w.flush().map_err(|e| SimError::Snapshot(e.to_string()))?;
    Ok(())
}
