use ed_core::quantum::{energy, hamilton_residuals, observe, CrankNicolson, ResidualOptions, WaveState};
use serde::{Deserialize, Serialize};

use super::{fmt, missing, write_outcome};
use crate::artifacts::RunDir;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::{setup, snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    pub mean: Vec<f64>,
    pub width: Vec<f64>,
    pub r_rho: f64,
    pub r_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub steps: usize,
    pub final_time: f64,
    /// Largest `|1 - norm|` over every step.
    pub max_norm_error: f64,
    pub initial_energy: f64,
    /// Largest `|E - E0| / |E0|` over every step.
    pub max_energy_drift: f64,
    pub static_potential: bool,
    pub max_r_rho: f64,
    pub max_r_phi: f64,
    pub snapshots: Vec<String>,
    pub observables: Vec<ObservableRow>,
}

fn row(state: &WaveState, step: usize, phys: &setup::Physical, opts: ResidualOptions, dt: f64) -> Result<ObservableRow> {
    let o = observe(state, &phys.potentials)?;
    let r = hamilton_residuals(state, &phys.potentials, dt, opts)?;
    Ok(ObservableRow {
        step,
        time: o.time,
        norm: o.norm,
        energy: o.energy,
        mean: o.mean,
        width: o.width,
        r_rho: r.r_rho,
        r_phi: r.r_phi,
    })
}

pub(super) fn run(cfg: &ExperimentConfig, dir: &RunDir) -> Result<EvolveReport> {
    let phys = setup::physical(cfg)?;
    let num = cfg.numerics.as_ref().ok_or_else(|| missing("numerics"))?;
    let solver = setup::solver(num);
    let ropts = ResidualOptions {
        floor: num.rho_floor,
        solver,
    };
    let hash = dir.config_hash().to_string();
    let mut cn = CrankNicolson::new(&phys.state, &phys.potentials, num.dt, solver)?;
    let mut s = phys.state.clone();
    let e0 = energy(&s, &phys.potentials)?;
    let mut max_norm: f64 = (1.0 - s.norm()).abs();
    let mut max_drift: f64 = 0.0;
    let mut rows = vec![row(&s, 0, &phys, ropts, num.dt)?];
    let mut snaps = Vec::new();
    let mut snap = |s: &WaveState, step: usize| -> Result<()> {
        let rel = format!("snapshots/step_{step:06}.edsnap");
        dir.write_bytes(&rel, &snapshot::encode(s, step, &hash)?)?;
        snaps.push(rel);
        Ok(())
    };
    snap(&s, 0)?;
    for step in 1..=num.steps {
        cn.step(&mut s)?;
        max_norm = max_norm.max((1.0 - s.norm()).abs());
        let e = energy(&s, &phys.potentials)?;
        max_drift = max_drift.max(((e - e0) / e0.abs().max(f64::MIN_POSITIVE)).abs());
        if step % num.observe_every == 0 || step == num.steps {
            rows.push(row(&s, step, &phys, ropts, num.dt)?);
        }
        if (num.snapshot_every > 0 && step % num.snapshot_every == 0) || step == num.steps {
            snap(&s, step)?;
        }
    }

    let dim = phys.grid.dim();
    let mut header: Vec<String> = ["time", "norm", "energy"].iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|a| format!("mean_x{a}")));
    header.extend((0..dim).map(|a| format!("width_x{a}")));
    header.push("r_rho".into());
    header.push("r_phi".into());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![fmt(r.time), fmt(r.norm), fmt(r.energy)];
            v.extend(r.mean.iter().map(|&x| fmt(x)));
            v.extend(r.width.iter().map(|&x| fmt(x)));
            v.push(fmt(r.r_rho));
            v.push(fmt(r.r_phi));
            v
        })
        .collect();
    dir.write_csv("observables.csv", &header, &table)?;

    // axis-0 line through the middle of the grid
    let mid: Vec<usize> = phys.grid.points().iter().map(|n| n / 2).collect();
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    snapshot::slice_csv(&s, 0, &mid, &mut buf)?;
    dir.write_bytes("final_slice.csv", &buf)?;

    let report = EvolveReport {
        steps: num.steps,
        final_time: s.time(),
        max_norm_error: max_norm,
        initial_energy: e0,
        max_energy_drift: max_drift,
        static_potential: phys.potentials.schedule.is_static(),
        max_r_rho: rows.iter().map(|r| r.r_rho).fold(0.0, f64::max),
        max_r_phi: rows.iter().map(|r| r.r_phi).fold(0.0, f64::max),
        snapshots: snaps,
        observables: rows,
    };
    let ledger = dir.ledger();
    let mut r = dir.row("evolve", "max_norm_error");
    r.value = Some(report.max_norm_error);
    r.threshold = Some(1e-10);
    r.passed = Some(report.max_norm_error < 1e-10);
    ledger.record(0, r);
    let mut r = dir.row("evolve", "max_energy_drift");
    r.value = Some(report.max_energy_drift);
    if report.static_potential {
        r.threshold = Some(1e-8);
        r.passed = Some(report.max_energy_drift < 1e-8);
    }
    ledger.record(1, r);
    for (i, (name, v)) in [("max_r_rho", report.max_r_rho), ("max_r_phi", report.max_r_phi)]
        .into_iter()
        .enumerate()
    {
        let mut r = dir.row("evolve", name);
        r.value = Some(v);
        ledger.record(2 + i as u64, r);
    }
    write_outcome(dir, &report)?;
    Ok(report)
}
