use ed_core::grid::{ConfigGrid, ScalarField};
use ed_core::quantum::{CrankNicolson, WaveState};
use ed_core::stats::{compare_density, Binning, DivergenceReport, Verdict};
use ed_core::stochastic::{simulate_ensemble, EnsembleOptions, InitialSampling, Process, Scheme, TransitionParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fmt, missing, subseed, write_outcome};
use crate::artifacts::RunDir;
use crate::config::{ExperimentConfig, InitialDraw, ProcessConfig};
use crate::error::Result;
use crate::setup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub checkpoint: usize,
    pub step: usize,
    pub time: f64,
    pub divergence: DivergenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSummary {
    pub process: Process,
    pub eta: f64,
    pub gamma: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub members: usize,
    pub terminated: usize,
    pub mean_path_length: f64,
    pub checkpoints: Vec<CheckpointRow>,
}

impl ProcessSummary {
    pub fn passed_checkpoints(&self) -> usize {
        self.checkpoints
            .iter()
            .filter(|c| c.divergence.verdict == Verdict::Pass)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub steps: usize,
    pub dt: f64,
    pub processes: Vec<ProcessSummary>,
}

fn process_name(p: Process) -> &'static str {
    match p {
        Process::Es => "es",
        Process::Ou => "ou",
        Process::Fractional => "fractional",
    }
}

fn params(pc: &ProcessConfig, dt: f64, gamma: f64) -> Result<TransitionParams> {
    Ok(match pc.process {
        Process::Es => TransitionParams::es(dt, pc.eta)?,
        Process::Ou => TransitionParams::ou(dt, pc.eta)?,
        Process::Fractional => TransitionParams::new(dt, pc.eta, gamma, Process::Fractional)?,
    })
}

/// Bins of blocks of `f` cells per axis, row-major, as in `compare_density`.
struct Bins {
    shape: Vec<usize>,
    f: usize,
}

impl Bins {
    fn new(grid: &ConfigGrid, f: usize) -> Self {
        Self {
            shape: grid.points().iter().map(|n| n.div_ceil(f)).collect(),
            f,
        }
    }
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
    fn of_cell(&self, grid: &ConfigGrid, flat: usize) -> usize {
        let mut b = 0;
        for k in 0..self.shape.len() {
            b = b * self.shape[k] + grid.axis_index(flat, k) / self.f;
        }
        b
    }
    fn center(&self, grid: &ConfigGrid, bin: usize) -> Vec<f64> {
        let mut rest = bin;
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = rest % self.shape[k];
            rest /= self.shape[k];
        }
        idx.iter()
            .enumerate()
            .map(|(k, &b)| {
                let first = b * self.f;
                let last = (first + self.f).min(grid.points()[k]) - 1;
                0.5 * (grid.coordinate(k, first) + grid.coordinate(k, last))
            })
            .collect()
    }
}

fn histogram(grid: &ConfigGrid, bins: &Bins, samples: &[f64], rho: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let dim = grid.dim();
    let mut counts = vec![0.0; bins.len()];
    let n = samples.len() / dim;
    for x in samples.chunks_exact(dim) {
        if let Some(c) = grid.cell_of(x) {
            counts[bins.of_cell(grid, c)] += 1.0 / n as f64;
        }
    }
    let mut expected = vec![0.0; bins.len()];
    for (i, &v) in rho.values().iter().enumerate() {
        expected[bins.of_cell(grid, i)] += v;
    }
    let total: f64 = expected.iter().sum();
    expected.iter_mut().for_each(|e| *e /= total);
    (counts, expected)
}

pub(super) fn run(cfg: &ExperimentConfig, dir: &RunDir) -> Result<EnsembleReport> {
    let phys = setup::physical(cfg)?;
    let num = cfg.numerics.as_ref().ok_or_else(|| missing("numerics"))?;
    let samp = cfg.sampling.as_ref().ok_or_else(|| missing("sampling"))?;
    let master = cfg.seed();

    let mut cn = CrankNicolson::new(&phys.state, &phys.potentials, num.dt, setup::solver(num))?;
    let mut timeline: Vec<WaveState> = Vec::with_capacity(num.steps + 1);
    let mut s = phys.state.clone();
    timeline.push(s.clone());
    for _ in 0..num.steps {
        cn.step(&mut s)?;
        timeline.push(s.clone());
    }
    let steps: Vec<usize> = (1..=samp.checkpoints).map(|i| i * num.steps / samp.checkpoints).collect();
    let dim = phys.grid.dim();
    let binning = Binning::uniform(dim, samp.coarsen);
    let bins = Bins::new(&phys.grid, samp.coarsen);

    let mut summaries = Vec::new();
    let mut hist_rows = Vec::new();
    for (j, pc) in samp.processes.iter().enumerate() {
        // labels: 2j for the trajectories, 2j + 1 for the calibration draws
        let p = params(pc, num.dt, phys.system.gamma_exponent())?;
        let mut opts = EnsembleOptions::new(samp.members, subseed(master, 2 * j as u64));
        opts.initial = match samp.initial {
            InitialDraw::Iid => InitialSampling::Iid,
            InitialDraw::Stratified => InitialSampling::Stratified,
        };
        opts.scheme = pc.scheme;
        opts.checkpoints = steps.clone();
        opts.max_terminated = samp.max_terminated;
        let ens = simulate_ensemble(&timeline, Some(&phys.potentials), &p, &opts)?;
        let cal_seed = subseed(master, 2 * j as u64 + 1);
        let rows: Vec<Result<CheckpointRow>> = steps
            .par_iter()
            .enumerate()
            .map(|(c, &k)| {
                let d = compare_density(
                    &ens.active_positions(c),
                    &timeline[k].density(),
                    &binning,
                    samp.calibration_draws,
                    cal_seed.wrapping_add(c as u64),
                )?;
                Ok(CheckpointRow {
                    checkpoint: c,
                    step: k,
                    time: timeline[k].time(),
                    divergence: d,
                })
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        for (c, &k) in steps.iter().enumerate() {
            let (emp, exp) = histogram(&phys.grid, &bins, &ens.active_positions(c), &timeline[k].density());
            for b in 0..bins.len() {
                let mut r = vec![process_name(pc.process).to_string(), c.to_string(), fmt(timeline[k].time()), b.to_string()];
                r.extend(bins.center(&phys.grid, b).into_iter().map(fmt));
                r.push(fmt(emp[b]));
                r.push(fmt(exp[b]));
                hist_rows.push(r);
            }
        }
        summaries.push(ProcessSummary {
            process: pc.process,
            eta: p.eta,
            gamma: p.gamma,
            scheme: pc.scheme,
            seed: opts.seed,
            members: samp.members,
            terminated: ens.terminated(),
            mean_path_length: ens.mean_path_length(),
            checkpoints: rows,
        });
    }

    let header: Vec<String> = [
        "process",
        "eta",
        "scheme",
        "checkpoint",
        "step",
        "time",
        "samples",
        "bins",
        "total_variation",
        "kl_divergence",
        "chi_square",
        "chi_square_dof",
        "noise_band",
        "p_value",
        "verdict",
        "terminated",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut table = Vec::new();
    for ps in &summaries {
        for c in &ps.checkpoints {
            let d = &c.divergence;
            table.push(vec![
                process_name(ps.process).to_string(),
                fmt(ps.eta),
                format!("{:?}", ps.scheme).to_lowercase(),
                c.checkpoint.to_string(),
                c.step.to_string(),
                fmt(c.time),
                d.samples.to_string(),
                d.bins.to_string(),
                fmt(d.total_variation),
                fmt(d.kl_divergence),
                fmt(d.chi_square),
                d.chi_square_dof.to_string(),
                fmt(d.noise_band),
                fmt(d.p_value),
                format!("{:?}", d.verdict).to_lowercase(),
                ps.terminated.to_string(),
            ]);
        }
    }
    dir.write_csv("ensemble_summary.csv", &header, &table)?;

    let mut hh: Vec<String> = ["process", "checkpoint", "time", "bin"].iter().map(|s| s.to_string()).collect();
    hh.extend((0..dim).map(|a| format!("center_x{a}")));
    hh.push("empirical".into());
    hh.push("expected".into());
    dir.write_csv("histograms.csv", &hh, &hist_rows)?;

    let ledger = dir.ledger();
    let mut seq = 0;
    for ps in &summaries {
        for c in &ps.checkpoints {
            let mut r = dir.row("divergence", format!("{}/{}", process_name(ps.process), c.checkpoint));
            r.value = Some(c.divergence.total_variation);
            r.threshold = Some(c.divergence.noise_band);
            r.passed = Some(c.divergence.verdict == Verdict::Pass);
            r.detail = serde_json::json!({
                "time": c.time,
                "step": c.step,
                "eta": ps.eta,
                "report": c.divergence,
            });
            ledger.record(seq, r);
            seq += 1;
        }
    }
    let report = EnsembleReport {
        steps: num.steps,
        dt: num.dt,
        processes: summaries,
    };
    write_outcome(dir, &report)?;
    Ok(report)
}
