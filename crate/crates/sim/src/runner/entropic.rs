use ed_core::entropic::{
    chapman_kolmogorov_step, maxent_transition, verify_maximizer, GaussianStep, MaxEntProblem, MaximizerReport,
};
use ed_core::grid::VectorField;
use ed_core::quantum::{madelung, phase_gradient};
use serde::{Deserialize, Serialize};

use super::{fmt, missing, subseed, write_outcome};
use crate::artifacts::RunDir;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::setup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicReport {
    pub mass_before: f64,
    pub mass_after: f64,
    /// `|mass_after - mass_before|` of one max-ent step from the initial density.
    pub mass_drift: f64,
    /// Max-norm gap between two steps of variance `v` and one of `2 v`, relative to the peak.
    pub composition_gap: f64,
    pub source: usize,
    pub maximizer: MaximizerReport,
}

pub(super) fn run(cfg: &ExperimentConfig, dir: &RunDir) -> Result<EntropicReport> {
    let e = cfg.entropic.as_ref().ok_or_else(|| missing("entropic"))?;
    let phys = setup::physical(cfg)?;
    let grid = &phys.grid;
    let pair = madelung(&phys.state);
    // drift potential phi = Phi / hbar
    let hbar = phys.system.hbar();
    let grad = phase_gradient(&pair, None)?;
    let comps: Vec<Vec<f64>> = grad
        .field
        .components()
        .iter()
        .map(|c| c.iter().map(|v| v / hbar).collect())
        .collect();
    let drift = VectorField::new(grid.clone(), comps)?;
    let problem = MaxEntProblem::from_system(&phys.system, e.dt, drift, None)?;
    let step = maxent_transition(&problem)?;
    let rho = phys.state.density();
    let ck = chapman_kolmogorov_step(&rho, &step)?;

    let dim = grid.dim();
    let one = GaussianStep::isotropic(grid.clone(), vec![e.variance; dim], e.dt)?;
    let two = GaussianStep::isotropic(grid.clone(), vec![2.0 * e.variance; dim], 2.0 * e.dt)?;
    let twice = chapman_kolmogorov_step(&chapman_kolmogorov_step(&rho, &one)?.rho, &one)?.rho;
    let once = chapman_kolmogorov_step(&rho, &two)?.rho;
    let peak = once.max_abs();
    let gap = twice
        .values()
        .iter()
        .zip(once.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / peak;

    // source: the grid point nearest the density maximum; label 0x600
    let source = rho
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0;
    let maximizer = verify_maximizer(&step, &problem, source, e.perturbations, subseed(cfg.seed(), 0x600))?;

    let report = EntropicReport {
        mass_before: ck.mass_before,
        mass_after: ck.mass_after,
        mass_drift: ck.mass_drift().abs(),
        composition_gap: gap,
        source,
        maximizer,
    };

    let mut header: Vec<String> = (0..dim).map(|a| format!("x{a}")).collect();
    header.extend(["rho", "rho_step", "rho_two_steps", "rho_summed"].iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|p| {
            let mut r: Vec<String> = grid.position(p).into_iter().map(fmt).collect();
            r.push(fmt(rho.values()[p]));
            r.push(fmt(ck.rho.values()[p]));
            r.push(fmt(twice.values()[p]));
            r.push(fmt(once.values()[p]));
            r
        })
        .collect();
    dir.write_csv("densities.csv", &header, &rows)?;

    let ledger = dir.ledger();
    let rows = [
        ("mass_drift", report.mass_drift, 1e-6, report.mass_drift < 1e-6),
        ("composition_gap", report.composition_gap, 1e-8, report.composition_gap < 1e-8),
        (
            "maximizer_passed_trials",
            report.maximizer.passed as f64,
            report.maximizer.trials as f64,
            report.maximizer.all_passed(),
        ),
    ];
    for (i, (name, v, t, ok)) in rows.into_iter().enumerate() {
        let mut r = dir.row("entropic", name);
        r.value = Some(v);
        r.threshold = Some(t);
        r.passed = Some(ok);
        ledger.record(i as u64, r);
    }
    dir.write_json("entropic_report.json", "entropic", &report)?;
    write_outcome(dir, &report)?;
    Ok(report)
}
