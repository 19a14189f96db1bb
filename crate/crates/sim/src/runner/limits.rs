use ed_core::grid::VectorField;
use ed_core::quantum::{CrankNicolson, WaveState};
use ed_core::stochastic::{
    bohmian_limit, center_of_mass_report, fluctuation_check, scaling_exponent, simulate_ensemble,
    velocity_increment_stats, BohmianLimitReport, CenterOfMassReport, EnsembleOptions, FluctuationReport,
    IncrementReport, Process, ScalingReport, TransitionParams,
};
use ed_core::system::ParticleSystem;
use serde::{Deserialize, Serialize};

use super::{missing, subseed, write_outcome};
use crate::artifacts::RunDir;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::setup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFluctuation {
    pub gamma: f64,
    pub report: FluctuationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScaling {
    pub gamma: f64,
    pub report: ScalingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterOfMass {
    pub particles: usize,
    pub report: CenterOfMassReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsReport {
    pub fluctuations: Vec<GammaFluctuation>,
    pub scaling: Vec<GammaScaling>,
    pub increments: IncrementReport,
    pub bohmian: BohmianLimitReport,
    pub center_of_mass: Vec<CenterOfMass>,
}

fn process_for(gamma: f64) -> Process {
    if gamma == 1.0 {
        Process::Es
    } else if gamma == 3.0 {
        Process::Ou
    } else {
        Process::Fractional
    }
}

pub(super) fn run(cfg: &ExperimentConfig, dir: &RunDir) -> Result<LimitsReport> {
    let l = cfg.limits.as_ref().ok_or_else(|| missing("limits"))?;
    let num = cfg.numerics.as_ref().ok_or_else(|| missing("numerics"))?;
    let phys = setup::physical(cfg)?;
    let sys = &phys.system;
    let eta = sys.eta();
    let master = cfg.seed();
    // labels: 0x100 + i fluctuations, 0x200 + i scaling, 0x300 increments,
    // 0x400 Bohmian limit, 0x500 + i centre of mass
    let center: Vec<f64> = (0..phys.grid.dim())
        .map(|a| phys.grid.origin()[a] + 0.5 * phys.grid.extent()[a])
        .collect();
    let still = VectorField::zeros(phys.grid.clone());
    let mut fluctuations = Vec::new();
    let mut scaling = Vec::new();
    for (i, &gamma) in l.gammas.iter().enumerate() {
        let p = TransitionParams::new(l.fluctuation_dt, eta, gamma, process_for(gamma))?;
        let report = fluctuation_check(&center, &still, &p, sys, l.fluctuation_draws, subseed(master, 0x100 + i as u64))?;
        fluctuations.push(GammaFluctuation { gamma, report });
        let report = scaling_exponent(&p, sys, &l.scaling_dts, l.scaling_trials, subseed(master, 0x200 + i as u64))?;
        scaling.push(GammaScaling { gamma, report });
    }

    let mut cn = CrankNicolson::new(&phys.state, &phys.potentials, num.dt, setup::solver(num))?;
    let mut timeline: Vec<WaveState> = vec![phys.state.clone()];
    let mut s = phys.state.clone();
    for _ in 0..num.steps {
        cn.step(&mut s)?;
        timeline.push(s.clone());
    }
    let mut opts = EnsembleOptions::new(l.increment_members, subseed(master, 0x300));
    opts.record_velocities = true;
    let ens = simulate_ensemble(&timeline, Some(&phys.potentials), &TransitionParams::ou(num.dt, eta)?, &opts)?;
    let increments = velocity_increment_stats(&ens)?;
    drop(ens);
    let bohmian = bohmian_limit(
        &timeline,
        Some(&phys.potentials),
        &l.bohmian_starts,
        &l.bohmian_etas,
        subseed(master, 0x400),
    )?;

    let m = sys.masses()[0];
    let mut center_of_mass = Vec::new();
    for (i, &n) in l.cm_particles.iter().enumerate() {
        let many = ParticleSystem::new(vec![m; n], vec![0.0; n], 1)?.with_eta(eta)?;
        let p = TransitionParams::ou(l.cm_dt, eta)?;
        let report = center_of_mass_report(&many, &p, l.cm_draws, l.cm_sigma, subseed(master, 0x500 + i as u64))?;
        center_of_mass.push(CenterOfMass { particles: n, report });
    }

    let report = LimitsReport {
        fluctuations,
        scaling,
        increments,
        bohmian,
        center_of_mass,
    };

    let ledger = dir.ledger();
    let mut seq = 0u64;
    let mut put = |name: String, value: f64, threshold: f64, passed: bool| {
        let mut r = dir.row("limits", name);
        r.value = value.is_finite().then_some(value);
        r.threshold = threshold.is_finite().then_some(threshold);
        r.passed = Some(passed);
        ledger.record(seq, r);
        seq += 1;
    };
    for f in &report.fluctuations {
        put(format!("fluctuation_z/gamma={}", f.gamma), f.report.max_z, 3.0, f.report.within(3.0));
    }
    for s in &report.scaling {
        let err = (s.report.gamma_hat - s.gamma).abs();
        put(format!("scaling_exponent_error/gamma={}", s.gamma), err, 0.05, err <= 0.05);
    }
    let inc = report.increments.max_relative_error;
    put("velocity_increment_relative_error".into(), inc, 0.05, inc < 0.05);
    let last = *report.bohmian.max_deviation.last().unwrap_or(&f64::NAN);
    put("bohmian_deviation_at_smallest_eta".into(), last, f64::NAN, report.bohmian.monotone);
    for c in &report.center_of_mass {
        put(format!("center_of_mass_z/n={}", c.particles), c.report.max_z, 4.0, c.report.max_z < 4.0);
        let err = (c.report.quantum_potential_ratio / 4.0 - 1.0).abs();
        put(format!("center_of_mass_quantum_potential/n={}", c.particles), err, 0.1, err < 0.1);
    }
    dir.write_json("limits_report.json", "limits", &report)?;
    write_outcome(dir, &report)?;
    Ok(report)
}
