use ed_core::geometry::{
    information_metric_check, normalization_functional, EPhasePoint, EPhaseSpace, HermitianKernel, KillingOptions,
    Tangent, DEFAULT_H_FD,
};
use ed_core::rng::{stream, Domain};
use ed_core::system::ParticleSystem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{missing, subseed, write_outcome};
use crate::artifacts::RunDir;
use crate::config::{ExperimentConfig, GeometryConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Passes when the residual is below the threshold.
    Below,
    /// Passes when the residual exceeds the threshold.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub simplex: Option<usize>,
    pub probes: usize,
    pub seed: u64,
    pub residual: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl PropertyResult {
    fn new(name: &str, simplex: Option<usize>, probes: usize, seed: u64, residual: f64, threshold: f64, bound: Bound) -> Self {
        let passed = match bound {
            Bound::Below => residual < threshold,
            Bound::Above => residual > threshold,
        };
        Self {
            name: name.to_string(),
            simplex,
            probes,
            seed,
            residual,
            threshold,
            bound,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub properties: Vec<PropertyResult>,
}

impl GeometryReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn get(&self, name: &str) -> impl Iterator<Item = &PropertyResult> {
        let name = name.to_string();
        self.properties.iter().filter(move |p| p.name == name)
    }
}

fn dist(a: &Tangent, b: &Tangent) -> f64 {
    a.dp.iter()
        .zip(&b.dp)
        .chain(a.dphi.iter().zip(&b.dphi))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

const TIGHT: f64 = 1e-10;
const FD_FLOOR: f64 = 1e-6;

/// Complex-structure identities and the closed-form length on a simplex of size `k`.
fn structure(k: usize, g: &GeometryConfig, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut r = stream(seed, Domain::Geometry, 0);
    let sp = EPhaseSpace::new(g.hbar)?;
    let mut worst = [0.0f64; 7];
    for _ in 0..g.probes {
        let at = EPhasePoint::random(k + 1, g.hbar, &mut r)?;
        let v = Tangent::random_tgf(&at, &mut r);
        let u = Tangent::random_tgf(&at, &mut r);
        let (jv, dv) = sp.apply_j(&v, &at)?;
        let (ju, du) = sp.apply_j(&u, &at)?;
        let (jjv, _) = sp.apply_j(&jv, &at)?;
        let gm = |a: &Tangent, b: &Tangent| sp.metric(a, b, &at);
        let om = |a: &Tangent, b: &Tangent| sp.symplectic(a, b);
        let scale = gm(&v, &v)?.max(gm(&u, &u)?).max(1.0);
        // raw direction: the minimization has to remove the phase mean itself
        let mut raw = v.clone();
        raw.dphi.iter_mut().for_each(|x| *x += 0.4);
        let a = sp.fs_length(&raw, &at)?;
        let b = sp.fs_length_minimized(&raw, &at)?;
        let w = [
            dist(&jjv, &v.scaled(-1.0)) / scale,
            (gm(&jv, &ju)? - gm(&v, &u)?).abs() / scale,
            (om(&jv, &ju) - om(&v, &u)).abs() / scale,
            (om(&v, &u) - gm(&jv, &u)?).abs() / scale,
            (gm(&jv, &jv)? - gm(&v, &v)?).abs() / scale,
            dv.max(du),
            (a - b).abs() / a.max(1.0),
        ];
        for (x, y) in worst.iter_mut().zip(w) {
            *x = x.max(y);
        }
    }
    let names = [
        "j_squared_is_minus_one",
        "metric_is_j_invariant",
        "symplectic_form_is_j_invariant",
        "symplectic_equals_metric_of_j",
        "j_preserves_length",
        "j_keeps_gauge_fixing",
        "fubini_study_closed_form_matches_minimization",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(n, w)| PropertyResult::new(n, Some(k), g.probes, seed, w, TIGHT, Bound::Below))
        .collect())
}

fn killing_bilinear(g: &GeometryConfig, seed: u64) -> Result<Vec<PropertyResult>> {
    let sp = EPhaseSpace::new(g.hbar)?;
    let mut worst: f64 = 0.0;
    let opts = KillingOptions {
        probes: g.probes,
        ..Default::default()
    };
    for i in 0..g.kernels {
        let mut r = stream(seed, Domain::Geometry, i as u64);
        // kernels on 3 to 9 outcomes
        let n = 3 + (i % 4) * 2;
        let q = HermitianKernel::random(n, &mut r);
        let at = EPhasePoint::random(n, g.hbar, &mut r)?;
        worst = worst.max(sp.killing_residual(q.functional(g.hbar), &at, opts, &mut r)?);
    }
    Ok(vec![PropertyResult::new(
        "killing_residual_of_hermitian_kernels",
        None,
        g.kernels,
        seed,
        worst,
        FD_FLOOR,
        Bound::Below,
    )])
}

fn non_bilinear(g: &GeometryConfig, seed: u64) -> Result<Vec<PropertyResult>> {
    let sp = EPhaseSpace::new(g.hbar)?;
    let mut r = stream(seed, Domain::Geometry, 0);
    let at = EPhasePoint::random(6, g.hbar, &mut r)?;
    let opts = KillingOptions {
        probes: g.probes,
        ..Default::default()
    };
    let sq = |p: &[f64], _: &[f64]| p.iter().map(|v| v * v).sum::<f64>();
    let cubic = |p: &[f64], phi: &[f64]| p.iter().zip(phi).map(|(a, b)| a * a * b.sin()).sum::<f64>();
    let bad = sp.killing_residual(sq, &at, opts, &mut r)?;
    let om_sq = sp.symplectic_residual(sq, &at, opts, &mut r)?;
    let om_cubic = sp.symplectic_residual(cubic, &at, opts, &mut r)?;
    Ok(vec![
        PropertyResult::new("killing_residual_of_sum_p_squared", None, opts.probes, seed, bad, 1e-3, Bound::Above),
        PropertyResult::new("sum_p_squared_flow_keeps_symplectic_form", None, opts.probes, seed, om_sq, FD_FLOOR, Bound::Below),
        PropertyResult::new("cubic_flow_keeps_symplectic_form", None, opts.probes, seed, om_cubic, FD_FLOOR, Bound::Below),
    ])
}

fn commutators(g: &GeometryConfig, seed: u64) -> Result<Vec<PropertyResult>> {
    let sp = EPhaseSpace::new(g.hbar)?;
    let mut r = stream(seed, Domain::Geometry, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..g.kernels {
        let u = HermitianKernel::random(4, &mut r);
        let v = HermitianKernel::random(4, &mut r);
        let psi = EPhasePoint::random(4, g.hbar, &mut r)?.psi(g.hbar);
        worst = worst.max(sp.commutator_identity(&u, &v, &psi, DEFAULT_H_FD)?);
    }
    Ok(vec![PropertyResult::new(
        "poisson_bracket_matches_commutator",
        None,
        g.kernels,
        seed,
        worst,
        FD_FLOOR,
        Bound::Below,
    )])
}

fn normalization(g: &GeometryConfig, seed: u64) -> Result<Vec<PropertyResult>> {
    let sp = EPhaseSpace::new(g.hbar)?;
    let mut r = stream(seed, Domain::Geometry, 0);
    let mut shift: f64 = 0.0;
    let dl = 0.01;
    for _ in 0..g.probes {
        let at = EPhasePoint::random(8, g.hbar, &mut r)?;
        let step = sp.hamiltonian_flow_step(normalization_functional, &at, dl, DEFAULT_H_FD)?;
        for i in 0..at.len() {
            shift = shift
                .max((step.raw.p()[i] - at.p()[i]).abs())
                .max((step.raw.phi()[i] - at.phi()[i] - dl).abs());
        }
    }
    let at = EPhasePoint::random(8, g.hbar, &mut r)?;
    let opts = KillingOptions {
        probes: g.probes,
        ..Default::default()
    };
    let killing = sp.killing_residual(normalization_functional, &at, opts, &mut r)?;
    Ok(vec![
        PropertyResult::new("normalization_flow_shifts_phase_uniformly", None, g.probes, seed, shift, TIGHT, Bound::Below),
        PropertyResult::new("normalization_flow_is_killing", None, g.probes, seed, killing, FD_FLOOR, Bound::Below),
    ])
}

fn information(g: &GeometryConfig, seed: u64) -> Result<Vec<PropertyResult>> {
    let single = ParticleSystem::single(1, 1.0)?.with_eta(1.0)?.with_gamma(3.0)?;
    let pair = ParticleSystem::new(vec![1.0, 2.0], vec![0.0, 0.0], 1)?
        .with_eta(1.0)?
        .with_gamma(3.0)?;
    let dt = g.information_dt;
    let a = information_metric_check(&single, dt)?;
    let slow = information_metric_check(&single, 2.0 * dt)?;
    let b = information_metric_check(&pair, dt)?;
    let ratio = b.gamma[3] / b.gamma[0];
    let scaling = slow.gamma[0] / a.gamma[0];
    let points = a.quadrature_points;
    Ok(vec![
        PropertyResult::new("information_metric_matches_mass_tensor", None, points, seed, a.max_relative_error, 0.01, Bound::Below),
        PropertyResult::new(
            "information_metric_of_a_pair",
            None,
            b.quadrature_points,
            seed,
            b.max_relative_error,
            0.01,
            Bound::Below,
        ),
        PropertyResult::new(
            "information_metric_mass_ratio",
            None,
            b.quadrature_points,
            seed,
            (ratio / 2.0 - 1.0).abs(),
            0.01,
            Bound::Below,
        ),
        PropertyResult::new(
            "information_metric_off_diagonal",
            None,
            b.quadrature_points,
            seed,
            b.max_off_diagonal,
            FD_FLOOR,
            Bound::Below,
        ),
        PropertyResult::new(
            "information_metric_dt_cubed_scaling",
            None,
            points,
            seed,
            (scaling / 0.125 - 1.0).abs(),
            0.01,
            Bound::Below,
        ),
    ])
}

type Task<'a> = Box<dyn Fn(u64) -> Result<Vec<PropertyResult>> + Send + Sync + 'a>;

pub(super) fn run(cfg: &ExperimentConfig, dir: &RunDir) -> Result<GeometryReport> {
    let g = cfg.geometry.as_ref().ok_or_else(|| missing("geometry"))?;
    let master = cfg.seed();
    // task i draws from subseed(master, i)
    let mut tasks: Vec<Task> = g
        .simplex
        .iter()
        .map(|&k| Box::new(move |s| structure(k, g, s)) as Task)
        .collect();
    tasks.push(Box::new(|s| killing_bilinear(g, s)));
    tasks.push(Box::new(|s| non_bilinear(g, s)));
    tasks.push(Box::new(|s| commutators(g, s)));
    tasks.push(Box::new(|s| normalization(g, s)));
    tasks.push(Box::new(|s| information(g, s)));
    let results: Vec<Result<Vec<PropertyResult>>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| t(subseed(master, i as u64)))
        .collect();
    let mut properties = Vec::new();
    for r in results {
        properties.extend(r?);
    }
    let ledger = dir.ledger();
    for (i, p) in properties.iter().enumerate() {
        let name = match p.simplex {
            Some(k) => format!("{}/k={k}", p.name),
            None => p.name.clone(),
        };
        let mut row = dir.row("geometry", name);
        row.value = Some(p.residual);
        row.threshold = Some(p.threshold);
        row.passed = Some(p.passed);
        row.detail = serde_json::json!({ "probes": p.probes, "seed": p.seed, "bound": p.bound });
        ledger.record(i as u64, row);
    }
    let report = GeometryReport { properties };
    dir.write_json("geometry_report.json", "properties", &report.properties)?;
    write_outcome(dir, &report)?;
    Ok(report)
}
