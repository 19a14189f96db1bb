//! Sub-quantum trajectories sampled against an evolving wave state.
//!
//! A step moves `x -> x + b(x) dt + dw` with `dw` Gaussian of covariance
//! `eta dt^gamma / m_A` per axis. The drift `b` is the current velocity
//! `(d Phi - A) / m` computed from the wave state, plus an osmotic term
//! `(eta / m) d log sqrt(rho)` for the ES process so that the ensemble keeps
//! tracking `|psi|^2`. Drift fields are frozen over each step.
//!
//! Ensembles and Bohmian paths integrate against [`lattice_drift`], which puts
//! the velocity on bond midpoints as `J / rho_bar` with `J` the lattice current
//! that the discrete Schrodinger flow conserves. Its flux through every cell
//! face matches that current, which keeps histograms on the grid consistent
//! with `|psi|^2` near nodes, where point-wise phase differences break down.

use crate::error::{invalid, Error, Result};
use crate::grid::{ConfigGrid, ScalarField, VectorField};
use crate::prelude::*;
use crate::quantum::{
    phase_gradient, quantum_potential, Hamiltonian, MadelungPair, Potentials, WaveState, DEFAULT_FLOOR,
};
use crate::rng::{self, Domain};
use crate::system::ParticleSystem;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Process {
    /// Einstein-Smoluchowski; osmotic drift added.
    Es,
    /// Ornstein-Uhlenbeck.
    Ou,
    /// Any other exponent, current-velocity drift only.
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransitionParams {
    pub dt: f64,
    pub eta: f64,
    pub gamma: f64,
    pub process: Process,
}

impl TransitionParams {
    pub fn new(dt: f64, eta: f64, gamma: f64, process: Process) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(invalid("eta", "must be non-negative"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", "must be positive"));
        }
        Ok(Self { dt, eta, gamma, process })
    }

    /// ES with `gamma = 1`.
    pub fn es(dt: f64, eta: f64) -> Result<Self> {
        Self::new(dt, eta, 1.0, Process::Es)
    }

    /// OU with `gamma = 3`.
    pub fn ou(dt: f64, eta: f64) -> Result<Self> {
        Self::new(dt, eta, 3.0, Process::Ou)
    }

    /// Whether the exponent is one for which the ensemble is expected to follow `|psi|^2`.
    pub fn tracks_density(&self) -> bool {
        self.gamma == 1.0 || self.gamma > 2.0
    }

    /// Per-step fluctuation variance along an axis carrying mass `m`.
    pub fn variance(&self, m: f64) -> f64 {
        self.eta * self.dt.powf(self.gamma) / m
    }

    fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }
}

/// Drift velocity on the configuration grid; zero where `mask` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub field: VectorField,
    pub mask: Vec<bool>,
}

/// Sampler drift of `pair`. `eta` only enters the ES osmotic term.
pub fn drift_velocity_field(
    pair: &MadelungPair,
    pot: Option<&Potentials>,
    process: Process,
    eta: f64,
) -> Result<Drift> {
    let grid = pair.grid();
    let sys = pair.system();
    let grad = phase_gradient(pair, pot)?;
    let mut comps: Vec<Vec<f64>> = grad.field.components().to_vec();
    let mut mask = grad.mask;
    for (axis, c) in comps.iter_mut().enumerate() {
        let m = sys.axis_mass(axis);
        c.iter_mut().for_each(|v| *v /= m);
    }
    if process == Process::Es && eta > 0.0 {
        let rho = pair.rho().values();
        let pm = pair.mask();
        for p in 0..grid.len() {
            if !mask[p] {
                continue;
            }
            for axis in 0..grid.dim() {
                match (grid.neighbor(p, axis, true), grid.neighbor(p, axis, false)) {
                    (Some(f), Some(b)) if pm[f] && pm[b] => {
                        let h = grid.spacing()[axis];
                        let osm = (rho[f].ln() - rho[b].ln()) / (4.0 * h);
                        comps[axis][p] += eta / sys.axis_mass(axis) * osm;
                    }
                    _ => {
                        mask[p] = false;
                        break;
                    }
                }
            }
        }
    }
    for c in comps.iter_mut() {
        for (v, &m) in c.iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            }
        }
    }
    Ok(Drift {
        field: VectorField::new(grid.clone(), comps)?,
        mask,
    })
}

/// Drift on bond midpoints: component `A` at index `p` is the velocity at
/// `x_p + (h_A / 2) e_A`. Bonds leaving a non-periodic edge carry zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BondDrift {
    pub field: VectorField,
    /// Points whose density is above the Madelung floor.
    pub mask: Vec<bool>,
}

impl BondDrift {
    /// Multilinear interpolation on each component's staggered lattice.
    pub fn velocity_at(&self, x: &[f64], out: &mut [f64]) {
        let grid = self.field.grid();
        let mut y = [0.0; 3];
        for (a, c) in self.field.components().iter().enumerate() {
            y[..x.len()].copy_from_slice(x);
            y[a] -= 0.5 * grid.spacing()[a];
            out[a] = grid.interpolate(c, &y[..x.len()]);
        }
    }
}

/// `u = J / rho_bar` on every bond, `J = (hbar / m h) Im(psi_p* U psi_q)` with
/// the link phase `U` of the Hamiltonian and `rho_bar` the mean of the two end
/// densities. ES adds `D (rho_q - rho_p) / (h rho_bar)`, `D = eta / 2m`, which
/// cancels the diffusive flux across the same face.
pub fn lattice_drift(state: &WaveState, pot: Option<&Potentials>, process: Process, eta: f64) -> Result<BondDrift> {
    let grid = state.grid();
    let sys = state.system();
    let free = Potentials::free();
    let ham = Hamiltonian::new(grid, sys, pot.unwrap_or(&free), state.time())?;
    let psi = state.psi().values();
    let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let rmax = rho.iter().fold(0.0, |m: f64, &v| m.max(v));
    let mask: Vec<bool> = rho.iter().map(|&r| r > DEFAULT_FLOOR * rmax).collect();
    let osmotic = process == Process::Es && eta > 0.0;
    let mut comps = vec![vec![0.0; grid.len()]; grid.dim()];
    for (a, c) in comps.iter_mut().enumerate() {
        let m = sys.axis_mass(a);
        let h = grid.spacing()[a];
        let d = eta / (2.0 * m);
        for p in 0..grid.len() {
            let Some(q) = grid.neighbor(p, a, true) else { continue };
            let bar = 0.5 * (rho[p] + rho[q]);
            if !(bar > 0.0) {
                continue;
            }
            let j = sys.hbar() / (m * h) * (psi[p].conj() * ham.link(a, p) * psi[q]).im;
            c[p] = j / bar;
            if osmotic {
                c[p] += d * (rho[q] - rho[p]) / (h * bar);
            }
        }
    }
    Ok(BondDrift {
        field: VectorField::new(grid.clone(), comps)?,
        mask,
    })
}

fn draw_noise<R: Rng + ?Sized>(params: &TransitionParams, system: &ParticleSystem, rng: &mut R, out: &mut [f64]) {
    for (axis, w) in out.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *w = params.variance(system.axis_mass(axis)).sqrt() * z;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Inside,
    /// Left a non-periodic box; the point is not wrapped.
    Escaped,
}

/// One Euler step from `x` (updated in place) with the drift interpolated at `x`.
pub fn sample_step<R: Rng + ?Sized>(
    x: &mut [f64],
    field: &VectorField,
    params: &TransitionParams,
    system: &ParticleSystem,
    rng: &mut R,
) -> Result<Step> {
    let grid = field.grid();
    if x.len() != grid.dim() {
        return Err(Error::ShapeMismatch("point dimension differs from the grid"));
    }
    system.check_grid(grid)?;
    let mut v = vec![0.0; x.len()];
    let mut w = vec![0.0; x.len()];
    field.interpolate_into(x, &mut v);
    draw_noise(params, system, rng, &mut w);
    for k in 0..x.len() {
        x[k] += v[k] * params.dt + w[k];
    }
    Ok(settle(grid, x))
}

fn settle(grid: &ConfigGrid, x: &mut [f64]) -> Step {
    if grid.contains(x) {
        grid.wrap(x);
        Step::Inside
    } else {
        Step::Escaped
    }
}

/// Fluctuation covariance of [`sample_step`] measured at one point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluctuationReport {
    pub draws: usize,
    /// Row-major `dim x dim`.
    pub covariance: Vec<f64>,
    pub expected: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Largest `|covariance - expected| / stderr`.
    pub max_z: f64,
}

impl FluctuationReport {
    pub fn within(&self, z: f64) -> bool {
        self.max_z <= z
    }
}

/// Draw `draws` steps from `x` and measure `dw = x' - x - v dt`.
pub fn fluctuation_check(
    x: &[f64],
    field: &VectorField,
    params: &TransitionParams,
    system: &ParticleSystem,
    draws: usize,
    seed: u64,
) -> Result<FluctuationReport> {
    if params.eta == 0.0 {
        return Err(Error::NoiseUnavailable);
    }
    if draws < 2 {
        return Err(Error::InsufficientSamples { have: draws, need: 2 });
    }
    let grid = field.grid();
    let dim = grid.dim();
    let mut v = vec![0.0; dim];
    field.interpolate_into(x, &mut v);
    let mut rng = rng::stream(seed, Domain::Test, 0);
    let mut sum = vec![0.0; dim * dim];
    let mut sum2 = vec![0.0; dim * dim];
    let mut y = vec![0.0; dim];
    let mut dw = vec![0.0; dim];
    for _ in 0..draws {
        y.copy_from_slice(x);
        sample_step(&mut y, field, params, system, &mut rng)?;
        for k in 0..dim {
            dw[k] = grid.displacement(k, x[k], y[k]) - v[k] * params.dt;
        }
        for a in 0..dim {
            for b in 0..dim {
                let p = dw[a] * dw[b];
                sum[a * dim + b] += p;
                sum2[a * dim + b] += p * p;
            }
        }
    }
    let n = draws as f64;
    let covariance: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr: Vec<f64> = sum2
        .iter()
        .zip(&covariance)
        .map(|(s2, c)| ((s2 / n - c * c).max(0.0) / (n - 1.0)).sqrt())
        .collect();
    let expected: Vec<f64> = (0..dim * dim)
        .map(|i| {
            let (a, b) = (i / dim, i % dim);
            if a == b {
                params.variance(system.axis_mass(a))
            } else {
                0.0
            }
        })
        .collect();
    let max_z = (0..dim * dim)
        .map(|i| {
            let d = (covariance[i] - expected[i]).abs();
            if stderr[i] > 0.0 {
                d / stderr[i]
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(FluctuationReport {
        draws,
        covariance,
        expected,
        stderr,
        max_z,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InitialSampling {
    /// Independent inverse-CDF draws from the initial density.
    Iid,
    /// Member `i` inverts a uniform drawn from `[i/M, (i+1)/M)`.
    Stratified,
    /// Fixed starting points, `dim` coordinates per member.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Scheme {
    /// Drift of the current state at the current point.
    Euler,
    /// Drift at the half-step point, averaged between the two states.
    Midpoint,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleOptions {
    pub members: usize,
    pub seed: u64,
    pub initial: InitialSampling,
    pub scheme: Scheme,
    /// Step indices (0 is the initial state) at which positions are kept.
    pub checkpoints: Vec<usize>,
    /// Keep per-step velocities and velocity increments.
    pub record_velocities: bool,
    /// Abort when more than this fraction of members leave the box.
    pub max_terminated: f64,
}

impl EnsembleOptions {
    pub fn new(members: usize, seed: u64) -> Self {
        Self {
            members,
            seed,
            initial: InitialSampling::Iid,
            scheme: Scheme::Euler,
            checkpoints: Vec::new(),
            record_velocities: false,
            max_terminated: 0.01,
        }
    }
}

/// Trajectory ensemble. Per-member arrays are member-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ensemble {
    pub params: TransitionParams,
    pub seed: u64,
    pub members: usize,
    pub dim: usize,
    /// Mass carried by each configuration axis.
    pub axis_masses: Vec<f64>,
    pub steps: usize,
    pub start_time: f64,
    pub checkpoints: Vec<usize>,
    /// One `members * dim` block per checkpoint.
    pub positions: Vec<Vec<f64>>,
    /// Step at which each member left the box.
    pub terminated_at: Vec<Option<usize>>,
    /// `members * steps * dim` values of `dx / dt`.
    pub velocities: Option<Vec<f64>>,
    /// `members * (steps - 1) * dim` velocity increments minus the convective prediction.
    pub increments: Option<Vec<f64>>,
    /// Summed `|dx|` per member.
    pub path_lengths: Vec<f64>,
}

impl Ensemble {
    /// Coordinates of members still inside the box at checkpoint `c`.
    pub fn active_positions(&self, c: usize) -> Vec<f64> {
        let step = self.checkpoints[c];
        let mut out = Vec::with_capacity(self.members * self.dim);
        for m in 0..self.members {
            if self.terminated_at[m].is_none_or(|s| s > step) {
                out.extend_from_slice(&self.positions[c][m * self.dim..(m + 1) * self.dim]);
            }
        }
        out
    }

    pub fn terminated(&self) -> usize {
        self.terminated_at.iter().filter(|t| t.is_some()).count()
    }

    pub fn checkpoint_time(&self, c: usize) -> f64 {
        self.start_time + self.checkpoints[c] as f64 * self.params.dt
    }

    pub fn mean_path_length(&self) -> f64 {
        self.path_lengths.iter().sum::<f64>() / self.members as f64
    }
}

fn check_timeline(timeline: &[WaveState], dt: f64) -> Result<()> {
    if timeline.len() < 2 {
        return Err(invalid("timeline", "need at least two states"));
    }
    for w in timeline.windows(2) {
        w[0].grid().check_same(w[1].grid())?;
        let step = w[1].time() - w[0].time();
        if (step - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::TimelineMismatch {
                expected: dt,
                found: step,
            });
        }
    }
    Ok(())
}

fn timeline_drifts(
    timeline: &[WaveState],
    pot: Option<&Potentials>,
    process: Process,
    eta: f64,
) -> Result<Vec<BondDrift>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        timeline
            .par_iter()
            .map(|s| lattice_drift(s, pot, process, eta))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        timeline
            .iter()
            .map(|s| lattice_drift(s, pot, process, eta))
            .collect()
    }
}

/// Cumulative cell probabilities of a density.
struct Sampler<'a> {
    grid: &'a ConfigGrid,
    cdf: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(rho: &'a ScalarField) -> Result<Self> {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(rho.values().len());
        for &v in rho.values() {
            acc += v.max(0.0);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::ZeroNorm);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { grid: rho.grid(), cdf })
    }

    /// Position for the uniform `u`; `r` are further uniforms placing it inside the cell.
    fn invert(&self, u: f64, r: &[f64], out: &mut [f64]) {
        let cell = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        for k in 0..self.grid.dim() {
            let i = self.grid.axis_index(cell, k);
            let h = self.grid.spacing()[k];
            out[k] = self.grid.origin()[k] + (i as f64 + r[k]) * h;
        }
    }
}

struct MemberRecord {
    checkpoints: Vec<f64>,
    velocities: Vec<f64>,
    increments: Vec<f64>,
    terminated_at: Option<usize>,
    path_length: f64,
}

/// Run `options.members` trajectories against `timeline` (spacing `params.dt`),
/// starting from `|psi_0|^2`.
pub fn simulate_ensemble(
    timeline: &[WaveState],
    pot: Option<&Potentials>,
    params: &TransitionParams,
    options: &EnsembleOptions,
) -> Result<Ensemble> {
    check_timeline(timeline, params.dt)?;
    let members = options.members;
    if members == 0 {
        return Err(invalid("members", "need at least one trajectory"));
    }
    let steps = timeline.len() - 1;
    if let Some(&c) = options.checkpoints.iter().find(|&&c| c > steps) {
        return Err(invalid("checkpoints", alloc::format!("step {c} is beyond the timeline ({steps} steps)")));
    }
    let grid = timeline[0].grid().clone();
    let system = timeline[0].system().clone();
    let dim = grid.dim();
    if let InitialSampling::Given(x0) = &options.initial {
        if x0.len() != members * dim {
            return Err(Error::ShapeMismatch("given starting points do not match members * dim"));
        }
    }
    let mut checkpoints = options.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let drifts = timeline_drifts(timeline, pot, params.process, params.eta)?;
    let rho0 = timeline[0].density();
    let sampler = Sampler::new(&rho0)?;
    let record = options.record_velocities;

    let run = |m: usize| -> MemberRecord {
        let mut rng = rng::stream(options.seed, Domain::Trajectory, m as u64);
        let mut x = vec![0.0; dim];
        match &options.initial {
            InitialSampling::Given(x0) => x.copy_from_slice(&x0[m * dim..(m + 1) * dim]),
            init => {
                let u: f64 = rng.random();
                let u = match init {
                    InitialSampling::Stratified => (m as f64 + u) / members as f64,
                    _ => u,
                };
                let r: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                sampler.invert(u, &r, &mut x);
            }
        }
        let mut rec = MemberRecord {
            checkpoints: Vec::with_capacity(checkpoints.len() * dim),
            velocities: Vec::new(),
            increments: Vec::new(),
            terminated_at: None,
            path_length: 0.0,
        };
        let mut next_cp = 0;
        if checkpoints.first() == Some(&0) {
            rec.checkpoints.extend_from_slice(&x);
            next_cp = 1;
        }
        let mut v = vec![0.0; dim];
        let mut vm = vec![0.0; dim];
        let mut tmp = vec![0.0; dim];
        let mut xh = vec![0.0; dim];
        let mut w = vec![0.0; dim];
        let mut vel = vec![0.0; dim];
        let mut prev_vel = vec![0.0; dim];
        let mut pred = vec![0.0; dim];
        let mut start = vec![0.0; dim];
        for k in 0..steps {
            start.copy_from_slice(&x);
            let f0 = &drifts[k];
            let f1 = &drifts[k + 1];
            f0.velocity_at(&x, &mut v);
            if options.scheme == Scheme::Midpoint {
                for j in 0..dim {
                    xh[j] = x[j] + 0.5 * params.dt * v[j];
                }
                grid.wrap(&mut xh);
                f0.velocity_at(&xh, &mut vm);
                f1.velocity_at(&xh, &mut tmp);
                for j in 0..dim {
                    v[j] = lerp(vm[j], tmp[j], 0.5);
                }
            }
            draw_noise(params, &system, &mut rng, &mut w);
            for j in 0..dim {
                x[j] += v[j] * params.dt + w[j];
            }
            let step = settle(&grid, &mut x);
            let mut len2 = 0.0;
            for j in 0..dim {
                let d = grid.displacement(j, start[j], x[j]);
                vel[j] = d / params.dt;
                len2 += d * d;
            }
            rec.path_length += len2.sqrt();
            if record {
                if k > 0 {
                    for j in 0..dim {
                        rec.increments.push(vel[j] - prev_vel[j] - pred[j]);
                    }
                }
                rec.velocities.extend_from_slice(&vel);
                prev_vel.copy_from_slice(&vel);
                // convective prediction for the next increment: drift after a drift-only move
                for j in 0..dim {
                    xh[j] = start[j] + params.dt * v[j];
                }
                grid.wrap(&mut xh);
                f1.velocity_at(&xh, &mut pred);
                for j in 0..dim {
                    pred[j] -= v[j];
                }
            }
            if step == Step::Escaped {
                rec.terminated_at = Some(k + 1);
                break;
            }
            if checkpoints.get(next_cp) == Some(&(k + 1)) {
                rec.checkpoints.extend_from_slice(&x);
                next_cp += 1;
            }
        }
        // checkpoints after termination hold the last position
        while rec.checkpoints.len() < checkpoints.len() * dim {
            rec.checkpoints.extend_from_slice(&x);
        }
        if record {
            rec.velocities.resize(steps * dim, f64::NAN);
            rec.increments.resize(steps.saturating_sub(1) * dim, f64::NAN);
        }
        rec
    };

    #[cfg(feature = "parallel")]
    let records: Vec<MemberRecord> = {
        use rayon::prelude::*;
        (0..members).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<MemberRecord> = (0..members).map(run).collect();

    let terminated = records.iter().filter(|r| r.terminated_at.is_some()).count();
    if terminated as f64 > options.max_terminated * members as f64 {
        return Err(Error::TooManyTerminated {
            terminated,
            total: members,
        });
    }
    let mut positions = vec![Vec::with_capacity(members * dim); checkpoints.len()];
    for r in &records {
        for (c, block) in r.checkpoints.chunks_exact(dim).enumerate() {
            positions[c].extend_from_slice(block);
        }
    }
    let (velocities, increments) = if record {
        let mut v = Vec::with_capacity(members * steps * dim);
        let mut u = Vec::with_capacity(members * steps.saturating_sub(1) * dim);
        for r in &records {
            v.extend_from_slice(&r.velocities);
            u.extend_from_slice(&r.increments);
        }
        (Some(v), Some(u))
    } else {
        (None, None)
    };
    Ok(Ensemble {
        params: *params,
        seed: options.seed,
        members,
        dim,
        axis_masses: (0..dim).map(|a| system.axis_mass(a)).collect(),
        steps,
        start_time: timeline[0].time(),
        checkpoints,
        positions,
        terminated_at: records.iter().map(|r| r.terminated_at).collect(),
        velocities,
        increments,
        path_lengths: records.iter().map(|r| r.path_length).collect(),
    })
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Covariance of the velocity increments `dU` of an OU ensemble.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IncrementReport {
    pub increments: usize,
    /// Row-major `dim x dim`.
    pub covariance: Vec<f64>,
    /// `2 eta dt / m_A` on the diagonal.
    pub expected: Vec<f64>,
    /// Largest relative deviation on the diagonal.
    pub max_relative_error: f64,
}

pub fn velocity_increment_stats(ens: &Ensemble) -> Result<IncrementReport> {
    if ens.params.gamma != 3.0 {
        return Err(invalid("gamma", "velocity increments are defined for the gamma = 3 process"));
    }
    let inc = ens
        .increments
        .as_ref()
        .ok_or_else(|| invalid("ensemble", "velocities were not recorded"))?;
    let dim = ens.dim;
    let mut cov = vec![0.0; dim * dim];
    let mut n = 0usize;
    for u in inc.chunks_exact(dim) {
        if u.iter().any(|v| v.is_nan()) {
            continue;
        }
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += u[a] * u[b];
            }
        }
        n += 1;
    }
    if n < 10_000 {
        return Err(Error::InsufficientSamples { have: n, need: 10_000 });
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);
    let covariance = cov;
    let expected: Vec<f64> = (0..dim * dim)
        .map(|i| {
            let a = i / dim;
            if a == i % dim {
                2.0 * ens.params.eta * ens.params.dt / ens.axis_masses[a]
            } else {
                0.0
            }
        })
        .collect();
    let max_relative_error = (0..dim)
        .map(|a| {
            let e = expected[a * dim + a];
            let c = covariance[a * dim + a];
            if e > 0.0 {
                (c / e - 1.0).abs()
            } else {
                c.abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(IncrementReport {
        increments: n,
        covariance,
        expected,
        max_relative_error,
    })
}

/// Fitted exponent of the fluctuation scaling `<dw^2> ~ dt^gamma`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingReport {
    pub dts: Vec<f64>,
    /// Mass-weighted `m_A <dw_A^2>` averaged over axes, one per step size.
    pub mean_square: Vec<f64>,
    /// `rms |dw| / dt`: fluctuation over drift displacement per unit speed.
    pub dominance: Vec<f64>,
    pub gamma_hat: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

/// Sample `trials` fluctuations at each step size and regress on a log-log scale.
pub fn scaling_exponent(
    params: &TransitionParams,
    system: &ParticleSystem,
    dt_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if params.eta == 0.0 {
        return Err(Error::NoiseUnavailable);
    }
    if dt_grid.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::NonPositiveInput(dt_grid.iter().position(|&d| !(d > 0.0)).unwrap()));
    }
    let lo = dt_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dt_grid.iter().copied().fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 {
        return Err(invalid("dt_grid", "step sizes must span at least 1.5 decades"));
    }
    if trials < 2 {
        return Err(Error::InsufficientSamples { have: trials, need: 2 });
    }
    let dim = system.config_dim();
    let mut w = vec![0.0; dim];
    let mut mean_square = Vec::with_capacity(dt_grid.len());
    let mut dominance = Vec::with_capacity(dt_grid.len());
    for (i, &dt) in dt_grid.iter().enumerate() {
        let p = params.with_dt(dt);
        let mut rng = rng::stream(seed, Domain::Scaling, i as u64);
        let mut acc = 0.0;
        let mut raw = 0.0;
        for _ in 0..trials {
            draw_noise(&p, system, &mut rng, &mut w);
            for (a, v) in w.iter().enumerate() {
                acc += system.axis_mass(a) * v * v;
                raw += v * v;
            }
        }
        mean_square.push(acc / (trials * dim) as f64);
        dominance.push((raw / trials as f64).sqrt() / dt);
    }
    let fit = crate::stats::fit_power_law(dt_grid, &mean_square)?;
    if fit.degenerate {
        return Err(Error::DegenerateFit("scaling regression"));
    }
    Ok(ScalingReport {
        dts: dt_grid.to_vec(),
        mean_square,
        dominance,
        gamma_hat: fit.exponent,
        stderr: fit.stderr,
        r_squared: fit.r_squared,
    })
}

/// A deterministic path, one point per timeline state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BohmianPath {
    /// `(steps + 1) * dim` coordinates.
    pub points: Vec<f64>,
    /// First timeline step at which the path reached a masked (node) region
    /// or left the box; later points repeat the last position.
    pub flagged_at: Option<usize>,
}

fn nearest_point(grid: &ConfigGrid, x: &[f64]) -> usize {
    let mut flat = 0;
    for k in 0..grid.dim() {
        let n = grid.points()[k] as f64;
        let mut u = ((x[k] - grid.origin()[k]) / grid.spacing()[k] - 0.5).round();
        if grid.periodic()[k] {
            u = crate::rem_euclid(u, n);
        }
        flat += (u.clamp(0.0, n - 1.0) as usize) * grid.strides()[k];
    }
    flat
}

/// Integrate `dx/dt = v(x, t)` with the midpoint rule, `substeps` steps per
/// timeline interval; `v` is interpolated linearly in time between states.
pub fn bohmian_trajectories(
    timeline: &[WaveState],
    pot: Option<&Potentials>,
    x0: &[f64],
    substeps: usize,
) -> Result<Vec<BohmianPath>> {
    if timeline.len() < 2 {
        return Err(invalid("timeline", "need at least two states"));
    }
    let dt = timeline[1].time() - timeline[0].time();
    check_timeline(timeline, dt)?;
    if substeps == 0 {
        return Err(invalid("substeps", "must be positive"));
    }
    let grid = timeline[0].grid().clone();
    let dim = grid.dim();
    if !x0.len().is_multiple_of(dim) {
        return Err(Error::ShapeMismatch("starting points are not a multiple of the grid dimension"));
    }
    let drifts = timeline_drifts(timeline, pot, Process::Ou, 0.0)?;
    let steps = timeline.len() - 1;
    let h = dt / substeps as f64;
    let s = substeps as f64;
    let velocity = |k: usize, theta: f64, x: &[f64], out: &mut [f64], tmp: &mut [f64]| -> bool {
        drifts[k].velocity_at(x, out);
        drifts[k + 1].velocity_at(x, tmp);
        for j in 0..out.len() {
            out[j] = lerp(out[j], tmp[j], theta);
        }
        let p = nearest_point(&grid, x);
        drifts[k].mask[p] && drifts[k + 1].mask[p]
    };
    let run = |start: &[f64]| -> BohmianPath {
        let mut x = start.to_vec();
        let mut points = Vec::with_capacity((steps + 1) * dim);
        points.extend_from_slice(&x);
        let mut v = vec![0.0; dim];
        let mut tmp = vec![0.0; dim];
        let mut xh = vec![0.0; dim];
        let mut flagged_at = None;
        'outer: for k in 0..steps {
            for j in 0..substeps {
                let theta = j as f64 / s;
                let ok0 = velocity(k, theta, &x, &mut v, &mut tmp);
                for i in 0..dim {
                    xh[i] = x[i] + 0.5 * h * v[i];
                }
                grid.wrap(&mut xh);
                let ok1 = velocity(k, theta + 0.5 / s, &xh, &mut v, &mut tmp);
                for i in 0..dim {
                    x[i] += h * v[i];
                }
                if !(ok0 && ok1) || settle(&grid, &mut x) == Step::Escaped {
                    flagged_at = Some(k + 1);
                    break 'outer;
                }
            }
            points.extend_from_slice(&x);
        }
        while points.len() < (steps + 1) * dim {
            points.extend_from_slice(&x);
        }
        BohmianPath { points, flagged_at }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(x0.par_chunks(dim).map(run).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(x0.chunks(dim).map(run).collect())
    }
}

/// Largest distance of stochastic OU paths from the Bohmian paths with the
/// same starting points, for each noise strength.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BohmianLimitReport {
    pub etas: Vec<f64>,
    pub max_deviation: Vec<f64>,
    /// Members left out because their Bohmian path was flagged.
    pub excluded: usize,
    /// Deviation strictly decreases as `eta` decreases.
    pub monotone: bool,
}

/// Run OU ensembles (midpoint drift, one seed) from `x0` for each `eta` and
/// compare against the deterministic paths.
pub fn bohmian_limit(
    timeline: &[WaveState],
    pot: Option<&Potentials>,
    x0: &[f64],
    etas: &[f64],
    seed: u64,
) -> Result<BohmianLimitReport> {
    let paths = bohmian_trajectories(timeline, pot, x0, 1)?;
    let dt = timeline[1].time() - timeline[0].time();
    let grid = timeline[0].grid();
    let dim = grid.dim();
    let members = paths.len();
    let steps = timeline.len() - 1;
    let excluded = paths.iter().filter(|p| p.flagged_at.is_some()).count();
    let mut max_deviation = Vec::with_capacity(etas.len());
    for &eta in etas {
        let params = TransitionParams::ou(dt, eta)?;
        let mut opts = EnsembleOptions::new(members, seed);
        opts.initial = InitialSampling::Given(x0.to_vec());
        opts.scheme = Scheme::Midpoint;
        opts.checkpoints = (0..=steps).collect();
        opts.max_terminated = 1.0;
        let ens = simulate_ensemble(timeline, pot, &params, &opts)?;
        let mut worst: f64 = 0.0;
        for (m, path) in paths.iter().enumerate() {
            if path.flagged_at.is_some() || ens.terminated_at[m].is_some() {
                continue;
            }
            for c in 0..=steps {
                let a = &path.points[c * dim..(c + 1) * dim];
                let b = &ens.positions[c][m * dim..(m + 1) * dim];
                let d2: f64 = (0..dim).map(|k| grid.displacement(k, a[k], b[k]).powi(2)).sum();
                worst = worst.max(d2.sqrt());
            }
        }
        max_deviation.push(worst);
    }
    let mut order: Vec<usize> = (0..etas.len()).collect();
    order.sort_by(|&a, &b| etas[b].total_cmp(&etas[a]));
    let monotone = order.windows(2).all(|w| max_deviation[w[1]] < max_deviation[w[0]]);
    Ok(BohmianLimitReport {
        etas: etas.to_vec(),
        max_deviation,
        excluded,
        monotone,
    })
}

/// Centre-of-mass statistics of an `N`-particle system.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CenterOfMassReport {
    pub particles: usize,
    pub total_mass: f64,
    pub draws: usize,
    /// Row-major covariance of `dX / dt - V` over spatial axes.
    pub covariance: Vec<f64>,
    /// `eta dt^(gamma - 2) / M` on the diagonal.
    pub expected: Vec<f64>,
    pub stderr: Vec<f64>,
    pub max_z: f64,
    /// `rho`-weighted mean `|Q|` of a Gaussian of width `sigma` carrying mass `M`.
    pub quantum_potential: f64,
    /// The same with mass `4 M`.
    pub quantum_potential_4m: f64,
    pub quantum_potential_ratio: f64,
}

/// Monte Carlo estimate of the centre-of-mass velocity fluctuations and the
/// centre-of-mass quantum potential scale for a product state.
pub fn center_of_mass_report(
    system: &ParticleSystem,
    params: &TransitionParams,
    draws: usize,
    sigma: f64,
    seed: u64,
) -> Result<CenterOfMassReport> {
    if params.eta == 0.0 {
        return Err(Error::NoiseUnavailable);
    }
    if draws < 2 {
        return Err(Error::InsufficientSamples { have: draws, need: 2 });
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let n = system.n_particles();
    let d = system.spatial_dim();
    let big_m = system.total_mass();
    let mut w = vec![0.0; n * d];
    let mut u = vec![0.0; d];
    let mut sum = vec![0.0; d * d];
    let mut sum2 = vec![0.0; d * d];
    let mut rng = rng::stream(seed, Domain::CenterOfMass, 0);
    for _ in 0..draws {
        draw_noise(params, system, &mut rng, &mut w);
        if n == 1 {
            for a in 0..d {
                u[a] = w[a] / params.dt;
            }
        } else {
            for a in 0..d {
                let mut acc = 0.0;
                for p in 0..n {
                    acc += system.masses()[p] * w[p * d + a];
                }
                u[a] = acc / big_m / params.dt;
            }
        }
        for a in 0..d {
            for b in 0..d {
                let p = u[a] * u[b];
                sum[a * d + b] += p;
                sum2[a * d + b] += p * p;
            }
        }
    }
    let nf = draws as f64;
    let covariance: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let stderr: Vec<f64> = sum2
        .iter()
        .zip(&covariance)
        .map(|(s2, c)| ((s2 / nf - c * c).max(0.0) / (nf - 1.0)).sqrt())
        .collect();
    let target = params.eta * params.dt.powf(params.gamma - 2.0) / big_m;
    let expected: Vec<f64> = (0..d * d).map(|i| if i / d == i % d { target } else { 0.0 }).collect();
    let max_z = (0..d * d)
        .map(|i| (covariance[i] - expected[i]).abs() / stderr[i].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let q1 = cm_quantum_potential(system.hbar(), big_m, sigma)?;
    let q4 = cm_quantum_potential(system.hbar(), 4.0 * big_m, sigma)?;
    Ok(CenterOfMassReport {
        particles: n,
        total_mass: big_m,
        draws,
        covariance,
        expected,
        stderr,
        max_z,
        quantum_potential: q1,
        quantum_potential_4m: q4,
        quantum_potential_ratio: q1 / q4,
    })
}

fn cm_quantum_potential(hbar: f64, mass: f64, sigma: f64) -> Result<f64> {
    let grid = ConfigGrid::line(1024, -8.0 * sigma, 8.0 * sigma, false)?;
    let rho = ScalarField::from_fn(grid.clone(), |x| (-x[0] * x[0] / (2.0 * sigma * sigma)).exp());
    let sys = ParticleSystem::single(1, mass)?.with_hbar(hbar)?;
    let q = quantum_potential(&rho, &sys)?;
    let total: f64 = rho.values().iter().sum();
    Ok(rho
        .values()
        .iter()
        .zip(q.values())
        .map(|(r, q)| r * q.abs())
        .sum::<f64>()
        / total)
}
