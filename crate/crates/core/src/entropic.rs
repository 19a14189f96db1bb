//! The maximum-entropy short step and its iteration.
//!
//! A step from `x` is the distribution that maximizes entropy relative to a
//! Gaussian prior of precision `alpha_n` per particle, given the expected
//! change of the drift potential and of the gauge constraint. Both
//! constraints are linear in the displacement, so the answer is a Gaussian
//! with mean `(alpha' / alpha_n) (d phi - beta_n A)` and variance `1/alpha_n`.

use crate::error::{invalid, Error, Result};
use crate::grid::{ConfigGrid, ScalarField, VectorField};
use crate::prelude::*;
use crate::rng::{self, Domain};
use crate::system::ParticleSystem;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::StandardNormal;

/// Nominal constraint constants. They never enter the numerics, which are
/// parameterized directly by multipliers; they are kept for the record.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NominalConstraints {
    pub kappa: Vec<f64>,
    pub kappa_prime: Option<f64>,
    pub kappa_second: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntProblem {
    pub grid: ConfigGrid,
    /// Prior precision per particle.
    pub alpha: Vec<f64>,
    /// Multiplier of the drift-potential constraint.
    pub alpha_prime: f64,
    /// Gauge multipliers per particle.
    pub beta: Vec<f64>,
    pub spatial_dim: usize,
    /// Gradient of the drift potential on the configuration grid.
    pub drift_grad: VectorField,
    /// Vector potential lifted to configuration space: component `A` holds `A_a(x_n)`.
    pub vector_potential: Option<VectorField>,
    pub dt: f64,
    pub nominal: NominalConstraints,
}

impl MaxEntProblem {
    /// Multipliers fixed by the duration convention:
    /// `alpha_n = m_n / (eta dt^gamma)` and `alpha' = hbar / (eta dt^(gamma-1))`.
    pub fn from_system(
        system: &ParticleSystem,
        dt: f64,
        drift_grad: VectorField,
        vector_potential: Option<VectorField>,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let grid = drift_grad.grid().clone();
        system.check_grid(&grid)?;
        let eta = system.eta();
        let g = system.gamma_exponent();
        let alpha: Vec<f64> = system.masses().iter().map(|m| m / (eta * dt.powf(g))).collect();
        let alpha_prime = system.hbar() / (eta * dt.powf(g - 1.0));
        let beta = (0..system.n_particles()).map(|n| system.beta(n)).collect();
        Ok(Self {
            grid,
            alpha,
            alpha_prime,
            beta,
            spatial_dim: system.spatial_dim(),
            drift_grad,
            vector_potential,
            dt,
            nominal: NominalConstraints::default(),
        })
    }
}

/// Gaussian short-step law on a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianStep {
    /// Expected displacement from every grid point.
    pub mean_shift: VectorField,
    /// Variance per configuration axis.
    pub variance: Vec<f64>,
    pub dt: f64,
}

impl GaussianStep {
    /// Drift-free step with the given per-axis variances.
    pub fn isotropic(grid: ConfigGrid, variance: Vec<f64>, dt: f64) -> Result<Self> {
        if variance.len() != grid.dim() || variance.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("variance", "need one positive variance per axis"));
        }
        Ok(Self {
            mean_shift: VectorField::zeros(grid),
            variance,
            dt,
        })
    }

    pub fn grid(&self) -> &ConfigGrid {
        self.mean_shift.grid()
    }

    /// Transition density from grid point `from` to position `to`.
    pub fn density(&self, from: usize, to: &[f64]) -> f64 {
        let grid = self.grid();
        let mut log = 0.0;
        let mut norm = 1.0;
        for k in 0..grid.dim() {
            let x = grid.coordinate(k, grid.axis_index(from, k));
            let c = x + self.mean_shift.component(k)[from];
            let d = grid.displacement(k, c, to[k]);
            log -= d * d / (2.0 * self.variance[k]);
            norm *= (2.0 * PI * self.variance[k]).sqrt();
        }
        log.exp() / norm
    }
}

/// Build the Gaussian step of a max-ent problem.
pub fn maxent_transition(problem: &MaxEntProblem) -> Result<GaussianStep> {
    let grid = &problem.grid;
    if problem.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) || !(problem.alpha_prime > 0.0 && problem.alpha_prime.is_finite()) {
        return Err(invalid("alpha", "multipliers must be positive and finite"));
    }
    if problem.drift_grad.grid() != grid {
        return Err(Error::ShapeMismatch("drift gradient is not on the problem grid"));
    }
    if let Some(a) = &problem.vector_potential {
        grid.check_same(a.grid())?;
    }
    let d = problem.spatial_dim;
    if problem.alpha.len() * d != grid.dim() || problem.beta.len() != problem.alpha.len() {
        return Err(Error::ShapeMismatch("multipliers do not match the grid axes"));
    }
    let mut comps = Vec::with_capacity(grid.dim());
    let mut variance = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let n = axis / d;
        let scale = problem.alpha_prime / problem.alpha[n];
        let grad = problem.drift_grad.component(axis);
        let c: Vec<f64> = match &problem.vector_potential {
            Some(a) if problem.beta[n] != 0.0 => grad
                .iter()
                .zip(a.component(axis))
                .map(|(g, av)| scale * (g - problem.beta[n] * av))
                .collect(),
            _ => grad.iter().map(|g| scale * g).collect(),
        };
        comps.push(c);
        variance.push(1.0 / problem.alpha[n]);
    }
    Ok(GaussianStep {
        mean_shift: VectorField::new(grid.clone(), comps)?,
        variance,
        dt: problem.dt,
    })
}

/// Result of one Chapman-Kolmogorov step.
#[derive(Debug, Clone, PartialEq)]
pub struct CkStep {
    pub rho: ScalarField,
    pub mass_before: f64,
    pub mass_after: f64,
}

impl CkStep {
    /// Change of total probability caused by discretization and truncation.
    pub fn mass_drift(&self) -> f64 {
        self.mass_after - self.mass_before
    }
}

const TRUNCATION: f64 = 6.0;

/// `rho'(x') = sum_x P(x'|x) rho(x) dV` with the kernel cut at six standard
/// deviations. The output is not renormalized; see [`CkStep::mass_drift`].
pub fn chapman_kolmogorov_step(rho: &ScalarField, step: &GaussianStep) -> Result<CkStep> {
    let grid = rho.grid();
    grid.check_same(step.grid())?;
    let dim = grid.dim();
    let sigma: Vec<f64> = step.variance.iter().map(|v| v.sqrt()).collect();
    let radius: Vec<usize> = (0..dim)
        .map(|k| (TRUNCATION * sigma[k] / grid.spacing()[k]).ceil() as usize + 1)
        .collect();
    for k in 0..dim {
        let r = TRUNCATION * sigma[k];
        let limit = if grid.periodic()[k] {
            0.5 * grid.extent()[k]
        } else {
            grid.extent()[k]
        };
        if r >= limit {
            return Err(Error::KernelTooWide { axis: k, radius: r, limit });
        }
    }
    let vol = grid.cell_volume();
    let norm: f64 = sigma.iter().map(|s| 1.0 / ((2.0 * PI).sqrt() * s)).product();
    let mut out = vec![0.0; grid.len()];
    let mut ranges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for (src, &r) in rho.values().iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        for k in 0..dim {
            ranges[k].clear();
            let n = grid.points()[k] as isize;
            let h = grid.spacing()[k];
            let i = grid.axis_index(src, k);
            let c = grid.coordinate(k, i) + step.mean_shift.component(k)[src];
            let ci = ((c - grid.origin()[k]) / h - 0.5).round() as isize;
            let rad = radius[k] as isize;
            for j in (ci - rad)..=(ci + rad) {
                let jj = if grid.periodic()[k] {
                    j.rem_euclid(n)
                } else if j < 0 || j >= n {
                    continue;
                } else {
                    j
                };
                let d = grid.displacement(k, c, grid.coordinate(k, jj as usize));
                if d.abs() > TRUNCATION * sigma[k] {
                    continue;
                }
                let w = (-d * d / (2.0 * step.variance[k])).exp();
                ranges[k].push((jj as usize * grid.strides()[k], w));
            }
        }
        let weight = r * vol * norm;
        match dim {
            1 => {
                for &(a, wa) in &ranges[0] {
                    out[a] += weight * wa;
                }
            }
            2 => {
                for &(a, wa) in &ranges[0] {
                    for &(b, wb) in &ranges[1] {
                        out[a + b] += weight * wa * wb;
                    }
                }
            }
            _ => {
                for &(a, wa) in &ranges[0] {
                    for &(b, wb) in &ranges[1] {
                        for &(c, wc) in &ranges[2] {
                            out[a + b + c] += weight * wa * wb * wc;
                        }
                    }
                }
            }
        }
    }
    let mass_before = rho.values().iter().sum::<f64>() * vol;
    let mass_after = out.iter().sum::<f64>() * vol;
    Ok(CkStep {
        rho: ScalarField::new(grid.clone(), out)?,
        mass_before,
        mass_after,
    })
}

/// Bayes-reversed kernel `P(x|x') = rho_t(x) P(x'|x) / rho_next(x')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseKernel {
    pub field: ScalarField,
    /// Integral of `field`; equals one when `rho_next` is the forward image of `rho_t`.
    pub normalization: f64,
}

pub fn bayes_reverse(
    step: &GaussianStep,
    rho_t: &ScalarField,
    rho_next: &ScalarField,
    x_next: &[f64],
) -> Result<ReverseKernel> {
    let grid = rho_t.grid();
    grid.check_same(step.grid())?;
    grid.check_same(rho_next.grid())?;
    if x_next.len() != grid.dim() {
        return Err(Error::ShapeMismatch("target point dimension"));
    }
    // off-grid targets see a multilinear interpolant of rho_next
    let denom = grid.interpolate(rho_next.values(), x_next);
    if !(denom > 0.0) {
        return Err(Error::ZeroDenominator { value: denom });
    }
    let values: Vec<f64> = rho_t
        .values()
        .iter()
        .enumerate()
        .map(|(i, &r)| if r == 0.0 { 0.0 } else { r * step.density(i, x_next) / denom })
        .collect();
    let field = ScalarField::new(grid.clone(), values)?;
    let normalization = crate::grid::integrate(&field);
    Ok(ReverseKernel { field, normalization })
}

/// `-sum p ln(p/q) dV`, the entropy of `p` relative to `q` (never positive
/// for normalized inputs).
pub fn relative_entropy(p: &ScalarField, q: &ScalarField) -> Result<f64> {
    p.grid().check_same(q.grid())?;
    let mut s = 0.0;
    for (i, (&a, &b)) in p.values().iter().zip(q.values()).enumerate() {
        if a < 0.0 || b < 0.0 {
            return Err(invalid("p", "densities must be non-negative"));
        }
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::SupportViolation { index: i });
        }
        s -= a * (a / b).ln();
    }
    Ok(s * p.grid().cell_volume())
}

/// The max-ent problem from one source point, discretized on a small local
/// lattice of displacements.
#[derive(Debug, Clone)]
pub struct LocalMaxEnt {
    dim: usize,
    /// Displacements, `dim` per lattice point.
    offsets: Vec<f64>,
    /// Discrete prior, normalized.
    prior: Vec<f64>,
    /// Discrete Gaussian candidate, normalized.
    candidate: Vec<f64>,
    /// Mean displacement of the candidate; the constraint every competitor must meet.
    target: Vec<f64>,
}

impl LocalMaxEnt {
    pub fn new(step: &GaussianStep, problem: &MaxEntProblem, source: usize) -> Result<Self> {
        let grid = step.grid();
        if source >= grid.len() {
            return Err(invalid("source", "point is not on the grid"));
        }
        let dim = grid.dim();
        let per_axis: usize = match dim {
            1 => 64,
            2 => 32,
            _ => 16,
        };
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut prior_prec = Vec::with_capacity(dim);
        for k in 0..dim {
            let s = step.variance[k].sqrt();
            let mu = step.mean_shift.component(k)[source];
            let lo = mu.min(0.0) - TRUNCATION * s;
            let hi = mu.max(0.0) + TRUNCATION * s;
            let h = (hi - lo) / (per_axis - 1) as f64;
            axes.push((0..per_axis).map(|j| lo + j as f64 * h).collect());
            prior_prec.push(problem.alpha[k / problem.spatial_dim]);
        }
        let total: usize = per_axis.pow(dim as u32);
        let mut offsets = Vec::with_capacity(total * dim);
        let mut prior = Vec::with_capacity(total);
        let mut candidate = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut lp = 0.0;
            let mut lc = 0.0;
            for k in 0..dim {
                let d = axes[k][idx[k]];
                offsets.push(d);
                lp -= 0.5 * prior_prec[k] * d * d;
                let e = d - step.mean_shift.component(k)[source];
                lc -= e * e / (2.0 * step.variance[k]);
            }
            prior.push(lp.exp());
            candidate.push(lc.exp());
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        normalize(&mut prior);
        normalize(&mut candidate);
        let target = mean_offset(&offsets, &candidate, dim);
        Ok(Self {
            dim,
            offsets,
            prior,
            candidate,
            target,
        })
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }
    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }
    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Discrete relative entropy `-sum p ln(p/q)` against the prior.
    pub fn entropy(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.prior)
            .filter(|(&a, _)| a > 0.0)
            .map(|(&a, &q)| -a * (a / q).ln())
            .sum()
    }

    /// Tilt `p` by `exp(lambda . dx)` and renormalize so its mean displacement
    /// meets the constraint. `None` when the Newton iteration fails.
    pub fn retilt(&self, p: &[f64]) -> Option<Vec<f64>> {
        let dim = self.dim;
        let mut lambda = vec![0.0; dim];
        let mut cur = p.to_vec();
        normalize(&mut cur);
        for _ in 0..60 {
            let mean = mean_offset(&self.offsets, &cur, dim);
            let resid: Vec<f64> = (0..dim).map(|k| mean[k] - self.target[k]).collect();
            let scale: f64 = self.target.iter().fold(1.0, |m, t| m.max(t.abs()));
            if resid.iter().all(|r| r.abs() <= 1e-14 * scale) {
                return Some(cur);
            }
            let mut cov = vec![0.0; dim * dim];
            for (i, w) in cur.iter().enumerate() {
                let d = &self.offsets[i * dim..(i + 1) * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        cov[a * dim + b] += w * (d[a] - mean[a]) * (d[b] - mean[b]);
                    }
                }
            }
            let delta = solve_small(&cov, &resid, dim)?;
            for k in 0..dim {
                lambda[k] -= delta[k];
            }
            cur = p
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    let d = &self.offsets[i * dim..(i + 1) * dim];
                    let t: f64 = (0..dim).map(|k| lambda[k] * d[k]).sum();
                    w * t.exp()
                })
                .collect();
            if cur.iter().any(|v| !v.is_finite()) {
                return None;
            }
            normalize(&mut cur);
        }
        None
    }

    /// Entropy of the candidate minus that of `p` (after re-tilting `p` onto the constraint).
    pub fn margin(&self, p: &[f64]) -> Option<f64> {
        let q = self.retilt(p)?;
        Some(self.entropy(&self.candidate) - self.entropy(&q))
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for x in v {
        *x /= s;
    }
}

fn mean_offset(offsets: &[f64], w: &[f64], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for (i, &p) in w.iter().enumerate() {
        for k in 0..dim {
            m[k] += p * offsets[i * dim + k];
        }
    }
    m
}

fn solve_small(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    // Gaussian elimination with partial pivoting; n <= 3.
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))?;
        if m[piv * n + c].abs() < 1e-300 {
            return None;
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
            }
            x.swap(c, piv);
        }
        for r in c + 1..n {
            let f = m[r * n + c] / m[c * n + c];
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
            x[r] -= f * x[c];
        }
    }
    for c in (0..n).rev() {
        let mut s = x[c];
        for k in c + 1..n {
            s -= m[c * n + k] * x[k];
        }
        x[c] = s / m[c * n + c];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaximizerReport {
    pub trials: usize,
    /// Trials where the Gaussian's entropy was at least the competitor's (to 1e-12).
    pub passed: usize,
    /// Competitors whose constraint reconstruction failed.
    pub skipped: usize,
    pub min_margin: f64,
    pub mean_margin: f64,
    pub max_margin: f64,
}

impl MaximizerReport {
    pub fn all_passed(&self) -> bool {
        self.passed + self.skipped == self.trials
    }
}

/// Pit the Gaussian step from `source` against `perturbations` random
/// competitors with the same mean displacement and compare entropies.
pub fn verify_maximizer(
    step: &GaussianStep,
    problem: &MaxEntProblem,
    source: usize,
    perturbations: usize,
    seed: u64,
) -> Result<MaximizerReport> {
    let local = LocalMaxEnt::new(step, problem, source)?;
    let mut margins = Vec::with_capacity(perturbations);
    let mut skipped = 0;
    for t in 0..perturbations {
        let mut rng = rng::stream(seed, Domain::Maximizer, t as u64);
        let eps = 0.05 + 0.95 * rng.random::<f64>();
        let p: Vec<f64> = local
            .candidate()
            .iter()
            .map(|&c| {
                let z: f64 = rng.sample(StandardNormal);
                c * (eps * z).exp()
            })
            .collect();
        match local.margin(&p) {
            Some(m) if m.is_finite() => margins.push(m),
            _ => skipped += 1,
        }
    }
    let passed = margins.iter().filter(|&&m| m >= -1e-12).count();
    let (min, max, mean) = if margins.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            margins.iter().copied().fold(f64::INFINITY, f64::min),
            margins.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            margins.iter().sum::<f64>() / margins.len() as f64,
        )
    };
    Ok(MaximizerReport {
        trials: perturbations,
        passed,
        skipped,
        min_margin: min,
        mean_margin: mean,
        max_margin: max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;

    fn system_1d() -> ParticleSystem {
        ParticleSystem::single(1, 1.0).unwrap()
    }

    #[test]
    fn zero_drift_gives_pure_gaussian() {
        let g = ConfigGrid::line(50, -1.0, 1.0, true).unwrap();
        let p = MaxEntProblem::from_system(&system_1d(), 0.1, VectorField::zeros(g), None).unwrap();
        let s = maxent_transition(&p).unwrap();
        assert!(s.mean_shift.component(0).iter().all(|&v| v == 0.0));
        assert!((s.variance[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn constant_drift_maps_to_velocity_times_dt() {
        let g = ConfigGrid::line(20, -1.0, 1.0, true).unwrap();
        let sys = system_1d().with_hbar(0.5).unwrap();
        let grad = VectorField::from_fn(g, |_| vec![3.0]);
        let p = MaxEntProblem::from_system(&sys, 0.1, grad, None).unwrap();
        let s = maxent_transition(&p).unwrap();
        // v = hbar * dphi / m
        for &m in s.mean_shift.component(0) {
            assert!((m - 0.5 * 3.0 * 0.1).abs() < 1e-14);
        }
    }

    #[test]
    fn uncharged_particles_ignore_the_vector_potential() {
        let g = ConfigGrid::line(20, -1.0, 1.0, true).unwrap();
        let grad = VectorField::from_fn(g.clone(), |x| vec![x[0]]);
        let a = VectorField::from_fn(g, |x| vec![2.0 + x[0] * x[0]]);
        let p0 = MaxEntProblem::from_system(&system_1d(), 0.05, grad.clone(), None).unwrap();
        let p1 = MaxEntProblem::from_system(&system_1d(), 0.05, grad, Some(a)).unwrap();
        assert_eq!(maxent_transition(&p0).unwrap(), maxent_transition(&p1).unwrap());
    }

    #[test]
    fn nonpositive_multiplier_rejected() {
        let g = ConfigGrid::line(20, -1.0, 1.0, true).unwrap();
        let mut p = MaxEntProblem::from_system(&system_1d(), 0.05, VectorField::zeros(g), None).unwrap();
        p.alpha[0] = 0.0;
        assert!(maxent_transition(&p).is_err());
    }

    #[test]
    fn spike_spreads_to_kernel_variance() {
        let n = 401;
        let g = ConfigGrid::line(n, -2.0, 2.0, false).unwrap();
        let h = g.spacing()[0];
        let mut rho = ScalarField::zeros(g.clone());
        rho.values_mut()[n / 2] = 1.0 / h;
        let var = 0.01;
        let step = GaussianStep::isotropic(g.clone(), vec![var], 0.1).unwrap();
        let out = chapman_kolmogorov_step(&rho, &step).unwrap();
        assert!(out.mass_drift().abs() < 1e-6);
        for i in 0..n {
            let x = g.coordinate(0, i);
            let exact = if x.abs() <= 6.0 * var.sqrt() {
                (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
            } else {
                0.0
            };
            assert!((out.rho.values()[i] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn relative_entropy_of_offset_gaussians() {
        let g = ConfigGrid::line(800, -10.0, 10.0, false).unwrap();
        let s = 1.0;
        let a = 0.7;
        let gauss = |m: f64| {
            ScalarField::from_fn(g.clone(), move |x| {
                (-(x[0] - m) * (x[0] - m) / (2.0 * s * s)).exp() / (2.0 * PI * s * s).sqrt()
            })
        };
        let p = gauss(0.0);
        let q = gauss(a);
        assert!(relative_entropy(&p, &p).unwrap().abs() < 1e-14);
        let v = relative_entropy(&p, &q).unwrap();
        assert!((v + a * a / (2.0 * s * s)).abs() < 1e-8, "{v}");
        let mut q0 = q.clone();
        q0.values_mut()[400] = 0.0;
        assert_eq!(relative_entropy(&p, &q0), Err(Error::SupportViolation { index: 400 }));
    }

    #[test]
    fn reverse_kernel_normalizes() {
        let g = ConfigGrid::line(200, -5.0, 5.0, false).unwrap();
        let rho = ScalarField::from_fn(g.clone(), |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt());
        let grad = VectorField::from_fn(g.clone(), |_| vec![1.0]);
        let sys = system_1d().with_gamma(1.0).unwrap().with_eta(0.05).unwrap();
        let p = MaxEntProblem::from_system(&sys, 0.5, grad, None).unwrap();
        let step = maxent_transition(&p).unwrap();
        let next = chapman_kolmogorov_step(&rho, &step).unwrap().rho;
        let r = bayes_reverse(&step, &rho, &next, &[g.coordinate(0, 106)]).unwrap();
        assert!((r.normalization - 1.0).abs() < 1e-6);
        assert!((integrate(&r.field) - r.normalization).abs() < 1e-15);
    }

    #[test]
    fn maximizer_identity_and_zero_trials() {
        let g = ConfigGrid::line(32, -1.0, 1.0, true).unwrap();
        let grad = VectorField::from_fn(g, |_| vec![2.0]);
        let p = MaxEntProblem::from_system(&system_1d(), 0.1, grad, None).unwrap();
        let step = maxent_transition(&p).unwrap();
        let local = LocalMaxEnt::new(&step, &p, 5).unwrap();
        assert!(local.margin(local.candidate()).unwrap().abs() < 1e-12);
        let r = verify_maximizer(&step, &p, 5, 0, 1).unwrap();
        assert_eq!(r.trials, 0);
        assert!(r.all_passed());
    }

    #[test]
    fn gaussian_beats_tilted_competitors() {
        let g = ConfigGrid::line(32, -1.0, 1.0, true).unwrap();
        let grad = VectorField::from_fn(g, |x| vec![1.0 + x[0]]);
        let p = MaxEntProblem::from_system(&system_1d(), 0.1, grad, None).unwrap();
        let step = maxent_transition(&p).unwrap();
        let r = verify_maximizer(&step, &p, 7, 200, 11).unwrap();
        assert_eq!(r.passed, 200, "{r:?}");
        assert!(r.min_margin > 0.0);
    }
}
