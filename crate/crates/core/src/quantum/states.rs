//! Standard initial states.

use super::hamiltonian::Hamiltonian;
use super::potentials::Potentials;
use super::WaveState;
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexField, ConfigGrid};
use crate::prelude::*;
use crate::system::ParticleSystem;
use crate::Complex64;

/// Product of Gaussians `exp(-(x - c)^2 / 4 s^2 + i k x)`; `sigma` is the
/// standard deviation of the density on each axis.
pub fn gaussian_packet(
    grid: &ConfigGrid,
    system: &ParticleSystem,
    center: &[f64],
    sigma: &[f64],
    k: &[f64],
) -> Result<WaveState> {
    let dim = grid.dim();
    if center.len() != dim || sigma.len() != dim || k.len() != dim {
        return Err(Error::ShapeMismatch("packet parameters need one entry per axis"));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(invalid("sigma", "widths must be positive"));
    }
    WaveState::from_fn(grid.clone(), system.clone(), |x| {
        let mut re = 0.0;
        let mut ph = 0.0;
        for a in 0..dim {
            let d = x[a] - center[a];
            re -= d * d / (4.0 * sigma[a] * sigma[a]);
            ph += k[a] * x[a];
        }
        Complex64::from_polar(re.exp(), ph)
    })
}

/// `exp(i k . x)`.
pub fn plane_wave(grid: &ConfigGrid, system: &ParticleSystem, k: &[f64]) -> Result<WaveState> {
    if k.len() != grid.dim() {
        return Err(Error::ShapeMismatch("wave vector dimension"));
    }
    WaveState::from_fn(grid.clone(), system.clone(), |x| {
        Complex64::from_polar(1.0, x.iter().zip(k).map(|(a, b)| a * b).sum())
    })
}

/// Two Gaussian packets at `center -/+ separation/2` moving toward each other with `+/-k`.
pub fn two_packet(
    grid: &ConfigGrid,
    system: &ParticleSystem,
    center: f64,
    separation: f64,
    sigma: f64,
    k: f64,
) -> Result<WaveState> {
    if grid.dim() != 1 {
        return Err(invalid("grid", "the two-packet state is one-dimensional"));
    }
    let g = |x: f64, c: f64, kk: f64| {
        let d = x - c;
        Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), kk * x)
    };
    let (l, r) = (center - 0.5 * separation, center + 0.5 * separation);
    WaveState::from_fn(grid.clone(), system.clone(), |x| g(x[0], l, k) + g(x[0], r, -k))
}

/// Planar vortex `f(r) exp(i m theta)` about `center` with a regular core of
/// radius `core` and a Gaussian envelope of width `width`.
pub fn vortex(
    grid: &ConfigGrid,
    system: &ParticleSystem,
    m: i32,
    center: &[f64],
    core: f64,
    width: f64,
) -> Result<WaveState> {
    if grid.dim() != 2 || center.len() != 2 {
        return Err(invalid("grid", "vortices live on two-axis grids"));
    }
    let am = m.unsigned_abs() as i32;
    WaveState::from_fn(grid.clone(), system.clone(), |x| {
        let dx = x[0] - center[0];
        let dy = x[1] - center[1];
        let r2 = dx * dx + dy * dy;
        let radial = (r2 / (r2 + core * core)).powf(0.5 * am as f64) * (-r2 / (2.0 * width * width)).exp();
        let theta = dy.atan2(dx);
        Complex64::from_polar(radial, m as f64 * theta)
    })
}

/// Lowest eigenstate of the discrete Hamiltonian by shifted inverse iteration,
/// each solve done by conjugate gradients. Stops once `|H psi - E psi| < tol`.
pub fn ground_state(
    grid: &ConfigGrid,
    system: &ParticleSystem,
    pot: &Potentials,
    tol: f64,
) -> Result<(WaveState, f64)> {
    let h = Hamiltonian::new(grid, system, pot, 0.0)?;
    let n = grid.len();
    let vmin = pot
        .scalar_at(0.0)
        .map(|v| v.iter().copied().fold(f64::INFINITY, f64::min))
        .unwrap_or(0.0);
    let sigma = vmin - 1.0;
    let vol = grid.cell_volume();
    let mut psi: Vec<Complex64> = (0..n)
        .map(|p| {
            let x = grid.position(p);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new((-r2 / 8.0).exp() + 1e-3, 0.0)
        })
        .collect();
    let normalize = |v: &mut Vec<Complex64>| {
        let s = (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol).sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    };
    normalize(&mut psi);
    let mut hp = vec![Complex64::new(0.0, 0.0); n];
    let mut res = f64::NAN;
    for _ in 0..5000 {
        h.apply(&psi, &mut hp);
        let e = psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * vol;
        res = (hp.iter().zip(&psi).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>() * vol).sqrt();
        if res < tol {
            let field = ComplexField::new(grid.clone(), psi)?;
            return Ok((WaveState::new(field, system.clone(), 0.0)?, e));
        }
        let mut x = psi.clone();
        shifted_cg(&h, sigma, &psi, &mut x)?;
        psi = x;
        normalize(&mut psi);
    }
    Err(Error::SolveDiverged {
        iterations: 5000,
        residual: res,
    })
}

fn shifted_cg(h: &Hamiltonian, sigma: f64, b: &[Complex64], x: &mut [Complex64]) -> Result<()> {
    let n = b.len();
    let apply = |v: &[Complex64], out: &mut [Complex64]| {
        h.apply(v, out);
        for i in 0..v.len() {
            out[i] -= v[i] * sigma;
        }
    };
    let dot = |a: &[Complex64], c: &[Complex64]| a.iter().zip(c).map(|(p, q)| (p.conj() * q).re).sum::<f64>();
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    apply(x, &mut ax);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let bb = dot(b, b);
    for _ in 0..10 * n + 100 {
        if rr <= 1e-30 * bb {
            return Ok(());
        }
        apply(&p, &mut ax);
        let alpha = rr / dot(&p, &ax);
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ax[i] * alpha;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
    }
    Err(Error::SolveDiverged {
        iterations: 10 * n + 100,
        residual: (rr / bb).sqrt(),
    })
}
