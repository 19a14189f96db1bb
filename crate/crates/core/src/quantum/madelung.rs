use super::evolve::{evolve_with, SolverOptions};
use super::potentials::Potentials;
use super::WaveState;
use crate::error::Result;
use crate::grid::{ComplexField, ConfigGrid, ScalarField, VectorField};
use crate::prelude::*;
use crate::system::ParticleSystem;
use crate::Complex64;
use core::f64::consts::PI;

/// Relative density floor below which the phase is treated as undefined.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Density and phase of a wave function. The phase is stored modulo
/// `2 pi hbar` in `(-pi hbar, pi hbar]` and is zero (masked) where the
/// density falls below `floor * max(rho)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MadelungPair {
    rho: ScalarField,
    phi: ScalarField,
    mask: Vec<bool>,
    floor: f64,
    system: ParticleSystem,
    time: f64,
}

pub fn madelung(state: &WaveState) -> MadelungPair {
    madelung_with_floor(state, DEFAULT_FLOOR)
}

pub fn madelung_with_floor(state: &WaveState, floor: f64) -> MadelungPair {
    let grid = state.grid().clone();
    let hbar = state.system().hbar();
    let rho: Vec<f64> = state.psi().values().iter().map(|z| z.norm_sqr()).collect();
    let cut = floor * rho.iter().fold(0.0, |m: f64, &v| m.max(v));
    let mut mask = Vec::with_capacity(rho.len());
    let phi: Vec<f64> = state
        .psi()
        .values()
        .iter()
        .zip(&rho)
        .map(|(z, &r)| {
            let ok = r > cut;
            mask.push(ok);
            if ok {
                hbar * z.arg()
            } else {
                0.0
            }
        })
        .collect();
    MadelungPair {
        rho: ScalarField::from_parts(grid.clone(), rho),
        phi: ScalarField::from_parts(grid, phi),
        mask,
        floor,
        system: state.system().clone(),
        time: state.time(),
    }
}

impl MadelungPair {
    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }
    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }
    /// `true` where the phase is defined.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn floor(&self) -> f64 {
        self.floor
    }
    pub fn system(&self) -> &ParticleSystem {
        &self.system
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn grid(&self) -> &ConfigGrid {
        self.rho.grid()
    }
    pub fn masked_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| !m).count() as f64 / self.mask.len() as f64
    }
}

/// `sqrt(rho) exp(i phi / hbar)`; masked points get phase zero.
pub fn compose(pair: &MadelungPair) -> Result<WaveState> {
    let hbar = pair.system.hbar();
    let values = pair
        .rho
        .values()
        .iter()
        .zip(pair.phi.values())
        .map(|(&r, &p)| Complex64::from_polar(r.sqrt(), p / hbar))
        .collect();
    WaveState::new(
        ComplexField::new(pair.grid().clone(), values)?,
        pair.system.clone(),
        pair.time,
    )
}

#[inline]
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut r = crate::rem_euclid(a + PI, 2.0 * PI) - PI;
    if r == -PI {
        r = PI;
    }
    r
}

/// Local covariant phase gradient `d Phi - hbar beta A` per configuration
/// axis, from nearest-branch central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradient {
    pub field: VectorField,
    /// `true` where the point and both neighbours on every axis carry a phase.
    pub mask: Vec<bool>,
}

/// Phase gradient of `pair`; the vector potential of `pot`, when given, is subtracted.
pub fn phase_gradient(pair: &MadelungPair, pot: Option<&Potentials>) -> Result<PhaseGradient> {
    let grid = pair.grid();
    let sys = &pair.system;
    let hbar = sys.hbar();
    let dim = grid.dim();
    let n = grid.len();
    let links = match pot.and_then(|p| p.vector.as_ref()) {
        Some(a) => {
            let phys = sys.physical_grid(grid)?;
            phys.check_same(a.grid())?;
            Some((a, phys))
        }
        None => None,
    };
    let mut comps = vec![vec![0.0; n]; dim];
    let mut mask = pair.mask.clone();
    for p in 0..n {
        if !pair.mask[p] {
            continue;
        }
        for axis in 0..dim {
            let (f, b) = match (grid.neighbor(p, axis, true), grid.neighbor(p, axis, false)) {
                (Some(f), Some(b)) if pair.mask[f] && pair.mask[b] => (f, b),
                _ => {
                    mask[p] = false;
                    break;
                }
            };
            let h = grid.spacing()[axis];
            let mut d = (pair.phi.values()[f] - pair.phi.values()[b]) / hbar;
            if let Some((a, phys)) = &links {
                let (part, sa) = sys.axis_owner(axis);
                let beta = sys.beta(part);
                let qp = sys.physical_index(grid, phys, p, part);
                let qb = sys.physical_index(grid, phys, b, part);
                d -= beta * h * (a.bonds()[sa][qp] + a.bonds()[sa][qb]);
            }
            comps[axis][p] = hbar * wrap_angle(d) / (2.0 * h);
        }
    }
    for c in comps.iter_mut() {
        for (v, &m) in c.iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            }
        }
    }
    Ok(PhaseGradient {
        field: VectorField::from_parts(grid.clone(), comps),
        mask,
    })
}

/// `Q = sum_A -(hbar^2 / 2 m_A) (d_A^2 sqrt rho) / sqrt rho`, zero where `rho`
/// is below `1e-12 max(rho)`. Non-periodic edges see a zero ghost value.
pub fn quantum_potential(rho: &ScalarField, system: &ParticleSystem) -> Result<ScalarField> {
    let grid = rho.grid();
    system.check_grid(grid)?;
    let sq: Vec<f64> = rho.values().iter().map(|r| r.max(0.0).sqrt()).collect();
    let cut = DEFAULT_FLOOR * rho.values().iter().fold(0.0, |m: f64, &v| m.max(v));
    let hbar = system.hbar();
    let values = (0..grid.len())
        .map(|p| {
            if !(rho.values()[p] > cut) {
                return 0.0;
            }
            let mut q = 0.0;
            for axis in 0..grid.dim() {
                let h = grid.spacing()[axis];
                let f = grid.neighbor(p, axis, true).map_or(0.0, |i| sq[i]);
                let b = grid.neighbor(p, axis, false).map_or(0.0, |i| sq[i]);
                q -= hbar * hbar / (2.0 * system.axis_mass(axis)) * (f - 2.0 * sq[p] + b) / (h * h * sq[p]);
            }
            q
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualOptions {
    /// Points with `rho < floor * max(rho)` within two cells are excluded.
    pub floor: f64,
    pub solver: SolverOptions,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            floor: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

/// Max-norm residuals of the continuity and quantum Hamilton-Jacobi equations.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonResiduals {
    pub r_rho: f64,
    pub r_phi: f64,
    pub masked_fraction: f64,
    /// More than 20% of the grid was excluded.
    pub excessive_masking: bool,
    pub rho_residual: ScalarField,
    pub phi_residual: ScalarField,
    pub mask: Vec<bool>,
}

/// Evolve one step forward and one backward from `state` and check
/// `d rho/dt = -sum_A d_A [rho (d Phi - A)_A / m_A]` and
/// `d Phi/dt = -[sum_A (d Phi - A)_A^2 / 2 m_A + Q + V]` with centred differences.
pub fn hamilton_residuals(
    state: &WaveState,
    pot: &Potentials,
    dt: f64,
    options: ResidualOptions,
) -> Result<HamiltonResiduals> {
    let grid = state.grid();
    let sys = state.system();
    let hbar = sys.hbar();
    let n = grid.len();
    let dim = grid.dim();
    let plus = evolve_with(state, pot, dt, 1, options.solver)?;
    let minus = evolve_with(state, pot, -dt, 1, options.solver)?;

    let pair = madelung(state);
    let grad = phase_gradient(&pair, Some(pot))?;
    let rho = pair.rho().values();
    let rmax = rho.iter().fold(0.0, |m: f64, &v| m.max(v));
    let cut = options.floor * rmax;

    // points whose stencils (radius two on every axis) stay above the floor
    let mut mask: Vec<bool> = rho.iter().map(|&r| r > cut).collect();
    for _ in 0..2 {
        let prev = mask.clone();
        for p in 0..n {
            if !prev[p] {
                continue;
            }
            for axis in 0..dim {
                match (grid.neighbor(p, axis, true), grid.neighbor(p, axis, false)) {
                    (Some(f), Some(b)) if prev[f] && prev[b] => {}
                    _ => {
                        mask[p] = false;
                        break;
                    }
                }
            }
        }
    }

    let q = quantum_potential(pair.rho(), sys)?;
    let v = pot.scalar_at(state.time());
    let mut rr = vec![0.0; n];
    let mut rp = vec![0.0; n];
    let (mut r_rho, mut r_phi) = (0.0f64, 0.0f64);
    for p in 0..n {
        if !mask[p] {
            continue;
        }
        let zp = plus.psi().values()[p];
        let zm = minus.psi().values()[p];
        let drho = (zp.norm_sqr() - zm.norm_sqr()) / (2.0 * dt);
        let dphi = hbar * (zp * zm.conj()).arg() / (2.0 * dt);
        let mut div = 0.0;
        let mut kin = 0.0;
        for axis in 0..dim {
            let m = sys.axis_mass(axis);
            let h = grid.spacing()[axis];
            let f = grid.neighbor(p, axis, true).unwrap();
            let b = grid.neighbor(p, axis, false).unwrap();
            let u = grad.field.component(axis);
            div += (rho[f] * u[f] - rho[b] * u[b]) / (2.0 * h * m);
            kin += u[p] * u[p] / (2.0 * m);
        }
        let vp = v.as_ref().map_or(0.0, |v| v[p]);
        rr[p] = drho + div;
        rp[p] = dphi + kin + q.values()[p] + vp;
        r_rho = r_rho.max(rr[p].abs());
        r_phi = r_phi.max(rp[p].abs());
    }
    let masked_fraction = mask.iter().filter(|&&m| !m).count() as f64 / n as f64;
    Ok(HamiltonResiduals {
        r_rho,
        r_phi,
        masked_fraction,
        excessive_masking: masked_fraction > 0.2,
        rho_residual: ScalarField::new(grid.clone(), rr)?,
        phi_residual: ScalarField::new(grid.clone(), rp)?,
        mask,
    })
}
