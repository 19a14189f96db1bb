//! Turn config sections into core objects.

use ed_core::grid::{ConfigGrid, GridSpec};
use ed_core::quantum::states::{gaussian_packet, ground_state, plane_wave, two_packet, vortex};
use ed_core::quantum::{LinkPotential, Potentials, SolverOptions, WaveState};
use ed_core::system::ParticleSystem;

use crate::config::{ExperimentConfig, GridConfig, InitialConfig, NumericsConfig, PotentialConfig, SystemConfig};
use crate::error::{field, Result};

pub fn grid(g: &GridConfig) -> Result<ConfigGrid> {
    let spec = GridSpec {
        points: g.points.clone(),
        extent: g.lower.iter().zip(&g.upper).map(|(lo, hi)| hi - lo).collect(),
        origin: g.lower.clone(),
        periodic: g.periodic.clone(),
    };
    Ok(ConfigGrid::new(spec)?)
}

pub fn system(s: &SystemConfig) -> Result<ParticleSystem> {
    let charges = if s.charges.is_empty() {
        vec![0.0; s.masses.len()]
    } else {
        s.charges.clone()
    };
    Ok(ParticleSystem::new(s.masses.clone(), charges, s.spatial_dim)?
        .with_hbar(s.hbar)?
        .with_light_speed(s.light_speed)?
        .with_eta(s.eta)?
        .with_gamma(s.gamma)?)
}

pub fn potentials(p: &PotentialConfig, grid: &ConfigGrid, sys: &ParticleSystem) -> Result<Potentials> {
    Ok(match p {
        PotentialConfig::Free => Potentials::free(),
        PotentialConfig::Harmonic { omega, center } => Potentials::harmonic(grid, sys, *omega, center)?,
        PotentialConfig::DoubleWell { depth, a } => Potentials::double_well(grid, *depth, *a)?,
        PotentialConfig::Ring { a } => {
            if !grid.periodic().iter().all(|&p| p) {
                return Err(field("potential.a", "the ring preset needs a periodic grid"));
            }
            let phys = sys.physical_grid(grid)?;
            Potentials::free().with_vector(LinkPotential::uniform(phys, a)?)
        }
        PotentialConfig::Vortex2d { flux, core } => {
            if sys.spatial_dim() != 2 {
                return Err(field("potential.preset", "vortex-2d needs two spatial dimensions"));
            }
            let phys = sys.physical_grid(grid)?;
            let (f, c2) = (*flux, core * core);
            let a = LinkPotential::from_fn(phys, |x| {
                let s = f / (2.0 * std::f64::consts::PI * (x[0] * x[0] + x[1] * x[1] + c2));
                vec![-x[1] * s, x[0] * s]
            })?;
            Potentials::free().with_vector(a)
        }
    })
}

pub fn initial(
    i: &InitialConfig,
    grid: &ConfigGrid,
    sys: &ParticleSystem,
    pot: &Potentials,
) -> Result<WaveState> {
    Ok(match i {
        InitialConfig::Gaussian { center, sigma, k } => gaussian_packet(grid, sys, center, sigma, k)?,
        InitialConfig::TwoPacket {
            center,
            separation,
            sigma,
            k,
        } => two_packet(grid, sys, *center, *separation, *sigma, *k)?,
        InitialConfig::PlaneWave { k } => plane_wave(grid, sys, k)?,
        InitialConfig::Vortex {
            winding,
            center,
            core,
            width,
        } => vortex(grid, sys, *winding, center, *core, *width)?,
        InitialConfig::GroundState { tolerance } => ground_state(grid, sys, pot, *tolerance)?.0,
    })
}

pub fn solver(n: &NumericsConfig) -> SolverOptions {
    SolverOptions {
        tolerance: n.solver_tolerance,
        max_iterations: n.solver_max_iterations,
    }
}

/// Everything a wave-function run needs.
pub struct Physical {
    pub grid: ConfigGrid,
    pub system: ParticleSystem,
    pub potentials: Potentials,
    pub state: WaveState,
}

pub fn physical(cfg: &ExperimentConfig) -> Result<Physical> {
    let g = grid(cfg.grid.as_ref().ok_or_else(|| field("grid", "missing"))?)?;
    let s = system(cfg.system.as_ref().ok_or_else(|| field("system", "missing"))?)?;
    let p = match &cfg.potential {
        Some(p) => potentials(p, &g, &s)?,
        None => Potentials::free(),
    };
    p.check(&g, &s)?;
    let st = initial(cfg.initial.as_ref().ok_or_else(|| field("initial", "missing"))?, &g, &s, &p)?;
    Ok(Physical {
        grid: g,
        system: s,
        potentials: p,
        state: st,
    })
}
