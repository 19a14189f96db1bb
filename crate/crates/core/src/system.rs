//! Particle content and the constants of the sub-quantum law.

use crate::error::{invalid, Error, Result};
use crate::grid::{ConfigGrid, GridSpec};
use crate::prelude::*;

/// `N` particles in `d` spatial dimensions. Configuration axis `A` belongs to
/// particle `A / d` and spatial direction `A % d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParticleSystem {
    masses: Vec<f64>,
    charges: Vec<f64>,
    spatial_dim: usize,
    hbar: f64,
    light_speed: f64,
    eta: f64,
    gamma_exponent: f64,
}

impl ParticleSystem {
    pub fn new(masses: Vec<f64>, charges: Vec<f64>, spatial_dim: usize) -> Result<Self> {
        if masses.is_empty() || masses.len() != charges.len() {
            return Err(invalid("masses", "need one mass and one charge per particle"));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(invalid("masses", "masses must be positive"));
        }
        if charges.iter().any(|q| !q.is_finite()) {
            return Err(invalid("charges", "charges must be finite"));
        }
        if spatial_dim == 0 || spatial_dim > 3 {
            return Err(invalid("spatial_dim", "must be 1, 2 or 3"));
        }
        Ok(Self {
            masses,
            charges,
            spatial_dim,
            hbar: 1.0,
            light_speed: 1.0,
            eta: 1.0,
            gamma_exponent: 3.0,
        })
    }

    /// A single neutral particle of mass `mass` with natural units.
    pub fn single(spatial_dim: usize, mass: f64) -> Result<Self> {
        Self::new(vec![mass], vec![0.0], spatial_dim)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid("hbar", "must be positive"));
        }
        self.hbar = hbar;
        Ok(self)
    }

    pub fn with_light_speed(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("light_speed", "must be positive"));
        }
        self.light_speed = c;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(invalid("eta", "must be non-negative"));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma_exponent", "must be positive"));
        }
        self.gamma_exponent = gamma;
        Ok(self)
    }

    pub fn n_particles(&self) -> usize {
        self.masses.len()
    }
    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }
    pub fn config_dim(&self) -> usize {
        self.masses.len() * self.spatial_dim
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn charges(&self) -> &[f64] {
        &self.charges
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn light_speed(&self) -> f64 {
        self.light_speed
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn gamma_exponent(&self) -> f64 {
        self.gamma_exponent
    }

    /// Gauge coupling `q_n / (hbar c)`.
    pub fn beta(&self, particle: usize) -> f64 {
        self.charges[particle] / (self.hbar * self.light_speed)
    }

    /// `(particle, spatial direction)` of configuration axis `axis`.
    pub fn axis_owner(&self, axis: usize) -> (usize, usize) {
        (axis / self.spatial_dim, axis % self.spatial_dim)
    }

    /// Diagonal entry of the mass tensor on configuration axis `axis`.
    pub fn axis_mass(&self, axis: usize) -> f64 {
        self.masses[axis / self.spatial_dim]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Check that `grid` is a configuration grid for this system: the right
    /// number of axes and the same geometry for every particle.
    pub fn check_grid(&self, grid: &ConfigGrid) -> Result<()> {
        if grid.dim() != self.config_dim() {
            return Err(Error::ShapeMismatch("grid axes differ from particles x spatial dimension"));
        }
        let d = self.spatial_dim;
        let s = grid.spec();
        for n in 1..self.n_particles() {
            for a in 0..d {
                let (i, j) = (a, n * d + a);
                if s.points[i] != s.points[j]
                    || s.extent[i] != s.extent[j]
                    || s.origin[i] != s.origin[j]
                    || s.periodic[i] != s.periodic[j]
                {
                    return Err(Error::ShapeMismatch("particles must share one physical-space geometry"));
                }
            }
        }
        Ok(())
    }

    /// The physical-space grid (the axes of particle 0).
    pub fn physical_grid(&self, grid: &ConfigGrid) -> Result<ConfigGrid> {
        self.check_grid(grid)?;
        let d = self.spatial_dim;
        let s = grid.spec();
        ConfigGrid::new(GridSpec {
            points: s.points[..d].to_vec(),
            extent: s.extent[..d].to_vec(),
            origin: s.origin[..d].to_vec(),
            periodic: s.periodic[..d].to_vec(),
        })
    }

    /// Flat physical index of particle `particle` at configuration point `flat`.
    pub fn physical_index(&self, grid: &ConfigGrid, phys: &ConfigGrid, flat: usize, particle: usize) -> usize {
        let d = self.spatial_dim;
        let mut idx = 0;
        for a in 0..d {
            idx += grid.axis_index(flat, particle * d + a) * phys.strides()[a];
        }
        idx
    }
}
