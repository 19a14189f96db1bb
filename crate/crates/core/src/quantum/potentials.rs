use crate::error::{invalid, Error, Result};
use crate::grid::{ConfigGrid, ScalarField};
use crate::prelude::*;
use crate::system::ParticleSystem;

/// Vector potential on physical space, stored on bonds: `bonds[a][p]` is
/// `A_a` at the midpoint of the bond from `p` to its forward neighbour on axis `a`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkPotential {
    grid: ConfigGrid,
    bonds: Vec<Vec<f64>>,
}

impl LinkPotential {
    pub fn new(grid: ConfigGrid, bonds: Vec<Vec<f64>>) -> Result<Self> {
        if bonds.len() != grid.dim() || bonds.iter().any(|b| b.len() != grid.len()) {
            return Err(Error::ShapeMismatch("bond values do not conform to the physical grid"));
        }
        if bonds.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector potential"));
        }
        Ok(Self { grid, bonds })
    }

    pub fn zeros(grid: ConfigGrid) -> Self {
        let bonds = vec![vec![0.0; grid.len()]; grid.dim()];
        Self { grid, bonds }
    }

    /// The same vector on every bond.
    pub fn uniform(grid: ConfigGrid, a: &[f64]) -> Result<Self> {
        if a.len() != grid.dim() {
            return Err(Error::ShapeMismatch("uniform vector potential dimension"));
        }
        let bonds = a.iter().map(|&v| vec![v; grid.len()]).collect();
        Self::new(grid, bonds)
    }

    /// Sample `a(x)` at bond midpoints.
    pub fn from_fn(grid: ConfigGrid, mut a: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let dim = grid.dim();
        let mut bonds = vec![vec![0.0; grid.len()]; dim];
        for p in 0..grid.len() {
            let x = grid.position(p);
            for k in 0..dim {
                let mut m = x.clone();
                m[k] += 0.5 * grid.spacing()[k];
                bonds[k][p] = a(&m)[k];
            }
        }
        Self::new(grid, bonds)
    }

    pub fn grid(&self) -> &ConfigGrid {
        &self.grid
    }
    pub fn bonds(&self) -> &[Vec<f64>] {
        &self.bonds
    }
    pub fn bonds_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.bonds
    }

    /// Point values (mean of the two adjacent bonds) on physical axis `a`.
    pub fn point_values(&self, a: usize) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| match self.grid.neighbor(p, a, false) {
                Some(m) => 0.5 * (self.bonds[a][p] + self.bonds[a][m]),
                None => self.bonds[a][p],
            })
            .collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            bonds: self.bonds.iter().map(|b| b.iter().map(|v| -v).collect()).collect(),
        }
    }
}

/// Time dependence of the scalar potential: `V(x, t) = V(x) * factor(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Schedule {
    #[default]
    Static,
    /// `1 + amplitude * cos(omega * s * t + phase)` with `s = -1` once reflected.
    Modulated {
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
        reflected: bool,
    },
}

impl Schedule {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Schedule::Static => 1.0,
            Schedule::Modulated {
                amplitude,
                angular_frequency,
                phase,
                reflected,
            } => {
                let s = if reflected { -1.0 } else { 1.0 };
                1.0 + amplitude * (angular_frequency * s * t + phase).cos()
            }
        }
    }

    /// Schedule of `V(-t)`.
    pub fn reflected(&self) -> Self {
        match *self {
            Schedule::Static => Schedule::Static,
            Schedule::Modulated {
                amplitude,
                angular_frequency,
                phase,
                reflected,
            } => Schedule::Modulated {
                amplitude,
                angular_frequency,
                phase,
                reflected: !reflected,
            },
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Schedule::Static)
    }
}

/// External potentials: a scalar `V` on the configuration grid and a vector
/// potential on physical space shared by all particles.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Potentials {
    pub scalar: Option<ScalarField>,
    pub vector: Option<LinkPotential>,
    pub schedule: Schedule,
}

impl Potentials {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn with_scalar(mut self, v: ScalarField) -> Self {
        self.scalar = Some(v);
        self
    }

    pub fn with_vector(mut self, a: LinkPotential) -> Self {
        self.vector = Some(a);
        self
    }

    pub fn with_schedule(mut self, s: Schedule) -> Self {
        self.schedule = s;
        self
    }

    /// Scalar potential values at time `t`, if any.
    pub fn scalar_at(&self, t: f64) -> Option<Vec<f64>> {
        let f = self.schedule.factor(t);
        self.scalar
            .as_ref()
            .map(|v| v.values().iter().map(|x| x * f).collect())
    }

    /// Check that the potentials fit `grid` for `system`.
    pub fn check(&self, grid: &ConfigGrid, system: &ParticleSystem) -> Result<()> {
        if let Some(v) = &self.scalar {
            grid.check_same(v.grid())?;
        }
        if let Some(a) = &self.vector {
            let phys = system.physical_grid(grid)?;
            phys.check_same(a.grid())?;
        }
        Ok(())
    }

    /// Harmonic well `sum_A m_A omega^2 (x_A - c_A)^2 / 2`.
    pub fn harmonic(grid: &ConfigGrid, system: &ParticleSystem, omega: f64, center: &[f64]) -> Result<Self> {
        system.check_grid(grid)?;
        if center.len() != grid.dim() {
            return Err(Error::ShapeMismatch("center dimension"));
        }
        let v = ScalarField::from_fn(grid.clone(), |x| {
            (0..x.len())
                .map(|a| 0.5 * system.axis_mass(a) * omega * omega * (x[a] - center[a]).powi(2))
                .sum()
        });
        Ok(Self::free().with_scalar(v))
    }

    /// Quartic double well `depth * ((x/a)^2 - 1)^2` summed over axes.
    pub fn double_well(grid: &ConfigGrid, depth: f64, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("a", "well separation must be positive"));
        }
        let v = ScalarField::from_fn(grid.clone(), |x| {
            x.iter().map(|&xi| depth * ((xi / a).powi(2) - 1.0).powi(2)).sum()
        });
        Ok(Self::free().with_scalar(v))
    }
}
