//! Wave states on configuration grids and their gauge-covariant Schrodinger flow.

mod evolve;
mod gauge;
mod hamiltonian;
mod madelung;
mod potentials;
pub mod states;
mod winding;

pub use evolve::{evolve, evolve_with, CrankNicolson, SolverOptions};
pub use gauge::{
    charge_quantization_check, gauge_transform, reverse_potentials, time_reverse, ChargeVerdict, GaugeFunction,
};
pub use hamiltonian::{apply_hamiltonian, energy, Hamiltonian};
pub use madelung::{
    compose, hamilton_residuals, madelung, madelung_with_floor, phase_gradient, quantum_potential,
    HamiltonResiduals, MadelungPair, PhaseGradient, ResidualOptions, DEFAULT_FLOOR,
};
pub use potentials::{LinkPotential, Potentials, Schedule};
pub use winding::{singlevalued_check, superpose, winding_number, LoopStatus, SingleValuedReport, Winding};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, ConfigGrid, ScalarField};
use crate::prelude::*;
use crate::system::ParticleSystem;
use crate::Complex64;

/// A normalized wave function at a time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaveState {
    psi: ComplexField,
    time: f64,
    system: ParticleSystem,
}

impl WaveState {
    /// Normalizes `psi` so that its integral of `|psi|^2` is one.
    pub fn new(psi: ComplexField, system: ParticleSystem, time: f64) -> Result<Self> {
        system.check_grid(psi.grid())?;
        if !time.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        let mut s = Self { psi, time, system };
        s.normalize()?;
        Ok(s)
    }

    pub fn from_fn(
        grid: ConfigGrid,
        system: ParticleSystem,
        f: impl FnMut(&[f64]) -> Complex64,
    ) -> Result<Self> {
        let psi = ComplexField::from_fn(grid, f);
        let psi = ComplexField::new(psi.grid().clone(), psi.into_values())?;
        Self::new(psi, system, 0.0)
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        for v in self.psi.values_mut() {
            *v *= s;
        }
        Ok(())
    }

    pub fn psi(&self) -> &ComplexField {
        &self.psi
    }
    pub fn grid(&self) -> &ConfigGrid {
        self.psi.grid()
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn system(&self) -> &ParticleSystem {
        &self.system
    }
    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }
    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }
    pub(crate) fn psi_mut_values(&mut self) -> &mut [Complex64] {
        self.psi.values_mut()
    }
    pub(crate) fn from_parts(psi: ComplexField, system: ParticleSystem, time: f64) -> Self {
        Self { psi, time, system }
    }

    /// Integral of `|psi|^2`.
    pub fn norm(&self) -> f64 {
        self.psi.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid().cell_volume()
    }

    pub fn density(&self) -> ScalarField {
        self.psi.modulus_squared()
    }

    /// Expected coordinate along `axis`.
    pub fn mean_position(&self, axis: usize) -> f64 {
        let g = self.grid();
        let vol = g.cell_volume();
        self.psi
            .values()
            .iter()
            .enumerate()
            .map(|(p, z)| z.norm_sqr() * g.coordinate(axis, g.axis_index(p, axis)))
            .sum::<f64>()
            * vol
    }

    /// Standard deviation of the coordinate along `axis`.
    pub fn width(&self, axis: usize) -> f64 {
        let g = self.grid();
        let vol = g.cell_volume();
        let m = self.mean_position(axis);
        let var: f64 = self
            .psi
            .values()
            .iter()
            .enumerate()
            .map(|(p, z)| {
                let d = g.coordinate(axis, g.axis_index(p, axis)) - m;
                z.norm_sqr() * d * d
            })
            .sum::<f64>()
            * vol;
        var.max(0.0).sqrt()
    }

    /// Largest pointwise deviation from another state on the same grid.
    pub fn max_deviation(&self, other: &WaveState) -> f64 {
        self.psi
            .values()
            .iter()
            .zip(other.psi.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// One row of the observables time series.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observables {
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    pub mean: Vec<f64>,
    pub width: Vec<f64>,
}

pub fn observe(state: &WaveState, pot: &Potentials) -> Result<Observables> {
    let dim = state.grid().dim();
    Ok(Observables {
        time: state.time(),
        norm: state.norm(),
        energy: energy(state, pot)?,
        mean: (0..dim).map(|a| state.mean_position(a)).collect(),
        width: (0..dim).map(|a| state.width(a)).collect(),
    })
}
