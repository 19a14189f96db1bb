use super::potentials::{LinkPotential, Potentials};
use super::WaveState;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::prelude::*;
use crate::system::ParticleSystem;
use crate::Complex64;
use core::f64::consts::PI;

/// Gauge function on physical space. `winding[a]` is the increment of `chi`
/// once around periodic axis `a`; a non-zero value makes `chi` multivalued.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaugeFunction {
    pub values: ScalarField,
    pub winding: Vec<f64>,
}

impl GaugeFunction {
    pub fn single_valued(values: ScalarField) -> Self {
        let winding = vec![0.0; values.grid().dim()];
        Self { values, winding }
    }

    pub fn with_winding(mut self, winding: Vec<f64>) -> Result<Self> {
        if winding.len() != self.values.grid().dim() {
            return Err(Error::ShapeMismatch("one winding per physical axis"));
        }
        for (a, w) in winding.iter().enumerate() {
            if *w != 0.0 && !self.values.grid().periodic()[a] {
                return Err(crate::error::invalid("winding", "windings need periodic axes"));
            }
        }
        self.winding = winding;
        Ok(self)
    }
}

/// `psi -> psi exp(i sum_n beta_n chi(x_n))`, `A -> A + d chi` on every bond.
pub fn gauge_transform(
    state: &WaveState,
    pot: &Potentials,
    chi: &GaugeFunction,
) -> Result<(WaveState, Potentials)> {
    let grid = state.grid();
    let sys = state.system();
    let phys = sys.physical_grid(grid)?;
    phys.check_same(chi.values.grid())?;
    pot.check(grid, sys)?;
    let cv = chi.values.values();
    let values: Vec<Complex64> = state
        .psi()
        .values()
        .iter()
        .enumerate()
        .map(|(p, z)| {
            let theta: f64 = (0..sys.n_particles())
                .map(|n| sys.beta(n) * cv[sys.physical_index(grid, &phys, p, n)])
                .sum();
            z * Complex64::from_polar(1.0, theta)
        })
        .collect();
    let mut a = pot.vector.clone().unwrap_or_else(|| LinkPotential::zeros(phys.clone()));
    for axis in 0..phys.dim() {
        let h = phys.spacing()[axis];
        let last = phys.points()[axis] - 1;
        for p in 0..phys.len() {
            if let Some(q) = phys.neighbor(p, axis, true) {
                let mut d = cv[q] - cv[p];
                if phys.axis_index(p, axis) == last {
                    d += chi.winding[axis];
                }
                a.bonds_mut()[axis][p] += d / h;
            }
        }
    }
    let mut out = pot.clone();
    out.vector = Some(a);
    let psi = crate::grid::ComplexField::new(grid.clone(), values)?;
    Ok((WaveState::from_parts(psi, sys.clone(), state.time()), out))
}

/// `psi(t) -> conj psi` at time `-t`.
pub fn time_reverse(state: &WaveState) -> WaveState {
    let values = state.psi().values().iter().map(|z| z.conj()).collect();
    WaveState::from_parts(
        crate::grid::ComplexField::from_parts(state.grid().clone(), values),
        state.system().clone(),
        -state.time(),
    )
}

/// `A -> -A` and `V(t) -> V(-t)`.
pub fn reverse_potentials(pot: &Potentials) -> Potentials {
    Potentials {
        scalar: pot.scalar.clone(),
        vector: pot.vector.as_ref().map(LinkPotential::negated),
        schedule: pot.schedule.reflected(),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChargeVerdict {
    pub pass: bool,
    /// `deficits[l][n]`: distance of `beta_n w_l / 2 pi` from the nearest integer.
    pub deficits: Vec<Vec<f64>>,
    /// Particles failing on at least one loop.
    pub failing: Vec<usize>,
}

/// Whether `beta_n * w` is a multiple of `2 pi` for every particle and loop
/// increment `w`, to `1e-9`.
pub fn charge_quantization_check(system: &ParticleSystem, chi_winding: &[f64]) -> ChargeVerdict {
    let mut failing = Vec::new();
    let deficits: Vec<Vec<f64>> = chi_winding
        .iter()
        .map(|&w| {
            (0..system.n_particles())
                .map(|n| {
                    let x = system.beta(n) * w / (2.0 * PI);
                    let d = (x - x.round()).abs();
                    if d > 1e-9 && !failing.contains(&n) {
                        failing.push(n);
                    }
                    d
                })
                .collect()
        })
        .collect();
    failing.sort_unstable();
    ChargeVerdict {
        pass: failing.is_empty(),
        deficits,
        failing,
    }
}
