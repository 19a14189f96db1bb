use super::madelung::{madelung, wrap_angle};
use super::WaveState;
use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::prelude::*;
use crate::Complex64;
use core::f64::consts::PI;

/// Winding of the phase around a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Winding {
    /// Nearest integer to `raw`.
    pub number: i64,
    /// Loop integral of the phase gradient over `2 pi hbar`.
    pub raw: f64,
    /// `|raw - number|`.
    pub gap: f64,
}

/// `(1 / 2 pi hbar)` times the loop integral of the unwrapped phase, summed
/// bond by bond with nearest-branch differences.
pub fn winding_number(state: &WaveState, lp: &[usize]) -> Result<Winding> {
    let pair = madelung(state);
    state.grid().loop_steps(lp)?;
    if let Some(i) = lp.iter().position(|&p| !pair.mask()[p]) {
        return Err(Error::NodeOnLoop { index: i });
    }
    let phi = pair.phi().values();
    let hbar = state.system().hbar();
    let total: f64 = lp
        .windows(2)
        .map(|w| wrap_angle((phi[w[1]] - phi[w[0]]) / hbar))
        .sum();
    let raw = total / (2.0 * PI);
    let number = raw.round();
    Ok(Winding {
        number: number as i64,
        raw,
        gap: (raw - number).abs(),
    })
}

/// Normalized `a1 psi1 + a2 psi2`.
pub fn superpose(psi1: &WaveState, psi2: &WaveState, a1: Complex64, a2: Complex64) -> Result<WaveState> {
    psi1.grid().check_same(psi2.grid())?;
    if psi1.system() != psi2.system() {
        return Err(Error::ShapeMismatch("states belong to different particle systems"));
    }
    let values: Vec<Complex64> = psi1
        .psi()
        .values()
        .iter()
        .zip(psi2.psi().values())
        .map(|(x, y)| a1 * x + a2 * y)
        .collect();
    if values.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::VanishingSuperposition);
    }
    let psi = ComplexField::new(psi1.grid().clone(), values)?;
    WaveState::new(psi, psi1.system().clone(), psi1.time()).map_err(|e| match e {
        Error::ZeroNorm => Error::VanishingSuperposition,
        e => e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LoopStatus {
    Integer { winding: i64, gap: f64 },
    /// Raw winding further than the tolerance from an integer.
    NonInteger { raw: f64, gap: f64 },
    /// The loop passes a point without a defined phase (index into the loop).
    Masked { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingleValuedReport {
    pub loops: Vec<LoopStatus>,
    pub violations: usize,
    pub masked: usize,
}

/// Report the winding on each loop; non-integer raw windings (gap above
/// `tolerance`) count as single-valuedness violations.
pub fn singlevalued_check(state: &WaveState, loops: &[Vec<usize>], tolerance: f64) -> Result<SingleValuedReport> {
    let mut out = Vec::with_capacity(loops.len());
    let (mut violations, mut masked) = (0, 0);
    for lp in loops {
        match winding_number(state, lp) {
            Ok(w) if w.gap <= tolerance => out.push(LoopStatus::Integer {
                winding: w.number,
                gap: w.gap,
            }),
            Ok(w) => {
                violations += 1;
                out.push(LoopStatus::NonInteger { raw: w.raw, gap: w.gap });
            }
            Err(Error::NodeOnLoop { index }) => {
                masked += 1;
                out.push(LoopStatus::Masked { index });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SingleValuedReport {
        loops: out,
        violations,
        masked,
    })
}
