//! Histogram comparison against a density, power-law regression and
//! convergence-order estimation.

use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;
use crate::prelude::*;
use crate::rng::{self, Domain};
use rand_distr::{Binomial, Distribution};

/// How histogram bins group grid cells: `coarsen[k]` consecutive cells per bin on axis `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Binning {
    pub coarsen: Vec<usize>,
}

impl Binning {
    pub fn cells(dim: usize) -> Self {
        Self { coarsen: vec![1; dim] }
    }
    pub fn uniform(dim: usize, factor: usize) -> Self {
        Self {
            coarsen: vec![factor; dim],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    Pass,
    Fail,
    /// Too few samples for the histogram to mean anything (fewer than five per bin).
    Underpowered,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DivergenceReport {
    pub samples: usize,
    pub bins: usize,
    pub total_variation: f64,
    /// KL(histogram || model), both smoothed with `kl_pseudocount` per bin.
    pub kl_divergence: f64,
    pub kl_pseudocount: f64,
    pub chi_square: f64,
    pub chi_square_dof: usize,
    /// 95th percentile of total variation over synthetic draws from the model.
    pub noise_band: f64,
    /// Fraction of synthetic draws whose total variation reached the observed one.
    pub p_value: f64,
    pub calibration_draws: usize,
    pub verdict: Verdict,
}

/// Compare samples (flat, `dim` coordinates each) with the density `rho`.
pub fn compare_density(
    samples: &[f64],
    rho: &ScalarField,
    bins: &Binning,
    calibration_draws: usize,
    seed: u64,
) -> Result<DivergenceReport> {
    let grid = rho.grid();
    let dim = grid.dim();
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !samples.len().is_multiple_of(dim) {
        return Err(Error::ShapeMismatch("sample coordinates are not a multiple of the grid dimension"));
    }
    if bins.coarsen.len() != dim || bins.coarsen.contains(&0) {
        return Err(invalid("bins", "need one positive coarsening factor per axis"));
    }
    if calibration_draws == 0 {
        return Err(invalid("calibration_draws", "at least one calibration draw is needed"));
    }
    let shape: Vec<usize> = (0..dim)
        .map(|k| grid.points()[k].div_ceil(bins.coarsen[k]))
        .collect();
    let nbins: usize = shape.iter().product();
    let bin_of_cell = |flat: usize| {
        let mut b = 0;
        for k in 0..dim {
            b = b * shape[k] + grid.axis_index(flat, k) / bins.coarsen[k];
        }
        b
    };

    let mut prob = vec![0.0; nbins];
    for (i, &v) in rho.values().iter().enumerate() {
        if v < 0.0 {
            return Err(invalid("rho", "density must be non-negative"));
        }
        prob[bin_of_cell(i)] += v;
    }
    let total: f64 = prob.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    for p in &mut prob {
        *p /= total;
    }

    let n = samples.len() / dim;
    let mut counts = vec![0u64; nbins];
    for (s, x) in samples.chunks_exact(dim).enumerate() {
        let cell = grid
            .cell_of(x)
            .ok_or_else(|| invalid("samples", alloc::format!("sample {s} lies outside the grid")))?;
        counts[bin_of_cell(cell)] += 1;
    }

    let tv = total_variation(&counts, &prob, n);
    let pseudo = 0.5;
    let nf = n as f64;
    let denom = nf + pseudo * nbins as f64;
    let mut kl = 0.0;
    for (&c, &p) in counts.iter().zip(&prob) {
        let q = (c as f64 + pseudo) / denom;
        let m = (p * nf + pseudo) / denom;
        kl += q * (q / m).ln();
    }
    let mut chi = 0.0;
    let mut used = 0usize;
    for (&c, &p) in counts.iter().zip(&prob) {
        let e = p * nf;
        if e >= 5.0 {
            chi += (c as f64 - e) * (c as f64 - e) / e;
            used += 1;
        }
    }

    let mut cal: Vec<f64> = (0..calibration_draws)
        .map(|d| {
            let mut rng = rng::stream(seed, Domain::Calibration, d as u64);
            let synth = multinomial(n as u64, &prob, &mut rng);
            total_variation(&synth, &prob, n)
        })
        .collect();
    let p_value = cal.iter().filter(|&&t| t >= tv).count() as f64 / calibration_draws as f64;
    cal.sort_by(|a, b| a.total_cmp(b));
    let rank = ((0.95 * calibration_draws as f64).ceil() as usize).clamp(1, calibration_draws);
    let band = cal[rank - 1];

    let verdict = if n < 5 * nbins {
        Verdict::Underpowered
    } else if tv <= band {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(DivergenceReport {
        samples: n,
        bins: nbins,
        total_variation: tv,
        kl_divergence: kl.max(0.0),
        kl_pseudocount: pseudo,
        chi_square: chi,
        chi_square_dof: used.saturating_sub(1),
        noise_band: band,
        p_value,
        calibration_draws,
        verdict,
    })
}

fn total_variation(counts: &[u64], prob: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    0.5 * counts
        .iter()
        .zip(prob)
        .map(|(&c, &p)| (c as f64 / nf - p).abs())
        .sum::<f64>()
}

fn multinomial<R: rand::Rng + ?Sized>(n: u64, prob: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; prob.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in prob.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == prob.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let k = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerLawFit {
    pub exponent: f64,
    /// `ln` of the prefactor.
    pub log_prefactor: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Exactly two points: the line is exact and `stderr` is reported as zero.
    pub degenerate: bool,
}

/// Least squares of `ln y` on `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch("xs and ys differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("at least two points are needed"));
    }
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::NonPositiveInput(i));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all x values coincide"));
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - icept - slope * x;
            r * r
        })
        .sum();
    let degenerate = lx.len() == 2;
    let stderr = if degenerate {
        0.0
    } else {
        (sse / (n - 2.0) / sxx).sqrt()
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(PowerLawFit {
        exponent: slope,
        log_prefactor: icept,
        stderr,
        r_squared,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceOrder {
    pub order: f64,
    pub stderr: f64,
    /// Errors shrink at every refinement.
    pub monotone: bool,
    /// Fitted order below 0.25: refinement is not reducing the error.
    pub stagnated: bool,
}

/// Slope of `ln error` against `ln h` over three or more refinement levels.
pub fn convergence_order(errors_by_h: &[(f64, f64)]) -> Result<ConvergenceOrder> {
    if errors_by_h.len() < 3 {
        return Err(Error::InsufficientSamples {
            have: errors_by_h.len(),
            need: 3,
        });
    }
    let mut levels = errors_by_h.to_vec();
    levels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (hs, es): (Vec<f64>, Vec<f64>) = levels.iter().copied().unzip();
    let fit = fit_power_law(&hs, &es)?;
    let monotone = es.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceOrder {
        order: fit.exponent,
        stderr: fit.stderr,
        monotone,
        stagnated: fit.exponent < 0.25,
    })
}
