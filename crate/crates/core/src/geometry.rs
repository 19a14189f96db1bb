//! Geometry of the e-phase space of a finite outcome set.
//!
//! A point is a probability vector `p_0..p_k` with phases `Phi_i` (action
//! units). Tangents carry `(dp, dphi)`; most metric identities hold on
//! tangent gauge-fixed (TGF) vectors with `sum dp = 0` and `sum p dphi = 0`.
//! Functionals are plain closures `F(p, phi)`; their derivatives are taken by
//! central differences.

use crate::entropic::{maxent_transition, MaxEntProblem};
use crate::error::{invalid, Error, Result};
use crate::grid::{ConfigGrid, VectorField};
use crate::prelude::*;
use crate::system::ParticleSystem;
use crate::Complex64;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

/// Default finite-difference step for functional derivatives.
pub const DEFAULT_H_FD: f64 = 1e-5;

/// Smallest probability at which `1/p` factors are evaluated.
const P_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EPhasePoint {
    p: Vec<f64>,
    phi: Vec<f64>,
}

impl EPhasePoint {
    /// Requires `sum p = 1` within `1e-12`. Phases are kept as given.
    pub fn new(p: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if p.len() != phi.len() || p.len() < 2 {
            return Err(Error::ShapeMismatch("need matching p and phi with at least two outcomes"));
        }
        if let Some(i) = p.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::SupportViolation { index: i });
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid("p", alloc::format!("probabilities sum to {s}")));
        }
        Ok(Self { p, phi })
    }

    /// `p = |psi|^2 / sum |psi|^2`, `Phi = hbar arg psi`.
    pub fn from_psi(psi: &[Complex64], hbar: f64) -> Result<Self> {
        let s: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(s > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Self::new(
            psi.iter().map(|z| z.norm_sqr() / s).collect(),
            psi.iter().map(|z| hbar * z.arg()).collect(),
        )
    }

    /// Random interior point: half uniform, half a flat Dirichlet draw, with
    /// uniform phases in `(-pi hbar, pi hbar)`.
    pub fn random<R: Rng + ?Sized>(outcomes: usize, hbar: f64, rng: &mut R) -> Result<Self> {
        if outcomes < 2 {
            return Err(invalid("outcomes", "need at least two"));
        }
        let e: Vec<f64> = (0..outcomes).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = e.iter().sum();
        let n = outcomes as f64;
        let mut p: Vec<f64> = e.iter().map(|v| 0.5 / n + 0.5 * v / s).collect();
        let t: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= t);
        let phi = (0..outcomes).map(|_| hbar * PI * (2.0 * rng.random::<f64>() - 1.0)).collect();
        Self::new(p, phi)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn len(&self) -> usize {
        self.p.len()
    }
    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `<Phi> = sum p Phi`.
    pub fn mean_phase(&self) -> f64 {
        self.p.iter().zip(&self.phi).map(|(a, b)| a * b).sum()
    }

    /// Representative with `<Phi> = 0`.
    pub fn canonical(&self) -> Self {
        let m = self.mean_phase();
        Self {
            p: self.p.clone(),
            phi: self.phi.iter().map(|v| v - m).collect(),
        }
    }

    /// `sqrt(p) exp(i Phi / hbar)`.
    pub fn psi(&self, hbar: f64) -> Vec<Complex64> {
        to_psi(&self.p, &self.phi, hbar)
    }
}

fn to_psi(p: &[f64], phi: &[f64], hbar: f64) -> Vec<Complex64> {
    p.iter()
        .zip(phi)
        .map(|(&q, &f)| Complex64::from_polar(q.max(0.0).sqrt(), f / hbar))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tangent {
    pub dp: Vec<f64>,
    pub dphi: Vec<f64>,
}

impl Tangent {
    pub fn new(dp: Vec<f64>, dphi: Vec<f64>) -> Result<Self> {
        if dp.len() != dphi.len() {
            return Err(Error::ShapeMismatch("dp and dphi differ in length"));
        }
        Ok(Self { dp, dphi })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            dp: vec![0.0; n],
            dphi: vec![0.0; n],
        }
    }

    /// Gaussian random vector projected to TGF at `at`.
    pub fn random_tgf<R: Rng + ?Sized>(at: &EPhasePoint, rng: &mut R) -> Self {
        let n = at.len();
        let mut t = Self {
            dp: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            dphi: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        };
        t.project_tgf(at);
        t
    }

    /// `(|sum dp|, |sum p dphi|)`.
    pub fn tgf_defect(&self, at: &EPhasePoint) -> f64 {
        let a: f64 = self.dp.iter().sum();
        let b: f64 = at.p.iter().zip(&self.dphi).map(|(p, d)| p * d).sum();
        a.abs().max(b.abs())
    }

    /// Remove the mean of `dp` and the `p`-weighted mean of `dphi`.
    pub fn project_tgf(&mut self, at: &EPhasePoint) {
        let n = self.dp.len() as f64;
        let a: f64 = self.dp.iter().sum::<f64>() / n;
        self.dp.iter_mut().for_each(|v| *v -= a);
        let b: f64 = at.p.iter().zip(&self.dphi).map(|(p, d)| p * d).sum();
        self.dphi.iter_mut().for_each(|v| *v -= b);
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dp: self.dp.iter().map(|v| v * s).collect(),
            dphi: self.dphi.iter().map(|v| v * s).collect(),
        }
    }
}

/// Rotation-invariant metric on the unnormalized embedding space, given by
/// the two positive functions `a(|p|)` and `b(|p|)`.
pub struct MetricFamily {
    pub a: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub b: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl core::fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MetricFamily").finish_non_exhaustive()
    }
}

impl MetricFamily {
    pub fn new(
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            a: Box::new(a),
            b: Box::new(b),
        }
    }

    /// `A = 0`, `B = 1` everywhere: the flat embedding.
    pub fn flat(hbar: f64) -> Self {
        Self::new(move |n| 2.0 * hbar / n, move |n| 2.0 * hbar / n)
    }

    /// `A(|p|) = (a - b) / 4`.
    pub fn big_a(&self, norm: f64) -> f64 {
        0.25 * ((self.a)(norm) - (self.b)(norm))
    }

    /// `B(|p|) = |p| b / 2 hbar`.
    pub fn big_b(&self, norm: f64, hbar: f64) -> f64 {
        norm * (self.b)(norm) / (2.0 * hbar)
    }
}

/// Geometry of the e-phase space for a given `hbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EPhaseSpace {
    pub hbar: f64,
}

impl EPhaseSpace {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid("hbar", "must be positive"));
        }
        Ok(Self { hbar })
    }

    /// `Omega(v, u) = sum (v.dp u.dphi - v.dphi u.dp)`.
    pub fn symplectic(&self, v: &Tangent, u: &Tangent) -> f64 {
        (0..v.dp.len())
            .map(|i| v.dp[i] * u.dphi[i] - v.dphi[i] * u.dp[i])
            .sum()
    }

    fn check_support(&self, p: &[f64], v: &Tangent) -> Result<()> {
        for i in 0..p.len() {
            if p[i] <= P_FLOOR && (v.dp[i] != 0.0 || v.dphi[i] != 0.0) {
                return Err(Error::SupportViolation { index: i });
            }
        }
        Ok(())
    }

    /// `A (sum v.dp)(sum u.dp) + B sum [hbar/(2p) v.dp u.dp + (2p/hbar) v.dphi u.dphi]`
    /// at an unnormalized `p`.
    pub fn embedding_metric(&self, v: &Tangent, u: &Tangent, family: &MetricFamily, p: &[f64]) -> Result<f64> {
        self.check_support(p, v)?;
        self.check_support(p, u)?;
        let norm: f64 = p.iter().sum();
        let sv: f64 = v.dp.iter().sum();
        let su: f64 = u.dp.iter().sum();
        let mut acc = 0.0;
        for i in 0..p.len() {
            if p[i] > P_FLOOR {
                acc += self.hbar / (2.0 * p[i]) * v.dp[i] * u.dp[i] + 2.0 * p[i] / self.hbar * v.dphi[i] * u.dphi[i];
            }
        }
        Ok(family.big_a(norm) * sv * su + family.big_b(norm, self.hbar) * acc)
    }

    /// Fubini-Study inner product, with the `p`-weighted phase means removed.
    pub fn metric(&self, v: &Tangent, u: &Tangent, at: &EPhasePoint) -> Result<f64> {
        self.check_support(&at.p, v)?;
        self.check_support(&at.p, u)?;
        Ok(self.fs_raw(&at.p, v, u))
    }

    fn fs_raw(&self, p: &[f64], v: &Tangent, u: &Tangent) -> f64 {
        let mv: f64 = p.iter().zip(&v.dphi).map(|(a, b)| a * b).sum();
        let mu: f64 = p.iter().zip(&u.dphi).map(|(a, b)| a * b).sum();
        let mut acc = 0.0;
        for i in 0..p.len() {
            if p[i] > P_FLOOR {
                acc += self.hbar / (2.0 * p[i]) * v.dp[i] * u.dp[i]
                    + 2.0 * p[i] / self.hbar * (v.dphi[i] - mv) * (u.dphi[i] - mu);
            }
        }
        acc
    }

    /// Squared Fubini-Study length, closed form.
    pub fn fs_length(&self, dx: &Tangent, at: &EPhasePoint) -> Result<f64> {
        self.metric(dx, dx, at)
    }

    /// Squared Fubini-Study length as the minimum over a uniform phase shift
    /// `da` of the embedding length with `B(1) = 1`.
    pub fn fs_length_minimized(&self, dx: &Tangent, at: &EPhasePoint) -> Result<f64> {
        self.check_support(&at.p, dx)?;
        let p = &at.p;
        let ell = |da: f64| -> f64 {
            (0..p.len())
                .filter(|&i| p[i] > P_FLOOR)
                .map(|i| {
                    let f = dx.dphi[i] + da;
                    self.hbar / (2.0 * p[i]) * dx.dp[i] * dx.dp[i] + 2.0 * p[i] / self.hbar * f * f
                })
                .sum()
        };
        let r = dx.dphi.iter().fold(0.0, |m: f64, v| m.max(v.abs())) + 1.0;
        let (mut a, mut b) = (-r, r);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (ell(c), ell(d));
        for _ in 0..200 {
            if (b - a).abs() <= 1e-9 * r {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = ell(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = ell(d);
            }
        }
        // finish with one parabolic step through the bracket
        let (x0, x1, x2) = (a, 0.5 * (a + b), b);
        let (f0, f1, f2) = (ell(x0), ell(x1), ell(x2));
        let den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
        let best = if den.abs() > 0.0 {
            let num = (x1 - x0).powi(2) * (f1 - f2) - (x1 - x2).powi(2) * (f1 - f0);
            x1 - 0.5 * num / den
        } else {
            x1
        };
        Ok(ell(best).min(f0.min(f1).min(f2)))
    }

    /// Complex structure `(dp, dphi) -> (-(2/hbar) p dphi, (hbar/2p) dp)`,
    /// re-projected to TGF. The second value is the TGF defect of the image
    /// before projection.
    pub fn apply_j(&self, v: &Tangent, at: &EPhasePoint) -> Result<(Tangent, f64)> {
        if let Some(i) = at.p.iter().position(|&q| q <= P_FLOOR) {
            return Err(Error::SupportViolation { index: i });
        }
        let mut out = Tangent {
            dp: at.p.iter().zip(&v.dphi).map(|(p, d)| -2.0 / self.hbar * p * d).collect(),
            dphi: at.p.iter().zip(&v.dp).map(|(p, d)| self.hbar / (2.0 * p) * d).collect(),
        };
        let defect = out.tgf_defect(at);
        out.project_tgf(at);
        Ok((out, defect))
    }

    /// `sum (dF/dp dG/dPhi - dF/dPhi dG/dp)` with derivatives by central differences.
    pub fn poisson_bracket<F, G>(&self, f: F, g: G, at: &EPhasePoint, h_fd: f64) -> Result<f64>
    where
        F: Fn(&[f64], &[f64]) -> f64,
        G: Fn(&[f64], &[f64]) -> f64,
    {
        let (fp, fphi) = derivatives(&f, &at.p, &at.phi, h_fd)?;
        let (gp, gphi) = derivatives(&g, &at.p, &at.phi, h_fd)?;
        Ok((0..at.len()).map(|i| fp[i] * gphi[i] - fphi[i] * gp[i]).sum())
    }

    /// One explicit step of `dp = dF/dPhi dl`, `dPhi = -dF/dp dl`; `p` is
    /// renormalized and the phase re-centred.
    pub fn hamiltonian_flow_step<F>(&self, f: F, at: &EPhasePoint, dl: f64, h_fd: f64) -> Result<FlowStep>
    where
        F: Fn(&[f64], &[f64]) -> f64,
    {
        let (fp, fphi) = derivatives(&f, &at.p, &at.phi, h_fd)?;
        let mut p: Vec<f64> = at.p.iter().zip(&fphi).map(|(p, r)| p + r * dl).collect();
        if let Some(i) = p.iter().position(|&v| v < 0.0) {
            let suggested = (0..p.len())
                .filter(|&j| fphi[j] * dl < 0.0)
                .map(|j| 0.5 * at.p[j] / fphi[j].abs())
                .fold(f64::INFINITY, f64::min);
            return Err(Error::NegativeProbability { index: i, suggested });
        }
        let phi: Vec<f64> = at.phi.iter().zip(&fp).map(|(f, r)| f - r * dl).collect();
        let s: f64 = p.iter().sum();
        if !(s > 0.0) {
            return Err(Error::ZeroNorm);
        }
        p.iter_mut().for_each(|v| *v /= s);
        let raw = EPhasePoint { p, phi };
        let shift = raw.mean_phase() - at.mean_phase();
        Ok(FlowStep {
            point: raw.canonical(),
            phase_shift: shift,
            raw,
        })
    }

    /// Largest `|d/dl G(V, U)|` over random TGF probe pairs carried by the
    /// linearized flow of `F`. Zero (to finite-difference accuracy) exactly
    /// for bilinear Hermitian generators.
    pub fn killing_residual<F, R>(&self, f: F, at: &EPhasePoint, options: KillingOptions, rng: &mut R) -> Result<f64>
    where
        F: Fn(&[f64], &[f64]) -> f64,
        R: Rng + ?Sized,
    {
        self.transported_rate(&f, at, options, rng, |p, v, u| self.fs_raw(p, v, u))
    }

    /// Same transport as [`killing_residual`](Self::killing_residual), but
    /// for `Omega`, which every Hamiltonian flow preserves.
    pub fn symplectic_residual<F, R>(&self, f: F, at: &EPhasePoint, options: KillingOptions, rng: &mut R) -> Result<f64>
    where
        F: Fn(&[f64], &[f64]) -> f64,
        R: Rng + ?Sized,
    {
        self.transported_rate(&f, at, options, rng, |_, v, u| self.symplectic(v, u))
    }

    fn transported_rate<F, R, B>(&self, f: &F, at: &EPhasePoint, options: KillingOptions, rng: &mut R, form: B) -> Result<f64>
    where
        F: Fn(&[f64], &[f64]) -> f64,
        R: Rng + ?Sized,
        B: Fn(&[f64], &Tangent, &Tangent) -> f64,
    {
        let n = at.len();
        let x0: Vec<f64> = at.p.iter().chain(&at.phi).copied().collect();
        let flow = |x: &[f64], dl: f64| -> Result<Vec<f64>> { rk4(f, x, dl, options.h_fd) };
        let push = |x: &[f64], v: &Tangent, s: f64| -> Vec<f64> {
            let mut y = x.to_vec();
            for i in 0..n {
                y[i] += s * v.dp[i];
                y[n + i] += s * v.dphi[i];
            }
            y
        };
        let transport = |v: &Tangent, dl: f64| -> Result<Tangent> {
            let e = options.epsilon;
            let a = flow(&push(&x0, v, e), dl)?;
            let b = flow(&push(&x0, v, -e), dl)?;
            Ok(Tangent {
                dp: (0..n).map(|i| (a[i] - b[i]) / (2.0 * e)).collect(),
                dphi: (0..n).map(|i| (a[n + i] - b[n + i]) / (2.0 * e)).collect(),
            })
        };
        let plus = flow(&x0, options.dlambda)?;
        let minus = flow(&x0, -options.dlambda)?;
        let mut worst: f64 = 0.0;
        for _ in 0..options.probes {
            let v = Tangent::random_tgf(at, rng);
            let u = Tangent::random_tgf(at, rng);
            let gv = self.fs_raw(&at.p, &v, &v).sqrt();
            let gu = self.fs_raw(&at.p, &u, &u).sqrt();
            let (v, u) = (v.scaled(1.0 / gv), u.scaled(1.0 / gu));
            let gp = form(&plus[..n], &transport(&v, options.dlambda)?, &transport(&u, options.dlambda)?);
            let gm = form(&minus[..n], &transport(&v, -options.dlambda)?, &transport(&u, -options.dlambda)?);
            worst = worst.max(((gp - gm) / (2.0 * options.dlambda)).abs());
        }
        Ok(worst)
    }

    /// `(1 / 2 hbar) (psi1, i hbar psi1*) (G + i Omega) (psi2, i hbar psi2*)^T`
    /// with the complex-coordinate components of `G` and `Omega`.
    pub fn scalar_product(&self, psi1: &[Complex64], psi2: &[Complex64]) -> Result<Complex64> {
        if psi1.len() != psi2.len() {
            return Err(Error::ShapeMismatch("states differ in length"));
        }
        let i = Complex64::new(0.0, 1.0);
        let g = [[Complex64::new(0.0, 0.0), -i], [-i, Complex64::new(0.0, 0.0)]];
        let om = [[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], [Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)]];
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in psi1.iter().zip(psi2) {
            let left = [*a, i * self.hbar * a.conj()];
            let right = [*b, i * self.hbar * b.conj()];
            for r in 0..2 {
                for c in 0..2 {
                    acc += left[r] * (g[r][c] + i * om[r][c]) * right[c];
                }
            }
        }
        Ok(acc / (2.0 * self.hbar))
    }

    /// `|{U~, V~} - <psi|[U, V]|psi> / (i hbar)|`, the bracket taken numerically.
    pub fn commutator_identity(
        &self,
        u: &HermitianKernel,
        v: &HermitianKernel,
        psi: &[Complex64],
        h_fd: f64,
    ) -> Result<f64> {
        if u.n != psi.len() || v.n != psi.len() {
            return Err(Error::ShapeMismatch("kernels and state differ in size"));
        }
        let p: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let phi: Vec<f64> = psi.iter().map(|z| self.hbar * z.arg()).collect();
        let fu = u.functional(self.hbar);
        let fv = v.functional(self.hbar);
        let (up, uphi) = derivatives(&fu, &p, &phi, h_fd)?;
        let (vp, vphi) = derivatives(&fv, &p, &phi, h_fd)?;
        let pb: f64 = (0..p.len()).map(|i| up[i] * vphi[i] - uphi[i] * vp[i]).sum();
        let c = u.commutator(v);
        let mut expect = Complex64::new(0.0, 0.0);
        for r in 0..u.n {
            for s in 0..u.n {
                expect += psi[r].conj() * c[r * u.n + s] * psi[s];
            }
        }
        let exact = expect / Complex64::new(0.0, self.hbar);
        Ok((pb - exact.re).abs().max(exact.im.abs()))
    }
}

/// Result of [`EPhaseSpace::hamiltonian_flow_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStep {
    /// Canonical representative (`<Phi> = 0`).
    pub point: EPhasePoint,
    /// The stepped point before re-centring.
    pub raw: EPhasePoint,
    /// Change of `<Phi>` removed by re-centring.
    pub phase_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KillingOptions {
    pub probes: usize,
    pub h_fd: f64,
    /// Flow parameter over which probes are transported (both directions).
    pub dlambda: f64,
    /// Offset used for the flow-map Jacobian.
    pub epsilon: f64,
}

impl Default for KillingOptions {
    fn default() -> Self {
        Self {
            probes: 8,
            h_fd: DEFAULT_H_FD,
            dlambda: 1e-3,
            epsilon: 1e-4,
        }
    }
}

fn derivatives<F>(f: &F, p: &[f64], phi: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(invalid("h_fd", "must be positive"));
    }
    let n = p.len();
    let mut pp = p.to_vec();
    let mut ff = phi.to_vec();
    let mut dp = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    for i in 0..n {
        let hp = h * p[i].abs().max(1e-3);
        pp[i] = p[i] + hp;
        let a = f(&pp, &ff);
        pp[i] = p[i] - hp;
        let b = f(&pp, &ff);
        pp[i] = p[i];
        dp[i] = (a - b) / (2.0 * hp);
        ff[i] = phi[i] + h;
        let a = f(&pp, &ff);
        ff[i] = phi[i] - h;
        let b = f(&pp, &ff);
        ff[i] = phi[i];
        dphi[i] = (a - b) / (2.0 * h);
    }
    if dp.iter().chain(&dphi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("functional derivative"));
    }
    Ok((dp, dphi))
}

/// Flow over `dl` in one classical Runge-Kutta step; `x = (p, phi)`.
fn rk4<F>(f: &F, x: &[f64], dl: f64, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = x.len() / 2;
    let rate = |y: &[f64]| -> Result<Vec<f64>> {
        let (dp, dphi) = derivatives(f, &y[..n], &y[n..], h)?;
        Ok(dphi.into_iter().chain(dp.into_iter().map(|v| -v)).collect())
    };
    let add = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = rate(x)?;
    let k2 = rate(&add(x, &k1, 0.5 * dl))?;
    let k3 = rate(&add(x, &k2, 0.5 * dl))?;
    let k4 = rate(&add(x, &k3, dl))?;
    Ok((0..x.len())
        .map(|i| x[i] + dl / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// `N = 1 - sum p`.
pub fn normalization_functional(p: &[f64], _phi: &[f64]) -> f64 {
    1.0 - p.iter().sum::<f64>()
}

/// Complex Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HermitianKernel {
    n: usize,
    values: Vec<Complex64>,
}

impl HermitianKernel {
    pub fn new(n: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::ShapeMismatch("kernel must be n x n"));
        }
        let scale = values.iter().fold(0.0, |m: f64, z| m.max(z.norm())).max(1.0);
        for r in 0..n {
            for c in 0..=r {
                if (values[r * n + c] - values[c * n + r].conj()).norm() > 1e-12 * scale {
                    return Err(invalid("kernel", alloc::format!("entry ({r}, {c}) breaks Hermitian symmetry")));
                }
            }
        }
        Ok(Self { n, values })
    }

    /// Entries with standard normal real and imaginary parts, symmetrized.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            values[r * n + r] = Complex64::new(rng.sample(StandardNormal), 0.0);
            for c in 0..r {
                let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                values[r * n + c] = z;
                values[c * n + r] = z.conj();
            }
        }
        Self { n, values }
    }

    pub fn size(&self) -> usize {
        self.n
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.values[r * self.n + c]
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.values[r * self.n + c] * psi[c]).sum())
            .collect()
    }

    /// `<psi|Q|psi>`, real up to rounding.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        psi.iter()
            .zip(self.apply(psi))
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// `QK - KQ` (anti-Hermitian), row-major.
    pub fn commutator(&self, other: &HermitianKernel) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.values[r * n + k] * other.values[k * n + c]
                        - other.values[r * n + k] * self.values[k * n + c];
                }
                out[r * n + c] = acc;
            }
        }
        out
    }

    /// The bilinear functional `<psi|Q|psi>` in `(p, Phi)` coordinates.
    pub fn functional(&self, hbar: f64) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
        move |p: &[f64], phi: &[f64]| self.expectation(&to_psi(p, phi, hbar))
    }
}

/// Momentum kernel `(hbar / i) d/dx` on a periodic lattice of `n` points
/// with spacing `h`, by central differences.
pub fn translation_kernel(n: usize, h: f64, hbar: f64) -> Result<HermitianKernel> {
    if n < 3 {
        return Err(invalid("n", "need at least three lattice points"));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    let c = Complex64::new(0.0, -hbar / (2.0 * h));
    for r in 0..n {
        values[r * n + (r + 1) % n] += c;
        values[r * n + (r + n - 1) % n] -= c;
    }
    HermitianKernel::new(n, values)
}

/// Fisher information of the short-step law against its closed form.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InformationMetricReport {
    /// Row-major quadrature of `int P d_A log P d_B log P`.
    pub gamma: Vec<f64>,
    /// `m_A / (eta dt^gamma)` on the diagonal.
    pub expected: Vec<f64>,
    pub max_relative_error: f64,
    /// Largest `|off-diagonal| / sqrt(diagonal product)`.
    pub max_off_diagonal: f64,
    pub quadrature_points: usize,
}

/// Build the Gaussian transition from the max-ent step for `system` (zero
/// drift) and integrate its information metric by tensor-product quadrature,
/// differentiating `log P` with respect to the source point.
pub fn information_metric_check(system: &ParticleSystem, dt: f64) -> Result<InformationMetricReport> {
    let dim = system.config_dim();
    if dim > 3 {
        return Err(invalid("system", "quadrature is limited to three configuration axes"));
    }
    let grid = ConfigGrid::new(crate::grid::GridSpec {
        points: vec![3; dim],
        extent: vec![1.0; dim],
        origin: vec![-0.5; dim],
        periodic: vec![false; dim],
    })?;
    let problem = MaxEntProblem::from_system(system, dt, VectorField::zeros(grid.clone()), None)?;
    let step = maxent_transition(&problem)?;
    let src = grid.index(&vec![1; dim]);
    let x0: Vec<f64> = grid.position(src);
    let shift: Vec<f64> = (0..dim).map(|k| step.mean_shift.component(k)[src]).collect();
    let sd: Vec<f64> = step.variance.iter().map(|v| v.sqrt()).collect();
    let log_p = |x: &[f64], y: &[f64]| -> f64 {
        (0..dim)
            .map(|k| {
                let d = y[k] - x[k] - shift[k];
                -d * d / (2.0 * step.variance[k]) - 0.5 * (2.0 * PI * step.variance[k]).ln()
            })
            .sum()
    };
    let per_axis = match dim {
        1 => 801,
        2 => 161,
        _ => 61,
    };
    let span = 10.0;
    let mut gamma = vec![0.0; dim * dim];
    let mut idx = vec![0usize; dim];
    let total: usize = (0..dim).map(|_| per_axis).product();
    let mut y = vec![0.0; dim];
    let mut xs = x0.clone();
    let mut grad = vec![0.0; dim];
    for _ in 0..total {
        let mut w = 1.0;
        for k in 0..dim {
            let u = -span + 2.0 * span * idx[k] as f64 / (per_axis - 1) as f64;
            y[k] = x0[k] + shift[k] + u * sd[k];
            let end = idx[k] == 0 || idx[k] == per_axis - 1;
            w *= 2.0 * span * sd[k] / (per_axis - 1) as f64 * if end { 0.5 } else { 1.0 };
        }
        let lp = log_p(&x0, &y);
        for k in 0..dim {
            let e = 1e-4 * sd[k];
            xs[k] = x0[k] + e;
            let a = log_p(&xs, &y);
            xs[k] = x0[k] - e;
            let b = log_p(&xs, &y);
            xs[k] = x0[k];
            grad[k] = (a - b) / (2.0 * e);
        }
        let pw = lp.exp() * w;
        for a in 0..dim {
            for b in 0..dim {
                gamma[a * dim + b] += pw * grad[a] * grad[b];
            }
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    let g = system.gamma_exponent();
    let expected: Vec<f64> = (0..dim * dim)
        .map(|i| {
            let a = i / dim;
            if a == i % dim {
                system.axis_mass(a) / (system.eta() * dt.powf(g))
            } else {
                0.0
            }
        })
        .collect();
    let max_relative_error = (0..dim)
        .map(|a| (gamma[a * dim + a] / expected[a * dim + a] - 1.0).abs())
        .fold(0.0, f64::max);
    let mut max_off_diagonal: f64 = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            if a != b {
                let s = (gamma[a * dim + a] * gamma[b * dim + b]).sqrt();
                max_off_diagonal = max_off_diagonal.max(gamma[a * dim + b].abs() / s);
            }
        }
    }
    Ok(InformationMetricReport {
        gamma,
        expected,
        max_relative_error,
        max_off_diagonal,
        quadrature_points: total,
    })
}
