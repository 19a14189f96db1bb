use super::hamiltonian::Hamiltonian;
use super::potentials::Potentials;
use super::WaveState;
use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::Complex64;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Tolerances for the implicit solve on grids with more than one axis
/// (single-axis grids are solved directly).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverOptions {
    /// Relative residual `|b - A x| / |b|` at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-14,
            max_iterations: 2000,
        }
    }
}

/// Crank-Nicolson propagator `(1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi`,
/// with a time-dependent potential sampled at the step midpoint.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    h: Hamiltonian,
    pot: Potentials,
    tau: f64,
    dt: f64,
    options: SolverOptions,
    direct: Option<Tridiagonal>,
    last_iterations: usize,
    last_residual: f64,
}

impl CrankNicolson {
    pub fn new(state: &WaveState, pot: &Potentials, dt: f64, options: SolverOptions) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(invalid("dt", "must be finite and non-zero"));
        }
        if !(options.tolerance > 0.0) || options.max_iterations == 0 {
            return Err(invalid("solver", "tolerance and iteration limit must be positive"));
        }
        let h = Hamiltonian::new(state.grid(), state.system(), pot, state.time() + 0.5 * dt)?;
        let tau = dt / (2.0 * state.system().hbar());
        let mut cn = Self {
            h,
            pot: pot.clone(),
            tau,
            dt,
            options,
            direct: None,
            last_iterations: 0,
            last_residual: 0.0,
        };
        if state.grid().dim() == 1 {
            cn.direct = Some(Tridiagonal::factor(&cn.h, tau)?);
        }
        Ok(cn)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }
    /// Iterations and relative residual of the most recent iterative solve.
    pub fn last_solve(&self) -> (usize, f64) {
        (self.last_iterations, self.last_residual)
    }

    /// Advance `state` by one step.
    pub fn step(&mut self, state: &mut WaveState) -> Result<()> {
        let t_mid = state.time() + 0.5 * self.dt;
        if !self.pot.schedule.is_static() {
            self.h.set_time(&self.pot, t_mid);
            if self.direct.is_some() {
                self.direct = Some(Tridiagonal::factor(&self.h, self.tau)?);
            }
        }
        let n = state.grid().len();
        let psi = state.psi_mut_values();
        let mut hp = vec![ZERO; n];
        self.h.apply(psi, &mut hp);
        let it = C::new(0.0, self.tau);
        let rhs: Vec<C> = psi.iter().zip(&hp).map(|(p, h)| p - it * h).collect();
        match &self.direct {
            Some(tri) => {
                tri.solve(&rhs, psi);
                self.last_iterations = 0;
                self.last_residual = 0.0;
            }
            None => {
                let (iters, res) = cgnr(&self.h, self.tau, &rhs, psi, self.options)?;
                self.last_iterations = iters;
                self.last_residual = res;
            }
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("wave function after step"));
        }
        state.set_time(state.time() + self.dt);
        Ok(())
    }
}

/// Evolve `steps` Crank-Nicolson steps of size `dt` (negative `dt` runs backward).
pub fn evolve(state: &WaveState, pot: &Potentials, dt: f64, steps: usize) -> Result<WaveState> {
    evolve_with(state, pot, dt, steps, SolverOptions::default())
}

pub fn evolve_with(
    state: &WaveState,
    pot: &Potentials,
    dt: f64,
    steps: usize,
    options: SolverOptions,
) -> Result<WaveState> {
    let mut out = state.clone();
    if steps == 0 {
        return Ok(out);
    }
    let mut cn = CrankNicolson::new(state, pot, dt, options)?;
    for _ in 0..steps {
        cn.step(&mut out)?;
    }
    Ok(out)
}

/// Solve `(1 + i tau H) x = b` by conjugate gradients on the normal equations.
/// `x` holds the initial guess on entry.
fn cgnr(h: &Hamiltonian, tau: f64, b: &[C], x: &mut [C], opt: SolverOptions) -> Result<(usize, f64)> {
    let n = b.len();
    let it = C::new(0.0, tau);
    let apply_a = |v: &[C], out: &mut [C], scratch: &mut [C], adjoint: bool| {
        h.apply(v, scratch);
        let s = if adjoint { -it } else { it };
        for i in 0..v.len() {
            out[i] = v[i] + s * scratch[i];
        }
    };
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = ZERO);
        return Ok((0, 0.0));
    }
    let mut scratch = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    apply_a(x, &mut s, &mut scratch, false);
    for i in 0..n {
        s[i] = b[i] - s[i];
    }
    let mut r = vec![ZERO; n];
    apply_a(&s, &mut r, &mut scratch, true);
    let mut p = r.clone();
    let mut q = vec![ZERO; n];
    let mut aq = vec![ZERO; n];
    let mut rr = dot(&r, &r);
    let mut res = norm(&s) / bnorm;
    for k in 0..opt.max_iterations {
        if res <= opt.tolerance {
            return Ok((k, res));
        }
        apply_a(&p, &mut q, &mut scratch, false);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = rr / qq;
        for i in 0..n {
            x[i] += p[i] * alpha;
            s[i] -= q[i] * alpha;
        }
        apply_a(&q, &mut aq, &mut scratch, true);
        for i in 0..n {
            r[i] -= aq[i] * alpha;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
        res = norm(&s) / bnorm;
    }
    if res <= opt.tolerance {
        return Ok((opt.max_iterations, res));
    }
    Err(Error::SolveDiverged {
        iterations: opt.max_iterations,
        residual: res,
    })
}

fn dot(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Factored `1 + i tau H` on a single axis, cyclic when the axis is periodic.
#[derive(Debug, Clone)]
struct Tridiagonal {
    lower: Vec<C>,
    cprime: Vec<C>,
    denom: Vec<C>,
    cyclic: Option<Cyclic>,
}

#[derive(Debug, Clone)]
struct Cyclic {
    top_right: C,
    gamma: C,
    z: Vec<C>,
    zfact: C,
}

impl Tridiagonal {
    fn factor(h: &Hamiltonian, tau: f64) -> Result<Self> {
        let n = h.grid().len();
        let it = C::new(0.0, tau);
        let c = h.coefficients()[0];
        let mut diag: Vec<C> = h.diagonal().iter().map(|&d| C::new(1.0, 0.0) + it * d).collect();
        // row p: lower couples psi[p-1], upper couples psi[p+1]
        let mut lower = vec![ZERO; n];
        let mut upper = vec![ZERO; n];
        for p in 0..n {
            if let Some(q) = h.forward(0, p) {
                if q == p + 1 {
                    upper[p] = -it * c * h.link(0, p);
                }
            }
            if let Some(q) = h.backward(0, p) {
                if q + 1 == p {
                    lower[p] = -it * c * h.link(0, q).conj();
                }
            }
        }
        let periodic = h.grid().periodic()[0];
        let mut cyclic = None;
        if periodic {
            if n < 3 {
                return Err(Error::TooFewPoints {
                    axis: 0,
                    points: n,
                    required: 3,
                });
            }
            // row 0 couples psi[n-1] (top right), row n-1 couples psi[0] (bottom left)
            let top_right = -it * c * h.link(0, n - 1).conj();
            let bottom_left = -it * c * h.link(0, n - 1);
            let gamma = -diag[0];
            diag[0] -= gamma;
            diag[n - 1] -= bottom_left * top_right / gamma;
            cyclic = Some((top_right, bottom_left, gamma));
        }
        let mut cprime = vec![ZERO; n];
        let mut denom = vec![ZERO; n];
        denom[0] = diag[0];
        if denom[0].norm() == 0.0 {
            return Err(Error::NonFinite("tridiagonal pivot"));
        }
        cprime[0] = upper[0] / denom[0];
        for p in 1..n {
            denom[p] = diag[p] - lower[p] * cprime[p - 1];
            if denom[p].norm() == 0.0 {
                return Err(Error::NonFinite("tridiagonal pivot"));
            }
            cprime[p] = upper[p] / denom[p];
        }
        let mut tri = Self {
            lower,
            cprime,
            denom,
            cyclic: None,
        };
        if let Some((top_right, bottom_left, gamma)) = cyclic {
            let mut u = vec![ZERO; n];
            u[0] = gamma;
            u[n - 1] = bottom_left;
            let mut z = vec![ZERO; n];
            tri.thomas(&u, &mut z);
            let zfact = C::new(1.0, 0.0) + z[0] + top_right * z[n - 1] / gamma;
            tri.cyclic = Some(Cyclic {
                top_right,
                gamma,
                z,
                zfact,
            });
        }
        Ok(tri)
    }

    fn thomas(&self, r: &[C], x: &mut [C]) {
        let n = r.len();
        x[0] = r[0] / self.denom[0];
        for p in 1..n {
            x[p] = (r[p] - self.lower[p] * x[p - 1]) / self.denom[p];
        }
        for p in (0..n - 1).rev() {
            let next = x[p + 1];
            x[p] -= self.cprime[p] * next;
        }
    }

    fn solve(&self, r: &[C], x: &mut [C]) {
        self.thomas(r, x);
        if let Some(cy) = &self.cyclic {
            let n = r.len();
            let fact = (x[0] + cy.top_right * x[n - 1] / cy.gamma) / cy.zfact;
            for p in 0..n {
                x[p] -= fact * cy.z[p];
            }
        }
    }
}
