use super::potentials::Potentials;
use super::WaveState;
use crate::error::Result;
use crate::grid::{ComplexField, ConfigGrid};
use crate::prelude::*;
use crate::system::ParticleSystem;
use crate::Complex64;

const NONE: u32 = u32::MAX;

/// Discrete covariant Hamiltonian
/// `H psi = sum_A -(hbar^2 / 2 m_A) [U+ psi(x+e) - 2 psi + U- psi(x-e)] / h^2 + V psi`
/// with link phases `U+(x) = exp(-i beta_n h A)` on each bond and `U-(x) = conj U+(x-e)`.
/// Non-periodic edges see zero ghost values.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: ConfigGrid,
    coeff: Vec<f64>,
    forward: Vec<Vec<u32>>,
    backward: Vec<Vec<u32>>,
    links: Option<Vec<Vec<Complex64>>>,
    base_v: Option<Vec<f64>>,
    diag: Vec<f64>,
    kinetic_diag: f64,
}

impl Hamiltonian {
    pub fn new(grid: &ConfigGrid, system: &ParticleSystem, pot: &Potentials, t: f64) -> Result<Self> {
        system.check_grid(grid)?;
        pot.check(grid, system)?;
        let dim = grid.dim();
        let hbar = system.hbar();
        let coeff: Vec<f64> = (0..dim)
            .map(|a| hbar * hbar / (2.0 * system.axis_mass(a) * grid.spacing()[a].powi(2)))
            .collect();
        let mut forward = Vec::with_capacity(dim);
        let mut backward = Vec::with_capacity(dim);
        for a in 0..dim {
            forward.push((0..grid.len()).map(|p| grid.neighbor(p, a, true).map_or(NONE, |q| q as u32)).collect());
            backward.push((0..grid.len()).map(|p| grid.neighbor(p, a, false).map_or(NONE, |q| q as u32)).collect());
        }
        let links = match &pot.vector {
            Some(lp) => {
                let phys = lp.grid();
                let mut all = Vec::with_capacity(dim);
                for axis in 0..dim {
                    let (n, a) = system.axis_owner(axis);
                    let beta = system.beta(n);
                    let h = grid.spacing()[axis];
                    let u: Vec<Complex64> = (0..grid.len())
                        .map(|p| {
                            let q = system.physical_index(grid, phys, p, n);
                            Complex64::from_polar(1.0, -beta * h * lp.bonds()[a][q])
                        })
                        .collect();
                    all.push(u);
                }
                Some(all)
            }
            None => None,
        };
        let kinetic_diag = 2.0 * coeff.iter().sum::<f64>();
        let base_v = pot.scalar.as_ref().map(|v| v.values().to_vec());
        let mut h = Self {
            grid: grid.clone(),
            coeff,
            forward,
            backward,
            links,
            base_v,
            diag: Vec::new(),
            kinetic_diag,
        };
        h.set_scalar(pot.scalar_at(t).as_deref());
        Ok(h)
    }

    /// Replace the scalar potential values (e.g. for a new time).
    pub fn set_scalar(&mut self, v: Option<&[f64]>) {
        self.diag = match v {
            Some(v) => v.iter().map(|x| x + self.kinetic_diag).collect(),
            None => vec![self.kinetic_diag; self.grid.len()],
        };
    }

    /// Re-evaluate a scheduled potential at time `t`.
    pub fn set_time(&mut self, pot: &Potentials, t: f64) {
        if let Some(base) = &self.base_v {
            let f = pot.schedule.factor(t);
            let kd = self.kinetic_diag;
            self.diag = base.iter().map(|x| x * f + kd).collect();
        }
    }

    pub fn grid(&self) -> &ConfigGrid {
        &self.grid
    }
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
    pub fn coefficients(&self) -> &[f64] {
        &self.coeff
    }

    /// Forward link phase on `axis` at point `p`.
    pub fn link(&self, axis: usize, p: usize) -> Complex64 {
        match &self.links {
            Some(l) => l[axis][p],
            None => Complex64::new(1.0, 0.0),
        }
    }

    pub(crate) fn forward(&self, axis: usize, p: usize) -> Option<usize> {
        let q = self.forward[axis][p];
        (q != NONE).then_some(q as usize)
    }
    pub(crate) fn backward(&self, axis: usize, p: usize) -> Option<usize> {
        let q = self.backward[axis][p];
        (q != NONE).then_some(q as usize)
    }

    #[inline]
    fn row(&self, psi: &[Complex64], p: usize) -> Complex64 {
        let mut acc = psi[p] * self.diag[p];
        for a in 0..self.coeff.len() {
            let c = self.coeff[a];
            let f = self.forward[a][p];
            let b = self.backward[a][p];
            let mut off = Complex64::new(0.0, 0.0);
            match &self.links {
                Some(l) => {
                    if f != NONE {
                        off += l[a][p] * psi[f as usize];
                    }
                    if b != NONE {
                        off += l[a][b as usize].conj() * psi[b as usize];
                    }
                }
                None => {
                    if f != NONE {
                        off += psi[f as usize];
                    }
                    if b != NONE {
                        off += psi[b as usize];
                    }
                }
            }
            acc -= off * c;
        }
        acc
    }

    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        #[cfg(feature = "parallel")]
        {
            if psi.len() >= 1 << 14 {
                use rayon::prelude::*;
                out.par_iter_mut().enumerate().for_each(|(p, o)| *o = self.row(psi, p));
                return;
            }
        }
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.row(psi, p);
        }
    }

    /// `<psi|H|psi>` with the grid volume element.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut hp = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut hp);
        psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * self.grid.cell_volume()
    }
}

/// `H psi` for the state's time.
pub fn apply_hamiltonian(state: &WaveState, pot: &Potentials) -> Result<ComplexField> {
    let h = Hamiltonian::new(state.grid(), state.system(), pot, state.time())?;
    let mut out = vec![Complex64::new(0.0, 0.0); state.grid().len()];
    h.apply(state.psi().values(), &mut out);
    Ok(ComplexField::from_parts(state.grid().clone(), out))
}

/// Energy expectation of a normalized state.
pub fn energy(state: &WaveState, pot: &Potentials) -> Result<f64> {
    let h = Hamiltonian::new(state.grid(), state.system(), pot, state.time())?;
    Ok(h.expectation(state.psi().values()))
}
