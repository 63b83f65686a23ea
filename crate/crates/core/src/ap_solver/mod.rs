//! Penalized asymptotic-preserving schemes for the Boltzmann equation
//! `df/dt + v_x df/dx = Q(f) / eps(x)` in one space and two velocity dimensions.
//!
//! The collision term is split as `Q = (Q - P) + P` with the BGK penalty
//! `P(f) = beta (M_f - f)`. Transport and `Q - P` are explicit; `P` is implicit and
//! solved in closed form because the new Maxwellian follows from the moments of the
//! transported distribution alone.
//!
//! Discrete Maxwellians are moment-matched on the lattice and `Q` is projected to
//! zero discrete moments, so every step conserves mass, momentum and energy to
//! round-off (momentum only under periodic boundaries).

mod diagnostics;
mod transport;

pub use diagnostics::{
    ap_distance, cell_ap_distance, heat_flux, run_kinetic, steps_for, CellDiagnostics, KineticRun,
    RunSpec, Snapshot, DIAGNOSTICS_HEADER,
};
pub use transport::transport_rhs;

use rayon::prelude::*;
use std::sync::Arc;

use crate::collision::{PenaltyConfig, SpectralCollision};
use crate::error::{Error, Result};
use crate::grid::{
    cell_moments, conservative_maxwellian_cell, match_moments, maxwellian_cell, Distribution, MacroState, Moments,
    SpatialMesh, VelocityGrid,
};
use crate::stiff_ode::Scheme;

/// Per-cell Knudsen number.
#[derive(Debug, Clone, PartialEq)]
pub struct KnudsenField {
    eps: Vec<f64>,
}

impl KnudsenField {
    pub fn constant(n_x: usize, eps0: f64) -> Result<Self> {
        Self::from_values(vec![eps0; n_x])
    }

    /// `eps(x) = eps0 + (tanh(1 - 11x) + tanh(1 + 11x)) / 2` at the cell centres.
    pub fn mixing(mesh: &SpatialMesh, eps0: f64) -> Result<Self> {
        Self::from_values(
            mesh.centers()
                .iter()
                .map(|&x| eps0 + 0.5 * ((1.0 - 11.0 * x).tanh() + (1.0 + 11.0 * x).tanh()))
                .collect(),
        )
    }

    pub fn from_values(eps: Vec<f64>) -> Result<Self> {
        if let Some((i, e)) = eps.iter().enumerate().find(|(_, e)| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("Knudsen number must be positive, cell {i} has {e}")));
        }
        Ok(Self { eps })
    }

    pub fn values(&self) -> &[f64] {
        &self.eps
    }

    pub fn min(&self) -> f64 {
        self.eps.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Collision operator `Q`.
#[derive(Debug, Clone)]
pub enum CollisionModel {
    /// Spectral Boltzmann operator.
    Boltzmann(SpectralCollision),
    /// BGK relaxation `Q = lambda0 rho (M_f - f)`.
    Bgk { lambda0: f64 },
}

/// Distribution together with its time.
#[derive(Debug, Clone)]
pub struct KineticState {
    pub f: Distribution,
    pub t: f64,
}

/// Immutable problem description: mesh, lattice, Knudsen field, penalty and collision model.
#[derive(Debug, Clone)]
pub struct KineticSolver {
    mesh: SpatialMesh,
    grid: VelocityGrid,
    knudsen: KnudsenField,
    penalty: PenaltyConfig,
    collision: CollisionModel,
}

/// `Q - P` and `P` evaluated at one distribution.
struct Sources {
    explicit: Vec<f64>,
    penalty: Vec<f64>,
}

impl KineticSolver {
    pub fn new(
        mesh: SpatialMesh,
        grid: VelocityGrid,
        knudsen: KnudsenField,
        penalty: PenaltyConfig,
        collision: CollisionModel,
    ) -> Result<Self> {
        penalty.validate()?;
        if knudsen.values().len() != mesh.n_x() {
            return Err(Error::GridMismatch(format!(
                "Knudsen field has {} cells, mesh has {}",
                knudsen.values().len(),
                mesh.n_x()
            )));
        }
        if let CollisionModel::Boltzmann(sc) = &collision {
            if !sc.kernel_modes().matches(&grid) {
                return Err(Error::GridMismatch("kernel modes built for another velocity grid".into()));
            }
        }
        if let CollisionModel::Bgk { lambda0 } = collision {
            if !(lambda0 > 0.0) {
                return Err(Error::Config(format!("BGK rate must be positive, got {lambda0}")));
            }
        }
        Ok(Self {
            mesh,
            grid,
            knudsen,
            penalty,
            collision,
        })
    }

    /// Convenience constructor with the spectral operator for `B = c_gamma |q|^gamma`.
    pub fn boltzmann(
        mesh: SpatialMesh,
        grid: VelocityGrid,
        knudsen: KnudsenField,
        penalty: PenaltyConfig,
        kernel: Arc<crate::collision::KernelModes>,
    ) -> Result<Self> {
        Self::new(mesh, grid, knudsen, penalty, CollisionModel::Boltzmann(SpectralCollision::new(kernel)))
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn knudsen(&self) -> &KnudsenField {
        &self.knudsen
    }

    pub fn penalty(&self) -> &PenaltyConfig {
        &self.penalty
    }

    pub fn collision(&self) -> &CollisionModel {
        &self.collision
    }

    /// Transport stability bound `dx / v_max`.
    pub fn cfl_bound(&self) -> f64 {
        self.mesh.dx() / self.grid.v_max()
    }

    /// Moment-matched local Maxwellians of `state`.
    pub fn equilibrium(&self, state: &MacroState) -> Result<Distribution> {
        let mut m = Distribution::zeros(state.len(), &self.grid);
        let n = self.grid.len();
        m.values_mut()
            .par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(i, out)| conservative_maxwellian_cell(i, &state.cells[i], &self.grid, out))?;
        Ok(m)
    }

    /// Initial distribution `M[U_i]` for the given per-cell moments.
    pub fn initial_equilibrium(&self, state: &MacroState) -> Result<Distribution> {
        if state.len() != self.mesh.n_x() {
            return Err(Error::GridMismatch("initial moments do not match the mesh".into()));
        }
        self.equilibrium(state)
    }

    fn collide(&self, f: &Distribution, out: &mut [f64]) -> Result<()> {
        match &self.collision {
            CollisionModel::Boltzmann(sc) => sc.apply_into(f, out),
            CollisionModel::Bgk { .. } => Ok(()),
        }
    }

    /// `Q(f) - nu_eff P(f)` and `nu_eff P(f)` per cell; the scheme's `P` vanishes for the
    /// explicit references (`with_penalty = false`).
    fn sources(&self, f: &Distribution, with_penalty: bool) -> Result<Sources> {
        let g = &self.grid;
        let n = g.len();
        let mut q = vec![0.0; f.values().len()];
        self.collide(f, &mut q)?;
        let mut penalty = vec![0.0; f.values().len()];
        q.par_chunks_mut(n)
            .zip(penalty.par_chunks_mut(n))
            .enumerate()
            .try_for_each(|(i, (qc, pc))| -> Result<()> {
                let fc = f.cell(i);
                let u = cell_moments(fc, g);
                if !(u.rho > 0.0) {
                    return Err(Error::NonPositiveDensity { cell: i, rho: u.rho });
                }
                let mut m = vec![0.0; n];
                maxwellian_cell(i, &u, g, &mut m)?;
                if let CollisionModel::Boltzmann(_) = self.collision {
                    // The sampled Maxwellian is positive, which keeps the projection well posed.
                    match_moments(qc, &m, u.velocity(), &Moments::default(), g)?;
                }
                let profile = m.clone();
                match_moments(&mut m, &profile, u.velocity(), &u, g)?;
                match self.collision {
                    CollisionModel::Boltzmann(_) => {}
                    CollisionModel::Bgk { lambda0 } => {
                        let rate = lambda0 * u.rho;
                        for ((q, mi), fi) in qc.iter_mut().zip(&m).zip(fc) {
                            *q = rate * (mi - fi);
                        }
                    }
                }
                if with_penalty {
                    let beta = self.penalty.beta(u.rho);
                    for (((q, p), mi), fi) in qc.iter_mut().zip(pc.iter_mut()).zip(&m).zip(fc) {
                        *p = beta * (mi - fi);
                        *q -= *p;
                    }
                }
                Ok(())
            })?;
        Ok(Sources {
            explicit: q,
            penalty,
        })
    }

    /// `base + dt T(src)`.
    fn transported(&self, base: &Distribution, src: &Distribution, dt: f64) -> Distribution {
        let mut out = base.clone();
        let mut t = vec![0.0; base.values().len()];
        transport::transport_into(src, &self.mesh, &self.grid, &mut t);
        out.values_mut()
            .par_iter_mut()
            .zip(t.par_iter())
            .for_each(|(o, ti)| *o += dt * ti);
        out
    }

    /// `[eps base + dt_e S + beta dt_i M] / (eps + beta dt_i)`, with `M`, `beta` taken from the
    /// moments of `base`. `dt_i = 0` gives the explicit update.
    fn relax(&self, base: &Distribution, s: &[f64], dt_e: f64, dt_i: f64) -> Result<Distribution> {
        let g = &self.grid;
        let n = g.len();
        let eps = self.knudsen.values();
        let mut out = base.clone();
        out.values_mut()
            .par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(i, o)| -> Result<()> {
                let b = base.cell(i);
                let sc = &s[i * n..(i + 1) * n];
                let e = eps[i];
                if dt_i == 0.0 {
                    let h = dt_e / e;
                    for ((oi, bi), si) in o.iter_mut().zip(b).zip(sc) {
                        *oi = bi + h * si;
                    }
                    return Ok(());
                }
                let u = cell_moments(b, g);
                if !(u.rho > 0.0) {
                    return Err(Error::NonPositiveDensity { cell: i, rho: u.rho });
                }
                let mut m = vec![0.0; n];
                conservative_maxwellian_cell(i, &u, g, &mut m)?;
                let bdt = self.penalty.beta(u.rho) * dt_i;
                let inv = 1.0 / (e + bdt);
                for (((oi, bi), si), mi) in o.iter_mut().zip(b).zip(sc).zip(&m) {
                    *oi = (e * bi + dt_e * si + bdt * mi) * inv;
                }
                Ok(())
            })?;
        Ok(out)
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        let bound = self.cfl_bound();
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, bound });
        }
        Ok(())
    }

    fn check_shape(&self, f: &Distribution) -> Result<()> {
        f.check_grid(&self.grid)?;
        if f.n_x() != self.mesh.n_x() {
            return Err(Error::GridMismatch(format!(
                "distribution has {} cells, mesh has {}",
                f.n_x(),
                self.mesh.n_x()
            )));
        }
        Ok(())
    }

    fn first_order(&self, f: &Distribution, dt: f64, implicit: bool) -> Result<Distribution> {
        let s = self.sources(f, implicit)?;
        let tilde = self.transported(f, f, dt);
        self.relax(&tilde, &s.explicit, dt, if implicit { dt } else { 0.0 })
    }

    fn second_order(&self, f: &Distribution, dt: f64, implicit: bool) -> Result<Distribution> {
        let dt_i = if implicit { 0.5 * dt } else { 0.0 };
        let s0 = self.sources(f, implicit)?;
        let half = self.transported(f, f, 0.5 * dt);
        let star = self.relax(&half, &s0.explicit, 0.5 * dt, dt_i)?;

        let mut s1 = self.sources(&star, implicit)?;
        if implicit {
            s1.explicit
                .par_iter_mut()
                .zip(s0.penalty.par_iter())
                .for_each(|(s, p)| *s += 0.5 * p);
        }
        let base = self.transported(f, &star, dt);
        self.relax(&base, &s1.explicit, dt, dt_i)
    }

    /// One step of `scheme`. The explicit schemes are the penalized ones without penalty.
    pub fn step(&self, state: &KineticState, dt: f64, scheme: Scheme) -> Result<KineticState> {
        self.check_dt(dt)?;
        self.check_shape(&state.f)?;
        let f = match scheme {
            Scheme::Imex1 => self.first_order(&state.f, dt, true)?,
            Scheme::ExplicitEuler => self.first_order(&state.f, dt, false)?,
            Scheme::Imex2 => self.second_order(&state.f, dt, true)?,
            Scheme::ExplicitRk2 => self.second_order(&state.f, dt, false)?,
        };
        let t = state.t + dt;
        let norm = f.max_abs();
        if !(norm <= crate::stiff_ode::OVERFLOW_THRESHOLD) {
            return Err(Error::Overflow { t, norm });
        }
        Ok(KineticState { f, t })
    }

    pub fn ap_step1(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        self.step(state, dt, Scheme::Imex1)
    }

    pub fn ap_step2(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        self.step(state, dt, Scheme::Imex2)
    }
}
