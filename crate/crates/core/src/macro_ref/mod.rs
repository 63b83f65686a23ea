//! Macroscopic reference solvers: compressible Euler and the BGK-derived
//! Navier–Stokes system in one space dimension, two velocity components.

mod riemann;

pub use riemann::{exact_riemann, Primitive1d, RiemannSolution};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ap_solver::{CellDiagnostics, Snapshot};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Moments, SpatialMesh};

/// `(d_v + 2) / d_v` for two velocity dimensions.
pub const GAMMA_GAS: f64 = 2.0;

/// Largest admissible advective Courant number.
pub const EULER_CFL: f64 = 0.9;

/// Largest admissible diffusive number `dt eps (mu / rho) / dx^2`.
pub const DIFFUSIVE_CFL: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluidBoundary {
    Periodic,
    /// Solid wall: mirrored ghost cells with the normal velocity negated.
    Reflective,
    /// Zero-gradient outflow.
    Transmissive,
}

impl From<Boundary> for FluidBoundary {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Periodic => FluidBoundary::Periodic,
            Boundary::SpecularReflection => FluidBoundary::Reflective,
        }
    }
}

/// Conserved fluid state `(rho, rho u_x, rho u_y, E)` per cell, `E = rho |u|^2/2 + rho T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    mesh: SpatialMesh,
    bc: FluidBoundary,
    cells: Vec<Moments>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy)]
struct Prim {
    rho: f64,
    ux: f64,
    uy: f64,
    p: f64,
}

impl Prim {
    fn of(m: &Moments) -> Self {
        let u = m.velocity();
        Self {
            rho: m.rho,
            ux: u[0],
            uy: u[1],
            p: (GAMMA_GAS - 1.0) * (m.energy - 0.5 * m.rho * (u[0] * u[0] + u[1] * u[1])),
        }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.rho, self.ux, self.uy, self.p]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            rho: a[0],
            ux: a[1],
            uy: a[2],
            p: a[3],
        }
    }

    fn sound(&self) -> f64 {
        (GAMMA_GAS * self.p / self.rho).sqrt()
    }

    fn conserved(&self) -> [f64; 4] {
        let e = 0.5 * self.rho * (self.ux * self.ux + self.uy * self.uy) + self.p / (GAMMA_GAS - 1.0);
        [self.rho, self.rho * self.ux, self.rho * self.uy, e]
    }

    fn flux(&self) -> [f64; 4] {
        let c = self.conserved();
        [c[1], c[1] * self.ux + self.p, c[2] * self.ux, (c[3] + self.p) * self.ux]
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a > 0.0 {
        a.min(b)
    } else {
        a.max(b)
    }
}

fn rusanov(l: &Prim, r: &Prim) -> [f64; 4] {
    let a = (l.ux.abs() + l.sound()).max(r.ux.abs() + r.sound());
    let (fl, fr) = (l.flux(), r.flux());
    let (ul, ur) = (l.conserved(), r.conserved());
    std::array::from_fn(|k| 0.5 * (fl[k] + fr[k]) - 0.5 * a * (ur[k] - ul[k]))
}

fn check_cell(i: usize, m: &Moments) -> Result<()> {
    let internal = m.energy - 0.5 * (m.momentum[0].powi(2) + m.momentum[1].powi(2)) / m.rho;
    if !(m.rho > 0.0 && internal > 0.0) || !m.energy.is_finite() {
        return Err(Error::VacuumState {
            cell: i,
            rho: m.rho,
            internal,
        });
    }
    Ok(())
}

impl MacroField {
    pub fn new(mesh: SpatialMesh, bc: FluidBoundary, cells: Vec<Moments>) -> Result<Self> {
        if cells.len() != mesh.n_x() {
            return Err(Error::GridMismatch(format!(
                "{} cells on a mesh of {}",
                cells.len(),
                mesh.n_x()
            )));
        }
        for (i, m) in cells.iter().enumerate() {
            check_cell(i, m)?;
        }
        Ok(Self { mesh, bc, cells, t: 0.0 })
    }

    /// Field sampled from primitive values `(rho, u, T)` at the cell centres.
    pub fn from_primitive(
        mesh: SpatialMesh,
        bc: FluidBoundary,
        init: impl Fn(f64) -> (f64, [f64; 2], f64),
    ) -> Result<Self> {
        let cells = mesh
            .centers()
            .into_iter()
            .map(|x| {
                let (rho, u, t) = init(x);
                Moments::from_primitive(rho, u, t)
            })
            .collect();
        Self::new(mesh, bc, cells)
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn boundary(&self) -> FluidBoundary {
        self.bc
    }

    pub fn cells(&self) -> &[Moments] {
        &self.cells
    }

    pub fn totals(&self) -> [f64; 4] {
        let mut t = [0.0; 4];
        for m in &self.cells {
            let a = m.as_array();
            for q in 0..4 {
                t[q] += a[q];
            }
        }
        t
    }

    /// Largest signal speed `|u_x| + c`.
    pub fn max_signal_speed(&self) -> f64 {
        self.cells
            .iter()
            .map(|m| {
                let p = Prim::of(m);
                p.ux.abs() + p.sound()
            })
            .fold(0.0, f64::max)
    }

    /// Advective and diffusive step limits `(0.9 dx / max(|u|+c), 0.4 dx^2 / (eps max T))`.
    pub fn step_limits(&self, eps: f64) -> (f64, f64) {
        let adv = EULER_CFL * self.mesh.dx() / self.max_signal_speed();
        if eps == 0.0 {
            return (adv, f64::INFINITY);
        }
        let nu = self.cells.iter().map(|m| m.temperature()).fold(0.0, f64::max);
        (adv, DIFFUSIVE_CFL * self.mesh.dx().powi(2) / (eps * nu))
    }

    /// A step that is stable for the combined advection-diffusion update.
    ///
    /// Each limit alone is not enough once both are active, so they are
    /// combined harmonically; the result satisfies both.
    pub fn stable_dt(&self, eps: f64) -> f64 {
        let (adv, diff) = self.step_limits(eps);
        1.0 / (1.0 / adv + 1.0 / diff)
    }

    fn ghost(&self, prims: &[Prim], i: isize) -> Prim {
        let n = prims.len() as isize;
        if (0..n).contains(&i) {
            return prims[i as usize];
        }
        match self.bc {
            FluidBoundary::Periodic => prims[i.rem_euclid(n) as usize],
            FluidBoundary::Transmissive => prims[i.clamp(0, n - 1) as usize],
            FluidBoundary::Reflective => {
                let mirror = if i < 0 { -1 - i } else { 2 * n - 1 - i };
                let mut p = prims[mirror as usize];
                p.ux = -p.ux;
                p
            }
        }
    }

    /// Semi-discrete right-hand side `-(F_{i+1/2} - F_{i-1/2}) / dx`.
    fn rhs(&self, cells: &[Moments], eps: f64) -> Vec<[f64; 4]> {
        let n = cells.len();
        let prims: Vec<Prim> = cells.iter().map(Prim::of).collect();
        let dx = self.mesh.dx();
        // Limited primitive slopes on cells -1..=n.
        let slope = |i: isize| -> [f64; 4] {
            let (a, b, c) = (
                self.ghost(&prims, i - 1).as_array(),
                self.ghost(&prims, i).as_array(),
                self.ghost(&prims, i + 1).as_array(),
            );
            std::array::from_fn(|k| minmod(b[k] - a[k], c[k] - b[k]))
        };
        // Face j sits between cells j-1 and j.
        let faces: Vec<[f64; 4]> = (0..=n)
            .into_par_iter()
            .map(|j| {
                let (il, ir) = (j as isize - 1, j as isize);
                let (pl, pr) = (self.ghost(&prims, il), self.ghost(&prims, ir));
                let (sl, sr) = (slope(il), slope(ir));
                let (wl, wr) = (pl.as_array(), pr.as_array());
                let l = Prim::from_array(std::array::from_fn(|k| wl[k] + 0.5 * sl[k]));
                let r = Prim::from_array(std::array::from_fn(|k| wr[k] - 0.5 * sr[k]));
                let mut f = rusanov(&l, &r);
                if eps > 0.0 {
                    let v = viscous_flux(&pl, &pr, dx);
                    for k in 0..4 {
                        f[k] -= eps * v[k];
                    }
                }
                f
            })
            .collect();
        (0..n)
            .map(|i| std::array::from_fn(|k| -(faces[i + 1][k] - faces[i][k]) / dx))
            .collect()
    }

    fn advance(&self, dt: f64, eps: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let (adv, diff) = self.step_limits(eps);
        let bound = adv.min(diff);
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, bound });
        }
        let add = |base: &[Moments], k: &[[f64; 4]], s: f64| -> Result<Vec<Moments>> {
            base.iter()
                .zip(k)
                .enumerate()
                .map(|(i, (m, r))| {
                    let a = m.as_array();
                    let out = Moments::from_array(std::array::from_fn(|q| a[q] + s * r[q]));
                    check_cell(i, &out)?;
                    Ok(out)
                })
                .collect()
        };
        let k1 = self.rhs(&self.cells, eps);
        let stage = add(&self.cells, &k1, dt)?;
        let k2 = self.rhs(&stage, eps);
        let full = add(&stage, &k2, dt)?;
        let cells = self
            .cells
            .iter()
            .zip(&full)
            .enumerate()
            .map(|(i, (a, b))| {
                let (a, b) = (a.as_array(), b.as_array());
                let m = Moments::from_array(std::array::from_fn(|q| 0.5 * a[q] + 0.5 * b[q]));
                check_cell(i, &m)?;
                Ok(m)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            mesh: self.mesh.clone(),
            bc: self.bc,
            cells,
            t: self.t + dt,
        })
    }

    /// One SSP-RK2 step of the Euler equations (MUSCL-minmod on primitives, Rusanov flux).
    pub fn euler_step(&self, dt: f64) -> Result<Self> {
        self.advance(dt, 0.0)
    }

    /// One step of the Navier–Stokes system with `mu = kappa = rho T` scaled by `eps`.
    pub fn ns_step(&self, dt: f64, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Config(format!("eps must be nonnegative, got {eps}")));
        }
        self.advance(dt, eps)
    }

    /// Fourier flux `-kappa dT/dx` by centred differences, without the `eps`
    /// factor so that it is on the scale of the kinetic `(1/eps) int c|c|^2 f`.
    pub fn heat_flux(&self) -> Vec<f64> {
        let prims: Vec<Prim> = self.cells.iter().map(Prim::of).collect();
        let dx = self.mesh.dx();
        (0..prims.len())
            .map(|i| {
                let (a, b) = (self.ghost(&prims, i as isize - 1), self.ghost(&prims, i as isize + 1));
                let kappa = prims[i].p;
                -kappa * (b.p / b.rho - a.p / a.rho) / (2.0 * dx)
            })
            .collect()
    }

    /// Diagnostics in the kinetic CSV schema; the equilibrium distance column is zero.
    pub fn snapshot(&self) -> Snapshot {
        let q = self.heat_flux();
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let u = m.velocity();
                CellDiagnostics {
                    x: self.mesh.center(i),
                    rho: m.rho,
                    ux: u[0],
                    uy: u[1],
                    temperature: m.temperature(),
                    heat_flux_x: q[i],
                    dist_maxwellian: 0.0,
                }
            })
            .collect();
        Snapshot { t: self.t, cells }
    }
}

/// Viscous and heat fluxes `(0, mu du_x/dx, mu du_y/dx, mu u.du/dx + kappa dT/dx)` at a face.
fn viscous_flux(l: &Prim, r: &Prim, dx: f64) -> [f64; 4] {
    // mu = kappa = rho T = p, averaged onto the face.
    let mu = 0.5 * (l.p + r.p);
    let (dux, duy) = ((r.ux - l.ux) / dx, (r.uy - l.uy) / dx);
    let dt = (r.p / r.rho - l.p / l.rho) / dx;
    let (ux, uy) = (0.5 * (l.ux + r.ux), 0.5 * (l.uy + r.uy));
    [0.0, mu * dux, mu * duy, mu * (ux * dux + uy * duy) + mu * dt]
}

/// Advance to `t_end` with steps of `safety * stable_dt`, shortened to land on
/// each of `output_times`, taking a snapshot at each of them.
pub fn run_fluid(field: MacroField, eps: f64, t_end: f64, output_times: &[f64], safety: f64) -> Result<Vec<Snapshot>> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Config(format!("step safety factor must lie in (0, 1], got {safety}")));
    }
    let mut marks: Vec<f64> = output_times.to_vec();
    marks.sort_by(f64::total_cmp);
    if marks.iter().any(|&t| t < 0.0 || t > t_end * (1.0 + 1e-12)) {
        return Err(Error::Config("output times must lie in [0, t_end]".into()));
    }
    let mut field = field;
    let mut out = Vec::new();
    let mut next = 0;
    while next < marks.len() && marks[next] <= 0.0 {
        out.push(field.snapshot());
        next += 1;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    while !close(field.t, t_end) && field.t < t_end {
        let target = if next < marks.len() { marks[next] } else { t_end };
        let dt = (safety * field.stable_dt(eps)).min(target - field.t);
        field = field.ns_step(dt, eps)?;
        if close(field.t, target) {
            field.t = target;
        }
        while next < marks.len() && close(field.t, marks[next]) {
            out.push(field.snapshot());
            next += 1;
        }
    }
    Ok(out)
}
