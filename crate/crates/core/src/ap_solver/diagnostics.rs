//! Macroscopic diagnostics and the fixed-step driver.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{KineticSolver, KineticState};
use crate::error::{Error, Result};
use crate::grid::{cell_moments, conservative_maxwellian_cell, moments, Distribution, MacroState, VelocityGrid};
use crate::stiff_ode::Scheme;

/// Heat flux `(1/eps) sum w (v - u) |v - u|^2 f` per cell.
pub fn heat_flux(f: &Distribution, u: &MacroState, eps: &[f64], g: &VelocityGrid) -> Result<Vec<[f64; 2]>> {
    f.check_grid(g)?;
    if u.len() != f.n_x() || eps.len() != f.n_x() {
        return Err(Error::GridMismatch("heat_flux operand shapes differ".into()));
    }
    Ok((0..f.n_x())
        .map(|i| {
            let vel = u.cells[i].velocity();
            let mut q = [0.0; 2];
            for (idx, fv) in f.cell(i).iter().enumerate() {
                let v = g.node(idx);
                let c = [v[0] - vel[0], v[1] - vel[1]];
                let c2 = c[0] * c[0] + c[1] * c[1];
                q[0] += c[0] * c2 * fv;
                q[1] += c[1] * c2 * fv;
            }
            let s = g.weight() / eps[i];
            [q[0] * s, q[1] * s]
        })
        .collect())
}

/// `sum w |f - M_f|` on one cell, with `M_f` the moment-matched Maxwellian.
pub fn cell_ap_distance(cell: usize, f: &[f64], g: &VelocityGrid) -> Result<f64> {
    let u = cell_moments(f, g);
    let mut m = vec![0.0; f.len()];
    conservative_maxwellian_cell(cell, &u, g, &mut m)?;
    Ok(f.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.weight())
}

/// Relative distance to local equilibrium `||f - M_f||_1 / ||f||_1`.
pub fn ap_distance(f: &Distribution, g: &VelocityGrid) -> Result<f64> {
    let num: Vec<f64> = (0..f.n_x())
        .into_par_iter()
        .map(|i| cell_ap_distance(i, f.cell(i), g))
        .collect::<Result<_>>()?;
    Ok(num.iter().sum::<f64>() / (f.abs_sum() * g.weight()))
}

/// One row of the diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDiagnostics {
    pub x: f64,
    pub rho: f64,
    pub ux: f64,
    pub uy: f64,
    pub temperature: f64,
    pub heat_flux_x: f64,
    pub dist_maxwellian: f64,
}

/// Diagnostics of the whole mesh at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub cells: Vec<CellDiagnostics>,
}

pub const DIAGNOSTICS_HEADER: &str = "x,rho,u_x,u_y,T,heat_flux_x,dist_maxwellian";

impl Snapshot {
    pub fn of(solver: &KineticSolver, state: &KineticState) -> Result<Self> {
        let g = solver.grid();
        let u = moments(&state.f, g)?;
        let q = heat_flux(&state.f, &u, solver.knudsen().values(), g)?;
        let dist: Vec<f64> = (0..state.f.n_x())
            .into_par_iter()
            .map(|i| cell_ap_distance(i, state.f.cell(i), g))
            .collect::<Result<_>>()?;
        let cells = (0..state.f.n_x())
            .map(|i| {
                let m = &u.cells[i];
                let vel = m.velocity();
                CellDiagnostics {
                    x: solver.mesh().center(i),
                    rho: m.rho,
                    ux: vel[0],
                    uy: vel[1],
                    temperature: m.temperature(),
                    heat_flux_x: q[i][0],
                    dist_maxwellian: dist[i],
                }
            })
            .collect();
        Ok(Self { t: state.t, cells })
    }

    pub fn field(&self, name: &str) -> Option<Vec<f64>> {
        let get: fn(&CellDiagnostics) -> f64 = match name {
            "x" => |c| c.x,
            "rho" => |c| c.rho,
            "u" | "u_x" => |c| c.ux,
            "u_y" => |c| c.uy,
            "T" => |c| c.temperature,
            "heat_flux_x" | "q" => |c| c.heat_flux_x,
            "dist_maxwellian" => |c| c.dist_maxwellian,
            _ => return None,
        };
        Some(self.cells.iter().map(get).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        for c in &self.cells {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                c.x, c.rho, c.ux, c.uy, c.temperature, c.heat_flux_x, c.dist_maxwellian
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fixed-step run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Times at which snapshots are taken; each must be a whole number of steps.
    pub output_times: Vec<f64>,
    /// Record `ap_distance` after every step.
    pub track_ap: bool,
    /// Keep the full distribution at each output time.
    pub keep_states: bool,
}

/// Result of [`run_kinetic`].
#[derive(Debug, Clone)]
pub struct KineticRun {
    pub snapshots: Vec<Snapshot>,
    /// Distributions at the output times, when requested.
    pub states: Vec<KineticState>,
    pub state: KineticState,
    pub steps: usize,
    /// Largest `ap_distance` over all steps (when tracked).
    pub max_ap_distance: f64,
    /// Largest per-step relative change of the global conserved totals.
    pub max_totals_drift: [f64; 4],
    /// Smallest `min f / max f` seen after any step.
    pub min_relative_value: f64,
}

fn totals(f: &Distribution, g: &VelocityGrid) -> [f64; 4] {
    let mut t = [0.0; 4];
    for i in 0..f.n_x() {
        let m = cell_moments(f.cell(i), g).as_array();
        for q in 0..4 {
            t[q] += m[q];
        }
    }
    t
}

/// Step count for `duration` with steps no longer than `dt`.
pub fn steps_for(duration: f64, dt: f64) -> usize {
    let r = duration / dt;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * n.max(1.0) {
        n as usize
    } else {
        r.ceil() as usize
    }
}

/// Advance `f0` from `t = 0` to `spec.t_end`, taking snapshots at the requested times.
pub fn run_kinetic(solver: &KineticSolver, f0: Distribution, spec: &RunSpec) -> Result<KineticRun> {
    let g = solver.grid();
    let total = steps_for(spec.t_end, spec.dt);
    let mut marks = Vec::with_capacity(spec.output_times.len());
    for &t in &spec.output_times {
        let n = (t / spec.dt).round();
        if (n * spec.dt - t).abs() > 1e-9 * t.max(1.0) || n as usize > total {
            return Err(Error::Config(format!(
                "output time {t} is not a whole number of steps of {}",
                spec.dt
            )));
        }
        marks.push(n as usize);
    }
    let mut state = KineticState { f: f0, t: 0.0 };
    let mut snapshots = Vec::new();
    let mut states = Vec::new();
    let mut max_ap: f64 = 0.0;
    let mut drift = [0.0f64; 4];
    let mut min_rel = f64::INFINITY;
    let mut before = totals(&state.f, g);
    if marks.contains(&0) {
        snapshots.push(Snapshot::of(solver, &state)?);
        if spec.keep_states {
            states.push(state.clone());
        }
    }
    if spec.track_ap {
        max_ap = ap_distance(&state.f, g)?;
    }
    for n in 1..=total {
        state = solver.step(&state, spec.dt, spec.scheme)?;
        state.t = n as f64 * spec.dt;
        let after = totals(&state.f, g);
        let scale = before[0].abs().max(before[3].abs());
        for q in 0..4 {
            drift[q] = drift[q].max((after[q] - before[q]).abs() / scale);
        }
        before = after;
        let (lo, hi) = state
            .f
            .values()
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(v.abs())));
        min_rel = min_rel.min(lo / hi);
        if spec.track_ap {
            max_ap = max_ap.max(ap_distance(&state.f, g)?);
        }
        if marks.contains(&n) {
            snapshots.push(Snapshot::of(solver, &state)?);
            if spec.keep_states {
                states.push(state.clone());
            }
        }
    }
    Ok(KineticRun {
        snapshots,
        states,
        state,
        steps: total,
        max_ap_distance: max_ap,
        max_totals_drift: drift,
        min_relative_value: min_rel,
    })
}
