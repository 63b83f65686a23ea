//! Rescaled porous-medium equation `df/dt = div(v f + grad f^m)` in two
//! velocity dimensions, stepped with a linearly-implicit splitting around the
//! Barenblatt–Pattle profile.

mod banded;

pub use banded::{BandedLu, BandedMatrix};

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::VelocityGrid;

/// Solution on the velocity lattice at time `t` (in rescaled variables).
#[derive(Debug, Clone, PartialEq)]
pub struct PorousState {
    pub f: Vec<f64>,
    pub m: f64,
    pub t: f64,
}

impl PorousState {
    pub fn mass(&self, g: &VelocityGrid) -> f64 {
        self.f.iter().sum::<f64>() * g.weight()
    }

    pub fn min(&self) -> f64 {
        self.f.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_exponent(m: f64) -> Result<()> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::Config(format!("porous-medium exponent must exceed 1, got {m}")));
    }
    Ok(())
}

/// Barenblatt constant `C` with `int (C - (m-1)/(2m) |v|^2)_+^{1/(m-1)} dv = mass`.
///
/// In two dimensions the integral is `2 pi C^{m/(m-1)}`.
pub fn barenblatt_c(mass: f64, m: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::NegativeMass(mass));
    }
    Ok((mass / (2.0 * PI)).powf((m - 1.0) / m))
}

/// The Barenblatt–Pattle profile for a given mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattProfile {
    pub c: f64,
    pub m: f64,
}

impl BarenblattProfile {
    pub fn with_mass(mass: f64, m: f64) -> Result<Self> {
        Ok(Self {
            c: barenblatt_c(mass, m)?,
            m,
        })
    }

    fn a(&self) -> f64 {
        (self.m - 1.0) / (2.0 * self.m)
    }

    /// `M^{m-1} = (C - a |v|^2)_+`.
    pub fn power(&self, v: [f64; 2]) -> f64 {
        (self.c - self.a() * (v[0] * v[0] + v[1] * v[1])).max(0.0)
    }

    pub fn value(&self, v: [f64; 2]) -> f64 {
        self.power(v).powf(1.0 / (self.m - 1.0))
    }

    pub fn support_radius(&self) -> f64 {
        (self.c / self.a()).sqrt()
    }

    /// Nodal samples on the lattice.
    pub fn sample(&self, g: &VelocityGrid) -> Vec<f64> {
        (0..g.len()).map(|i| self.value(g.node(i))).collect()
    }
}

/// Sum of `1/10` indicators of radius `r0` centred at `l e^{2 pi i k/n}`, `l = 1, 2`.
pub fn ring_initial(g: &VelocityGrid, n: usize, r0: f64) -> Vec<f64> {
    let centres: Vec<[f64; 2]> = (1..=2)
        .flat_map(|l| {
            (0..n).map(move |k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                [l as f64 * th.cos(), l as f64 * th.sin()]
            })
        })
        .collect();
    (0..g.len())
        .map(|i| {
            let v = g.node(i);
            centres
                .iter()
                .filter(|c| (v[0] - c[0]).powi(2) + (v[1] - c[1]).powi(2) < r0 * r0)
                .count() as f64
                / 10.0
        })
        .collect()
}

/// Entropy `H(f)` and its dissipation `sum w f |v + m/(m-1) grad f^{m-1}|^2`.
///
/// The gradient is centred where both neighbours lie in the support and
/// one-sided where one of them vanishes; cells with `f = 0` contribute nothing.
pub fn entropy(f: &[f64], m: f64, g: &VelocityGrid) -> (f64, f64) {
    let n = g.n_v();
    let k = m / (m - 1.0);
    let h: f64 = f
        .iter()
        .enumerate()
        .map(|(i, &fi)| {
            let v = g.node(i);
            (v[0] * v[0] + v[1] * v[1]) * fi + k * fi.max(0.0).powf(m)
        })
        .sum::<f64>()
        * g.weight();
    let p: Vec<f64> = f.iter().map(|x| x.max(0.0).powf(m - 1.0)).collect();
    let dv = g.dv();
    let deriv = |i: usize, lo: Option<usize>, hi: Option<usize>| -> f64 {
        let live = |j: Option<usize>| j.filter(|&j| f[j] > 0.0);
        match (live(lo), live(hi)) {
            (Some(a), Some(b)) => (p[b] - p[a]) / (2.0 * dv),
            (Some(a), None) => (p[i] - p[a]) / dv,
            (None, Some(b)) => (p[b] - p[i]) / dv,
            (None, None) => 0.0,
        }
    };
    let d: f64 = (0..g.len())
        .map(|i| {
            if f[i] <= 0.0 {
                return 0.0;
            }
            let (j, l) = (i / n, i % n);
            let gx = deriv(i, (j > 0).then(|| i - n), (j + 1 < n).then(|| i + n));
            let gy = deriv(i, (l > 0).then(|| i - 1), (l + 1 < n).then(|| i + 1));
            let v = g.node(i);
            let (a, b) = (v[0] + k * gx, v[1] + k * gy);
            f[i] * (a * a + b * b)
        })
        .sum::<f64>()
        * g.weight();
    (h, d)
}

/// `g(v) = f(v/s) / s` with `s = sqrt(1 + 2 t)`, bilinear interpolation, zero outside the lattice.
///
/// The `1/s` prefactor does not preserve mass in two dimensions (the integral
/// gains a factor `s`); see [`rescaled_mass_factor`].
pub fn rescale_back(f: &[f64], g: &VelocityGrid, t_original: f64) -> Vec<f64> {
    let s = (1.0 + 2.0 * t_original).sqrt();
    let n = g.n_v();
    let (v0, dv) = (g.nodes_1d()[0], g.dv());
    let locate = |x: f64| -> Option<(usize, f64)> {
        let r = (x - v0) / dv;
        if r < 0.0 || r > (n - 1) as f64 {
            return None;
        }
        let i = (r.floor() as usize).min(n - 2);
        Some((i, r - i as f64))
    };
    (0..g.len())
        .map(|idx| {
            let v = g.node(idx);
            match (locate(v[0] / s), locate(v[1] / s)) {
                (Some((i, a)), Some((j, b))) => {
                    let at = |p: usize, q: usize| f[p * n + q];
                    let val = (1.0 - a) * (1.0 - b) * at(i, j)
                        + a * (1.0 - b) * at(i + 1, j)
                        + (1.0 - a) * b * at(i, j + 1)
                        + a * b * at(i + 1, j + 1);
                    val / s
                }
                _ => 0.0,
            }
        })
        .collect()
}

/// Ratio of the mass of `g` at `t_original` to the mass of `f`.
pub fn rescaled_mass_factor(f: &[f64], g: &VelocityGrid, t_original: f64) -> f64 {
    let back = rescale_back(f, g, t_original);
    back.iter().sum::<f64>() / f.iter().sum::<f64>()
}

/// Linearly-implicit stepper with a fixed time step.
///
/// `f^{n+1} - dt I(f^{n+1}) = f^n + dt E(f^n)` where
/// `E(f) = lap(f^m - m D f)` and `I(f) = div(v f + m grad(D f))`, `D = M^{m-1}`.
/// Both operators are in flux form with no-flux walls, so mass is conserved.
#[derive(Debug, Clone)]
pub struct PorousSolver {
    grid: VelocityGrid,
    profile: BarenblattProfile,
    dt: f64,
    d: Vec<f64>,
    lu: BandedLu,
    /// `I - dt A`, kept for residual checks.
    matrix: BandedMatrix,
}

/// Relative residual above which a linear solve is rejected.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

impl PorousSolver {
    pub fn new(grid: VelocityGrid, m: f64, mass: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let profile = BarenblattProfile::with_mass(mass, m)?;
        let d: Vec<f64> = (0..grid.len()).map(|i| profile.power(grid.node(i))).collect();
        let n = grid.n_v();
        let dv = grid.dv();
        let mut a = BandedMatrix::zeros(grid.len(), n);
        // Face flux J = v f_up + m ((D f)_hi - (D f)_lo) / dv, upwinded for the inward drift.
        let mut face = |lo: usize, hi: usize, vf: f64| {
            let diff = m / dv;
            let (up_lo, up_hi) = if vf > 0.0 { (0.0, vf) } else { (vf, 0.0) };
            let c_lo = up_lo - diff * d[lo];
            let c_hi = up_hi + diff * d[hi];
            // (I f)_lo += J / dv, (I f)_hi -= J / dv; the matrix holds I - dt A.
            let s = dt / dv;
            a.add(lo, lo, -s * c_lo);
            a.add(lo, hi, -s * c_hi);
            a.add(hi, lo, s * c_lo);
            a.add(hi, hi, s * c_hi);
        };
        let nodes = grid.nodes_1d();
        for j in 0..n {
            for k in 0..n {
                let i = grid.index(j, k);
                if j + 1 < n {
                    face(i, grid.index(j + 1, k), 0.5 * (nodes[j] + nodes[j + 1]));
                }
                if k + 1 < n {
                    face(i, grid.index(j, k + 1), 0.5 * (nodes[k] + nodes[k + 1]));
                }
            }
        }
        for i in 0..grid.len() {
            a.add(i, i, 1.0);
        }
        let lu = a.clone().factor()?;
        Ok(Self {
            grid,
            profile,
            dt,
            d,
            lu,
            matrix: a,
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn profile(&self) -> &BarenblattProfile {
        &self.profile
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Explicit part `lap(f^m - m D f)` with no-flux walls.
    pub fn explicit_part(&self, f: &[f64]) -> Vec<f64> {
        let m = self.profile.m;
        let q: Vec<f64> = f
            .iter()
            .zip(&self.d)
            .map(|(&x, &d)| x.max(0.0).powf(m) - m * d * x)
            .collect();
        let n = self.grid.n_v();
        let inv = 1.0 / (self.grid.dv() * self.grid.dv());
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let (j, k) = (i / n, i % n);
                let mut s = 0.0;
                if j > 0 {
                    s += q[i - n] - q[i];
                }
                if j + 1 < n {
                    s += q[i + n] - q[i];
                }
                if k > 0 {
                    s += q[i - 1] - q[i];
                }
                if k + 1 < n {
                    s += q[i + 1] - q[i];
                }
                s * inv
            })
            .collect()
    }

    /// One step from `state` to `state.t + dt`.
    pub fn step(&self, state: &PorousState) -> Result<PorousState> {
        if state.f.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "state has {} values, lattice has {}",
                state.f.len(),
                self.grid.len()
            )));
        }
        let e = self.explicit_part(&state.f);
        let rhs: Vec<f64> = state.f.iter().zip(&e).map(|(f, e)| f + self.dt * e).collect();
        let mut x = self.lu.solve(&rhs);
        let scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        let mut res = self.residual(&x, &rhs);
        if res > SOLVE_TOLERANCE * scale {
            // One step of iterative refinement.
            let r: Vec<f64> = rhs.iter().zip(self.matrix.mul_vec(&x)).map(|(b, ax)| b - ax).collect();
            let dx = self.lu.solve(&r);
            x.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
            res = self.residual(&x, &rhs);
            if res > SOLVE_TOLERANCE * scale {
                return Err(Error::LinearSolveFailure(format!("residual {res:e}")));
            }
        }
        let mass = x.iter().sum::<f64>() * self.grid.weight();
        if !(mass > 0.0) {
            return Err(Error::NegativeMass(mass));
        }
        Ok(PorousState {
            f: x,
            m: state.m,
            t: state.t + self.dt,
        })
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        self.matrix
            .mul_vec(x)
            .iter()
            .zip(b)
            .fold(0.0f64, |a, (ax, b)| a.max((ax - b).abs()))
    }
}

/// One row of the porous-medium time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PorousRecord {
    pub t: f64,
    pub mass: f64,
    pub min_f: f64,
    pub entropy: f64,
    pub relative_entropy: f64,
    pub dissipation: f64,
}

pub const POROUS_HEADER: &str = "t,mass,min_f,H,H_rel,dissipation";

/// Result of [`run_porous`].
#[derive(Debug, Clone)]
pub struct PorousRun {
    pub records: Vec<PorousRecord>,
    pub state: PorousState,
    /// Solutions at the requested output times.
    pub snapshots: Vec<PorousState>,
    /// `||f(t_end) - M||_1 / mass`.
    pub distance_to_barenblatt: f64,
}

/// Run from `f0` to `t_end`, recording the series after every step.
pub fn run_porous(grid: VelocityGrid, m: f64, f0: Vec<f64>, dt: f64, t_end: f64, output_times: &[f64]) -> Result<PorousRun> {
    check_exponent(m)?;
    let mass0 = f0.iter().sum::<f64>() * grid.weight();
    let solver = PorousSolver::new(grid, m, mass0, dt)?;
    let g = solver.grid().clone();
    let eq = solver.profile().sample(&g);
    let (h_eq, _) = entropy(&eq, m, &g);
    let record = |s: &PorousState| {
        let (h, d) = entropy(&s.f, m, &g);
        PorousRecord {
            t: s.t,
            mass: s.mass(&g),
            min_f: s.min(),
            entropy: h,
            relative_entropy: h - h_eq,
            dissipation: d,
        }
    };
    let total = crate::ap_solver::steps_for(t_end, dt);
    let marks: Vec<usize> = output_times.iter().map(|t| (t / dt).round() as usize).collect();
    let mut state = PorousState { f: f0, m, t: 0.0 };
    let mut records = vec![record(&state)];
    let mut snapshots = Vec::new();
    if marks.contains(&0) {
        snapshots.push(state.clone());
    }
    for n in 1..=total {
        state = solver.step(&state)?;
        state.t = n as f64 * dt;
        records.push(record(&state));
        if marks.contains(&n) {
            snapshots.push(state.clone());
        }
    }
    let dist = state.f.iter().zip(&eq).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.weight() / mass0;
    Ok(PorousRun {
        records,
        state,
        snapshots,
        distance_to_barenblatt: dist,
    })
}

pub fn write_porous_csv(records: &[PorousRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{POROUS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.mass, r.min_f, r.entropy, r.relative_entropy, r.dissipation
        )?;
    }
    w.flush()?;
    Ok(())
}
