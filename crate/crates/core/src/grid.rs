//! Phase-space discretization: spatial mesh, velocity lattice, moments and
//! Maxwellians for a 1D-in-space, 2D-in-velocity kinetic model.
//!
//! Velocity nodes use a midpoint lattice on `[-v_max, v_max]^2` with an even
//! number of points per direction, so the lattice is exactly symmetric under
//! `v -> -v` and contains no node at the origin.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform midpoint lattice on `[-v_max, v_max]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    n_v: usize,
    v_max: f64,
    dv: f64,
    nodes: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(n_v: usize, v_max: f64) -> Result<Self> {
        if n_v < 8 || n_v % 2 != 0 {
            return Err(Error::Config(format!(
                "velocity points per dimension must be even and >= 8, got {n_v}"
            )));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::Config(format!("v_max must be positive, got {v_max}")));
        }
        let dv = 2.0 * v_max / n_v as f64;
        let mut nodes = vec![0.0; n_v];
        // Fill the negative half and mirror it so that the lattice is bitwise symmetric.
        for j in 0..n_v / 2 {
            let v = -v_max + (j as f64 + 0.5) * dv;
            nodes[j] = v;
            nodes[n_v - 1 - j] = -v;
        }
        Ok(Self {
            n_v,
            v_max,
            dv,
            nodes,
        })
    }

    /// Points per dimension.
    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Total number of lattice nodes, `n_v^2`.
    pub fn len(&self) -> usize {
        self.n_v * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.n_v == 0
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Midpoint-rule quadrature weight, identical for every node.
    pub fn weight(&self) -> f64 {
        self.dv * self.dv
    }

    /// One-dimensional node coordinates.
    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes
    }

    /// Flat index of node `(j, k)`; `j` runs along `v_x`, `k` along `v_y`.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_v + k
    }

    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 2] {
        [self.nodes[idx / self.n_v], self.nodes[idx % self.n_v]]
    }

    /// Index of the node with `v_x` reflected.
    #[inline]
    pub fn mirror_x(&self, idx: usize) -> usize {
        let j = idx / self.n_v;
        let k = idx % self.n_v;
        (self.n_v - 1 - j) * self.n_v + k
    }

    /// Index of the node `-v`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }
}

/// Spatial boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    SpecularReflection,
}

/// Uniform cell-centred mesh on `[x_left, x_right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    n_x: usize,
    x_left: f64,
    x_right: f64,
    dx: f64,
    bc: Boundary,
}

impl SpatialMesh {
    pub fn new(n_x: usize, x_left: f64, x_right: f64, bc: Boundary) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::Config(format!("need at least two cells, got {n_x}")));
        }
        let dx = (x_right - x_left) / n_x as f64;
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Config(format!(
                "invalid domain [{x_left}, {x_right}]"
            )));
        }
        Ok(Self {
            n_x,
            x_left,
            x_right,
            dx,
            bc,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bc(&self) -> Boundary {
        self.bc
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.center(i)).collect()
    }
}

/// Phase-space density sampled on `n_x` cells times the velocity lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    n_x: usize,
    n_vel: usize,
    values: Vec<f64>,
}

impl Distribution {
    pub fn zeros(n_x: usize, g: &VelocityGrid) -> Self {
        Self {
            n_x,
            n_vel: g.len(),
            values: vec![0.0; n_x * g.len()],
        }
    }

    pub fn from_values(n_x: usize, g: &VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_x * g.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                n_x * g.len(),
                values.len()
            )));
        }
        Ok(Self {
            n_x,
            n_vel: g.len(),
            values,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// Number of velocity nodes per cell.
    pub fn n_vel(&self) -> usize {
        self.n_vel
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_vel..(i + 1) * self.n_vel]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_vel..(i + 1) * self.n_vel]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Check that `g` describes the velocity lattice of this distribution.
    pub fn check_grid(&self, g: &VelocityGrid) -> Result<()> {
        if self.n_vel != g.len() {
            return Err(Error::GridMismatch(format!(
                "distribution has {} velocity nodes, grid has {}",
                self.n_vel,
                g.len()
            )));
        }
        Ok(())
    }

    /// Discrete phase-space L1 norm without the mesh and velocity measures.
    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Conserved moments of one spatial cell: density, momentum and total energy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub rho: f64,
    pub momentum: [f64; 2],
    pub energy: f64,
}

impl Moments {
    /// Build from primitive variables with `E = rho |u|^2 / 2 + rho T` (two velocity dimensions).
    pub fn from_primitive(rho: f64, u: [f64; 2], temperature: f64) -> Self {
        let u2 = u[0] * u[0] + u[1] * u[1];
        Self {
            rho,
            momentum: [rho * u[0], rho * u[1]],
            energy: 0.5 * rho * u2 + rho * temperature,
        }
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.momentum[0] / self.rho, self.momentum[1] / self.rho]
    }

    pub fn temperature(&self) -> f64 {
        let u = self.velocity();
        (self.energy / self.rho) - 0.5 * (u[0] * u[0] + u[1] * u[1])
    }

    pub fn pressure(&self) -> f64 {
        self.rho * self.temperature()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.rho, self.momentum[0], self.momentum[1], self.energy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            rho: a[0],
            momentum: [a[1], a[2]],
            energy: a[3],
        }
    }
}

/// Per-cell conserved moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MacroState {
    pub cells: Vec<Moments>,
}

impl MacroState {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Sum of each conserved quantity over all cells (without the cell width).
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
}

/// Raw quadrature sums `(sum w f, sum w v f, sum w |v|^2/2 f)` for one cell.
///
/// Summation runs left to right over the lattice so results do not depend on
/// how cells are distributed across threads.
pub fn cell_moments(values: &[f64], g: &VelocityGrid) -> Moments {
    let n = g.n_v();
    let nodes = g.nodes_1d();
    let mut rho = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    let mut e = 0.0;
    for j in 0..n {
        let vx = nodes[j];
        let row = &values[j * n..(j + 1) * n];
        for (k, &f) in row.iter().enumerate() {
            let vy = nodes[k];
            rho += f;
            mx += vx * f;
            my += vy * f;
            e += 0.5 * (vx * vx + vy * vy) * f;
        }
    }
    let w = g.weight();
    Moments {
        rho: rho * w,
        momentum: [mx * w, my * w],
        energy: e * w,
    }
}

/// Moments of every cell; fails on any non-positive density.
pub fn moments(f: &Distribution, g: &VelocityGrid) -> Result<MacroState> {
    f.check_grid(g)?;
    let mut cells = Vec::with_capacity(f.n_x());
    for i in 0..f.n_x() {
        let m = cell_moments(f.cell(i), g);
        if !(m.rho > 0.0) {
            return Err(Error::NonPositiveDensity { cell: i, rho: m.rho });
        }
        cells.push(m);
    }
    Ok(MacroState { cells })
}

fn check_physical(cell: usize, m: &Moments) -> Result<(f64, [f64; 2], f64)> {
    let rho = m.rho;
    if !(rho > 0.0) {
        return Err(Error::InvalidMoments {
            cell,
            rho,
            temperature: f64::NAN,
        });
    }
    let t = m.temperature();
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidMoments {
            cell,
            rho,
            temperature: t,
        });
    }
    Ok((rho, m.velocity(), t))
}

/// Sample `rho / (2 pi T) exp(-|v - u|^2 / (2T))` at the lattice nodes of one cell.
pub fn maxwellian_cell(cell: usize, m: &Moments, g: &VelocityGrid, out: &mut [f64]) -> Result<()> {
    let (rho, u, t) = check_physical(cell, m)?;
    let n = g.n_v();
    let nodes = g.nodes_1d();
    let pref = rho / (2.0 * PI * t);
    let inv2t = 1.0 / (2.0 * t);
    for j in 0..n {
        let cx = nodes[j] - u[0];
        let cx2 = cx * cx;
        for k in 0..n {
            let cy = nodes[k] - u[1];
            out[j * n + k] = pref * (-(cx2 + cy * cy) * inv2t).exp();
        }
    }
    Ok(())
}

/// Sampled local Maxwellian for every cell of `state`.
pub fn maxwellian(state: &MacroState, g: &VelocityGrid) -> Result<Distribution> {
    let mut f = Distribution::zeros(state.len(), g);
    for (i, m) in state.cells.iter().enumerate() {
        maxwellian_cell(i, m, g, f.cell_mut(i))?;
    }
    Ok(f)
}

/// Adds `profile * (a0 + a1 (vx-ux) + a2 (vy-uy) + a3 |v-u|^2/2)` to `values` so that
/// the discrete moments of `values` become exactly `target`.
///
/// The correction is the weighted least-squares one, with weight `profile`
/// (normally the local Maxwellian). Returns the coefficients.
pub fn match_moments(
    values: &mut [f64],
    profile: &[f64],
    u: [f64; 2],
    target: &Moments,
    g: &VelocityGrid,
) -> Result<[f64; 4]> {
    let n = g.n_v();
    let nodes = g.nodes_1d();
    let w = g.weight();
    let mut gram = Matrix4::<f64>::zeros();
    let mut current = [0.0; 4];
    for j in 0..n {
        let cx = nodes[j] - u[0];
        for k in 0..n {
            let cy = nodes[k] - u[1];
            let idx = j * n + k;
            let psi = [1.0, cx, cy, 0.5 * (cx * cx + cy * cy)];
            let p = profile[idx];
            let f = values[idx];
            for a in 0..4 {
                current[a] += psi[a] * f;
                for b in a..4 {
                    gram[(a, b)] += p * psi[a] * psi[b];
                }
            }
        }
    }
    for a in 0..4 {
        current[a] *= w;
        for b in a..4 {
            gram[(a, b)] *= w;
            gram[(b, a)] = gram[(a, b)];
        }
    }
    // Target moments in the centred basis.
    let t = target.as_array();
    let u2 = u[0] * u[0] + u[1] * u[1];
    let target_psi = [
        t[0],
        t[1] - u[0] * t[0],
        t[2] - u[1] * t[0],
        t[3] - u[0] * t[1] - u[1] * t[2] + 0.5 * u2 * t[0],
    ];
    let rhs = Vector4::new(
        target_psi[0] - current[0],
        target_psi[1] - current[1],
        target_psi[2] - current[2],
        target_psi[3] - current[3],
    );
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::SolveFailure("moment Gram matrix is not positive definite".into()))?
        .solve(&rhs);
    for j in 0..n {
        let cx = nodes[j] - u[0];
        for k in 0..n {
            let cy = nodes[k] - u[1];
            let idx = j * n + k;
            let poly = coef[0] + coef[1] * cx + coef[2] * cy + coef[3] * 0.5 * (cx * cx + cy * cy);
            values[idx] += profile[idx] * poly;
        }
    }
    Ok([coef[0], coef[1], coef[2], coef[3]])
}

/// Sampled Maxwellian corrected so that its discrete moments equal `m` to round-off.
pub fn conservative_maxwellian_cell(
    cell: usize,
    m: &Moments,
    g: &VelocityGrid,
    out: &mut [f64],
) -> Result<()> {
    maxwellian_cell(cell, m, g, out)?;
    let profile = out.to_vec();
    match_moments(out, &profile, m.velocity(), m, g)?;
    Ok(())
}

pub fn conservative_maxwellian(state: &MacroState, g: &VelocityGrid) -> Result<Distribution> {
    let mut f = Distribution::zeros(state.len(), g);
    for (i, m) in state.cells.iter().enumerate() {
        conservative_maxwellian_cell(i, m, g, f.cell_mut(i))?;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid32() -> VelocityGrid {
        VelocityGrid::new(32, 7.0).unwrap()
    }

    /// Exact moments of a Gaussian by brute-force fine quadrature (oracle).
    fn fine_quadrature(rho: f64, u: [f64; 2], t: f64) -> [f64; 4] {
        let n = 2000;
        let l = 12.0;
        let h = 2.0 * l / n as f64;
        let mut out = [0.0; 4];
        for a in 0..n {
            let vx = -l + (a as f64 + 0.5) * h;
            for b in 0..n {
                let vy = -l + (b as f64 + 0.5) * h;
                let f = rho / (2.0 * PI * t)
                    * (-((vx - u[0]).powi(2) + (vy - u[1]).powi(2)) / (2.0 * t)).exp();
                out[0] += f;
                out[1] += vx * f;
                out[2] += vy * f;
                out[3] += 0.5 * (vx * vx + vy * vy) * f;
            }
        }
        out.map(|x| x * h * h)
    }

    #[test]
    fn lattice_invariants() {
        let g = grid32();
        let nodes = g.nodes_1d();
        assert!(nodes.iter().all(|&v| v.abs() < 7.0));
        assert_eq!(g.weight() * g.len() as f64, 14.0 * 14.0);
        for j in 0..32 {
            assert_eq!(nodes[j].to_bits(), (-nodes[31 - j]).to_bits());
        }
        assert!(VelocityGrid::new(7, 1.0).is_err());
        assert!(VelocityGrid::new(6, 1.0).is_err());
    }

    #[test]
    fn mesh_centers_interior() {
        let m = SpatialMesh::new(10, -1.0, 1.0, Boundary::Periodic).unwrap();
        assert!((m.dx() - 0.2).abs() < 1e-15);
        let c = m.centers();
        assert!(c.iter().all(|&x| x > -1.0 && x < 1.0));
        assert!(SpatialMesh::new(10, 1.0, -1.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn zero_distribution_has_no_density() {
        let g = VelocityGrid::new(8, 4.0).unwrap();
        let f = Distribution::zeros(3, &g);
        assert!(matches!(moments(&f, &g), Err(Error::NonPositiveDensity { cell: 0, .. })));
    }

    #[test]
    fn maxwellian_value_at_origin() {
        // Node (0,0) is not on the midpoint lattice; evaluate the same formula there.
        let g = grid32();
        let state = MacroState {
            cells: vec![Moments::from_primitive(1.0, [0.0, 0.0], 1.0)],
        };
        let f = maxwellian(&state, &g).unwrap();
        let v = g.node(g.index(16, 16));
        let expected = (1.0 / (2.0 * PI)) * (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp();
        assert!((f.cell(0)[g.index(16, 16)] - expected).abs() < 1e-16);
        assert!((1.0 / (2.0 * PI) - 0.1591549).abs() < 1e-7);
    }

    #[test]
    fn maxwellian_linear_in_density() {
        let g = grid32();
        let one = maxwellian(
            &MacroState { cells: vec![Moments::from_primitive(1.0, [0.0, 0.0], 1.0)] },
            &g,
        )
        .unwrap();
        let two = maxwellian(
            &MacroState { cells: vec![Moments::from_primitive(2.0, [0.0, 0.0], 1.0)] },
            &g,
        )
        .unwrap();
        for (a, b) in one.values().iter().zip(two.values()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn maxwellian_moments_match_fine_quadrature() {
        let g = grid32();
        for (rho, u, t) in [(1.0, [0.0, 0.0], 1.0), (2.0, [1.0, 0.0], 0.5)] {
            let f = maxwellian(&MacroState { cells: vec![Moments::from_primitive(rho, u, t)] }, &g)
                .unwrap();
            let m = moments(&f, &g).unwrap().cells[0];
            let oracle = fine_quadrature(rho, u, t);
            assert!((m.rho - rho).abs() <= 1e-6);
            assert!((oracle[0] - rho).abs() <= 1e-6);
            let mu = m.velocity();
            assert!((mu[0] - u[0]).abs() <= 1e-5 && (mu[1] - u[1]).abs() <= 1e-5);
            assert!((m.temperature() - t).abs() <= 1e-5);
            if u == [0.0, 0.0] {
                assert!(mu[0].abs() <= 1e-12 && mu[1].abs() <= 1e-12);
            }
            for q in 0..4 {
                assert!((m.as_array()[q] - oracle[q]).abs() <= 1e-5 * (1.0 + oracle[q].abs()));
            }
        }
    }

    #[test]
    fn maxwellian_rejects_unphysical() {
        let g = grid32();
        let bad = MacroState { cells: vec![Moments::from_primitive(1.0, [0.0, 0.0], -0.1)] };
        assert!(matches!(maxwellian(&bad, &g), Err(Error::InvalidMoments { .. })));
        let bad = MacroState { cells: vec![Moments { rho: -1.0, ..Default::default() }] };
        assert!(matches!(maxwellian(&bad, &g), Err(Error::InvalidMoments { .. })));
    }

    #[test]
    fn maxwellian_at_rest_is_reflection_symmetric() {
        let g = VelocityGrid::new(16, 7.0).unwrap();
        let f = maxwellian(
            &MacroState { cells: vec![Moments::from_primitive(0.7, [0.0, 0.0], 0.8)] },
            &g,
        )
        .unwrap();
        let c = f.cell(0);
        for idx in 0..g.len() {
            assert_eq!(c[idx].to_bits(), c[g.mirror(idx)].to_bits());
            assert_eq!(c[idx].to_bits(), c[g.mirror_x(idx)].to_bits());
        }
    }

    #[test]
    fn conservative_maxwellian_hits_target_moments() {
        // Coarse lattice, cold gas: the sampled Maxwellian misses its moments.
        let g = VelocityGrid::new(16, 7.0).unwrap();
        let target = Moments::from_primitive(0.125, [0.3, -0.1], 0.25);
        let mut out = vec![0.0; g.len()];
        maxwellian_cell(0, &target, &g, &mut out).unwrap();
        let raw = cell_moments(&out, &g);
        assert!((raw.energy - target.energy).abs() > 1e-8);
        conservative_maxwellian_cell(0, &target, &g, &mut out).unwrap();
        let m = cell_moments(&out, &g);
        for q in 0..4 {
            assert!((m.as_array()[q] - target.as_array()[q]).abs() <= 1e-14);
        }
    }

    #[test]
    fn energy_reconstructs_from_primitive() {
        let m = Moments::from_primitive(1.3, [0.4, -0.2], 0.9);
        let u = m.velocity();
        let e = 0.5 * m.rho * (u[0] * u[0] + u[1] * u[1]) + m.rho * m.temperature();
        assert!((e - m.energy).abs() <= 1e-15);
        assert!((m.pressure() - 1.3 * 0.9).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn maxwellian_round_trip(rho in 0.1f64..10.0, ux in -1.4f64..1.4, uy in -1.4f64..1.4,
                                     t in 0.2f64..4.0) {
                let v_max = 7.0 + (ux * ux + uy * uy).sqrt() + 4.0 * t.sqrt();
                let g = VelocityGrid::new(32, v_max).unwrap();
                let u = Moments::from_primitive(rho, [ux, uy], t);
                let f = maxwellian(&MacroState { cells: vec![u] }, &g).unwrap();
                let m = moments(&f, &g).unwrap().cells[0];
                let a = u.as_array();
                let b = m.as_array();
                let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!(diff / norm <= 1e-4);
            }

            #[test]
            fn moments_are_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
                let g = VelocityGrid::new(8, 4.0).unwrap();
                let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 };
                let a: Vec<f64> = (0..g.len()).map(|_| next()).collect();
                let b: Vec<f64> = (0..g.len()).map(|_| next()).collect();
                let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
                let ma = cell_moments(&a, &g).as_array();
                let mb = cell_moments(&b, &g).as_array();
                let mc = cell_moments(&c, &g).as_array();
                for q in 0..4 {
                    let lin = alpha * ma[q] + beta * mb[q];
                    prop_assert!((mc[q] - lin).abs() <= 1e-12 * (1.0 + ma[q].abs() + mb[q].abs()) * (1.0 + alpha.abs() + beta.abs()));
                }
            }
        }
    }
}
