//! Velocity-space collision operators.
//!
//! * [`bgk_apply`] / [`bgk_implicit_solve`]: the BGK relaxation penalty and its
//!   closed-form implicit solve.
//! * [`KernelModes`] / [`SpectralCollision`]: a Fourier–Galerkin Boltzmann operator
//!   for two-dimensional velocities with precomputed kernel weights.

mod kernel;
mod quadrature;
mod spectral;

pub use kernel::{
    lommel_integral, maxwell_weight_exact, truncation_radius, KernelKey, KernelModes,
    KERNEL_CACHE_VERSION,
};
pub use quadrature::gauss_legendre;
pub use spectral::{boltzmann_direct, boltzmann_spectral, SpectralCollision};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{maxwellian, Distribution, MacroState, VelocityGrid};

/// Penalty strength rule `beta = nu * lambda0 * rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Over-estimation multiplier.
    pub nu: f64,
    /// Base relaxation rate per unit density.
    pub lambda0: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { nu: 1.0, lambda0: 1.0 }
    }
}

impl PenaltyConfig {
    #[inline]
    pub fn beta(&self, rho: f64) -> f64 {
        self.nu * self.lambda0 * rho
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.lambda0 > 0.0) {
            return Err(Error::Config(format!(
                "penalty needs nu > 0 and lambda0 > 0, got nu = {}, lambda0 = {}",
                self.nu, self.lambda0
            )));
        }
        Ok(())
    }
}

/// `beta (m - f)` on one cell.
#[inline]
pub fn penalty_cell(f: &[f64], m: &[f64], beta: f64, out: &mut [f64]) {
    for ((o, fi), mi) in out.iter_mut().zip(f).zip(m) {
        *o = beta * (mi - fi);
    }
}

/// BGK penalty `P(f) = beta(U) (M_U - f)` per spatial cell, with `M_U` the sampled
/// Maxwellian of `u`.
pub fn bgk_apply(
    f: &Distribution,
    u: &MacroState,
    cfg: &PenaltyConfig,
    g: &VelocityGrid,
) -> Result<Distribution> {
    f.check_grid(g)?;
    if u.len() != f.n_x() {
        return Err(Error::GridMismatch(format!(
            "{} macro cells for {} spatial cells",
            u.len(),
            f.n_x()
        )));
    }
    let m = maxwellian(u, g)?;
    let mut out = Distribution::zeros(f.n_x(), g);
    let n = g.len();
    out.values_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, o)| penalty_cell(f.cell(i), m.cell(i), cfg.beta(u.cells[i].rho), o));
    Ok(out)
}

/// Closed-form solve of `f' = rhs + (beta dt / eps) (m - f')` on one cell.
#[inline]
pub fn relax_cell(rhs: &[f64], m: &[f64], beta: f64, eps: f64, dt: f64, out: &mut [f64]) {
    let bdt = beta * dt;
    let inv = 1.0 / (eps + bdt);
    for ((o, r), mi) in out.iter_mut().zip(rhs).zip(m) {
        *o = (eps * r + bdt * mi) * inv;
    }
}

/// `f' = [eps rhs + beta dt M] / (eps + beta dt)` per spatial cell.
pub fn bgk_implicit_solve(
    rhs: &Distribution,
    m_next: &Distribution,
    beta: &[f64],
    eps: &[f64],
    dt: f64,
) -> Result<Distribution> {
    let n_x = rhs.n_x();
    if m_next.n_x() != n_x || m_next.n_vel() != rhs.n_vel() || beta.len() != n_x || eps.len() != n_x {
        return Err(Error::GridMismatch("bgk_implicit_solve operand shapes differ".into()));
    }
    let mut out = rhs.clone();
    let n = rhs.n_vel();
    out.values_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, o)| relax_cell(rhs.cell(i), m_next.cell(i), beta[i], eps[i], dt, o));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cell_moments, conservative_maxwellian, moments, Moments};

    fn grid() -> VelocityGrid {
        VelocityGrid::new(32, 7.0).unwrap()
    }

    fn state() -> MacroState {
        MacroState {
            cells: vec![
                Moments::from_primitive(1.0, [0.0, 0.0], 1.0),
                Moments::from_primitive(0.5, [0.3, -0.2], 0.8),
                Moments::from_primitive(2.0, [-0.5, 0.1], 1.5),
            ],
        }
    }

    fn perturbed(g: &VelocityGrid) -> Distribution {
        let mut f = maxwellian(&state(), g).unwrap();
        for (i, v) in f.values_mut().iter_mut().enumerate() {
            *v *= 1.0 + 0.2 * ((i as f64) * 0.37).sin();
        }
        f
    }

    #[test]
    fn well_balanced_on_maxwellian() {
        let g = grid();
        let u = state();
        let m = maxwellian(&u, &g).unwrap();
        let p = bgk_apply(&m, &u, &PenaltyConfig::default(), &g).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn penalty_moments_vanish_within_quadrature() {
        let g = grid();
        let f = perturbed(&g);
        let u = moments(&f, &g).unwrap();
        let cfg = PenaltyConfig::default();
        let p = bgk_apply(&f, &u, &cfg, &g).unwrap();
        for i in 0..f.n_x() {
            let pm = cell_moments(p.cell(i), &g).as_array();
            let scale = cfg.beta(u.cells[i].rho) * u.cells[i].rho;
            for c in pm {
                assert!(c.abs() <= 1e-4 * scale, "{pm:?}");
            }
        }
    }

    #[test]
    fn penalty_linear_in_beta() {
        let g = grid();
        let f = perturbed(&g);
        let u = moments(&f, &g).unwrap();
        let p1 = bgk_apply(&f, &u, &PenaltyConfig { nu: 1.0, lambda0: 1.0 }, &g).unwrap();
        let p2 = bgk_apply(&f, &u, &PenaltyConfig { nu: 2.0, lambda0: 1.0 }, &g).unwrap();
        for (a, b) in p1.values().iter().zip(p2.values()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn implicit_solve_limits_and_fixed_point() {
        let g = grid();
        let rhs = perturbed(&g);
        let m = maxwellian(&state(), &g).unwrap();
        let beta = [1.0, 0.5, 2.0];

        let tiny_dt = bgk_implicit_solve(&rhs, &m, &beta, &[1.0; 3], 1e-300).unwrap();
        assert_eq!(tiny_dt, rhs);

        let stiff = bgk_implicit_solve(&rhs, &m, &beta, &[1e-300; 3], 0.1).unwrap();
        for (a, b) in stiff.values().iter().zip(m.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }

        for (eps, dt) in [(1.0, 0.1), (1e-6, 3.0), (10.0, 1e-4)] {
            let fixed = bgk_implicit_solve(&m, &m, &beta, &[eps; 3], dt).unwrap();
            for (a, b) in fixed.values().iter().zip(m.values()) {
                assert!((a - b).abs() <= 4e-16 * b.abs());
            }
        }
    }

    #[test]
    fn implicit_solve_is_exact_inverse() {
        let g = grid();
        let rhs = perturbed(&g);
        let m = maxwellian(&state(), &g).unwrap();
        let beta = [1.0, 0.5, 2.0];
        for (eps, dt) in [(1.0, 0.1), (1e-6, 0.01), (1e-2, 1.0)] {
            let eps_v = [eps; 3];
            let f = bgk_implicit_solve(&rhs, &m, &beta, &eps_v, dt).unwrap();
            for i in 0..3 {
                let h = beta[i] * dt / eps;
                for ((fi, ri), mi) in f.cell(i).iter().zip(rhs.cell(i)).zip(m.cell(i)) {
                    let res = fi - ri - h * (mi - fi);
                    assert!(res.abs() <= 1e-14 * (1.0 + h) * ri.abs().max(mi.abs()).max(1e-300) + 1e-300);
                }
            }
        }
    }

    #[test]
    fn implicit_solve_is_moment_exact_with_conservative_maxwellian() {
        let g = VelocityGrid::new(16, 7.0).unwrap();
        let rhs = perturbed(&g);
        let u = moments(&rhs, &g).unwrap();
        let m = conservative_maxwellian(&u, &g).unwrap();
        let beta: Vec<f64> = u.cells.iter().map(|c| c.rho).collect();
        let f = bgk_implicit_solve(&rhs, &m, &beta, &[1e-3, 1.0, 1e-8], 0.05).unwrap();
        let after = moments(&f, &g).unwrap();
        for (a, b) in after.cells.iter().zip(&u.cells) {
            for (x, y) in a.as_array().iter().zip(b.as_array()) {
                assert!((x - y).abs() <= 1e-12 * b.rho.max(b.energy));
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = grid();
        let f = perturbed(&g);
        let u = MacroState { cells: state().cells[..2].to_vec() };
        assert!(matches!(
            bgk_apply(&f, &u, &PenaltyConfig::default(), &g),
            Err(Error::GridMismatch(_))
        ));
        assert!(bgk_implicit_solve(&f, &f, &[1.0; 2], &[1.0; 3], 0.1).is_err());
    }
}
