//! Evaluation of the Fourier–Galerkin collision operator.
//!
//! Per spatial cell: FFT of `f` to the modes `f_k` of `f(v) = sum_k f_k e^{i pi k.v / T}`,
//! the pair sum `Q_k = sum_{l+m=k} [B(l,m) - B(m,m)] f_l f_m` over the non-Nyquist
//! modes, and an inverse FFT. Only the half-plane `k_1 >= 0` is summed; the rest
//! follows from Hermitian symmetry, which keeps `Q` real by construction.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::kernel::{maxwell_weight_exact, KernelModes};
use crate::error::{Error, Result};
use crate::grid::{Distribution, VelocityGrid};

/// Spectral Boltzmann operator bound to one velocity lattice.
#[derive(Clone)]
pub struct SpectralCollision {
    km: Arc<KernelModes>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `(-1)^k e^{-i pi k / N} / N` for each FFT slot.
    to_modes: Vec<Complex64>,
    /// `(-1)^k e^{i pi k / N}` for each FFT slot.
    from_modes: Vec<Complex64>,
}

impl std::fmt::Debug for SpectralCollision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralCollision").field("key", self.km.key()).finish()
    }
}

struct Workspace {
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
    fr: Vec<f64>,
    fi: Vec<f64>,
    qr: Vec<f64>,
    qi: Vec<f64>,
}

impl SpectralCollision {
    pub fn new(km: Arc<KernelModes>) -> Self {
        let n = km.n_v();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let signed = |slot: usize| if slot < n / 2 { slot as i64 } else { slot as i64 - n as i64 };
        let phase = |slot: usize, sign: f64| {
            let k = signed(slot);
            let parity = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            Complex64::from_polar(parity, sign * PI * k as f64 / n as f64)
        };
        let to_modes = (0..n).map(|s| phase(s, -1.0) / n as f64).collect();
        let from_modes = (0..n).map(|s| phase(s, 1.0)).collect();
        Self {
            km,
            fwd,
            inv,
            to_modes,
            from_modes,
        }
    }

    pub fn kernel_modes(&self) -> &Arc<KernelModes> {
        &self.km
    }

    fn workspace(&self) -> Workspace {
        let n = self.km.n_v();
        let m = self.km.modes_per_dim();
        let h = self.km.half();
        let scratch_len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());
        Workspace {
            buf: vec![Complex64::default(); n * n],
            tmp: vec![Complex64::default(); n * n],
            scratch: vec![Complex64::default(); scratch_len],
            fr: vec![0.0; m * m],
            fi: vec![0.0; m * m],
            qr: vec![0.0; (h + 1) * m],
            qi: vec![0.0; (h + 1) * m],
        }
    }

    /// Two-dimensional FFT of `ws.buf` in place (rows, transpose, rows, transpose).
    fn fft2(&self, ws: &mut Workspace, plan: &Arc<dyn Fft<f64>>) {
        let n = self.km.n_v();
        plan.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        transpose(&ws.buf, &mut ws.tmp, n);
        plan.process_with_scratch(&mut ws.tmp, &mut ws.scratch);
        transpose(&ws.tmp, &mut ws.buf, n);
    }

    fn apply_cell_with(&self, f: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let n = self.km.n_v();
        let h = self.km.half() as i64;
        let m = self.km.modes_per_dim();
        let slot = |k: i64| k.rem_euclid(n as i64) as usize;

        for (b, &v) in ws.buf.iter_mut().zip(f) {
            *b = Complex64::new(v, 0.0);
        }
        self.fft2(ws, &self.fwd);
        for k1 in -h..=h {
            for k2 in -h..=h {
                let (s1, s2) = (slot(k1), slot(k2));
                let c = ws.buf[s1 * n + s2] * self.to_modes[s1] * self.to_modes[s2];
                let idx = ((k1 + h) as usize) * m + (k2 + h) as usize;
                ws.fr[idx] = c.re;
                ws.fi[idx] = c.im;
            }
        }

        ws.qr.iter_mut().for_each(|x| *x = 0.0);
        ws.qi.iter_mut().for_each(|x| *x = 0.0);
        let kernel = self.km.kernel();
        let mm = m * m;
        for l1 in -h..=h {
            let m1_lo = (-h).max(-l1);
            let m1_hi = h.min(h - l1);
            for l2 in -h..=h {
                let li = ((l1 + h) as usize) * m + (l2 + h) as usize;
                let (flr, fli) = (ws.fr[li], ws.fi[li]);
                let m2_lo = (-h).max(-h - l2);
                let m2_hi = h.min(h - l2);
                let len = (m2_hi - m2_lo + 1) as usize;
                let row = &kernel[li * mm..(li + 1) * mm];
                for m1 in m1_lo..=m1_hi {
                    let k1 = (l1 + m1) as usize;
                    let mrow = ((m1 + h) as usize) * m + (m2_lo + h) as usize;
                    let qrow = k1 * m + (l2 + m2_lo + h) as usize;
                    let w = &row[mrow..mrow + len];
                    let gr = &ws.fr[mrow..mrow + len];
                    let gi = &ws.fi[mrow..mrow + len];
                    let (qr, qi) = (&mut ws.qr[qrow..qrow + len], &mut ws.qi[qrow..qrow + len]);
                    for t in 0..len {
                        let a = w[t] * flr;
                        let b = w[t] * fli;
                        qr[t] += a * gr[t] - b * gi[t];
                        qi[t] += a * gi[t] + b * gr[t];
                    }
                }
            }
        }

        ws.buf.iter_mut().for_each(|x| *x = Complex64::default());
        for k1 in -h..=h {
            for k2 in -h..=h {
                let q = if k1 >= 0 {
                    let idx = (k1 as usize) * m + (k2 + h) as usize;
                    Complex64::new(ws.qr[idx], ws.qi[idx])
                } else {
                    let idx = ((-k1) as usize) * m + (-k2 + h) as usize;
                    Complex64::new(ws.qr[idx], -ws.qi[idx])
                };
                let (s1, s2) = (slot(k1), slot(k2));
                ws.buf[s1 * n + s2] = q * self.from_modes[s1] * self.from_modes[s2];
            }
        }
        self.fft2(ws, &self.inv);
        debug_assert!({
            let scale: f64 = f.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
            let imag = ws.buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
            imag <= 1e-10 * scale * scale * kernel.iter().fold(1.0f64, |a, b| a.max(b.abs()))
        });
        for (o, c) in out.iter_mut().zip(&ws.buf) {
            *o = c.re;
        }
    }

    /// `Q(f)` on a single cell.
    pub fn apply_cell(&self, f: &[f64], out: &mut [f64]) {
        let mut ws = self.workspace();
        self.apply_cell_with(f, out, &mut ws);
    }

    /// `Q(f)` for every spatial cell.
    pub fn apply(&self, f: &Distribution) -> Result<Distribution> {
        let mut out = f.clone();
        self.apply_into(f, out.values_mut())?;
        Ok(out)
    }

    /// `Q(f)` for every spatial cell, written to `out`.
    pub fn apply_into(&self, f: &Distribution, out: &mut [f64]) -> Result<()> {
        let n = self.km.n_v();
        if f.n_vel() != n * n || out.len() != f.values().len() {
            return Err(Error::GridMismatch(format!(
                "distribution has {} velocity nodes, kernel expects {}",
                f.n_vel(),
                n * n
            )));
        }
        out.par_chunks_mut(n * n).enumerate().for_each_init(
            || self.workspace(),
            |ws, (i, o)| self.apply_cell_with(f.cell(i), o, ws),
        );
        Ok(())
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

/// Spectral Boltzmann operator applied to every cell of `f`.
pub fn boltzmann_spectral(f: &Distribution, km: &Arc<KernelModes>) -> Result<Distribution> {
    SpectralCollision::new(Arc::clone(km)).apply(f)
}

/// Reference evaluation of the same truncated operator for Maxwell molecules on one
/// cell: direct Fourier sums at the lattice nodes, closed-form weights and a naive
/// `O(n_v^4)` pair sum. Meant for validation on small lattices only.
pub fn boltzmann_direct(f: &[f64], g: &VelocityGrid, c_gamma: f64) -> Vec<f64> {
    let n = g.n_v();
    let h = (n / 2 - 1) as i64;
    let t = g.v_max();
    let modes: Vec<[i64; 2]> = (-h..=h).flat_map(|a| (-h..=h).map(move |b| [a, b])).collect();
    let basis = |k: [i64; 2], idx: usize| {
        let v = g.node(idx);
        Complex64::from_polar(1.0, PI * (k[0] as f64 * v[0] + k[1] as f64 * v[1]) / t)
    };
    let norm = 1.0 / (n * n) as f64;
    let fhat: Vec<Complex64> = modes
        .iter()
        .map(|&k| (0..n * n).map(|j| f[j] * basis(k, j).conj()).sum::<Complex64>() * norm)
        .collect();
    let index = |k: [i64; 2]| ((k[0] + h) as usize) * (2 * h as usize + 1) + (k[1] + h) as usize;
    let mut qhat = vec![Complex64::default(); modes.len()];
    for (li, &l) in modes.iter().enumerate() {
        for (mi, &m) in modes.iter().enumerate() {
            let k = [l[0] + m[0], l[1] + m[1]];
            if k[0].abs() > h || k[1].abs() > h {
                continue;
            }
            let w = maxwell_weight_exact(l, m, t, c_gamma) - maxwell_weight_exact(m, m, t, c_gamma);
            qhat[index(k)] += w * fhat[li] * fhat[mi];
        }
    }
    (0..n * n)
        .map(|j| {
            modes
                .iter()
                .zip(&qhat)
                .map(|(&k, q)| q * basis(k, j))
                .sum::<Complex64>()
                .re
        })
        .collect()
}
