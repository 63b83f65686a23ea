//! Self-convergence errors between successive meshes and slope fits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Distribution;

/// Average groups of `factor` consecutive cells.
pub fn restrict(values: &[f64], n_x: usize, factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || n_x % factor != 0 || values.len() % n_x != 0 {
        return Err(Error::GridIncompatible(format!(
            "{n_x} cells cannot be grouped by {factor}"
        )));
    }
    let width = values.len() / n_x;
    let coarse = n_x / factor;
    let mut out = vec![0.0; coarse * width];
    for (i, chunk) in values.chunks(width).enumerate() {
        let o = &mut out[(i / factor) * width..(i / factor + 1) * width];
        o.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
    }
    let s = 1.0 / factor as f64;
    out.iter_mut().for_each(|a| *a *= s);
    Ok(out)
}

fn norm(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |a, b| a.max(b.abs()))
    } else {
        values.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `max_t ||R f_h(t) - f_2h(t)||_p / ||R f0_h||_p`, measured on the coarse mesh.
///
/// `R` averages each pair of fine cells, so the coarse cells are compared
/// with the fine-cell averages over the same interval.
pub fn self_convergence(f_h: &[Distribution], f_2h: &[Distribution], f0_h: &Distribution, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Config(format!("norm exponent must be >= 1, got {p}")));
    }
    if f_h.len() != f_2h.len() || f_h.is_empty() {
        return Err(Error::GridIncompatible(format!(
            "{} fine and {} coarse output times",
            f_h.len(),
            f_2h.len()
        )));
    }
    let (nf, nc) = (f0_h.n_x(), f_2h[0].n_x());
    if nf != 2 * nc || f0_h.n_vel() != f_2h[0].n_vel() {
        return Err(Error::GridIncompatible(format!("meshes of {nf} and {nc} cells are not nested by 2")));
    }
    let scale = norm(restrict(f0_h.values(), nf, 2)?.into_iter(), p);
    let mut worst: f64 = 0.0;
    for (a, b) in f_h.iter().zip(f_2h) {
        if a.n_x() != nf || b.n_x() != nc || a.n_vel() != b.n_vel() {
            return Err(Error::GridIncompatible("output shapes differ between times".into()));
        }
        let r = restrict(a.values(), nf, 2)?;
        worst = worst.max(norm(r.iter().zip(b.values()).map(|(x, y)| x - y), p) / scale);
    }
    Ok(worst)
}

/// Least-squares slope of `log e` against `log h` and the RMS residual of the fit.
pub fn fit_slope(h: &[f64], e: &[f64]) -> (f64, f64) {
    let n = h.len() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = h.iter().zip(e).map(|(h, e)| (h.ln(), e.ln())).unzip();
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let res = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, res)
}

/// Error between the solutions on `n_coarse` and `2 n_coarse` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub err_l1: f64,
    pub err_linf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub eps: f64,
    pub slope_l1: f64,
    pub residual_l1: f64,
    pub slope_linf: f64,
    pub residual_linf: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<ConvergenceFit>,
}

impl ConvergenceReport {
    /// Fit slopes for every `eps` with at least two rows.
    pub fn refit(&mut self) {
        let mut eps: Vec<f64> = self.rows.iter().map(|r| r.eps).collect();
        eps.dedup();
        self.fits = eps
            .into_iter()
            .filter_map(|e| {
                let rows: Vec<&ConvergenceRow> = self.rows.iter().filter(|r| r.eps == e).collect();
                if rows.len() < 2 {
                    return None;
                }
                let h: Vec<f64> = rows.iter().map(|r| 1.0 / r.n_coarse as f64).collect();
                let l1: Vec<f64> = rows.iter().map(|r| r.err_l1).collect();
                let li: Vec<f64> = rows.iter().map(|r| r.err_linf).collect();
                let (s1, r1) = fit_slope(&h, &l1);
                let (si, ri) = fit_slope(&h, &li);
                Some(ConvergenceFit {
                    eps: e,
                    slope_l1: s1,
                    residual_l1: r1,
                    slope_linf: si,
                    residual_linf: ri,
                })
            })
            .collect();
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "eps,n_coarse,n_fine,err_l1,err_linf")?;
        for r in &self.rows {
            writeln!(w, "{:e},{},{},{:.17e},{:.17e}", r.eps, r.n_coarse, r.n_fine, r.err_l1, r.err_linf)?;
        }
        writeln!(w)?;
        writeln!(w, "eps,slope_l1,residual_l1,slope_linf,residual_linf")?;
        for f in &self.fits {
            writeln!(
                w,
                "{:e},{:.6},{:.3e},{:.6},{:.3e}",
                f.eps, f.slope_l1, f.residual_l1, f.slope_linf, f.residual_linf
            )?;
        }
        w.flush()?;
        Ok(())
    }
}
