//! Field-by-field distances between two sets of diagnostics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::convergence::restrict;
use super::io::read_snapshot;
use crate::ap_solver::Snapshot;
use crate::error::{Error, Result};

/// Relative distances of one field at one output time; `b` is the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDistance {
    pub t: f64,
    pub field: String,
    /// `||a - b||_1 / ||b||_1`.
    pub l1: f64,
    /// `max |a - b| / max |b|`.
    pub linf: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<FieldDistance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    Linf,
}

impl Norm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l1" | "L1" => Some(Norm::L1),
            "linf" | "Linf" | "inf" => Some(Norm::Linf),
            _ => None,
        }
    }
}

impl CompareReport {
    /// Largest distance in `norm`, optionally restricted to one field.
    pub fn max(&self, norm: Norm, field: Option<&str>) -> f64 {
        self.rows
            .iter()
            .filter(|r| field.is_none_or(|f| r.field == f))
            .map(|r| match norm {
                Norm::L1 => r.l1,
                Norm::Linf => r.linf,
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "t,field,rel_l1,rel_linf")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:.6e},{:.6e}", r.t, r.field, r.l1, r.linf)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bring two cell-average arrays to the coarser mesh; sizes must differ by an integer factor.
fn common_mesh(a: Vec<f64>, b: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (na, nb) = (a.len(), b.len());
    let mismatch = || Error::SchemaMismatch(format!("meshes of {na} and {nb} cells are not nested"));
    if na == 0 || nb == 0 {
        return Err(mismatch());
    }
    if na >= nb {
        if na % nb != 0 {
            return Err(mismatch());
        }
        Ok((restrict(&a, na, na / nb).map_err(|_| mismatch())?, b))
    } else {
        if nb % na != 0 {
            return Err(mismatch());
        }
        Ok((a, restrict(&b, nb, nb / na).map_err(|_| mismatch())?))
    }
}

fn distance(t: f64, field: &str, a: &[f64], b: &[f64]) -> FieldDistance {
    let mut d1 = 0.0;
    let mut n1 = 0.0;
    let mut di: f64 = 0.0;
    let mut ni: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        d1 += (x - y).abs();
        n1 += y.abs();
        di = di.max((x - y).abs());
        ni = ni.max(y.abs());
    }
    let rel = |d: f64, n: f64| if n > 0.0 { d / n } else if d == 0.0 { 0.0 } else { f64::INFINITY };
    FieldDistance {
        t,
        field: field.to_owned(),
        l1: rel(d1, n1),
        linf: rel(di, ni),
    }
}

/// Compare snapshots taken at the same times. Meshes may differ by an integer
/// factor, in which case the finer one is averaged onto the coarser.
pub fn compare_snapshots(a: &[Snapshot], b: &[Snapshot], fields: &[&str]) -> Result<CompareReport> {
    let mut rows = Vec::new();
    for sa in a {
        let Some(sb) = b.iter().find(|s| (s.t - sa.t).abs() <= 1e-9 * sa.t.abs().max(1.0)) else {
            continue;
        };
        for &name in fields {
            let unknown = || Error::SchemaMismatch(format!("unknown field `{name}`"));
            let (fa, fb) = common_mesh(sa.field(name).ok_or_else(unknown)?, sb.field(name).ok_or_else(unknown)?)?;
            rows.push(distance(sa.t, name, &fa, &fb));
        }
    }
    if rows.is_empty() {
        return Err(Error::SchemaMismatch("no common output times".into()));
    }
    Ok(CompareReport { rows })
}

/// Output times of the `diag_t*.csv` files in `dir`, keyed by file name.
pub fn list_diagnostics(dir: &Path) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::SchemaMismatch(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(t) = name
            .strip_prefix("diag_t")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<f64>().ok())
        {
            out.insert(name, t);
        }
    }
    Ok(out)
}

/// Compare the diagnostics of two run directories at every shared output time.
pub fn compare_dirs(a: &Path, b: &Path, fields: &[&str]) -> Result<CompareReport> {
    let (la, lb) = (list_diagnostics(a)?, list_diagnostics(b)?);
    let mut sa = Vec::new();
    let mut sb = Vec::new();
    for (name, &t) in &la {
        if lb.contains_key(name) {
            sa.push(read_snapshot(&a.join(name), t)?);
            sb.push(read_snapshot(&b.join(name), t)?);
        }
    }
    if sa.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "{} and {} share no diagnostics files",
            a.display(),
            b.display()
        )));
    }
    compare_snapshots(&sa, &sb, fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap_solver::CellDiagnostics;

    fn snap(t: f64, n: usize, rho: impl Fn(usize) -> f64) -> Snapshot {
        Snapshot {
            t,
            cells: (0..n)
                .map(|i| CellDiagnostics {
                    x: (i as f64 + 0.5) / n as f64,
                    rho: rho(i),
                    ux: 0.5,
                    uy: 0.0,
                    temperature: 1.0,
                    heat_flux_x: 0.0,
                    dist_maxwellian: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = vec![snap(0.1, 8, |i| 1.0 + i as f64)];
        let r = compare_snapshots(&a, &a, &["rho", "u", "T", "u_y"]).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.max(Norm::L1, None), 0.0);
        assert_eq!(r.max(Norm::Linf, None), 0.0);
    }

    #[test]
    fn finer_mesh_is_averaged() {
        let coarse = vec![snap(0.1, 4, |i| 1.0 + i as f64)];
        // Zero-mean wiggles inside each group of five fine cells.
        let wiggle = [0.1, -0.1, 0.2, -0.2, 0.0];
        let fine = vec![snap(0.1, 20, |i| 1.0 + (i / 5) as f64 + wiggle[i % 5])];
        let r = compare_snapshots(&fine, &coarse, &["rho"]).unwrap();
        assert!(r.max(Norm::L1, None) < 1e-15, "{r:?}");
        // A 10% bias in every cell is a 10% relative distance.
        let biased = vec![snap(0.1, 4, |i| 1.1 * (1.0 + i as f64))];
        let r = compare_snapshots(&biased, &coarse, &["rho"]).unwrap();
        assert!((r.rows[0].l1 - 0.1).abs() < 1e-12 && (r.rows[0].linf - 0.1).abs() < 1e-12);
    }

    #[test]
    fn incompatible_inputs_are_schema_errors() {
        let a = vec![snap(0.1, 4, |_| 1.0)];
        let b = vec![snap(0.1, 6, |_| 1.0)];
        assert!(matches!(compare_snapshots(&a, &b, &["rho"]), Err(Error::SchemaMismatch(_))));
        assert!(matches!(compare_snapshots(&a, &a, &["pressure"]), Err(Error::SchemaMismatch(_))));
        let c = vec![snap(0.2, 4, |_| 1.0)];
        assert!(matches!(compare_snapshots(&a, &c, &["rho"]), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn directories_compare_on_shared_files() {
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for (d, k) in [(&da, 1.0), (&db, 1.02)] {
            for t in [0.1, 0.2] {
                snap(t, 10, |i| k * (1.0 + i as f64))
                    .write_csv(&d.path().join(super::super::io::diagnostics_name(t)))
                    .unwrap();
            }
        }
        snap(0.3, 10, |_| 1.0).write_csv(&da.path().join("diag_t0.300000.csv")).unwrap();
        let r = compare_dirs(da.path(), db.path(), &["rho", "T"]).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!((r.max(Norm::L1, Some("rho")) - 0.02 / 1.02).abs() < 1e-12);
        assert_eq!(r.max(Norm::L1, Some("T")), 0.0);
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(compare_dirs(da.path(), empty.path(), &["rho"]), Err(Error::SchemaMismatch(_))));
    }
}
