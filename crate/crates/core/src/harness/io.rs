//! On-disk artifacts: distribution snapshots, diagnostics tables and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::ap_solver::{CellDiagnostics, Snapshot, DIAGNOSTICS_HEADER};
use crate::collision::KernelKey;
use crate::error::{Error, Result};
use crate::grid::{Distribution, VelocityGrid};

const DISTRIBUTION_MAGIC: &str = "kap-distribution v1";

/// Tag used in per-time file names, e.g. `0.150000`.
pub fn time_tag(t: f64) -> String {
    format!("{t:.6}")
}

pub fn diagnostics_name(t: f64) -> String {
    format!("diag_t{}.csv", time_tag(t))
}

pub fn distribution_name(t: f64) -> String {
    format!("f_t{}.bin", time_tag(t))
}

/// Write `f` as a one-line text header followed by little-endian `f64` values,
/// cell-major with the velocity index fastest.
pub fn write_distribution(path: &Path, f: &Distribution, g: &VelocityGrid, t: f64) -> Result<()> {
    f.check_grid(g)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{DISTRIBUTION_MAGIC} n_x={} n_v={} v_max={:e} t={:e}",
        f.n_x(),
        g.n_v(),
        g.v_max(),
        t
    )?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_distribution(path: &Path) -> Result<(Distribution, VelocityGrid, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let bad = || Error::SchemaMismatch(format!("{} is not a distribution file", path.display()));
    let rest = header.trim_end().strip_prefix(DISTRIBUTION_MAGIC).ok_or_else(bad)?;
    let fields: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let get = |k: &str| fields.get(k).copied().ok_or_else(bad);
    let n_x: usize = get("n_x")?.parse().map_err(|_| bad())?;
    let n_v: usize = get("n_v")?.parse().map_err(|_| bad())?;
    let v_max: f64 = get("v_max")?.parse().map_err(|_| bad())?;
    let t: f64 = get("t")?.parse().map_err(|_| bad())?;
    let g = VelocityGrid::new(n_v, v_max)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n_x * g.len() * 8 {
        return Err(Error::SchemaMismatch(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            n_x * g.len() * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((Distribution::from_values(n_x, &g, values)?, g, t))
}

/// Read a diagnostics table written by [`Snapshot::write_csv`].
pub fn read_snapshot(path: &Path, t: f64) -> Result<Snapshot> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != DIAGNOSTICS_HEADER {
        return Err(Error::SchemaMismatch(format!(
            "{} has columns `{}`, expected `{DIAGNOSTICS_HEADER}`",
            path.display(),
            header.join(",")
        )));
    }
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))?;
        cells.push(CellDiagnostics {
            x: v[0],
            rho: v[1],
            ux: v[2],
            uy: v[3],
            temperature: v[4],
            heat_flux_x: v[5],
            dist_maxwellian: v[6],
        });
    }
    Ok(Snapshot { t, cells })
}

/// One solver run inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Subdirectory holding this run's files (empty for the output root).
    pub dir: String,
    pub n_x: usize,
    pub dt: f64,
    pub steps: usize,
    pub metrics: BTreeMap<String, f64>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub kernel_key: Option<KernelKey>,
    pub runs: Vec<RunRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_NAME), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        Ok(m)
    }
}
