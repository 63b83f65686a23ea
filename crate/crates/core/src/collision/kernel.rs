//! Kernel weights of the Fourier–Galerkin Boltzmann operator.
//!
//! With the distribution periodized on `[-T, T]^2` (`T = v_max`) and relative
//! velocities truncated to `|q| <= 2R`, the gain weight of the mode pair `(l, m)` is
//!
//! ```text
//! B(l, m) = C (2 pi)^2 int_0^{2R} r^(gamma+1) J0(pi r |l+m| / 2T) J0(pi r |l-m| / 2T) dr
//! ```
//!
//! and the loss weight of mode `m` is `B(m, m)`. `R = 2T / (3 + sqrt 2)` is the
//! classical anti-aliasing radius for two-dimensional velocities.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::grid::VelocityGrid;

/// Version tag of the binary cache layout.
pub const KERNEL_CACHE_VERSION: u32 = 1;
const CACHE_MAGIC: &[u8; 8] = b"KAPKMODE";

/// Largest change tolerated when the radial quadrature is refined, relative to `B(0, 0)`.
const DOUBLING_TOLERANCE: f64 = 1e-8;

/// Everything the kernel weights depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelKey {
    pub n_v: usize,
    pub v_max: f64,
    pub gamma: f64,
    pub c_gamma: f64,
    pub quadrature_n: usize,
}

/// Precomputed weights `B(l, m) - B(m, m)` over the non-Nyquist modes `|l_i|, |m_i| <= n_v/2 - 1`.
#[derive(Debug, Clone)]
pub struct KernelModes {
    key: KernelKey,
    radius: f64,
    /// Distinct gain weights keyed by the sorted pair `(|l+m|^2, |l-m|^2)`.
    table: Vec<((u32, u32), f64)>,
    kernel: Vec<f64>,
}

/// Truncation radius `R` for the periodization half-width `v_max`.
pub fn truncation_radius(v_max: f64) -> f64 {
    2.0 * v_max / (3.0 + 2f64.sqrt())
}

#[inline]
fn pair_key(s: u32, d: u32) -> (u32, u32) {
    if s <= d {
        (s, d)
    } else {
        (d, s)
    }
}

impl KernelModes {
    /// Compute the weights by composite Gauss–Legendre quadrature in the radial variable,
    /// with `quadrature_n` points per panel. The result is checked against a run with
    /// twice as many points.
    pub fn precompute(g: &VelocityGrid, gamma: f64, c_gamma: f64, quadrature_n: usize) -> Result<Self> {
        let key = KernelKey {
            n_v: g.n_v(),
            v_max: g.v_max(),
            gamma,
            c_gamma,
            quadrature_n,
        };
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("kernel exponent gamma must lie in [0, 1], got {gamma}")));
        }
        if !(c_gamma > 0.0 && c_gamma.is_finite()) {
            return Err(Error::Config(format!("kernel constant must be positive, got {c_gamma}")));
        }
        if quadrature_n < 2 {
            return Err(Error::Config("kernel quadrature needs at least 2 points".into()));
        }

        let h = (g.n_v() / 2 - 1) as i64;
        let mut keys: Vec<(u32, u32)> = Vec::new();
        {
            let mut seen = std::collections::HashSet::new();
            for l1 in -h..=h {
                for m1 in -h..=h {
                    let (s1, d1) = ((l1 + m1).pow(2), (l1 - m1).pow(2));
                    for l2 in -h..=h {
                        for m2 in -h..=h {
                            let s = (s1 + (l2 + m2).pow(2)) as u32;
                            let d = (d1 + (l2 - m2).pow(2)) as u32;
                            if seen.insert(pair_key(s, d)) {
                                keys.push(pair_key(s, d));
                            }
                        }
                    }
                }
            }
        }
        keys.sort_unstable();

        let coarse = radial_weights(&keys, &key, quadrature_n);
        let fine = radial_weights(&keys, &key, 2 * quadrature_n);
        let scale = c_gamma * (2.0 * PI).powi(2) * (2.0 * truncation_radius(g.v_max())).powf(gamma + 2.0)
            / (gamma + 2.0);
        let max_change = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        if max_change > DOUBLING_TOLERANCE {
            return Err(Error::QuadratureUnconverged { max_change });
        }
        let table: Vec<_> = keys.into_iter().zip(coarse).collect();
        Ok(Self::assemble(key, table))
    }

    fn assemble(key: KernelKey, table: Vec<((u32, u32), f64)>) -> Self {
        let lookup: HashMap<(u32, u32), f64> = table.iter().copied().collect();
        let h = (key.n_v / 2 - 1) as i64;
        let m = (2 * h + 1) as usize;
        let modes: Vec<(i64, i64)> = (-h..=h).flat_map(|a| (-h..=h).map(move |b| (a, b))).collect();
        let mut kernel = vec![0.0; m * m * m * m];
        for (li, &(l1, l2)) in modes.iter().enumerate() {
            for (mi, &(m1, m2)) in modes.iter().enumerate() {
                let s = ((l1 + m1).pow(2) + (l2 + m2).pow(2)) as u32;
                let d = ((l1 - m1).pow(2) + (l2 - m2).pow(2)) as u32;
                let gain = lookup[&pair_key(s, d)];
                let loss = lookup[&pair_key(0, (4 * (m1 * m1 + m2 * m2)) as u32)];
                kernel[li * m * m + mi] = gain - loss;
            }
        }
        Self {
            radius: truncation_radius(key.v_max),
            key,
            table,
            kernel,
        }
    }

    pub fn key(&self) -> &KernelKey {
        &self.key
    }

    pub fn n_v(&self) -> usize {
        self.key.n_v
    }

    /// Truncation radius `R` of the relative velocity, `|q| <= 2R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Largest retained mode index per dimension, `n_v/2 - 1`.
    pub fn half(&self) -> usize {
        self.key.n_v / 2 - 1
    }

    /// Retained modes per dimension, `n_v - 1`.
    pub fn modes_per_dim(&self) -> usize {
        2 * self.half() + 1
    }

    /// Gain weight `B(l, m)`.
    pub fn b_hat(&self, l: [i64; 2], m: [i64; 2]) -> f64 {
        let s = ((l[0] + m[0]).pow(2) + (l[1] + m[1]).pow(2)) as u32;
        let d = ((l[0] - m[0]).pow(2) + (l[1] - m[1]).pow(2)) as u32;
        let k = pair_key(s, d);
        match self.table.binary_search_by(|(kk, _)| kk.cmp(&k)) {
            Ok(i) => self.table[i].1,
            Err(_) => panic!("mode pair {l:?}, {m:?} outside the retained range"),
        }
    }

    /// Combined tensor `B(l, m) - B(m, m)`, indexed `[l_flat * M^2 + m_flat]` with
    /// `x_flat = (x_1 + h) M + (x_2 + h)`.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn matches(&self, g: &VelocityGrid) -> bool {
        self.key.n_v == g.n_v() && self.key.v_max == g.v_max()
    }

    /// Write the weights to a versioned little-endian binary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&KERNEL_CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.key.n_v as u64).to_le_bytes())?;
        w.write_all(&self.key.v_max.to_le_bytes())?;
        w.write_all(&self.key.gamma.to_le_bytes())?;
        w.write_all(&self.key.c_gamma.to_le_bytes())?;
        w.write_all(&(self.key.quadrature_n as u64).to_le_bytes())?;
        w.write_all(&(self.table.len() as u64).to_le_bytes())?;
        for ((s, d), v) in &self.table {
            w.write_all(&s.to_le_bytes())?;
            w.write_all(&d.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a cache file, requiring its key to equal `expected` exactly.
    pub fn load(path: &Path, expected: &KernelKey) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache("not a kernel-mode cache file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != KERNEL_CACHE_VERSION {
            return Err(Error::Cache(format!(
                "cache version {version}, expected {KERNEL_CACHE_VERSION}"
            )));
        }
        let key = KernelKey {
            n_v: read_u64(&mut r)? as usize,
            v_max: read_f64(&mut r)?,
            gamma: read_f64(&mut r)?,
            c_gamma: read_f64(&mut r)?,
            quadrature_n: read_u64(&mut r)? as usize,
        };
        let same = key.n_v == expected.n_v
            && key.v_max.to_bits() == expected.v_max.to_bits()
            && key.gamma.to_bits() == expected.gamma.to_bits()
            && key.c_gamma.to_bits() == expected.c_gamma.to_bits()
            && key.quadrature_n == expected.quadrature_n;
        if !same {
            return Err(Error::Cache(format!("cache key {key:?} does not match {expected:?}")));
        }
        if key.n_v < 8 || key.n_v % 2 != 0 {
            return Err(Error::Cache(format!("invalid n_v {} in cache", key.n_v)));
        }
        let count = read_u64(&mut r)? as usize;
        let mut table = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let s = read_u32(&mut r)?;
            let d = read_u32(&mut r)?;
            table.push(((s, d), read_f64(&mut r)?));
        }
        if !table.windows(2).all(|p| p[0].0 < p[1].0) {
            return Err(Error::Cache("cache table is not sorted".into()));
        }
        // Every pair the tensor needs must be present.
        let h = (key.n_v / 2 - 1) as u32;
        let need_max = 8 * h * h;
        if table.iter().map(|t| t.0 .1).max() != Some(need_max) {
            return Err(Error::Cache("cache table is truncated".into()));
        }
        Ok(Self::assemble(key, table))
    }

    /// Load from `path` when a matching cache exists, otherwise compute and write it.
    pub fn load_or_compute(
        path: &Path,
        g: &VelocityGrid,
        gamma: f64,
        c_gamma: f64,
        quadrature_n: usize,
    ) -> Result<Self> {
        let key = KernelKey {
            n_v: g.n_v(),
            v_max: g.v_max(),
            gamma,
            c_gamma,
            quadrature_n,
        };
        if path.exists() {
            if let Ok(km) = Self::load(path, &key) {
                return Ok(km);
            }
        }
        let km = Self::precompute(g, gamma, c_gamma, quadrature_n)?;
        km.save(path)?;
        Ok(km)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Radial integrals for every key, `n` Gauss points per panel.
fn radial_weights(keys: &[(u32, u32)], key: &KernelKey, n: usize) -> Vec<f64> {
    let t = key.v_max;
    let top = 2.0 * truncation_radius(t);
    let max_sq = keys.iter().map(|k| k.1).max().unwrap_or(0) as f64;
    let max_freq = PI * max_sq.sqrt() / (2.0 * t);
    // The integrand oscillates at most at frequency 2 * max_freq; four periods per panel.
    let periods = 2.0 * max_freq * top / (2.0 * PI);
    let panels = (periods / 4.0).ceil() as usize + 1;
    let (x, w) = gauss_legendre(n);
    let width = top / panels as f64;
    let mut nodes = Vec::with_capacity(panels * n);
    let mut weights = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let a = p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let r = a + 0.5 * width * (xi + 1.0);
            nodes.push(r);
            weights.push(0.5 * width * wi * r.powf(key.gamma + 1.0));
        }
    }

    let mut norms: Vec<u32> = keys.iter().flat_map(|k| [k.0, k.1]).collect();
    norms.sort_unstable();
    norms.dedup();
    let slot: HashMap<u32, usize> = norms.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let q = nodes.len();
    let mut j0 = vec![0.0; norms.len() * q];
    for (i, &s) in norms.iter().enumerate() {
        let a = PI * (s as f64).sqrt() / (2.0 * t);
        for (k, r) in nodes.iter().enumerate() {
            j0[i * q + k] = libm::j0(a * r);
        }
    }
    let c = key.c_gamma * (2.0 * PI).powi(2);
    keys.iter()
        .map(|&(s, d)| {
            let ja = &j0[slot[&s] * q..][..q];
            let jb = &j0[slot[&d] * q..][..q];
            let sum: f64 = weights
                .iter()
                .zip(ja)
                .zip(jb)
                .map(|((w, a), b)| w * a * b)
                .sum();
            c * sum
        })
        .collect()
}

/// `int_0^p r J0(a r) J0(b r) dr` in closed form (Lommel's integral).
pub fn lommel_integral(a: f64, b: f64, p: f64) -> f64 {
    if a == b {
        let z = a * p;
        return 0.5 * p * p * (libm::j0(z).powi(2) + libm::j1(z).powi(2));
    }
    let (ja0, ja1) = (libm::j0(a * p), libm::j1(a * p));
    let (jb0, jb1) = (libm::j0(b * p), libm::j1(b * p));
    p * (a * ja1 * jb0 - b * ja0 * jb1) / (a * a - b * b)
}

/// Gain weight for Maxwell molecules (`gamma = 0`) from [`lommel_integral`].
pub fn maxwell_weight_exact(l: [i64; 2], m: [i64; 2], v_max: f64, c_gamma: f64) -> f64 {
    let s = (((l[0] + m[0]).pow(2) + (l[1] + m[1]).pow(2)) as f64).sqrt();
    let d = (((l[0] - m[0]).pow(2) + (l[1] - m[1]).pow(2)) as f64).sqrt();
    let k = PI / (2.0 * v_max);
    c_gamma * (2.0 * PI).powi(2) * lommel_integral(k * s, k * d, 2.0 * truncation_radius(v_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn km(n_v: usize, gamma: f64) -> KernelModes {
        let g = VelocityGrid::new(n_v, 7.0).unwrap();
        KernelModes::precompute(&g, gamma, 1.0 / (2.0 * PI), 64).unwrap()
    }

    #[test]
    fn lommel_matches_brute_force() {
        for (a, b) in [(0.0, 0.0), (0.0, 1.3), (2.1, 0.4), (1.7, 1.7), (5.0, 4.999)] {
            let p = 3.0;
            let n = 200_000;
            let dr = p / n as f64;
            let brute: f64 = (0..n)
                .map(|i| {
                    let r = (i as f64 + 0.5) * dr;
                    r * libm::j0(a * r) * libm::j0(b * r) * dr
                })
                .sum();
            assert!((lommel_integral(a, b, p) - brute).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn maxwell_weights_match_closed_form() {
        let k = km(16, 0.0);
        let h = k.half() as i64;
        let c = 1.0 / (2.0 * PI);
        let mut worst: f64 = 0.0;
        for l1 in -h..=h {
            for l2 in [-h, -1, 0, 3, h] {
                for m1 in [-h, -2, 0, 1, h] {
                    for m2 in -h..=h {
                        let q = k.b_hat([l1, l2], [m1, m2]);
                        let e = maxwell_weight_exact([l1, l2], [m1, m2], 7.0, c);
                        worst = worst.max((q - e).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-11 * k.b_hat([0, 0], [0, 0]), "{worst}");
    }

    #[test]
    fn zero_mode_weight_is_total_cross_section() {
        // B(0,0) = C (2 pi)^2 (2R)^2 / 2 for Maxwell molecules.
        let k = km(8, 0.0);
        let r2 = 2.0 * k.radius();
        let expected = (1.0 / (2.0 * PI)) * (2.0 * PI).powi(2) * r2 * r2 / 2.0;
        assert!((k.b_hat([0, 0], [0, 0]) - expected).abs() < 1e-12 * expected);
        assert!((expected - PI * r2 * r2).abs() < 1e-12 * expected);
    }

    #[test]
    fn weights_are_symmetric() {
        for gamma in [0.0, 0.5, 1.0] {
            let k = km(8, gamma);
            let h = k.half() as i64;
            for l1 in -h..=h {
                for l2 in -h..=h {
                    for m1 in -h..=h {
                        for m2 in -h..=h {
                            let a = k.b_hat([l1, l2], [m1, m2]);
                            assert!(a.is_finite());
                            assert_eq!(a, k.b_hat([m1, m2], [l1, l2]));
                            assert_eq!(a, k.b_hat([-l1, -l2], [-m1, -m2]));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mass_cancellation_is_bitwise() {
        let k = km(16, 0.0);
        let m = k.modes_per_dim();
        let h = k.half() as i64;
        let flat = |a: i64, b: i64| ((a + h) as usize) * m + (b + h) as usize;
        for l1 in -h..=h {
            for l2 in -h..=h {
                let li = flat(l1, l2);
                let mi = flat(-l1, -l2);
                assert_eq!(k.kernel()[li * m * m + mi], 0.0);
            }
        }
    }

    #[test]
    fn hard_kernels_converge_under_doubling() {
        for gamma in [0.25, 1.0] {
            let g = VelocityGrid::new(16, 7.0).unwrap();
            assert!(KernelModes::precompute(&g, gamma, 1.0, 64).is_ok());
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = VelocityGrid::new(8, 7.0).unwrap();
        assert!(KernelModes::precompute(&g, 1.5, 1.0, 64).is_err());
        assert!(KernelModes::precompute(&g, 0.0, -1.0, 64).is_err());
        assert!(KernelModes::precompute(&g, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn too_few_points_are_reported() {
        let g = VelocityGrid::new(32, 7.0).unwrap();
        assert!(matches!(
            KernelModes::precompute(&g, 0.0, 1.0, 3),
            Err(Error::QuadratureUnconverged { .. })
        ));
    }

    #[test]
    fn cache_round_trip_is_bit_identical() {
        let k = km(16, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        k.save(&path).unwrap();
        let back = KernelModes::load(&path, k.key()).unwrap();
        assert_eq!(back.key(), k.key());
        assert_eq!(back.kernel().len(), k.kernel().len());
        assert!(back.kernel().iter().zip(k.kernel()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let mut other = *k.key();
        other.quadrature_n = 32;
        assert!(matches!(KernelModes::load(&path, &other), Err(Error::Cache(_))));

        std::fs::write(&path, b"garbage").unwrap();
        assert!(KernelModes::load(&path, k.key()).is_err());
        let g = VelocityGrid::new(16, 7.0).unwrap();
        let re = KernelModes::load_or_compute(&path, &g, 0.0, 1.0 / (2.0 * PI), 64).unwrap();
        assert!(re.kernel().iter().zip(k.kernel()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(KernelModes::load(&path, k.key()).is_ok());
    }
}
