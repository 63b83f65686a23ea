//! Experiment configuration: a TOML file with a few sections, layered over
//! per-experiment defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::collision::PenaltyConfig;
use crate::error::{Error, Result};
use crate::grid::Boundary;
use crate::stiff_ode::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    LinearOde,
    SmoothAccuracy,
    Sod,
    Mixing,
    PorousMedium,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::LinearOde,
        Experiment::SmoothAccuracy,
        Experiment::Sod,
        Experiment::Mixing,
        Experiment::PorousMedium,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LinearOde => "linear_ode",
            Experiment::SmoothAccuracy => "smooth_accuracy",
            Experiment::Sod => "sod",
            Experiment::Mixing => "mixing",
            Experiment::PorousMedium => "porous_medium",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn is_kinetic(self) -> bool {
        matches!(self, Experiment::SmoothAccuracy | Experiment::Sod | Experiment::Mixing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Spatial cells; several values make a convergence study.
    pub n_x: Vec<usize>,
    pub n_v: usize,
    pub v_max: f64,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Fixed step; overrides `cfl` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Transport Courant number: `dt <= cfl dx / v_max`.
    pub cfl: f64,
    /// Further divide the step (explicit reference runs).
    pub refine: usize,
    pub t_end: f64,
    pub output_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnudsenProfile {
    Constant,
    /// `eps0 + (tanh(1 - 11x) + tanh(1 + 11x)) / 2`.
    Mixing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnudsenConfig {
    pub profile: KnudsenProfile,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionKind {
    Boltzmann,
    Bgk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub collision: CollisionKind,
    pub gamma: f64,
    pub c_gamma: f64,
    pub quadrature_n: usize,
    /// Directory for cached kernel modes; none disables caching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluidReference {
    None,
    Euler,
    NavierStokes,
}

/// Optional macroscopic reference run written next to the kinetic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub fluid: FluidReference,
    pub n_x: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PorousConfig {
    pub m: f64,
    pub rings: usize,
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scheme: Scheme,
    /// Reserved; no experiment draws random numbers.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub knudsen: KnudsenConfig,
    pub penalty: PenaltyConfig,
    pub kernel: KernelConfig,
    pub reference: ReferenceConfig,
    pub porous: PorousConfig,
}

fn every(step: f64, end: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (1..=n).map(|k| k as f64 * step).collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            scheme: Scheme::Imex2,
            seed: 0,
            output_dir: PathBuf::from("out").join(experiment.name()),
            grid: GridConfig {
                n_x: vec![100],
                n_v: 16,
                v_max: 5.0,
                boundary: Boundary::SpecularReflection,
            },
            time: TimeConfig {
                dt: None,
                cfl: 0.9,
                refine: 1,
                t_end: 0.2,
                output_times: vec![0.05, 0.1, 0.15, 0.2],
            },
            knudsen: KnudsenConfig {
                profile: KnudsenProfile::Constant,
                eps: 1e-2,
            },
            penalty: PenaltyConfig::default(),
            kernel: KernelConfig {
                collision: CollisionKind::Boltzmann,
                gamma: 0.0,
                c_gamma: 1.0 / (2.0 * std::f64::consts::PI),
                quadrature_n: 64,
                cache_dir: None,
            },
            reference: ReferenceConfig {
                fluid: FluidReference::None,
                n_x: 1000,
            },
            porous: PorousConfig {
                m: 3.0,
                rings: 12,
                r0: 0.25,
            },
        };
        match experiment {
            Experiment::LinearOde => {
                c.penalty.nu = 2.0;
                c.time.dt = Some(0.3);
                c.time.t_end = 30.0;
                c.time.output_times = Vec::new();
            }
            Experiment::SmoothAccuracy => {
                c.grid.n_x = vec![32, 64, 128];
                c.grid.v_max = 7.0;
                c.knudsen.eps = 1e-5;
                c.time.t_end = 0.25;
                c.time.output_times = every(0.05, 0.25);
            }
            Experiment::Sod => {}
            Experiment::Mixing => {
                c.grid.n_x = vec![200];
                c.grid.v_max = 4.0;
                c.grid.boundary = Boundary::Periodic;
                c.knudsen = KnudsenConfig {
                    profile: KnudsenProfile::Mixing,
                    eps: 1e-3,
                };
                c.time.t_end = 0.75;
                c.time.output_times = vec![0.25, 0.5, 0.75];
            }
            Experiment::PorousMedium => {
                c.scheme = Scheme::Imex1;
                c.grid.n_x = vec![1];
                c.grid.n_v = 64;
                c.grid.v_max = 3.0;
                c.time.dt = Some(0.02);
                c.time.t_end = 4.0;
                c.time.output_times = vec![0.1, 0.4, 0.8, 1.0, 1.2, 4.0];
            }
        }
        c
    }

    /// Parse a TOML document; keys it leaves out keep the preset of its `experiment`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let name = doc
            .get("experiment")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("missing `experiment`".into()))?;
        let experiment = Experiment::parse(name).ok_or_else(|| Error::Config(format!("unknown experiment `{name}`")))?;
        Self::layered(experiment, doc)
    }

    /// Read a file, checking that it describes `expected` when given.
    pub fn load(path: &Path, expected: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text)?;
        if let Some(e) = expected {
            if e != cfg.experiment {
                return Err(Error::Config(format!(
                    "{} configures `{}`, not `{}`",
                    path.display(),
                    cfg.experiment.name(),
                    e.name()
                )));
            }
        }
        Ok(cfg)
    }

    fn layered(experiment: Experiment, overlay: toml::Value) -> Result<Self> {
        let mut base = toml::Value::try_from(Self::preset(experiment)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overlay);
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if self.grid.n_x.is_empty() || self.grid.n_x.iter().any(|&n| n == 0) {
            return bad("grid.n_x must list positive sizes".into());
        }
        if self.grid.n_v == 0 || !pos(self.grid.v_max) {
            return bad("grid.n_v and grid.v_max must be positive".into());
        }
        if !pos(self.time.t_end) {
            return bad(format!("time.t_end must be positive, got {}", self.time.t_end));
        }
        if self.time.dt.is_some_and(|dt| !pos(dt)) || !pos(self.time.cfl) || self.time.refine == 0 {
            return bad("time.dt, time.cfl and time.refine must be positive".into());
        }
        if self
            .time
            .output_times
            .iter()
            .any(|&t| !(0.0..=self.time.t_end * (1.0 + 1e-12)).contains(&t))
        {
            return bad("time.output_times must lie in [0, t_end]".into());
        }
        if !pos(self.knudsen.eps) {
            return bad(format!("knudsen.eps must be positive, got {}", self.knudsen.eps));
        }
        self.penalty.validate()?;
        if self.kernel.quadrature_n < 2 || !pos(self.kernel.c_gamma) {
            return bad("kernel.quadrature_n must be >= 2 and kernel.c_gamma positive".into());
        }
        match self.experiment {
            Experiment::LinearOde => {
                if self.time.dt.is_none() {
                    return bad("linear_ode needs time.dt".into());
                }
            }
            Experiment::PorousMedium => {
                if self.time.dt.is_none() {
                    return bad("porous_medium needs time.dt".into());
                }
                if !(self.porous.m > 1.0) || self.porous.rings == 0 || !pos(self.porous.r0) {
                    return bad("porous.m must exceed 1, porous.rings and porous.r0 be positive".into());
                }
                if self.scheme != Scheme::Imex1 {
                    return bad("porous_medium runs the first-order scheme only".into());
                }
            }
            _ => {
                if self.grid.n_v < 8 || self.grid.n_v % 2 != 0 {
                    return bad(format!("grid.n_v must be even and >= 8, got {}", self.grid.n_v));
                }
                if self.grid.n_x.iter().any(|&n| n < 2) {
                    return bad("kinetic runs need at least 2 cells".into());
                }
                if self.reference.fluid != FluidReference::None && self.reference.n_x < 2 {
                    return bad("reference.n_x must be at least 2".into());
                }
            }
        }
        Ok(())
    }
}

/// Recursive table merge; `overlay` wins.
fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Smallest time quantum `q` such that every output time and `t_end` is a multiple of `q`.
pub fn output_quantum(times: &[f64], t_end: f64) -> f64 {
    let all: Vec<f64> = times.iter().copied().chain(std::iter::once(t_end)).filter(|t| *t > 0.0).collect();
    for digits in 0..=9 {
        let scale = 10f64.powi(digits);
        let ints: Option<Vec<u64>> = all
            .iter()
            .map(|t| {
                let r = (t * scale).round();
                ((t * scale - r).abs() <= 1e-9 * r.max(1.0)).then_some(r as u64)
            })
            .collect();
        if let Some(ints) = ints {
            let g = ints.iter().fold(0u64, |a, &b| gcd(a, b));
            return g as f64 / scale;
        }
    }
    t_end
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
