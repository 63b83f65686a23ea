//! Experiment harness: initial data for the named experiments, run drivers
//! that write diagnostics and a manifest, self-convergence studies and
//! run-to-run comparison.

pub mod compare;
pub mod config;
pub mod convergence;
pub mod io;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::ap_solver::{run_kinetic, CollisionModel, KineticRun, KineticSolver, KnudsenField, RunSpec, Snapshot};
use crate::collision::{KernelKey, KernelModes, SpectralCollision};
use crate::error::{Error, Result};
use crate::fokker_planck::{ring_initial, run_porous, write_porous_csv, PorousRun};
use crate::grid::{Distribution, MacroState, Moments, SpatialMesh, VelocityGrid};
use crate::macro_ref::{run_fluid, MacroField};
use crate::stiff_ode::{run_linear_test, Trajectory};

pub use compare::{compare_dirs, compare_snapshots, CompareReport, Norm};
pub use config::{
    output_quantum, CollisionKind, Experiment, ExperimentConfig, FluidReference, KnudsenProfile,
};
pub use convergence::{fit_slope, restrict, self_convergence, ConvergenceReport, ConvergenceRow};
pub use io::{Manifest, RunRecord, MANIFEST_NAME};

/// Spatial domain of each kinetic experiment.
pub fn domain(experiment: Experiment) -> (f64, f64) {
    match experiment {
        Experiment::SmoothAccuracy => (-1.0, 1.0),
        Experiment::Mixing => (-0.5, 0.5),
        _ => (0.0, 1.0),
    }
}

/// Left and right Sod states `(rho, u, T)`.
pub const SOD_LEFT: (f64, f64, f64) = (1.0, 0.0, 1.0);
pub const SOD_RIGHT: (f64, f64, f64) = (0.125, 0.0, 0.25);

/// Macroscopic initial state `(rho, [u_x, u_y], T)` at `x`; `None` for the
/// mixing experiment, whose datum is not an equilibrium.
pub fn initial_moments(experiment: Experiment, x: f64) -> Option<(f64, [f64; 2], f64)> {
    match experiment {
        Experiment::SmoothAccuracy => Some(((11.0 - 9.0 * x.tanh()) / 10.0, [0.0, 0.0], (3.0 - x.tanh()) / 4.0)),
        Experiment::Sod => {
            let (r, u, t) = if x <= 0.5 { SOD_LEFT } else { SOD_RIGHT };
            Some((r, [u, 0.0], t))
        }
        _ => None,
    }
}

/// Two counter-streaming beams `rho0/2 [exp(-|v - u0|^2/T0) + exp(-|v + u0|^2/T0)]`.
pub fn mixing_initial(mesh: &SpatialMesh, g: &VelocityGrid) -> Distribution {
    let mut f = Distribution::zeros(mesh.n_x(), g);
    let u0 = [0.75, -0.75];
    for i in 0..mesh.n_x() {
        let x = mesh.center(i);
        let rho = (2.0 + (2.0 * PI * x).sin()) / 2.0;
        let t = (5.0 + 2.0 * (2.0 * PI * x).cos()) / 20.0;
        for (k, out) in f.cell_mut(i).iter_mut().enumerate() {
            let v = g.node(k);
            let a = (v[0] - u0[0]).powi(2) + (v[1] - u0[1]).powi(2);
            let b = (v[0] + u0[0]).powi(2) + (v[1] + u0[1]).powi(2);
            *out = 0.5 * rho * ((-a / t).exp() + (-b / t).exp());
        }
    }
    f
}

/// Step for a kinetic run on `n_x` cells: the largest step within the
/// transport CFL that divides every output time, then divided by `refine`.
pub fn kinetic_dt(cfg: &ExperimentConfig, n_x: usize) -> f64 {
    let base = match cfg.time.dt {
        Some(dt) => dt,
        None => {
            let (a, b) = domain(cfg.experiment);
            let limit = cfg.time.cfl * (b - a) / n_x as f64 / cfg.grid.v_max;
            let q = output_quantum(&cfg.time.output_times, cfg.time.t_end);
            q / (q / limit * (1.0 - 1e-12)).ceil()
        }
    };
    base / cfg.time.refine as f64
}

/// Kernel file name inside a cache directory.
pub fn kernel_cache_path(dir: &Path, key: &KernelKey) -> PathBuf {
    dir.join(format!(
        "kernel_nv{}_vmax{}_gamma{}_c{:.12e}_q{}.bin",
        key.n_v, key.v_max, key.gamma, key.c_gamma, key.quadrature_n
    ))
}

/// Kernel modes for the configured lattice, read from or written to the cache when one is configured.
pub fn kernel_modes(cfg: &ExperimentConfig, g: &VelocityGrid) -> Result<Arc<KernelModes>> {
    let k = &cfg.kernel;
    let km = match &k.cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let key = KernelKey {
                n_v: g.n_v(),
                v_max: g.v_max(),
                gamma: k.gamma,
                c_gamma: k.c_gamma,
                quadrature_n: k.quadrature_n,
            };
            KernelModes::load_or_compute(&kernel_cache_path(dir, &key), g, k.gamma, k.c_gamma, k.quadrature_n)?
        }
        None => KernelModes::precompute(g, k.gamma, k.c_gamma, k.quadrature_n)?,
    };
    Ok(Arc::new(km))
}

/// A kinetic problem ready to run.
#[derive(Debug, Clone)]
pub struct KineticSetup {
    pub solver: KineticSolver,
    pub f0: Distribution,
    pub dt: f64,
}

/// Build solver and initial datum on `n_x` cells. `kernel` is required for the Boltzmann operator.
pub fn kinetic_setup(cfg: &ExperimentConfig, n_x: usize, kernel: Option<&Arc<KernelModes>>) -> Result<KineticSetup> {
    if !cfg.experiment.is_kinetic() {
        return Err(Error::Config(format!("`{}` is not a kinetic experiment", cfg.experiment.name())));
    }
    let (a, b) = domain(cfg.experiment);
    let mesh = SpatialMesh::new(n_x, a, b, cfg.grid.boundary)?;
    let g = VelocityGrid::new(cfg.grid.n_v, cfg.grid.v_max)?;
    let knudsen = match cfg.knudsen.profile {
        KnudsenProfile::Constant => KnudsenField::constant(n_x, cfg.knudsen.eps)?,
        KnudsenProfile::Mixing => KnudsenField::mixing(&mesh, cfg.knudsen.eps)?,
    };
    let collision = match cfg.kernel.collision {
        CollisionKind::Boltzmann => {
            let km = kernel.ok_or_else(|| Error::Config("the Boltzmann operator needs kernel modes".into()))?;
            CollisionModel::Boltzmann(SpectralCollision::new(Arc::clone(km)))
        }
        CollisionKind::Bgk => CollisionModel::Bgk {
            lambda0: cfg.penalty.lambda0,
        },
    };
    let solver = KineticSolver::new(mesh.clone(), g.clone(), knudsen, cfg.penalty, collision)?;
    let f0 = match cfg.experiment {
        Experiment::Mixing => mixing_initial(&mesh, &g),
        e => {
            let cells = (0..n_x)
                .map(|i| {
                    let (rho, u, t) = initial_moments(e, mesh.center(i)).expect("equilibrium datum");
                    Moments::from_primitive(rho, u, t)
                })
                .collect();
            solver.initial_equilibrium(&MacroState { cells })?
        }
    };
    Ok(KineticSetup {
        solver,
        f0,
        dt: kinetic_dt(cfg, n_x),
    })
}

impl KineticSetup {
    pub fn run(&self, cfg: &ExperimentConfig, keep_states: bool) -> Result<KineticRun> {
        let spec = RunSpec {
            scheme: cfg.scheme,
            dt: self.dt,
            t_end: cfg.time.t_end,
            output_times: cfg.time.output_times.clone(),
            track_ap: true,
            keep_states,
        };
        run_kinetic(&self.solver, self.f0.clone(), &spec)
    }
}

/// Macroscopic reference on `reference.n_x` cells; `None` when not configured.
pub fn fluid_reference(cfg: &ExperimentConfig) -> Result<Option<Vec<Snapshot>>> {
    let eps = match cfg.reference.fluid {
        FluidReference::None => return Ok(None),
        FluidReference::Euler => 0.0,
        FluidReference::NavierStokes => {
            if cfg.knudsen.profile != KnudsenProfile::Constant {
                return Err(Error::Config("the Navier–Stokes reference needs a constant Knudsen number".into()));
            }
            cfg.knudsen.eps
        }
    };
    let (a, b) = domain(cfg.experiment);
    let mesh = SpatialMesh::new(cfg.reference.n_x, a, b, cfg.grid.boundary)?;
    let e = cfg.experiment;
    if initial_moments(e, 0.0).is_none() {
        return Err(Error::Config(format!("`{}` has no macroscopic initial state", e.name())));
    }
    let field = MacroField::from_primitive(mesh, cfg.grid.boundary.into(), |x| {
        initial_moments(e, x).expect("checked above")
    })?;
    run_fluid(field, eps, cfg.time.t_end, &cfg.time.output_times, 1.0).map(Some)
}

/// Store the requested output times of a kinetic run in `dir`.
pub fn write_kinetic_outputs(dir: &Path, run: &KineticRun, g: &VelocityGrid) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for s in &run.snapshots {
        s.write_csv(&dir.join(io::diagnostics_name(s.t)))?;
    }
    for st in &run.states {
        io::write_distribution(&dir.join(io::distribution_name(st.t)), &st.f, g, st.t)?;
    }
    Ok(())
}

fn kinetic_record(dir: String, n_x: usize, dt: f64, run: &KineticRun) -> RunRecord {
    let mut metrics = BTreeMap::new();
    metrics.insert("max_ap_distance".into(), run.max_ap_distance);
    metrics.insert("min_relative_value".into(), run.min_relative_value);
    for (q, name) in ["mass", "momentum_x", "momentum_y", "energy"].iter().enumerate() {
        metrics.insert(format!("max_drift_{name}"), run.max_totals_drift[q]);
    }
    RunRecord {
        dir,
        n_x,
        dt,
        steps: run.steps,
        metrics,
    }
}

fn run_kinetic_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let g = VelocityGrid::new(cfg.grid.n_v, cfg.grid.v_max)?;
    let kernel = match cfg.kernel.collision {
        CollisionKind::Boltzmann => Some(kernel_modes(cfg, &g)?),
        CollisionKind::Bgk => None,
    };
    let mut manifest = Manifest {
        version: crate::VERSION.to_owned(),
        config: cfg.clone(),
        kernel_key: kernel.as_ref().map(|k| *k.key()),
        runs: Vec::new(),
    };
    let nested = cfg.grid.n_x.len() > 1;
    for &n_x in &cfg.grid.n_x {
        let setup = kinetic_setup(cfg, n_x, kernel.as_ref())?;
        let sub = if nested { format!("nx{n_x}") } else { String::new() };
        let result = setup.run(cfg, true);
        let run = match result {
            Ok(run) => run,
            Err(e) => {
                manifest.write(out)?;
                return Err(e);
            }
        };
        write_kinetic_outputs(&out.join(&sub), &run, &g)?;
        manifest.runs.push(kinetic_record(sub, n_x, setup.dt, &run));
    }
    if let Some(reference) = fluid_reference(cfg)? {
        let dir = out.join("reference");
        std::fs::create_dir_all(&dir)?;
        for s in &reference {
            s.write_csv(&dir.join(io::diagnostics_name(s.t)))?;
        }
        manifest.runs.push(RunRecord {
            dir: "reference".into(),
            n_x: cfg.reference.n_x,
            dt: 0.0,
            steps: 0,
            metrics: BTreeMap::new(),
        });
    }
    Ok(manifest)
}

/// Largest `|f_3|` over the trajectory, the quantity tracked for the oscillating mode.
pub fn oscillation_amplitude(traj: &Trajectory, from: f64) -> f64 {
    traj.times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= from)
        .map(|(_, s)| s[2].norm())
        .fold(0.0, f64::max)
}

fn run_linear_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<(Manifest, Option<Error>)> {
    let dt = cfg.time.dt.expect("validated") / cfg.time.refine as f64;
    let mut traj = run_linear_test(cfg.penalty.nu, dt, cfg.time.t_end, cfg.scheme)?;
    traj.write_csv(&out.join("trajectory.csv"))?;
    let (t_last, last) = traj.last().expect("trajectory starts at t = 0");
    let mut metrics = BTreeMap::new();
    metrics.insert("t_last".into(), t_last);
    metrics.insert("abs_f3_last".into(), last[2].norm());
    metrics.insert("max_abs_f3".into(), oscillation_amplitude(&traj, 0.0));
    let manifest = Manifest {
        version: crate::VERSION.to_owned(),
        config: cfg.clone(),
        kernel_key: None,
        runs: vec![RunRecord {
            dir: String::new(),
            n_x: 0,
            dt,
            steps: traj.times.len() - 1,
            metrics,
        }],
    };
    Ok((manifest, traj.overflow.take()))
}

/// Ring datum on the configured lattice.
pub fn porous_initial(cfg: &ExperimentConfig) -> Result<(VelocityGrid, Vec<f64>)> {
    let g = VelocityGrid::new(cfg.grid.n_v, cfg.grid.v_max)?;
    let f0 = ring_initial(&g, cfg.porous.rings, cfg.porous.r0);
    Ok((g, f0))
}

/// Run the porous-medium experiment as configured.
pub fn porous_run(cfg: &ExperimentConfig) -> Result<(VelocityGrid, PorousRun)> {
    let (g, f0) = porous_initial(cfg)?;
    let dt = cfg.time.dt.expect("validated") / cfg.time.refine as f64;
    let run = run_porous(g.clone(), cfg.porous.m, f0, dt, cfg.time.t_end, &cfg.time.output_times)?;
    Ok((g, run))
}

fn write_porous_snapshot(path: &Path, f: &[f64], g: &VelocityGrid) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "v_x,v_y,f")?;
    for (k, v) in f.iter().enumerate() {
        let node = g.node(k);
        writeln!(w, "{:.17e},{:.17e},{:.17e}", node[0], node[1], v)?;
    }
    w.flush()?;
    Ok(())
}

fn run_porous_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let (g, run) = porous_run(cfg)?;
    write_porous_csv(&run.records, &out.join("entropy.csv"))?;
    for s in &run.snapshots {
        write_porous_snapshot(&out.join(format!("f_t{}.csv", io::time_tag(s.t))), &s.f, &g)?;
    }
    let first = run.records.first().expect("initial record");
    let last = run.records.last().expect("initial record");
    let mut metrics = BTreeMap::new();
    metrics.insert("initial_mass".into(), first.mass);
    metrics.insert(
        "max_mass_drift".into(),
        run.records.iter().map(|r| (r.mass - first.mass).abs()).fold(0.0, f64::max) / first.mass,
    );
    metrics.insert("min_f".into(), run.records.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min));
    metrics.insert("dissipation_ratio".into(), last.dissipation / first.dissipation);
    metrics.insert("distance_to_barenblatt".into(), run.distance_to_barenblatt);
    Ok(Manifest {
        version: crate::VERSION.to_owned(),
        config: cfg.clone(),
        kernel_key: None,
        runs: vec![RunRecord {
            dir: String::new(),
            n_x: 0,
            dt: cfg.time.dt.expect("validated") / cfg.time.refine as f64,
            steps: run.records.len() - 1,
            metrics,
        }],
    })
}

/// Run `cfg` and write its artifacts under `cfg.output_dir`.
///
/// The manifest is written even when the solver fails part-way, so that the
/// failing run can be repeated.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    let manifest = match cfg.experiment {
        Experiment::LinearOde => {
            let (m, overflow) = run_linear_experiment(cfg, out)?;
            m.write(out)?;
            if let Some(e) = overflow {
                return Err(e);
            }
            return Ok(m);
        }
        Experiment::PorousMedium => run_porous_experiment(cfg, out)?,
        _ => run_kinetic_experiment(cfg, out)?,
    };
    manifest.write(out)?;
    Ok(manifest)
}

/// Repeat the run recorded in `manifest_path`, writing into `out`.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Manifest> {
    let mut cfg = Manifest::read(manifest_path)?.config;
    cfg.output_dir = out.to_path_buf();
    run(&cfg)
}

/// Self-convergence of a kinetic experiment over the configured grids, for each Knudsen number in `eps`.
///
/// Consecutive grid sizes related by a factor of two form the (coarse, fine) pairs.
pub fn convergence(cfg: &ExperimentConfig, eps: &[f64]) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if !cfg.experiment.is_kinetic() {
        return Err(Error::Config(format!("`{}` has no spatial grid to refine", cfg.experiment.name())));
    }
    let mut grids = cfg.grid.n_x.clone();
    grids.sort_unstable();
    grids.dedup();
    let pairs: Vec<(usize, usize)> = grids
        .windows(2)
        .filter(|w| w[1] == 2 * w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::GridIncompatible(format!("no pair of grids in {grids:?} differs by a factor of two")));
    }
    let g = VelocityGrid::new(cfg.grid.n_v, cfg.grid.v_max)?;
    let kernel = match cfg.kernel.collision {
        CollisionKind::Boltzmann => Some(kernel_modes(cfg, &g)?),
        CollisionKind::Bgk => None,
    };
    let mut report = ConvergenceReport::default();
    for &e in eps {
        let mut c = cfg.clone();
        c.knudsen.eps = e;
        let mut states: BTreeMap<usize, (Distribution, Vec<Distribution>)> = BTreeMap::new();
        for &n in &grids {
            let setup = kinetic_setup(&c, n, kernel.as_ref())?;
            let run = setup.run(&c, true)?;
            let later: Vec<Distribution> = run.states.into_iter().filter(|s| s.t > 0.0).map(|s| s.f).collect();
            states.insert(n, (setup.f0, later));
        }
        for &(nc, nf) in &pairs {
            let (f0, fine) = &states[&nf];
            let coarse = &states[&nc].1;
            report.rows.push(ConvergenceRow {
                eps: e,
                n_coarse: nc,
                n_fine: nf,
                err_l1: self_convergence(fine, coarse, f0, 1.0)?,
                err_linf: self_convergence(fine, coarse, f0, f64::INFINITY)?,
            });
        }
    }
    report.refit();
    Ok(report)
}
