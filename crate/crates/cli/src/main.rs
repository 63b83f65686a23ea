use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kap::harness::{self, CollisionKind, Experiment, ExperimentConfig, Norm};
use kap::stiff_ode::Scheme;
use kap::Error;

/// Asymptotic-preserving kinetic solvers: experiments, convergence studies and comparisons.
#[derive(Parser)]
#[command(name = "kap", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, env = "KAP_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its diagnostics.
    Run {
        experiment: String,
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Self-convergence study over nested grids.
    Convergence {
        experiment: String,
        #[command(flatten)]
        opts: ConfigArgs,
        /// Grid sizes; consecutive sizes related by 2 are compared.
        #[arg(long, value_delimiter = ',')]
        grids: Option<Vec<usize>>,
        /// Knudsen numbers to study (default: the configured one).
        #[arg(long = "eps-list", value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        /// Exit with status 4 if any fitted L1 slope is below this.
        #[arg(long)]
        min_slope: Option<f64>,
    },
    /// Compare the diagnostics of two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "rho,u,T")]
        fields: Vec<String>,
        /// `l1` or `linf`.
        #[arg(long, default_value = "l1")]
        norm: String,
        /// Exit with status 4 if any distance exceeds this.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file layered over the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    /// imex1, imex2, explicit_rk2 or explicit_euler.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// Divide the step by this factor.
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long = "n-x", value_delimiter = ',')]
    n_x: Option<Vec<usize>>,
    #[arg(long = "n-v")]
    n_v: Option<usize>,
    #[arg(long = "v-max")]
    v_max: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// `boltzmann` or `bgk`.
    #[arg(long)]
    collision: Option<String>,
    /// Directory for cached kernel modes.
    #[arg(long)]
    kernel_cache: Option<PathBuf>,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "Config".into(),
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::SchemaMismatch(_) | Error::GridIncompatible(_) => 3,
            _ => 2,
        };
        Self {
            code,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl ConfigArgs {
    fn resolve(&self, experiment: &str) -> Result<ExperimentConfig, Failure> {
        let e = Experiment::parse(experiment).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            Failure::config(format!("unknown experiment `{experiment}`; expected one of {}", names.join(", ")))
        })?;
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path, Some(e))?,
            None => ExperimentConfig::preset(e),
        };
        if let Some(out) = &self.out {
            c.output_dir = out.clone();
        }
        if let Some(eps) = self.eps {
            c.knudsen.eps = eps;
        }
        if let Some(s) = &self.scheme {
            c.scheme = Scheme::parse(s).ok_or_else(|| Failure::config(format!("unknown scheme `{s}`")))?;
        }
        if let Some(dt) = self.dt {
            c.time.dt = Some(dt);
        }
        if let Some(cfl) = self.cfl {
            c.time.cfl = cfl;
            if self.dt.is_none() {
                c.time.dt = None;
            }
        }
        if let Some(r) = self.refine {
            c.time.refine = r;
        }
        if let Some(nu) = self.nu {
            c.penalty.nu = nu;
        }
        if let Some(n) = &self.n_x {
            c.grid.n_x = n.clone();
        }
        if let Some(n) = self.n_v {
            c.grid.n_v = n;
        }
        if let Some(v) = self.v_max {
            c.grid.v_max = v;
        }
        if let Some(t) = self.t_end {
            c.time.t_end = t;
            c.time.output_times.retain(|&s| s <= t);
            if c.experiment.is_kinetic() && c.time.output_times.last() != Some(&t) {
                c.time.output_times.push(t);
            }
        }
        if let Some(k) = &self.collision {
            c.kernel.collision = match k.as_str() {
                "boltzmann" => CollisionKind::Boltzmann,
                "bgk" => CollisionKind::Bgk,
                _ => return Err(Failure::config(format!("unknown collision operator `{k}`"))),
            };
        }
        if let Some(dir) = &self.kernel_cache {
            c.kernel.cache_dir = Some(dir.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(experiment: &str, opts: &ConfigArgs, out_dir: &mut Option<PathBuf>) -> Result<u8, Failure> {
    let c = opts.resolve(experiment)?;
    *out_dir = Some(c.output_dir.clone());
    let m = harness::run(&c)?;
    for r in &m.runs {
        let dir = c.output_dir.join(&r.dir);
        println!("{}: n_x = {}, dt = {:e}, {} steps -> {}", c.experiment.name(), r.n_x, r.dt, r.steps, dir.display());
        for (k, v) in &r.metrics {
            println!("  {k} = {v:e}");
        }
    }
    Ok(0)
}

fn convergence(
    experiment: &str,
    opts: &ConfigArgs,
    grids: &Option<Vec<usize>>,
    eps_list: &Option<Vec<f64>>,
    min_slope: Option<f64>,
    out_dir: &mut Option<PathBuf>,
) -> Result<u8, Failure> {
    let mut c = opts.resolve(experiment)?;
    if let Some(g) = grids {
        c.grid.n_x = g.clone();
    }
    *out_dir = Some(c.output_dir.clone());
    let eps = eps_list.clone().unwrap_or_else(|| vec![c.knudsen.eps]);
    let report = harness::convergence(&c, &eps)?;
    std::fs::create_dir_all(&c.output_dir).map_err(Error::from)?;
    report.write_csv(&c.output_dir.join("convergence.csv"))?;
    println!("{:>10} {:>7} {:>7} {:>12} {:>12}", "eps", "coarse", "fine", "err_l1", "err_linf");
    for r in &report.rows {
        println!("{:>10.1e} {:>7} {:>7} {:>12.4e} {:>12.4e}", r.eps, r.n_coarse, r.n_fine, r.err_l1, r.err_linf);
    }
    for f in &report.fits {
        println!(
            "eps = {:e}: slope L1 {:.3} (residual {:.1e}), Linf {:.3} (residual {:.1e})",
            f.eps, f.slope_l1, f.residual_l1, f.slope_linf, f.residual_linf
        );
    }
    if let Some(s) = min_slope {
        if report.fits.iter().any(|f| !(f.slope_l1 >= s)) {
            eprintln!("fitted slope below {s}");
            return Ok(4);
        }
    }
    Ok(0)
}

fn compare(a: &Path, b: &Path, fields: &[String], norm: &str, tolerance: Option<f64>, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let norm = Norm::parse(norm).ok_or_else(|| Failure::config(format!("unknown norm `{norm}`; use l1 or linf")))?;
    let names: Vec<&str> = fields.iter().map(String::as_str).collect();
    let report = harness::compare_dirs(a, b, &names)?;
    println!("{:>10} {:>14} {:>12} {:>12}", "t", "field", "rel_l1", "rel_linf");
    for r in &report.rows {
        println!("{:>10} {:>14} {:>12.4e} {:>12.4e}", r.t, r.field, r.l1, r.linf);
    }
    if let Some(path) = out {
        report.write_csv(path)?;
    }
    if let Some(tol) = tolerance {
        let worst = report.max(norm, None);
        if !(worst <= tol) {
            eprintln!("largest distance {worst:e} exceeds {tol:e}");
            return Ok(4);
        }
    }
    Ok(0)
}

fn report_failure(f: &Failure, out_dir: Option<&Path>) {
    let record = serde_json::json!({
        "error": f.kind,
        "message": f.message,
        "exit_code": f.code,
    });
    eprintln!("{record}");
    if let Some(dir) = out_dir {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            report_failure(&Failure::config(format!("cannot use {n} threads")), None);
            return ExitCode::from(3);
        }
    }
    let mut out_dir = None;
    let result = match &cli.command {
        Command::Run { experiment, opts } => run(experiment, opts, &mut out_dir),
        Command::Convergence {
            experiment,
            opts,
            grids,
            eps_list,
            min_slope,
        } => convergence(experiment, opts, grids, eps_list, *min_slope, &mut out_dir),
        Command::Compare {
            a,
            b,
            fields,
            norm,
            tolerance,
            out,
        } => compare(a, b, fields, norm, *tolerance, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            report_failure(&f, out_dir.as_deref());
            ExitCode::from(f.code)
        }
    }
}
