//! Penalized implicit-explicit integrators for stiff systems `df/dt = Q(f)/eps`.
//!
//! The source is split as `Q = (Q - P) + P`, where `P` is a linear, well-balanced
//! penalty whose implicit solve is supplied by the system in closed form. The
//! remainder `Q - P` is treated explicitly, so no nonlinear solver is needed.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type State = Vec<Complex64>;

/// A stiff system together with its penalty operator.
pub trait PenalizedSystem {
    /// Stiffness parameter.
    fn eps(&self) -> f64;
    /// `Q(f)`.
    fn source(&self, f: &[Complex64]) -> Result<State>;
    /// `P(f)`.
    fn penalty(&self, f: &[Complex64]) -> Result<State>;
    /// Returns `f` with `f - h P(f) = rhs`.
    fn penalty_solve(&self, rhs: &[Complex64], h: f64) -> Result<State>;
}

fn axpy(y: &mut [Complex64], a: f64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn explicit_part<S: PenalizedSystem + ?Sized>(sys: &S, f: &[Complex64]) -> Result<State> {
    let q = sys.source(f)?;
    let p = sys.penalty(f)?;
    Ok(q.iter().zip(&p).map(|(a, b)| a - b).collect())
}

/// First-order step: `(f' - f)/dt = (Q(f) - P(f))/eps + P(f')/eps`.
pub fn imex1_step<S: PenalizedSystem + ?Sized>(sys: &S, f: &[Complex64], dt: f64) -> Result<State> {
    let eps = sys.eps();
    let mut rhs = f.to_vec();
    axpy(&mut rhs, dt / eps, &explicit_part(sys, f)?);
    sys.penalty_solve(&rhs, dt / eps)
}

/// Second-order two-stage step: a first-order half step to `f*`, then the midpoint
/// rule on `Q - P` and the trapezoidal rule on `P`.
pub fn imex2_step<S: PenalizedSystem + ?Sized>(sys: &S, f: &[Complex64], dt: f64) -> Result<State> {
    let eps = sys.eps();
    let h = 0.5 * dt / eps;

    let mut rhs = f.to_vec();
    axpy(&mut rhs, h, &explicit_part(sys, f)?);
    let f_star = sys.penalty_solve(&rhs, h)?;

    let mut rhs = f.to_vec();
    axpy(&mut rhs, dt / eps, &explicit_part(sys, &f_star)?);
    axpy(&mut rhs, h, &sys.penalty(f)?);
    sys.penalty_solve(&rhs, h)
}

/// Amplification factor of the first-order scheme on `Q = -lambda f`, `P = -nu lambda f`.
pub fn amplification_factor(lambda: Complex64, nu: f64, eps: f64, dt: f64) -> Complex64 {
    let z = lambda * dt;
    Complex64::new(1.0, 0.0) - z / (eps + nu * z)
}

/// Scalar relaxation `Q(f) = -lambda f` with penalty `P(f) = -nu lambda f`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarRelaxation {
    pub lambda: Complex64,
    pub nu: f64,
    pub eps: f64,
}

impl PenalizedSystem for ScalarRelaxation {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn source(&self, f: &[Complex64]) -> Result<State> {
        Ok(f.iter().map(|x| -self.lambda * x).collect())
    }

    fn penalty(&self, f: &[Complex64]) -> Result<State> {
        Ok(f.iter().map(|x| -self.nu * self.lambda * x).collect())
    }

    fn penalty_solve(&self, rhs: &[Complex64], h: f64) -> Result<State> {
        let d = Complex64::new(1.0, 0.0) + h * self.nu * self.lambda;
        if d.norm() == 0.0 {
            return Err(Error::SolveFailure("singular scalar penalty".into()));
        }
        Ok(rhs.iter().map(|x| x / d).collect())
    }
}

/// The 3x3 multi-scale test `df/dt = A f` with two fast decaying modes and one
/// oscillating mode, penalized by `P = nu A`.
#[derive(Debug, Clone)]
pub struct LinearTestSystem {
    a: Matrix3<Complex64>,
    pub nu: f64,
}

impl LinearTestSystem {
    pub fn new(nu: f64) -> Self {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        #[rustfmt::skip]
        let a = Matrix3::new(
            c(-1000.0, 0.0), c(1.0, 0.0),     c(0.0, 0.0),
            c(-1.0, 0.0),    c(-1000.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0),     c(0.0, 0.0),     c(0.0, 1.0),
        );
        Self { a, nu }
    }

    pub fn matrix(&self) -> &Matrix3<Complex64> {
        &self.a
    }

    fn apply(&self, f: &[Complex64], scale: f64) -> State {
        let v = Vector3::new(f[0], f[1], f[2]);
        let r = self.a * v * Complex64::new(scale, 0.0);
        vec![r[0], r[1], r[2]]
    }
}

impl PenalizedSystem for LinearTestSystem {
    fn eps(&self) -> f64 {
        1.0
    }

    fn source(&self, f: &[Complex64]) -> Result<State> {
        Ok(self.apply(f, 1.0))
    }

    fn penalty(&self, f: &[Complex64]) -> Result<State> {
        Ok(self.apply(f, self.nu))
    }

    fn penalty_solve(&self, rhs: &[Complex64], h: f64) -> Result<State> {
        let m = Matrix3::identity() - self.a * Complex64::new(h * self.nu, 0.0);
        let b = Vector3::new(rhs[0], rhs[1], rhs[2]);
        let x = m
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SolveFailure("singular penalty matrix".into()))?;
        Ok(vec![x[0], x[1], x[2]])
    }
}

/// Time integrator for the linear test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Imex1,
    Imex2,
    ExplicitRk2,
    ExplicitEuler,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "imex1" => Some(Scheme::Imex1),
            "imex2" => Some(Scheme::Imex2),
            "explicit_rk2" => Some(Scheme::ExplicitRk2),
            "explicit_euler" => Some(Scheme::ExplicitEuler),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Imex1 => "imex1",
            Scheme::Imex2 => "imex2",
            Scheme::ExplicitRk2 => "explicit_rk2",
            Scheme::ExplicitEuler => "explicit_euler",
        }
    }

    pub fn is_second_order(&self) -> bool {
        matches!(self, Scheme::Imex2 | Scheme::ExplicitRk2)
    }
}

/// Norm above which an integration is flagged as blown up.
pub const OVERFLOW_THRESHOLD: f64 = 1e10;

/// Sampled solution of the linear test.
#[derive(Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[Complex64; 3]>,
    /// Set when the state norm exceeded [`OVERFLOW_THRESHOLD`]; integration stops there.
    pub overflow: Option<Error>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, [Complex64; 3])> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "t,re_f1,im_f1,re_f2,im_f2,re_f3,im_f3")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(
                w,
                "{t:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s[0].re, s[0].im, s[1].re, s[1].im, s[2].re, s[2].im
            )?;
        }
        Ok(())
    }
}

/// Initial state of the linear test; exciting every mode.
pub const LINEAR_TEST_INITIAL: [f64; 3] = [1.0, 1.0, 1.0];

/// Integrate the linear test to `t_end` with a fixed step.
///
/// The explicit schemes are the penalized ones with `nu = 0`.
pub fn run_linear_test(nu: f64, dt: f64, t_end: f64, scheme: Scheme) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Config(format!("invalid dt = {dt} or t_end = {t_end}")));
    }
    let nu = match scheme {
        Scheme::ExplicitEuler | Scheme::ExplicitRk2 => 0.0,
        _ => nu,
    };
    let sys = LinearTestSystem::new(nu);
    let mut f: State = LINEAR_TEST_INITIAL
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    let n_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut traj = Trajectory::default();
    traj.times.push(0.0);
    traj.states.push([f[0], f[1], f[2]]);
    for n in 1..=n_steps {
        f = match scheme {
            Scheme::Imex1 | Scheme::ExplicitEuler => imex1_step(&sys, &f, dt)?,
            Scheme::Imex2 | Scheme::ExplicitRk2 => imex2_step(&sys, &f, dt)?,
        };
        let t = n as f64 * dt;
        let norm = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        traj.times.push(t);
        traj.states.push([f[0], f[1], f[2]]);
        if !(norm <= OVERFLOW_THRESHOLD) {
            traj.overflow = Some(Error::Overflow { t, norm });
            break;
        }
    }
    Ok(traj)
}
