//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line with the measured values before asserting.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use kap::collision::{bgk_implicit_solve, boltzmann_direct, boltzmann_spectral, KernelModes};
use kap::grid::{cell_moments, conservative_maxwellian, moments, Distribution, VelocityGrid};
use kap::harness::{
    compare_snapshots, convergence, fluid_reference, kernel_modes, kinetic_setup, porous_run, Experiment,
    ExperimentConfig, FluidReference, Norm,
};
use kap::stiff_ode::{amplification_factor, run_linear_test, Scheme};
use kap::Error;

/// Print the verdict outside the test harness's capture, then assert it.
fn verdict(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
}

fn check(ok: &mut bool, cond: bool) -> bool {
    *ok &= cond;
    cond
}

#[test]
fn criterion_01_linear_test() {
    let start = Instant::now();
    let mut ok = true;
    let imex2 = run_linear_test(2.0, 0.3, 30.0, Scheme::Imex2).unwrap();
    let amp_err = imex2.states.iter().map(|s| (s[2].norm() - 1.0).abs()).fold(0.0, f64::max);
    check(&mut ok, imex2.overflow.is_none() && amp_err < 0.05);
    let imex1 = run_linear_test(2.0, 0.3, 30.0, Scheme::Imex1).unwrap();
    let (t1, s1) = imex1.last().unwrap();
    check(&mut ok, imex1.overflow.is_none() && (t1 - 30.0).abs() < 1e-9 && s1[2].norm() < 0.9);
    let rk2 = run_linear_test(0.0, 0.3, 30.0, Scheme::ExplicitRk2).unwrap();
    check(&mut ok, matches!(rk2.overflow, Some(Error::Overflow { .. })));
    let elapsed = start.elapsed().as_secs_f64();
    check(&mut ok, elapsed < 1.0);
    verdict(
        1,
        ok,
        format!(
            "imex2 max ||f3|-1| = {amp_err:.4} (bound 0.05); imex1 |f3(30)| = {:.3e} (bound 0.9); \
             explicit RK2 overflow at t = {:.1}; {elapsed:.3} s",
            s1[2].norm(),
            rk2.last().unwrap().0
        ),
    );
}

#[test]
fn criterion_02_stability_theory() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_limit: f64 = 0.0;
    let phases = [0.0, 0.5, -0.5, 1.2, -1.2];
    for nu in [1.0, 1.25, 2.0, 5.0, 10.0] {
        for lam in [1.0, 10.0, 1000.0] {
            for th in phases {
                let l = Complex64::from_polar(lam, th);
                for e in -6..=0 {
                    for d in -3..=1 {
                        let a = amplification_factor(l, nu, 10f64.powi(e), 10f64.powi(d));
                        worst = worst.max(a.norm());
                    }
                }
            }
            for d in -3..=1 {
                let a = amplification_factor(Complex64::new(lam, 0.0), nu, 1e-12, 10f64.powi(d));
                worst_limit = worst_limit.max((a - Complex64::new(1.0 - 1.0 / nu, 0.0)).norm());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst <= 1.0 + 1e-15 && worst_limit <= 1e-6 && elapsed < 1.0;
    verdict(
        2,
        ok,
        format!("max |a| = {worst:.6} over the sweep; max |a - (1 - 1/nu)| at eps = 1e-12: {worst_limit:.2e}; {elapsed:.3} s"),
    );
}

#[test]
fn criterion_03_uniform_second_order() {
    let c = ExperimentConfig::preset(Experiment::SmoothAccuracy);
    assert_eq!((c.grid.n_x.as_slice(), c.grid.n_v, c.grid.v_max, c.time.t_end), (&[32, 64, 128][..], 16, 7.0, 0.25));
    assert_eq!(c.scheme, Scheme::Imex2);
    let r = convergence(&c, &[1.0, 1e-2, 1e-5]).unwrap();
    let slopes: Vec<String> = r.fits.iter().map(|f| format!("eps {:e}: {:.2}", f.eps, f.slope_l1)).collect();
    let ok = r.fits.len() == 3 && r.fits.iter().all(|f| f.slope_l1 >= 1.7);
    verdict(3, ok, format!("L1 self-convergence slopes {} (bound 1.7)", slopes.join(", ")));
}

#[test]
fn criterion_04_asymptotic_preserving() {
    let mut c = ExperimentConfig::preset(Experiment::Sod);
    c.knudsen.eps = 1e-6;
    c.grid.n_x = vec![100];
    c.time.t_end = 0.1;
    c.time.output_times = vec![0.1];
    c.reference.fluid = FluidReference::Euler;
    c.reference.n_x = 100;
    let g = VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
    let km = kernel_modes(&c, &g).unwrap();
    let s = kinetic_setup(&c, 100, Some(&km)).unwrap();
    assert!(s.dt <= 0.9 * s.solver.mesh().dx() / c.grid.v_max * (1.0 + 1e-12));
    let run = s.run(&c, false).unwrap();
    let euler = fluid_reference(&c).unwrap().unwrap();
    let cmp = compare_snapshots(&run.snapshots, &euler, &["rho", "u", "T"]).unwrap();
    let moments_gap = cmp.max(Norm::L1, None);
    let ok = run.max_ap_distance <= 1e-4 && moments_gap <= 0.05;
    verdict(
        4,
        ok,
        format!(
            "max ||f - M||_1/||f||_1 over {} steps = {:.2e} (bound 1e-4); moments vs Euler at t = 0.1: \
             rho {:.2}%, u {:.2}%, T {:.2}% (bound 5%)",
            run.steps,
            run.max_ap_distance,
            100.0 * cmp.max(Norm::L1, Some("rho")),
            100.0 * cmp.max(Norm::L1, Some("u")),
            100.0 * cmp.max(Norm::L1, Some("T")),
        ),
    );
}

#[test]
fn criterion_05_conservation() {
    // Per-step drift of the AP solver with periodic cells, both orders.
    let mut c = ExperimentConfig::preset(Experiment::Mixing);
    c.grid.n_x = vec![40];
    c.time.t_end = 0.05;
    c.time.output_times = vec![0.05];
    let g = VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
    let km = kernel_modes(&c, &g).unwrap();
    let mut drift: f64 = 0.0;
    for scheme in [Scheme::Imex1, Scheme::Imex2] {
        c.scheme = scheme;
        let run = kinetic_setup(&c, 40, Some(&km)).unwrap().run(&c, false).unwrap();
        drift = drift.max(run.max_totals_drift.iter().copied().fold(0.0, f64::max));
    }

    // Penalty step against the moment-matched Maxwellian of its right-hand side.
    let s = kinetic_setup(&c, 40, Some(&km)).unwrap();
    let u = moments(&s.f0, &g).unwrap();
    let m = conservative_maxwellian(&u, &g).unwrap();
    let beta: Vec<f64> = u.cells.iter().map(|m| c.penalty.beta(m.rho)).collect();
    let eps = vec![1e-3; 40];
    let relaxed = bgk_implicit_solve(&s.f0, &m, &beta, &eps, 0.01).unwrap();
    let mut penalty_gap: f64 = 0.0;
    for i in 0..40 {
        let (a, b) = (cell_moments(relaxed.cell(i), &g).as_array(), u.cells[i].as_array());
        let scale = b[0].abs().max(b[3].abs());
        for q in 0..4 {
            penalty_gap = penalty_gap.max((a[q] - b[q]).abs() / scale);
        }
    }

    // Spectral operator on a two-beam distribution at n_v = 32.
    let g32 = VelocityGrid::new(32, 7.0).unwrap();
    let km32 = Arc::new(KernelModes::precompute(&g32, 0.0, 1.0 / (2.0 * std::f64::consts::PI), 64).unwrap());
    let f: Vec<f64> = (0..g32.len())
        .map(|k| {
            let v = g32.node(k);
            (-((v[0] - 1.0).powi(2) + v[1].powi(2)) / 0.6).exp() + 0.5 * (-((v[0] + 1.5).powi(2) + (v[1] - 0.5).powi(2))).exp()
        })
        .collect();
    let fd = Distribution::from_values(1, &g32, f.clone()).unwrap();
    let q = boltzmann_spectral(&fd, &km32).unwrap();
    let w = g32.weight();
    let (mut qm, mut qx, mut qy, mut qe) = (0.0, 0.0, 0.0, 0.0);
    let (mut fm, mut fx, mut fy, mut fe) = (0.0, 0.0, 0.0, 0.0);
    for (k, (qv, fv)) in q.cell(0).iter().zip(&f).enumerate() {
        let v = g32.node(k);
        let v2 = v[0] * v[0] + v[1] * v[1];
        qm += w * qv;
        qx += w * v[0] * qv;
        qy += w * v[1] * qv;
        qe += w * v2 * qv;
        fm += w * fv;
        fx += w * v[0].abs() * fv;
        fy += w * v[1].abs() * fv;
        fe += w * v2 * fv;
    }
    let (mass, mom, energy) = ((qm / fm).abs(), (qx / fx).abs().max((qy / fy).abs()), (qe / fe).abs());

    let ok = drift <= 1e-12 && penalty_gap <= 1e-12 && mass <= 1e-10 && mom <= 1e-4 && energy <= 1e-4;
    verdict(
        5,
        ok,
        format!(
            "AP per-step drift {drift:.1e} (bound 1e-12); penalty moment gap {penalty_gap:.1e} (bound 1e-12); \
             spectral Q at n_v = 32: mass {mass:.1e} (1e-10), momentum {mom:.1e} (1e-4), energy {energy:.1e} (1e-4)"
        ),
    );
}

#[test]
fn criterion_06_spectral_vs_direct() {
    let start = Instant::now();
    let g = VelocityGrid::new(8, 4.0).unwrap();
    let c_gamma = 1.0 / (2.0 * std::f64::consts::PI);
    let km = Arc::new(KernelModes::precompute(&g, 0.0, c_gamma, 64).unwrap());
    let mut rng = rand::rngs::StdRng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let spectral = boltzmann_spectral(&Distribution::from_values(1, &g, f.clone()).unwrap(), &km).unwrap();
        let direct = boltzmann_direct(&f, &g, c_gamma);
        let num: f64 = spectral.cell(0).iter().zip(&direct).map(|(a, b)| (a - b).abs()).sum();
        let den: f64 = direct.iter().map(|b| b.abs()).sum();
        worst = worst.max(num / den);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-6 && elapsed < 60.0;
    verdict(6, ok, format!("max relative L1 gap over 20 random distributions {worst:.2e} (bound 1e-6); {elapsed:.2} s"));
}

#[test]
fn criterion_07_kinetic_regime() {
    let mut c = ExperimentConfig::preset(Experiment::Sod);
    c.knudsen.eps = 1e-2;
    assert_eq!((c.grid.n_x[0], c.grid.n_v), (100, 16));
    let g = VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
    let km = kernel_modes(&c, &g).unwrap();
    let s = kinetic_setup(&c, 100, Some(&km)).unwrap();
    c.scheme = Scheme::Imex2;
    let ap = s.run(&c, false).unwrap();
    c.scheme = Scheme::ExplicitRk2;
    let rk = s.run(&c, false).unwrap();
    let last = |r: &kap::ap_solver::KineticRun| vec![r.snapshots.last().unwrap().clone()];
    let cmp = compare_snapshots(&last(&ap), &last(&rk), &["rho", "u", "T"]).unwrap();
    let gap = cmp.max(Norm::L1, None);
    verdict(
        7,
        gap <= 0.02,
        format!(
            "imex2 vs explicit RK2 at t = 0.2, n_v = 16: rho {:.3}%, u {:.3}%, T {:.3}% (desk bound 2%)",
            100.0 * cmp.max(Norm::L1, Some("rho")),
            100.0 * cmp.max(Norm::L1, Some("u")),
            100.0 * cmp.max(Norm::L1, Some("T")),
        ),
    );
}

#[test]
fn criterion_08_mixing_regimes() {
    let mut c = ExperimentConfig::preset(Experiment::Mixing);
    assert_eq!((c.grid.n_x[0], c.knudsen.eps, c.time.t_end), (200, 1e-3, 0.75));
    let g = VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
    let km = kernel_modes(&c, &g).unwrap();
    let ap_setup = kinetic_setup(&c, 200, Some(&km)).unwrap();
    let ap = ap_setup.run(&c, false).unwrap();
    let mut r = c.clone();
    r.scheme = Scheme::ExplicitRk2;
    r.time.refine = 10;
    let rk_setup = kinetic_setup(&r, 200, Some(&km)).unwrap();
    assert!((rk_setup.dt * 10.0 - ap_setup.dt).abs() < 1e-15);
    let rk = rk_setup.run(&r, false).unwrap();
    let cmp = compare_snapshots(&ap.snapshots, &rk.snapshots, &["rho", "u", "T"]).unwrap();
    let at_end = |f: &str| {
        cmp.rows
            .iter()
            .find(|row| (row.t - 0.75).abs() < 1e-12 && row.field == f)
            .map(|row| row.l1)
            .unwrap()
    };
    let gap = ["rho", "u", "T"].iter().map(|f| at_end(f)).fold(0.0, f64::max);

    c.grid.n_x = vec![50];
    let coarse = kinetic_setup(&c, 50, Some(&km)).unwrap().run(&c, false);
    let (bounded, track) = match &coarse {
        Ok(run) => {
            let s = run.snapshots.last().unwrap();
            let ok = s
                .cells
                .iter()
                .all(|c| c.rho > 0.0 && c.temperature > 0.0 && c.rho.is_finite() && c.ux.is_finite());
            let t = compare_snapshots(&run.snapshots, &ap.snapshots, &["rho", "T"]).unwrap();
            (ok, t.max(Norm::L1, None))
        }
        Err(_) => (false, f64::NAN),
    };
    verdict(
        8,
        gap <= 0.02 && coarse.is_ok() && bounded,
        format!(
            "imex2 (dt {:.3e}) vs RK2 (dt {:.3e}) at t = 0.75: rho {:.3}%, u {:.3}%, T {:.3}% (bound 2%); \
             n_x = 50 completes with bounded fields: {bounded}, L1 distance to n_x = 200 on rho, T {:.2}% (not gated)",
            ap_setup.dt,
            rk_setup.dt,
            100.0 * at_end("rho"),
            100.0 * at_end("u"),
            100.0 * at_end("T"),
            100.0 * track,
        ),
    );
}

#[test]
fn criterion_09_navier_stokes_consistency() {
    let mut c = ExperimentConfig::preset(Experiment::Sod);
    c.knudsen.eps = 1e-4;
    c.grid.n_x = vec![200];
    c.grid.n_v = 32;
    c.reference.fluid = FluidReference::NavierStokes;
    c.reference.n_x = 1000;
    let g = VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
    let km = kernel_modes(&c, &g).unwrap();
    let run = kinetic_setup(&c, 200, Some(&km)).unwrap().run(&c, false).unwrap();
    let ns = fluid_reference(&c).unwrap().unwrap();
    let last = vec![run.snapshots.last().unwrap().clone()];
    let cmp = compare_snapshots(&last, &ns, &["rho", "u", "T", "heat_flux_x"]).unwrap();
    let gated = ["rho", "u", "T"].iter().map(|f| cmp.max(Norm::L1, Some(f))).fold(0.0, f64::max);
    verdict(
        9,
        gated <= 0.03,
        format!(
            "kinetic (n_x 200, n_v 32) vs Navier–Stokes (n_x 1000) at t = 0.2: rho {:.2}%, u {:.2}%, T {:.2}% \
             (bound 3%); heat flux {:.0}% (reported only)",
            100.0 * cmp.max(Norm::L1, Some("rho")),
            100.0 * cmp.max(Norm::L1, Some("u")),
            100.0 * cmp.max(Norm::L1, Some("T")),
            100.0 * cmp.max(Norm::L1, Some("heat_flux_x")),
        ),
    );
}

#[test]
fn criterion_10_porous_medium() {
    let c = ExperimentConfig::preset(Experiment::PorousMedium);
    assert_eq!((c.grid.n_v, c.time.dt, c.time.t_end), (64, Some(0.02), 4.0));
    let (g, run) = porous_run(&c).unwrap();
    let rec = &run.records;
    let explicit_limit = g.dv() * g.dv();
    let min_f = rec.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min);
    let mass_drift = rec.iter().map(|r| (r.mass - rec[0].mass).abs()).fold(0.0, f64::max) / rec[0].mass;
    let rises: Vec<(f64, f64)> = rec[1..]
        .windows(2)
        .filter(|w| w[1].entropy > w[0].entropy)
        .map(|w| (w[1].t, w[1].entropy - w[0].entropy))
        .collect();
    let total_rise: f64 = rises.iter().map(|r| r.1).sum();
    let dissipation_ratio = rec.last().unwrap().dissipation / rec[0].dissipation;
    let dist = run.distance_to_barenblatt;
    let ok = min_f >= 0.0 && mass_drift <= 1e-12 && rises.is_empty() && dissipation_ratio < 1e-2 && dist <= 1e-2;
    verdict(
        10,
        ok,
        format!(
            "dt/dv^2 = {:.2}; min f = {min_f:.2e}; mass drift {mass_drift:.1e} (1e-12); H increases on {} steps \
             (first at t = {:.2}, total {total_rise:.1e}); D(4)/D(0) = {dissipation_ratio:.1e} (1e-2); \
             ||f(4) - M||_1/mass = {dist:.3e} (1e-2)",
            c.time.dt.unwrap() / explicit_limit,
            rises.len(),
            rises.first().map_or(f64::NAN, |r| r.0),
        ),
    );
}
