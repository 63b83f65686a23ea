use kap::harness::*;
use kap::stiff_ode::*;

fn main() {
    let what = std::env::args().nth(1).unwrap();
    match what.as_str() {
        "ode" => {
            for (s, nu) in [(Scheme::Imex2, 2.0), (Scheme::Imex1, 2.0)] {
                let tr = run_linear_test(nu, 0.3, 30.0, s).unwrap();
                let amps: Vec<f64> = tr.states.iter().map(|x| x[2].norm()).collect();
                let err = amps.iter().map(|a| (a - 1.0).abs()).fold(0.0, f64::max);
                eprintln!("{s:?} last |f3| {} max amp err {err} f1 {}", amps.last().unwrap(), tr.states.last().unwrap()[0]);
                let a = amplification_factor(num_complex::Complex64::new(0.0, 1.0), nu, 1.0, 0.3);
                eprintln!("  ampl factor {a} |a| {}", a.norm());
            }
        }
        "conv" => {
            let mut c = ExperimentConfig::preset(Experiment::SmoothAccuracy);
            let eps: Vec<f64> = std::env::args().skip(2).map(|s| s.parse().unwrap()).collect();
            if let Ok(g) = std::env::var("GRIDS") { c.grid.n_x = g.split(',').map(|s| s.parse().unwrap()).collect(); }
            if std::env::var("BGK").is_ok() { c.kernel.collision = CollisionKind::Bgk; }
            if std::env::var("PERIODIC").is_ok() { c.grid.boundary = kap::grid::Boundary::Periodic; }
            if let Ok(g) = std::env::var("NU") { c.penalty.nu = g.parse().unwrap(); }
            if let Ok(g) = std::env::var("VMAX") { c.grid.v_max = g.parse().unwrap(); }
            if let Ok(g) = std::env::var("NV") { c.grid.n_v = g.parse().unwrap(); }
            if let Ok(g) = std::env::var("TEND") { c.time.t_end = g.parse().unwrap(); c.time.output_times = vec![c.time.t_end]; }
            let t0 = std::time::Instant::now();
            let r = convergence(&c, &eps).unwrap();
            c.grid.n_x.clear();
            for r in &r.rows { eprintln!("{:e} {} {:.3e} {:.3e}", r.eps, r.n_coarse, r.err_l1, r.err_linf); } for f in &r.fits { eprintln!("eps {:e} slope {:.3} linf {:.3}", f.eps, f.slope_l1, f.slope_linf); } eprintln!("{:?}", t0.elapsed());
        }
        "smooth" => {
            let args: Vec<f64> = std::env::args().skip(2).map(|s| s.parse().unwrap()).collect();
            let (n, eps, nu, vmax) = (args[0] as usize, args[1], args[2], args[3]);
            let mut c = ExperimentConfig::preset(Experiment::SmoothAccuracy);
            c.penalty.nu = nu;
            c.grid.v_max = vmax;
            c.knudsen.eps = eps;
            if args.len() > 4 { c.grid.n_v = args[4] as usize; }
            let g = kap::grid::VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
            let km = kernel_modes(&c, &g).unwrap();
            let s = kinetic_setup(&c, n, Some(&km)).unwrap();
            let r = s.run(&c, false).unwrap();
            let last = r.snapshots.last().unwrap();
            let t: Vec<f64> = last.field("T").unwrap();
            eprintln!("n {n} eps {eps} nu {nu} vmax {vmax}: steps {} max_ap {:.3e} minrel {:.3e} Tmin {:.4} Tmax {:.4}", r.steps, r.max_ap_distance, r.min_relative_value, t.iter().cloned().fold(9.0, f64::min), t.iter().cloned().fold(0.0, f64::max));
        }
        "where" => {
            let eps: f64 = std::env::args().nth(2).unwrap().parse().unwrap();
            let mut c = ExperimentConfig::preset(Experiment::SmoothAccuracy);
            c.knudsen.eps = eps;
            if let Ok(g) = std::env::var("NU") { c.penalty.nu = g.parse().unwrap(); }
            c.time.output_times = vec![0.25];
            let g = kap::grid::VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
            let km = kernel_modes(&c, &g).unwrap();
            let a = kinetic_setup(&c, 128, Some(&km)).unwrap().run(&c, true).unwrap();
            let b = kinetic_setup(&c, 256, Some(&km)).unwrap().run(&c, true).unwrap();
            let r = restrict(b.state.f.values(), 256, 2).unwrap();
            let nv = g.len();
            let per: Vec<f64> = (0..128).map(|i| (0..nv).map(|k| (r[i*nv+k] - a.state.f.values()[i*nv+k]).abs()).sum()).collect();
            for i in (0..128).step_by(4) { eprint!("{:.1e} ", per[i]); }
            eprintln!();
            eprintln!("first cells {:.2e} {:.2e} {:.2e} {:.2e} last {:.2e} {:.2e}", per[0], per[1], per[2], per[3], per[126], per[127]);
        }
        "flatwall" => {
            let eps: f64 = std::env::args().nth(2).unwrap().parse().unwrap();
            let mut c = ExperimentConfig::preset(Experiment::SmoothAccuracy);
            c.knudsen.eps = eps;
            if std::env::var("BGK").is_ok() { c.kernel.collision = CollisionKind::Bgk; }
            let g = kap::grid::VelocityGrid::new(c.grid.n_v, c.grid.v_max).unwrap();
            let km = kernel_modes(&c, &g).unwrap();
            let mut res = vec![];
            for n in [32usize, 64, 128, 256] {
                let mut s = kinetic_setup(&c, n, Some(&km)).unwrap();
                let cells = s.solver.mesh().centers().iter().map(|&x| kap::grid::Moments::from_primitive(1.0 + 0.3 * (std::f64::consts::PI * x).cos(), [0.0, 0.0], 0.8 + 0.1 * (std::f64::consts::PI * x).cos())).collect();
                s.f0 = s.solver.initial_equilibrium(&kap::grid::MacroState { cells }).unwrap();
                let r = s.run(&c, true).unwrap();
                res.push((s.f0.clone(), r.states.into_iter().map(|s| s.f).collect::<Vec<_>>()));
            }
            for k in 0..3 {
                let e = self_convergence(&res[k + 1].1, &res[k].1, &res[k + 1].0, 1.0).unwrap();
                eprintln!("{} {:.3e}", 32 << k, e);
            }
        }
        _ => {}
    }
}
