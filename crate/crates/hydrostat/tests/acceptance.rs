//! End-to-end acceptance gate: one test per criterion, each printing a
//! single PASS/FAIL line (run with --nocapture to see them).

use hydrostat::config::preset_initial;
use hydrostat::grid::{BoundaryY, Grid, ScalarField};
use hydrostat::hstokes::{
    assemble, constraint_residual, convergence_study, ptilde_fixed_point, FaceAveraging, LawKind,
    MmsCase, ViscosityLaw,
};
use hydrostat::momentum::{momentum_solve, MomentumParams};
use hydrostat::norms::{blowup_monitor, lp_norm, PhiSeries};
use hydrostat::picard::{
    contraction_report, mollify_density, picard_iterate, sigma_bound_check, stability_experiment,
    two_level_continuation, ContractionVerdict, PicardConfig, PicardOutcome,
};
use hydrostat::transport::{transport_solve, vertical_velocity, TransportParams};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;

type CheckResult = Result<String, String>;

fn criterion(n: usize, name: &str, check: impl FnOnce() -> CheckResult) {
    match check() {
        Ok(detail) => println!("criterion {n:2} ({name}): PASS  {detail}"),
        Err(msg) => {
            println!("criterion {n:2} ({name}): FAIL  {msg}");
            panic!("criterion {n} ({name}) failed: {msg}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn law_affine() -> ViscosityLaw {
    ViscosityLaw::new(LawKind::Affine { a0: 0.5, a1: 0.5 }, 0.25).unwrap()
}

fn shear_u0(grid: Grid, amp: f64) -> ScalarField {
    ScalarField::sample(grid, BoundaryY::DirichletZero, |x, y| {
        amp * (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
    })
    .unwrap()
}

fn stratified_rho0(grid: Grid) -> ScalarField {
    ScalarField::sample(grid, BoundaryY::Free, |_, y| 1.0 + 0.5 * (PI * y).cos()).unwrap()
}

fn picard_fixture_32() -> (Grid, ScalarField, ScalarField, ScalarField, PicardConfig) {
    // A strong shear over a thin viscosity so that the iteration needs a
    // useful number of iterates before hitting the tolerance.
    let g = Grid::new(1.0, 32, 32).unwrap();
    let rho0 = stratified_rho0(g);
    let u0 = shear_u0(g, 3.0);
    let f = ScalarField::sample(g, BoundaryY::Free, |x, y| {
        0.5 * (2.0 * PI * x).sin() * (PI * y).sin()
    })
    .unwrap();
    let cfg = PicardConfig {
        t_final: 0.1,
        dt: 0.002,
        tol: 1e-8,
        max_iters: 20,
        lambda: 1e-3,
        delta: 0.2,
        law: ViscosityLaw::new(LawKind::Affine { a0: 0.2, a1: 0.2 }, 0.1).unwrap(),
        avg: FaceAveraging::Arithmetic,
        cfl_guard: true,
    };
    (g, rho0, u0, f, cfg)
}

fn run_picard_fixture() -> PicardOutcome {
    let (_, rho0, u0, f, cfg) = picard_fixture_32();
    picard_iterate(&rho0, &u0, &f, &|_| 1.0, &cfg, None).expect("fixture run succeeds")
}

#[test]
fn criterion_01_constant_mu_mms_convergence() {
    criterion(1, "constant-mu MMS", || {
        let start = std::time::Instant::now();
        let case = MmsCase::constant_mu();
        let rep = convergence_study(&case, &[16, 32, 64]).map_err(|e| e.to_string())?;
        let u_order = rep.u_l2_order.ok_or("degenerate u errors")?;
        let p_order = rep.p_l2_order.ok_or("degenerate p errors")?;
        ensure!(u_order >= 1.9, "u order {u_order} < 1.9");
        ensure!(p_order >= 1.9, "p order {p_order} < 1.9");
        let finest = *rep.u_l2_errors.last().unwrap();
        ensure!(finest <= 5e-4, "finest u error {finest} > 5e-4");
        let secs = start.elapsed().as_secs_f64();
        ensure!(secs <= 60.0, "runtime {secs} s > 60 s");
        Ok(format!("u order {u_order:.2}, p order {p_order:.2}, finest {finest:.2e}, {secs:.1} s"))
    });
}

#[test]
fn criterion_02_variable_mu_mms_and_scaled_pressure_path() {
    criterion(2, "variable-mu MMS + scaled-pressure cross-check", || {
        let case = MmsCase::variable_mu();
        let rep = convergence_study(&case, &[16, 32, 64]).map_err(|e| e.to_string())?;
        let u_order = rep.u_l2_order.ok_or("degenerate u errors")?;
        let p_order = rep.p_l2_order.ok_or("degenerate p errors")?;
        ensure!(u_order >= 1.9, "u order {u_order} < 1.9");
        ensure!(p_order >= 1.9, "p order {p_order} < 1.9");

        let g = Grid::new(1.0, 32, 32).unwrap();
        let rho = ScalarField::sample(g, BoundaryY::Free, |x, y| (case.rho_exact)(x, y))
            .map_err(|e| e.to_string())?;
        let mu = case.law.eval_field(&rho).map_err(|e| e.to_string())?;
        let fx = case.forcing_exact.as_ref().unwrap();
        let f = ScalarField::sample(g, BoundaryY::Free, |x, y| fx(x, y))
            .map_err(|e| e.to_string())?;
        let op = assemble(&mu, None, FaceAveraging::Arithmetic, case.law.floor)
            .map_err(|e| e.to_string())?;
        let direct = op.solve(&f).map_err(|e| e.to_string())?;
        let ptilde = ptilde_fixed_point(&mu, &f, 1e-12, 60, case.law.floor)
            .map_err(|e| e.to_string())?;
        let diff = lp_norm(&ptilde.solution.u.sub(&direct.u), 2.0).map_err(|e| e.to_string())?;
        ensure!(diff < 1e-6, "cross-path u difference {diff} >= 1e-6");
        Ok(format!("u order {u_order:.2}, p order {p_order:.2}, cross-path {diff:.2e}"))
    });
}

#[test]
fn criterion_03_constraint_and_vertical_velocity_residuals() {
    criterion(3, "constraint residuals", || {
        let mut worst_c = 0.0f64;
        let mut worst_w = 0.0f64;
        // Stokes solves on both manufactured cases.
        for case in [MmsCase::constant_mu(), MmsCase::variable_mu()] {
            let g = Grid::new(1.0, 32, 32).unwrap();
            let rho = ScalarField::sample(g, BoundaryY::Free, |x, y| (case.rho_exact)(x, y))
                .map_err(|e| e.to_string())?;
            let mu = case.law.eval_field(&rho).map_err(|e| e.to_string())?;
            let fx = case.forcing_exact.as_ref().unwrap();
            let f = ScalarField::sample(g, BoundaryY::Free, |x, y| fx(x, y))
                .map_err(|e| e.to_string())?;
            let op = assemble(&mu, None, FaceAveraging::Arithmetic, case.law.floor)
                .map_err(|e| e.to_string())?;
            let sol = op.solve(&f).map_err(|e| e.to_string())?;
            worst_c = worst_c.max(constraint_residual(&sol.u));
            let w = vertical_velocity(&sol.u).map_err(|e| e.to_string())?;
            for i in 0..g.nx {
                worst_w = worst_w.max(w.at(i, g.ny).abs());
            }
        }
        // Every velocity level of a full pipeline run.
        let out = run_picard_fixture();
        for u in &out.u_traj {
            worst_c = worst_c.max(constraint_residual(u));
            let w = vertical_velocity(u).map_err(|e| e.to_string())?;
            let g = u.grid;
            for i in 0..g.nx {
                worst_w = worst_w.max(w.at(i, g.ny).abs());
            }
        }
        ensure!(worst_c <= 1e-9, "constraint residual {worst_c} > 1e-9");
        ensure!(worst_w <= 1e-8, "top-wall |w| {worst_w} > 1e-8");
        Ok(format!("max constraint {worst_c:.2e}, max top-wall |w| {worst_w:.2e}"))
    });
}

#[test]
fn criterion_04_discrete_maximum_principle() {
    criterion(4, "discrete maximum principle", || {
        let g = Grid::new(1.0, 64, 64).unwrap();
        let vac = preset_initial("vacuum-band", g).map_err(|e| e.to_string())?;
        let rho0 = mollify_density(&vac.rho0, 0.1);
        let u = shear_u0(g, 1.0);
        let w = vertical_velocity(&u).map_err(|e| e.to_string())?;
        let dt = 0.004;
        let steps = 250; // T = 1
        let params = TransportParams::new(1e-3, dt, true).map_err(|e| e.to_string())?;
        let traj = transport_solve(&rho0, |_| (u.clone(), w.clone()), &params, steps)
            .map_err(|e| e.to_string())?;
        let max0 = rho0.max();
        for n in 0..=steps {
            ensure!(
                traj.mins[n] >= 0.1 - 1e-12,
                "min rho {} < 0.1 - 1e-12 at step {n}",
                traj.mins[n]
            );
            ensure!(
                traj.maxs[n] <= max0 + 1e-12,
                "max rho {} exceeds initial max {max0} at step {n}",
                traj.maxs[n]
            );
        }
        Ok(format!(
            "min {:.6} >= 0.1, max {:.6} <= {max0:.6} over {steps} steps",
            traj.mins.iter().cloned().fold(f64::INFINITY, f64::min),
            traj.maxs.iter().cloned().fold(0.0, f64::max)
        ))
    });
}

#[test]
fn criterion_05_transport_oracles() {
    criterion(5, "transport oracles", || {
        // Uniform advection against the characteristics oracle.
        let speed = 0.3;
        let t_final = 0.5;
        let mut errors = Vec::new();
        for nx in [64usize, 128] {
            let g = Grid::new(1.0, nx, 8).unwrap();
            let rho0 =
                ScalarField::sample(g, BoundaryY::Free, |x, _| 1.0 + 0.5 * (2.0 * PI * x).sin())
                    .map_err(|e| e.to_string())?;
            let dt = g.hx / 0.6; // CFL 0.5
            let steps = (t_final / dt).round() as usize;
            let t_act = steps as f64 * dt;
            let u = ScalarField::sample(g, BoundaryY::Free, |_, _| speed)
                .map_err(|e| e.to_string())?;
            let w = ScalarField::zeros(g, BoundaryY::Free);
            let params = TransportParams::new(0.0, dt, true).map_err(|e| e.to_string())?;
            let traj = transport_solve(&rho0, |_| (u.clone(), w.clone()), &params, steps)
                .map_err(|e| e.to_string())?;
            let exact = ScalarField::sample(g, BoundaryY::Free, |x, _| {
                1.0 + 0.5 * (2.0 * PI * (x - speed * t_act)).sin()
            })
            .map_err(|e| e.to_string())?;
            let err = lp_norm(&traj.densities[steps].sub(&exact), 2.0).map_err(|e| e.to_string())?;
            // First-order bound constant from the data: |rho0''| |u| / 2.
            let c = 0.5 * 4.0 * PI * PI * 0.5 * speed;
            let bound = 2.0 * c * g.hx * t_act;
            ensure!(err <= bound, "nx {nx}: error {err} exceeds 2*C*hx*T = {bound}");
            errors.push(err);
        }
        let ratio = errors[0] / errors[1];
        ensure!(ratio >= 1.8, "grid-doubling ratio {ratio} < 1.8");

        // x-heat decay of the first mode.
        let lambda = 0.01;
        let g = Grid::new(1.0, 64, 8).unwrap();
        let rho0 = ScalarField::sample(g, BoundaryY::Free, |x, _| 1.0 + (2.0 * PI * x).sin())
            .map_err(|e| e.to_string())?;
        let dt = 0.0025;
        let steps = 400; // t = 1
        let zero_u = ScalarField::zeros(g, BoundaryY::Free);
        let zero_w = ScalarField::zeros(g, BoundaryY::Free);
        let params = TransportParams::new(lambda, dt, true).map_err(|e| e.to_string())?;
        let traj = transport_solve(&rho0, |_| (zero_u.clone(), zero_w.clone()), &params, steps)
            .map_err(|e| e.to_string())?;
        let amp = traj.densities[steps]
            .values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - 1.0;
        let expected = (-4.0 * PI * PI * lambda).exp();
        let rel = (amp - expected).abs() / expected;
        ensure!(rel <= 0.05, "heat decay off by {rel:.3} (> 5%)");
        Ok(format!("advection ratio {ratio:.2}, heat-decay error {:.2}%", 100.0 * rel))
    });
}

#[test]
fn criterion_06_energy_ledger() {
    criterion(6, "energy ledger", || {
        // Per-step defect halves with the time step on the standard smooth
        // run (shear velocity over the stratified density, f = 0, 32x32,
        // T = 0.25, full pipeline).
        let g = Grid::new(1.0, 32, 32).unwrap();
        let rho0 = stratified_rho0(g);
        let u0 = shear_u0(g, 1.0);
        let f = ScalarField::zeros(g, BoundaryY::Free);
        let mut max_defects = Vec::new();
        for dt in [5e-4, 2.5e-4] {
            let cfg = PicardConfig {
                t_final: 0.25,
                dt,
                tol: 1e-8,
                max_iters: 20,
                lambda: 1e-3,
                delta: 0.2,
                law: law_affine(),
                avg: FaceAveraging::Arithmetic,
                cfl_guard: true,
            };
            let out = picard_iterate(&rho0, &u0, &f, &|_| 1.0, &cfg, None)
                .map_err(|e| e.to_string())?;
            ensure!(out.converged, "pipeline run at dt {dt} did not converge");
            let max_defect = out
                .reports
                .iter()
                .map(|r| (r.energy_lhs - r.energy_rhs).abs())
                .fold(0.0, f64::max);
            max_defects.push(max_defect);
        }
        let ratio = max_defects[0] / max_defects[1];
        ensure!(ratio >= 1.8, "defect ratio {ratio} < 1.8 ({max_defects:?})");

        // Kinetic energy is non-increasing with f = 0 and v = 0.
        let steps = 100;
        let rho_traj = vec![rho0.clone(); steps + 1];
        let v_traj = vec![ScalarField::zeros(g, BoundaryY::DirichletZero); steps + 1];
        let params = MomentumParams { dt: 2.5e-3, lambda: 0.0, avg: FaceAveraging::Arithmetic };
        let mtraj = momentum_solve(&rho_traj, &v_traj, &u0, &f, |_| 1.0, &law_affine(), &params)
            .map_err(|e| e.to_string())?;
        let mut prev = f64::INFINITY;
        for r in &mtraj.reports {
            ensure!(
                r.kinetic_energy <= prev + 1e-14,
                "kinetic energy increased: {} -> {}",
                prev,
                r.kinetic_energy
            );
            prev = r.kinetic_energy;
        }
        Ok(format!("defect ratio {ratio:.2}, kinetic energy monotone over {steps} steps"))
    });
}

#[test]
fn criterion_07_picard_contraction() {
    criterion(7, "picard contraction", || {
        let start = std::time::Instant::now();
        let (_, _, _, _, cfg) = picard_fixture_32();
        let out = run_picard_fixture();
        ensure!(out.converged, "fixture did not converge in {} iterates", out.iterations);
        ensure!(out.iterations <= 20, "{} iterates > 20", out.iterations);

        // The per-iterate ratios oscillate with period 2 around a fixed
        // contraction factor; the meaningful monotonicity is of the envelope:
        // the late-tail maximum must not exceed the early maximum and every
        // ratio must contract.
        let tail: Vec<f64> = out
            .diags
            .iter()
            .filter(|d| d.k >= 3)
            .filter_map(|d| d.ratio)
            .collect();
        ensure!(tail.len() >= 4, "only {} ratios beyond k = 3", tail.len());
        for (i, r) in tail.iter().enumerate() {
            ensure!(*r < 1.0, "ratio {} at tail index {i} does not contract", r);
        }
        let half = tail.len() / 2;
        let early = tail[..half].iter().cloned().fold(0.0f64, f64::max);
        let late = tail[half..].iter().cloned().fold(0.0f64, f64::max);
        ensure!(
            late <= early && tail[tail.len() - 1] <= tail[0],
            "ratio envelope increased: early max {early}, late max {late}, {tail:?}"
        );
        let rep = contraction_report(&out.diags).map_err(|e| e.to_string())?;
        ensure!(
            rep.verdict != ContractionVerdict::NonContracting,
            "contraction verdict negative (rate {})",
            rep.rate
        );

        let sigma = sigma_bound_check(&out.diags, cfg.dt);
        let cs: Vec<f64> = sigma
            .constants
            .iter()
            .filter(|(k, _)| (2..=6).contains(k))
            .filter_map(|(_, c)| *c)
            .collect();
        ensure!(cs.len() >= 5, "c_sigma defined for only {} of k = 2..6", cs.len());
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = cs.iter().cloned().fold(0.0f64, f64::max);
        ensure!(
            cmax / cmin < 10.0,
            "c_sigma spread {:.2}x exceeds one order of magnitude ({cs:?})",
            cmax / cmin
        );
        let secs = start.elapsed().as_secs_f64();
        ensure!(secs <= 600.0, "runtime {secs} s > 600 s");
        Ok(format!(
            "{} iterates, verdict {:?}, rate {:.3}, c_sigma spread {:.2}x, {secs:.1} s",
            out.iterations,
            rep.verdict,
            rep.rate,
            cmax / cmin
        ))
    });
}

#[test]
fn criterion_08_uniqueness_and_stability() {
    criterion(8, "uniqueness and stability", || {
        let g = Grid::new(1.0, 16, 16).unwrap();
        let rho0 = stratified_rho0(g);
        let u0 = shear_u0(g, 1.0);
        let f = ScalarField::sample(g, BoundaryY::Free, |x, _| 0.2 * (2.0 * PI * x).sin())
            .map_err(|e| e.to_string())?;
        let cfg = PicardConfig {
            t_final: 0.05,
            dt: 0.005,
            tol: 1e-8,
            max_iters: 20,
            lambda: 1e-3,
            delta: 0.2,
            law: law_affine(),
            avg: FaceAveraging::Arithmetic,
            cfl_guard: true,
        };
        let rep = stability_experiment(&rho0, &u0, &rho0, &u0, &f, &cfg)
            .map_err(|e| e.to_string())?;
        let e_max = rep.e_series.iter().cloned().fold(0.0, f64::max);
        ensure!(e_max <= 1e-20, "identical-data E reaches {e_max} > 1e-20");

        let perturb = ScalarField::sample(g, BoundaryY::DirichletZero, |x, y| {
            (4.0 * PI * x).sin() * (2.0 * PI * y).sin()
        })
        .map_err(|e| e.to_string())?;
        let mut cs = Vec::new();
        for eps in [1e-6, 1e-7] {
            let u0b = u0.add_scaled(eps, &perturb);
            let rep = stability_experiment(&rho0, &u0, &rho0, &u0b, &f, &cfg)
                .map_err(|e| e.to_string())?;
            cs.push(rep.c_fit.ok_or("rate fit undefined for perturbed data")?);
        }
        let rel = (cs[0] - cs[1]).abs() / cs[1].abs().max(1e-300);
        ensure!(rel <= 0.3, "rate not reproduced: c = {cs:?}, relative change {rel:.3}");
        Ok(format!("identical-data E <= {e_max:.1e}, rate change {:.1}% across eps", 100.0 * rel))
    });
}

#[test]
fn criterion_09_two_level_continuation() {
    criterion(9, "two-level continuation", || {
        let g = Grid::new(1.0, 16, 16).unwrap();
        let rho0 = stratified_rho0(g);
        let u0 = shear_u0(g, 1.0);
        let f = ScalarField::sample(g, BoundaryY::Free, |x, _| 0.2 * (2.0 * PI * x).sin())
            .map_err(|e| e.to_string())?;
        let cfg = PicardConfig {
            t_final: 0.05,
            dt: 0.005,
            tol: 1e-8,
            max_iters: 20,
            lambda: 1e-3,
            delta: 0.2,
            law: law_affine(),
            avg: FaceAveraging::Arithmetic,
            cfl_guard: true,
        };
        let table = two_level_continuation(&rho0, &u0, &f, &cfg, &[0.2], &[1e-2, 5e-3, 2.5e-3])
            .map_err(|e| e.to_string())?;
        ensure!(table.levels.len() == 3, "lambda sweep truncated at {} levels", table.levels.len());
        ensure!(table.converged.iter().all(|&c| c), "a lambda level did not converge");
        ensure!(
            table.diffs[1] < table.diffs[0],
            "successive differences not strictly decreasing: {:?}",
            table.diffs
        );

        // Vacuum preset over decreasing floors.
        let vac = preset_initial("vacuum-band", g).map_err(|e| e.to_string())?;
        let vtab = two_level_continuation(
            &vac.rho0,
            &vac.u0,
            &f,
            &cfg,
            &[0.1, 0.05, 0.025],
            &[1e-3],
        )
        .map_err(|e| e.to_string())?;
        ensure!(vtab.levels.len() == 3, "vacuum sweep truncated at {} levels", vtab.levels.len());
        ensure!(vtab.converged.iter().all(|&c| c), "a vacuum level did not converge");
        for p in &vtab.phi_sup {
            ensure!(p.is_finite(), "Phi not finite on a vacuum level");
        }
        let pmin = vtab.phi_sup.iter().cloned().fold(f64::INFINITY, f64::min);
        let pmax = vtab.phi_sup.iter().cloned().fold(0.0f64, f64::max);
        ensure!(pmax / pmin <= 2.0, "vacuum Phi spread {:.2}x > 2x ({:?})", pmax / pmin, vtab.phi_sup);
        Ok(format!(
            "lambda diffs {:?} decreasing, vacuum Phi spread {:.2}x",
            table.diffs,
            pmax / pmin
        ))
    });
}

#[test]
fn criterion_10_blowup_monitor() {
    criterion(10, "blow-up monitor", || {
        // Synthetic series: breach at the correct index.
        let mut series = PhiSeries::default();
        for (n, phi) in [2.0, 5.0, 9.0, 1.2e6, 2.0e6].iter().enumerate() {
            series.push(n as f64 * 0.1, *phi, 0.0);
        }
        let breach = blowup_monitor(&series, 1e6)
            .map_err(|e| e.to_string())?
            .ok_or("no breach detected")?;
        ensure!(breach.index == 3, "breach at index {} != 3", breach.index);
        ensure!((breach.time - 0.3).abs() < 1e-15, "breach time {} != 0.3", breach.time);

        // A run whose Phi exceeds a low threshold exits with code 4 and
        // writes the breach record.
        let dir = std::env::temp_dir().join("hydrostat-acc-c10");
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let config = dir.join("run.toml");
        std::fs::write(
            &config,
            "[grid]\nl = 1.0\nnx = 16\nny = 16\n\n[time]\nt_final = 0.02\ndt = 0.005\n\n\
             [params]\nlambda = 1e-3\ndelta = 0.2\n\n\
             [law]\nkind = \"affine\"\na0 = 0.5\na1 = 0.5\nfloor = 0.25\n\n\
             [initial]\npreset = \"shear\"\n\n[monitor]\nthreshold = 2.0\n",
        )
        .map_err(|e| e.to_string())?;
        let out_dir = dir.join("out");
        let status = Command::new(env!("CARGO_BIN_EXE_hydrostat"))
            .args(["solve", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .status()
            .map_err(|e| e.to_string())?;
        ensure!(status.code() == Some(4), "exit code {:?} != 4", status.code());
        ensure!(out_dir.join("breach.csv").exists(), "breach.csv missing");
        ensure!(out_dir.join("norms.csv").exists(), "partial norms.csv missing");

        // Phi and J stay finite and are logged at every step of a converged
        // run.
        let out = run_picard_fixture();
        let (snaps, phi) = hydrostat::picard::norm_series(&out).map_err(|e| e.to_string())?;
        ensure!(snaps.len() == out.times.len(), "norm series incomplete");
        ensure!(phi.phi.iter().all(|v| v.is_finite()), "Phi not finite");
        ensure!(phi.j.iter().all(|v| v.is_finite()), "J not finite");
        Ok("synthetic breach at index 3, CLI exit 4, fixture Phi/J finite".into())
    });
}

#[test]
fn criterion_11_determinism() {
    criterion(11, "byte-identical re-runs", || {
        let dir = std::env::temp_dir().join("hydrostat-acc-c11");
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let config = dir.join("run.toml");
        std::fs::write(
            &config,
            "[grid]\nl = 1.0\nnx = 16\nny = 16\n\n[time]\nt_final = 0.05\ndt = 0.005\n\n\
             [params]\nlambda = 1e-3\ndelta = 0.2\n\n\
             [law]\nkind = \"affine\"\na0 = 0.5\na1 = 0.5\nfloor = 0.25\n\n\
             [initial]\npreset = \"shear\"\n\n\
             [forcing]\npreset = \"gradient-forcing\"\namplitude = 0.2\n",
        )
        .map_err(|e| e.to_string())?;
        let mut outputs: Vec<(Vec<u8>, Vec<u8>, Vec<u8>)> = Vec::new();
        for run in 0..2 {
            let out_dir: PathBuf = dir.join(format!("out{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_hydrostat"))
                .args(["solve", "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out_dir)
                .status()
                .map_err(|e| e.to_string())?;
            ensure!(status.code() == Some(0), "run {run} exit code {:?}", status.code());
            outputs.push((
                std::fs::read(out_dir.join("norms.csv")).map_err(|e| e.to_string())?,
                std::fs::read(out_dir.join("diagnostics.csv")).map_err(|e| e.to_string())?,
                std::fs::read(out_dir.join("final.hpe")).map_err(|e| e.to_string())?,
            ));
        }
        ensure!(outputs[0].0 == outputs[1].0, "norms.csv differs between runs");
        ensure!(outputs[0].1 == outputs[1].1, "diagnostics.csv differs between runs");
        ensure!(outputs[0].2 == outputs[1].2, "final.hpe differs between runs");
        Ok("norms.csv, diagnostics.csv, and final.hpe byte-identical across runs".into())
    });
}
