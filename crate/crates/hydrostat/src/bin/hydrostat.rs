//! Command-line driver: run the solver pipeline, the standalone kernels, and
//! the verification studies from a TOML configuration, writing deterministic
//! CSV and binary snapshot outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
//! 4 blow-up threshold breached (partial outputs are written first).

use clap::{Parser, Subcommand};
use hydrostat::config::{parse_config, preset_forcing, preset_initial, FieldSource, RunConfig};
use hydrostat::csvout::{diag_csv, norm_csv, table_csv, write_text};
use hydrostat::error::{Error, Result};
use hydrostat::grid::ScalarField;
use hydrostat::hstokes::{
    convergence_study, mms_forcing, solve_hstokes, MmsCase,
};
use hydrostat::norms::{blowup_monitor, grad_linf};
use hydrostat::picard::{
    contraction_report, mollify_density, norm_series, picard_iterate, sigma_bound_check,
    two_level_continuation, PicardConfig, PicardOutcome,
};
use hydrostat::snapshot::{read_snapshot, write_snapshot, FieldSnapshot};
use hydrostat::transport::{mass_drift, transport_solve, vertical_velocity, TransportParams};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hydrostat", version, about = "Hydrostatic channel-flow solver and verification driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved for randomized studies; accepted and recorded, all current
    /// pipelines are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full transport + momentum pipeline at fixed (delta, lambda) with norm
    /// and blow-up monitoring.
    Solve(RunArgs),
    /// One hydrostatic Stokes solve of the configured manufactured case.
    Stokes(RunArgs),
    /// Standalone advection-diffusion run with a frozen velocity.
    Transport(RunArgs),
    /// Picard iteration with per-iterate contraction diagnostics.
    PicardDiagnose(RunArgs),
    /// Two-level (delta, lambda) continuation sweep.
    Sweep(RunArgs),
    /// Manufactured-solution grid-convergence study.
    Mms(RunArgs),
}

fn load(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = parse_config(&text)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn resolve_initial(cfg: &RunConfig) -> Result<(ScalarField, ScalarField)> {
    match &cfg.initial {
        FieldSource::Preset(id) => {
            let p = preset_initial(id, cfg.grid)?;
            Ok((p.rho0, p.u0))
        }
        FieldSource::Path(path) => {
            let snap = read_snapshot(Path::new(path))?;
            Ok((snap.scalar("rho0")?.clone(), snap.scalar("u0")?.clone()))
        }
    }
}

fn resolve_forcing(cfg: &RunConfig) -> Result<ScalarField> {
    let f = match &cfg.forcing {
        FieldSource::Preset(id) => preset_forcing(id, cfg.grid)?,
        FieldSource::Path(path) => read_snapshot(Path::new(path))?.scalar("f")?.clone(),
    };
    Ok(f.scale(cfg.forcing_amplitude))
}

fn picard_config(cfg: &RunConfig) -> PicardConfig {
    PicardConfig {
        t_final: cfg.t_final,
        dt: cfg.dt,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        lambda: cfg.lambda,
        delta: cfg.delta,
        law: cfg.law.clone(),
        avg: cfg.avg,
        cfl_guard: cfg.cfl_guard,
    }
}

fn run_picard(cfg: &RunConfig) -> Result<PicardOutcome> {
    let (rho0_raw, u0) = resolve_initial(cfg)?;
    let f = resolve_forcing(cfg)?;
    let rho0 = mollify_density(&rho0_raw, cfg.delta);
    let pcfg = picard_config(cfg);
    let modulation = cfg.modulation;
    picard_iterate(&rho0, &u0, &f, &move |t| modulation.eval(t), &pcfg, None)
}

fn write_state_snapshot(out: &Path, name: &str, outcome: &PicardOutcome) -> Result<()> {
    let n = outcome.times.len() - 1;
    let grid = outcome.rho_traj[0].grid;
    let mut snap = FieldSnapshot::new(grid, outcome.times[n]);
    snap.push_scalar("rho", &outcome.rho_traj[n]);
    snap.push_scalar("u", &outcome.u_traj[n]);
    if n > 0 {
        snap.push_pressure("p", &outcome.p_traj[n - 1]);
    } else {
        snap.push_pressure("p", &outcome.compat.p0);
    }
    write_snapshot(&out.join(name), &snap)
}

fn cmd_solve(args: &RunArgs) -> Result<u8> {
    let (cfg, out) = load(args)?;
    let outcome = run_picard(&cfg)?;
    let (snaps, phi) = norm_series(&outcome)?;
    write_text(&out.join("norms.csv"), &norm_csv(&snaps, Some(&phi)))?;
    write_text(&out.join("diagnostics.csv"), &diag_csv(&outcome.diags))?;
    write_state_snapshot(&out, "final.hpe", &outcome)?;
    if cfg.snapshot_cadence > 0 {
        for n in (0..outcome.times.len()).step_by(cfg.snapshot_cadence) {
            let mut snap = FieldSnapshot::new(cfg.grid, outcome.times[n]);
            snap.push_scalar("rho", &outcome.rho_traj[n]);
            snap.push_scalar("u", &outcome.u_traj[n]);
            write_snapshot(&out.join(format!("state_{n:06}.hpe")), &snap)?;
        }
    }
    if let Some(breach) = blowup_monitor(&phi, cfg.threshold)? {
        write_text(
            &out.join("breach.csv"),
            &table_csv(
                &["index", "time", "phi"],
                &[vec![breach.index as f64, breach.time, breach.phi]],
            ),
        )?;
        eprintln!(
            "blow-up threshold {} breached at t = {} (step {}), phi = {}",
            cfg.threshold, breach.time, breach.index, breach.phi
        );
        return Ok(4);
    }
    if !outcome.converged {
        eprintln!(
            "picard iteration did not converge within {} iterates (last increment {})",
            outcome.iterations,
            outcome.diags.last().map(|d| d.eta_l2_sup).unwrap_or(f64::NAN)
        );
        return Ok(3);
    }
    println!(
        "solve: {} iterates, {} steps, final t = {}",
        outcome.iterations,
        outcome.times.len() - 1,
        outcome.times.last().unwrap()
    );
    Ok(0)
}

fn cmd_stokes(args: &RunArgs) -> Result<u8> {
    let (cfg, out) = load(args)?;
    let case = MmsCase::by_name(&cfg.mms_case).map_err(|e| Error::Config(e.to_string()))?;
    let grid = cfg.grid;
    let rho = ScalarField::sample(grid, hydrostat::grid::BoundaryY::Free, |x, y| {
        (case.rho_exact)(x, y)
    })?;
    let mu = case.law.eval_field(&rho)?;
    let f = match &case.forcing_exact {
        Some(fx) => ScalarField::sample(grid, hydrostat::grid::BoundaryY::Free, |x, y| fx(x, y))?,
        None => mms_forcing(
            case.u_exact.as_ref(),
            case.p_exact.as_ref(),
            &case.law,
            case.rho_exact.as_ref(),
            grid,
        )?,
    };
    let op = hydrostat::hstokes::assemble(&mu, None, cfg.avg, case.law.floor)?;
    let sol = solve_hstokes(&op, &f)?;
    let mut snap = FieldSnapshot::new(grid, 0.0);
    snap.push_scalar("u", &sol.u);
    snap.push_pressure("p", &sol.p);
    write_snapshot(&out.join("stokes.hpe"), &snap)?;
    write_text(
        &out.join("stokes_report.csv"),
        &table_csv(
            &["constraint_residual", "linsolve_residual"],
            &[vec![sol.constraint_residual, sol.linsolve_residual]],
        ),
    )?;
    println!(
        "stokes: case {}, constraint residual {:.3e}",
        case.name, sol.constraint_residual
    );
    Ok(0)
}

fn cmd_transport(args: &RunArgs) -> Result<u8> {
    let (cfg, out) = load(args)?;
    let (rho0, u0) = resolve_initial(&cfg)?;
    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    let params = TransportParams::new(cfg.lambda, dt, cfg.cfl_guard)?;
    let w0 = vertical_velocity(&u0)?;
    let traj = transport_solve(&rho0, |_| (u0.clone(), w0.clone()), &params, steps)?;
    let rows: Vec<Vec<f64>> = (0..traj.times.len())
        .map(|n| {
            vec![
                traj.times[n],
                traj.mins[n],
                traj.maxs[n],
                traj.masses[n],
                grad_linf(&traj.densities[n]),
            ]
        })
        .collect();
    write_text(
        &out.join("transport.csv"),
        &table_csv(&["t", "min_rho", "max_rho", "mass", "linf_grad_rho"], &rows),
    )?;
    println!(
        "transport: {} steps, mass drift {:.3e}",
        steps,
        mass_drift(&traj)
    );
    Ok(0)
}

fn cmd_picard_diagnose(args: &RunArgs) -> Result<u8> {
    let (cfg, out) = load(args)?;
    let outcome = run_picard(&cfg)?;
    write_text(&out.join("diagnostics.csv"), &diag_csv(&outcome.diags))?;
    let sigma = sigma_bound_check(&outcome.diags, cfg.dt);
    let rows: Vec<Vec<f64>> = sigma
        .constants
        .iter()
        .map(|(k, c)| vec![*k as f64, c.unwrap_or(f64::NAN)])
        .collect();
    write_text(&out.join("sigma_constants.csv"), &table_csv(&["k", "c_sigma"], &rows))?;
    if outcome.diags.len() >= 4 {
        let rep = contraction_report(&outcome.diags)?;
        write_text(
            &out.join("contraction.csv"),
            &table_csv(
                &["rate", "fit_c", "fit_t0", "fit_rms"],
                &[vec![rep.rate, rep.fit_c, rep.fit_t0, rep.fit_rms]],
            ),
        )?;
        println!("picard-diagnose: verdict {:?}, rate {:.4}", rep.verdict, rep.rate);
    }
    if !outcome.converged {
        eprintln!("picard iteration did not converge within {} iterates", outcome.iterations);
        return Ok(3);
    }
    println!("picard-diagnose: converged in {} iterates", outcome.iterations);
    Ok(0)
}

fn cmd_sweep(args: &RunArgs) -> Result<u8> {
    let (cfg, out) = load(args)?;
    let (rho0_raw, u0) = resolve_initial(&cfg)?;
    let f = resolve_forcing(&cfg)?;
    let pcfg = picard_config(&cfg);
    // Halve lambda twice at the configured delta.
    let lambdas = [cfg.lambda, cfg.lambda / 2.0, cfg.lambda / 4.0];
    let table = two_level_continuation(&rho0_raw, &u0, &f, &pcfg, &[cfg.delta], &lambdas)?;
    let rows: Vec<Vec<f64>> = (0..table.levels.len())
        .map(|i| {
            vec![
                table.levels[i].0,
                table.levels[i].1,
                table.iterations[i] as f64,
                if table.converged[i] { 1.0 } else { 0.0 },
                table.phi_sup[i],
                if i > 0 { table.diffs[i - 1] } else { f64::NAN },
            ]
        })
        .collect();
    write_text(
        &out.join("sweep.csv"),
        &table_csv(&["delta", "lambda", "iterations", "converged", "phi_sup", "diff_prev"], &rows),
    )?;
    if table.converged.iter().any(|&c| !c) || table.levels.len() < lambdas.len() {
        eprintln!("sweep: a continuation level failed to converge; partial table written");
        return Ok(3);
    }
    println!("sweep: {} levels converged", table.levels.len());
    Ok(0)
}

fn cmd_mms(args: &RunArgs) -> Result<u8> {
    let (cfg, out) = load(args)?;
    let case = MmsCase::by_name(&cfg.mms_case).map_err(|e| Error::Config(e.to_string()))?;
    let report = convergence_study(&case, &cfg.mms_levels)?;
    let rows: Vec<Vec<f64>> = (0..report.levels.len())
        .map(|i| {
            vec![
                report.levels[i] as f64,
                report.u_l2_errors[i],
                report.u_h1_errors[i],
                report.p_l2_errors[i],
            ]
        })
        .collect();
    write_text(
        &out.join("mms_table.csv"),
        &table_csv(&["n", "u_l2_error", "u_h1_error", "p_l2_error"], &rows),
    )?;
    write_text(
        &out.join("mms_orders.csv"),
        &table_csv(
            &["u_l2_order", "u_h1_order", "p_l2_order"],
            &[vec![
                report.u_l2_order.unwrap_or(f64::NAN),
                report.u_h1_order.unwrap_or(f64::NAN),
                report.p_l2_order.unwrap_or(f64::NAN),
            ]],
        ),
    )?;
    println!(
        "mms: case {}, u order {:?}, p order {:?}",
        case.name, report.u_l2_order, report.p_l2_order
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    faer::set_global_parallelism(faer::Par::Seq);
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Stokes(a) => cmd_stokes(a),
        Command::Transport(a) => cmd_transport(a),
        Command::PicardDiagnose(a) => cmd_picard_diagnose(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Mms(a) => cmd_mms(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e @ (Error::NonConvergence(_) | Error::CflViolation(_))) => {
            eprintln!("solver failure: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
