//! Outer linearization iteration: the density is transported with the
//! previous velocity iterate and the momentum equation is solved against the
//! fresh density, repeatedly, until successive velocity iterates agree in
//! sup-in-time L2. Includes contraction and factorial-envelope diagnostics,
//! the two-level (delta, lambda) continuation with density mollification, and
//! the two-run stability (uniqueness) experiment.

use crate::error::{Error, Result};
use crate::grid::{BoundaryY, PressureProfile, ScalarField};
use crate::hstokes::{FaceAveraging, ViscosityLaw};
use crate::momentum::{
    compatibility_v1, compute_initial_pressure, momentum_solve, CompatibilityData,
    MomentumParams, MomentumStepReport,
};
use crate::norms::{
    aniso_norm, grad_l2, grad_linf, lp_norm, sobolev_norm, NormSnapshot, NormTag, PhiSeries,
};
use crate::transport::{transport_solve, vertical_velocity, TransportParams};

/// Configuration of one Picard run.
#[derive(Debug, Clone)]
pub struct PicardConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Convergence tolerance on the sup-in-time L2 norm of the velocity
    /// increment.
    pub tol: f64,
    pub max_iters: usize,
    pub lambda: f64,
    /// Density floor of the level (informational; the initial data are
    /// expected to respect it).
    pub delta: f64,
    pub law: ViscosityLaw,
    pub avg: FaceAveraging,
    pub cfl_guard: bool,
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iters < 2 {
            return Err(Error::InvalidArgument("max_iters must be at least 2".into()));
        }
        if self.delta < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidArgument("delta and lambda must be non-negative".into()));
        }
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) {
            return Err(Error::InvalidArgument("need 0 < dt <= t_final".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

/// Extended per-iterate functional ingredients (the iteration-level variant
/// of the blow-up functional, which additionally tracks the acceleration).
#[derive(Debug, Clone, Copy, Default)]
pub struct PhiKIngredients {
    /// sup_t (|grad rho|_inf + |hess rho|_inf).
    pub grad_rho_w1inf: f64,
    /// sup_t (|hess rho|_L2 + |third derivatives of rho|_L2).
    pub hess_rho_w12: f64,
    /// sup_t |grad u|_L2.
    pub grad_u_l2: f64,
    /// sup_t |grad u_t|_L2 (backward differences).
    pub grad_ut_l2: f64,
}

impl PhiKIngredients {
    pub fn total(&self) -> f64 {
        1.0 + self.grad_rho_w1inf + self.hess_rho_w12 + self.grad_u_l2 + self.grad_ut_l2
    }
}

/// Per-iterate diagnostic record.
#[derive(Debug, Clone)]
pub struct IterateDiagnostics {
    pub k: usize,
    /// sup_t |rho^k(t) - rho^(k-1)(t)|_L2 (defined for k >= 2).
    pub sigma_l2_sup: Option<f64>,
    pub sigma_series: Vec<f64>,
    /// sup_t |sqrt(rho^k) (u^k - u^(k-1))|_L2.
    pub eta_weighted_sup: f64,
    pub eta_weighted_series: Vec<f64>,
    /// sup_t |u^k - u^(k-1)|_L2 (the convergence gate).
    pub eta_l2_sup: f64,
    /// int |grad (u^k - u^(k-1))|_L2^2 dt.
    pub eta_grad_l2_int: f64,
    /// int B_k dt with B_k(t) the residual-force mixed norm plus the squared
    /// sup-norm velocity gradient (the lambda rho_xx contribution is excluded
    /// and tracked separately).
    pub bk_integral: f64,
    pub bk_series: Vec<f64>,
    /// eta_weighted_sup(k) / eta_weighted_sup(k-1), for k >= 2.
    pub ratio: Option<f64>,
    pub phi_k: PhiKIngredients,
    /// sup_t lambda * |rho_xx|_L2.
    pub lambda_rho_xx_l2: f64,
}

/// Result of a Picard run. Non-convergence is a reported outcome, not an
/// error: the trajectories of the last iterate are still returned.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub times: Vec<f64>,
    pub rho_traj: Vec<ScalarField>,
    pub u_traj: Vec<ScalarField>,
    /// Pressure at t_1..t_N; the initial pressure is in `compat`.
    pub p_traj: Vec<PressureProfile>,
    pub reports: Vec<MomentumStepReport>,
    pub diags: Vec<IterateDiagnostics>,
    pub compat: CompatibilityData,
}

fn weighted_l2(rho: &ScalarField, v: &ScalarField) -> f64 {
    rho.zip(v, BoundaryY::Free, |r, x| r.max(0.0) * x * x)
        .integral_domain()
        .max(0.0)
        .sqrt()
}

/// Run the linearization iteration from the given initial data.
///
/// The zeroth velocity iterate is identically zero unless `warm_start`
/// supplies a full trajectory (used by continuation levels).
pub fn picard_iterate(
    rho0: &ScalarField,
    u0: &ScalarField,
    f: &ScalarField,
    modulation: &dyn Fn(f64) -> f64,
    cfg: &PicardConfig,
    warm_start: Option<&[ScalarField]>,
) -> Result<PicardOutcome> {
    cfg.validate()?;
    let g = rho0.grid;
    let steps = cfg.steps();
    let dt = cfg.t_final / steps as f64;
    if rho0.min() < cfg.delta - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "initial density dips below the level floor: min {} < delta {}",
            rho0.min(),
            cfg.delta
        )));
    }

    let p0 = compute_initial_pressure(rho0, u0, f, &cfg.law)?;
    let compat = compatibility_v1(rho0, u0, &p0, f, &cfg.law)?;

    let tparams = TransportParams::new(cfg.lambda, dt, cfg.cfl_guard)?;
    let mparams = MomentumParams { dt, lambda: cfg.lambda, avg: cfg.avg };

    let zero_u = ScalarField::zeros(g, BoundaryY::DirichletZero);
    let mut u_prev: Vec<ScalarField> = match warm_start {
        Some(traj) => {
            if traj.len() != steps + 1 {
                return Err(Error::InvalidArgument(
                    "warm-start trajectory length does not match the step count".into(),
                ));
            }
            traj.to_vec()
        }
        None => vec![zero_u.clone(); steps + 1],
    };
    let mut rho_prev: Option<Vec<ScalarField>> = None;

    let mut diags: Vec<IterateDiagnostics> = Vec::new();
    let mut outcome: Option<PicardOutcome> = None;

    for k in 1..=cfg.max_iters {
        // Transport against the previous velocity iterate.
        let rho_traj_full = transport_solve(
            rho0,
            |n| {
                let u = u_prev[n].clone();
                let w = vertical_velocity(&u).expect("transport velocity is dirichlet_zero");
                (u, w)
            },
            &tparams,
            steps,
        )?;
        let rho_traj = rho_traj_full.densities;

        // Momentum against the fresh density with the lagged velocity.
        let mtraj = momentum_solve(&rho_traj, &u_prev, u0, f, modulation, &cfg.law, &mparams)?;

        // Increment diagnostics.
        let mut sigma_series = Vec::new();
        if let Some(rp) = &rho_prev {
            for n in 0..=steps {
                sigma_series.push(lp_norm(&rho_traj[n].sub(&rp[n]), 2.0)?);
            }
        }
        let mut eta_weighted_series = Vec::with_capacity(steps + 1);
        let mut eta_l2_sup = 0.0f64;
        let mut eta_grad_l2_int = 0.0;
        for n in 0..=steps {
            let eta = mtraj.u[n].sub(&u_prev[n]);
            eta_weighted_series.push(weighted_l2(&rho_traj[n], &eta));
            eta_l2_sup = eta_l2_sup.max(lp_norm(&eta, 2.0)?);
            if n < steps {
                let ge = grad_l2(&eta);
                eta_grad_l2_int += dt * ge * ge;
            }
        }
        let eta_weighted_sup = eta_weighted_series.iter().cloned().fold(0.0, f64::max);

        // Residual-force series B_k and the extended functional ingredients.
        let mut bk_series = Vec::with_capacity(steps);
        let mut bk_integral = 0.0;
        let mut phi_k = PhiKIngredients::default();
        let mut lambda_rho_xx_l2 = 0.0f64;
        for n in 0..steps {
            let t_n = n as f64 * dt;
            let u_n = &mtraj.u[n];
            let u_t = mtraj.u[n + 1].sub(u_n).scale(1.0 / dt);
            let w_n = vertical_velocity(u_n)?;
            let residual_force = f
                .scale(modulation(t_n))
                .add_scaled(-1.0, &u_t)
                .add_scaled(-1.0, &u_n.mul(&u_n.dx()))
                .add_scaled(-1.0, &w_n.mul(&u_n.dy()));
            let mixed = aniso_norm(&residual_force, NormTag::Inf, NormTag::Two);
            let gsup = grad_linf(u_n);
            let b = mixed * mixed + gsup * gsup;
            bk_series.push(b);
            bk_integral += dt * b;
            phi_k.grad_ut_l2 = phi_k.grad_ut_l2.max(grad_l2(&u_t));
        }
        for n in 0..=steps {
            let rho_n = &rho_traj[n];
            let rx = rho_n.dx();
            let ry = rho_n.dy();
            let hess = [rx.dx(), rx.dy(), ry.dx(), ry.dy()];
            let hess_inf = hess.iter().map(|h| h.max_abs()).fold(0.0, f64::max);
            let hess_l2: f64 = hess
                .iter()
                .map(|h| {
                    let v = lp_norm(h, 2.0).unwrap();
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            let third_l2: f64 = {
                let mut s = 0.0;
                for h in &hess {
                    let a = lp_norm(&h.dx(), 2.0).unwrap();
                    let b = lp_norm(&h.dy(), 2.0).unwrap();
                    s += a * a + b * b;
                }
                s.sqrt()
            };
            phi_k.grad_rho_w1inf = phi_k.grad_rho_w1inf.max(grad_linf(rho_n) + hess_inf);
            phi_k.hess_rho_w12 = phi_k.hess_rho_w12.max(hess_l2 + third_l2);
            phi_k.grad_u_l2 = phi_k.grad_u_l2.max(grad_l2(&mtraj.u[n]));
            lambda_rho_xx_l2 =
                lambda_rho_xx_l2.max(cfg.lambda * lp_norm(&rho_n.dxx(), 2.0)?);
        }

        let ratio = if k >= 2 {
            let prev = diags[k - 2].eta_weighted_sup;
            if prev > 0.0 {
                Some(eta_weighted_sup / prev)
            } else {
                None
            }
        } else {
            None
        };

        diags.push(IterateDiagnostics {
            k,
            sigma_l2_sup: if sigma_series.is_empty() {
                None
            } else {
                Some(sigma_series.iter().cloned().fold(0.0, f64::max))
            },
            sigma_series,
            eta_weighted_sup,
            eta_weighted_series,
            eta_l2_sup,
            eta_grad_l2_int,
            bk_integral,
            bk_series,
            ratio,
            phi_k,
            lambda_rho_xx_l2,
        });

        let converged = eta_l2_sup < cfg.tol;
        let times: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();
        outcome = Some(PicardOutcome {
            converged,
            iterations: k,
            times,
            u_traj: mtraj.u.clone(),
            p_traj: mtraj.p.clone(),
            reports: mtraj.reports.clone(),
            rho_traj: rho_traj.clone(),
            diags: diags.clone(),
            compat: compat.clone(),
        });
        if converged {
            break;
        }
        rho_prev = Some(rho_traj);
        u_prev = mtraj.u;
    }

    let mut out = outcome.expect("at least one iterate runs");
    out.diags = diags;
    Ok(out)
}

/// Per-time norm snapshots and blow-up functional series of a finished run.
pub fn norm_series(out: &PicardOutcome) -> Result<(Vec<NormSnapshot>, PhiSeries)> {
    let steps = out.times.len() - 1;
    let dt = if steps > 0 { out.times[1] - out.times[0] } else { 0.0 };
    let mut snaps = Vec::with_capacity(steps + 1);
    let mut series = PhiSeries::default();
    let mut accumulated = 0.0;
    for n in 0..=out.times.len() - 1 {
        let rho = &out.rho_traj[n];
        let u = &out.u_traj[n];
        let p = if n == 0 { &out.compat.p0 } else { &out.p_traj[n - 1] };
        let u_t = if n == 0 {
            None
        } else {
            Some(out.u_traj[n].sub(&out.u_traj[n - 1]).scale(1.0 / dt))
        };
        let energy_residual = if n == 0 {
            0.0
        } else {
            (out.reports[n - 1].energy_lhs - out.reports[n - 1].energy_rhs).abs()
        };
        let snap = NormSnapshot::compute(
            out.times[n],
            rho,
            u,
            p,
            u_t.as_ref(),
            energy_residual,
        )?;
        if let Some(ut) = &u_t {
            let h1 = sobolev_norm(ut, 1)?;
            let h3 = sobolev_norm(u, 3)?;
            let h2p = sobolev_norm(&p.as_field(), 2)?;
            accumulated += dt * (h1 * h1 + h3 * h3 + h2p * h2p);
        }
        let phi = snap.phi();
        let j = crate::norms::j_functional(&snap, accumulated)?;
        series.push(out.times[n], phi, j);
        snaps.push(snap);
    }
    Ok((snaps, series))
}

/// Verdict of the contraction diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionVerdict {
    /// Ratios shrink with k (factorial-type envelope).
    SuperGeometric,
    /// Ratios bounded by a fixed r < 1 beyond the burn-in.
    Geometric,
    NonContracting,
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub verdict: ContractionVerdict,
    /// max ratio beyond the burn-in (k >= 3).
    pub rate: f64,
    /// Best-fit constants of log(eta_k) = log(C) + (k-1) log(T0) - log((k-1)!).
    pub fit_c: f64,
    pub fit_t0: f64,
    pub fit_rms: f64,
    pub ratios: Vec<f64>,
}

/// Fit the factorial-bound envelope to the per-iterate weighted increments
/// and classify the observed decay.
pub fn contraction_report(diags: &[IterateDiagnostics]) -> Result<ContractionReport> {
    let etas: Vec<f64> = diags
        .iter()
        .map(|d| d.eta_weighted_sup)
        .take_while(|&e| e > 0.0)
        .collect();
    if etas.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "contraction_report needs at least 4 iterates with nonzero increments, got {}",
            etas.len()
        )));
    }
    let ratios: Vec<f64> = etas.windows(2).map(|w| w[1] / w[0]).collect();

    // Least squares of log(eta_k) + log((k-1)!) against (k-1).
    let mut lgamma_acc = 0.0; // log((k-1)!) built incrementally
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, &e) in etas.iter().enumerate() {
        let k = idx + 1;
        if k >= 2 {
            lgamma_acc += ((k - 1) as f64).ln();
        }
        xs.push((k - 1) as f64);
        ys.push(e.ln() + lgamma_acc);
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let fit_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - (intercept + slope * x);
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();

    // Burn-in: classify on ratios from k = 3 on (ratio index 1).
    let tail = &ratios[1.min(ratios.len() - 1)..];
    let rate = tail.iter().cloned().fold(0.0, f64::max);
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let verdict = if rate < 1.0 && non_increasing && tail.len() >= 2 && tail[tail.len() - 1] <= 0.5 * tail[0]
    {
        ContractionVerdict::SuperGeometric
    } else if rate < 1.0 {
        ContractionVerdict::Geometric
    } else {
        ContractionVerdict::NonContracting
    };

    Ok(ContractionReport {
        verdict,
        rate,
        fit_c: intercept.exp(),
        fit_t0: slope.exp(),
        fit_rms,
        ratios,
    })
}

/// Empirical constants of the density-increment bound: the squared sup of the
/// density increment of iterate k+1 against the time integral of the squared
/// weighted velocity increment of iterate k.
#[derive(Debug, Clone)]
pub struct SigmaReport {
    /// (k, c_sigma(k)); None marks a degenerate (converged) denominator.
    pub constants: Vec<(usize, Option<f64>)>,
}

pub fn sigma_bound_check(diags: &[IterateDiagnostics], dt: f64) -> SigmaReport {
    let mut constants = Vec::new();
    for k in 1..diags.len() {
        // diags[k] is iterate k+1 and carries sigma^(k+1); diags[k-1] is
        // iterate k and carries eta^k.
        let sigma_sup2 = diags[k]
            .sigma_series
            .iter()
            .cloned()
            .fold(0.0f64, f64::max)
            .powi(2);
        let denom: f64 = diags[k - 1]
            .eta_weighted_series
            .iter()
            .map(|e| e * e * dt)
            .sum();
        let c = if denom < 1e-30 { None } else { Some(sigma_sup2 / denom) };
        constants.push((diags[k - 1].k, c));
    }
    SigmaReport { constants }
}

/// Pointwise floor followed by 3 Jacobi smoothing sweeps in x. Preserves the
/// floor and the global maximum (each sweep is a convex combination).
pub fn mollify_density(rho0_raw: &ScalarField, delta: f64) -> ScalarField {
    let g = rho0_raw.grid;
    let mut rho = rho0_raw.map(rho0_raw.bc_y, |r| r.max(delta));
    for _ in 0..3 {
        let mut next = ScalarField::zeros(g, rho.bc_y);
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            let im = (i + g.nx - 1) % g.nx;
            for j in 0..=g.ny {
                next.set(
                    i,
                    j,
                    0.25 * (rho.at(im, j) + 2.0 * rho.at(i, j) + rho.at(ip, j)),
                );
            }
        }
        rho = next;
    }
    rho
}

/// Result table of the two-level continuation.
#[derive(Debug, Clone)]
pub struct ContinuationTable {
    pub levels: Vec<(f64, f64)>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
    /// sup-in-time L2 differences between successive level solutions.
    pub diffs: Vec<f64>,
    /// sup-in-time Phi per level.
    pub phi_sup: Vec<f64>,
}

/// Run the continuation over a sequence of (delta, lambda) levels formed by
/// zipping the two lists (the shorter one is extended with its last entry).
/// Each level mollifies the raw density with its own floor and warm-starts
/// from the previous level's converged trajectory. A failed level truncates
/// the table (partial results are returned).
pub fn two_level_continuation(
    rho0_raw: &ScalarField,
    u0: &ScalarField,
    f: &ScalarField,
    cfg: &PicardConfig,
    delta_list: &[f64],
    lambda_list: &[f64],
) -> Result<ContinuationTable> {
    if delta_list.is_empty() || lambda_list.is_empty() {
        return Err(Error::InvalidArgument("continuation needs non-empty level lists".into()));
    }
    for list in [delta_list, lambda_list] {
        if list.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "continuation level lists must be non-increasing".into(),
            ));
        }
    }
    let n_levels = delta_list.len().max(lambda_list.len());
    let level = |list: &[f64], i: usize| list[i.min(list.len() - 1)];

    let mut table = ContinuationTable {
        levels: Vec::new(),
        converged: Vec::new(),
        iterations: Vec::new(),
        diffs: Vec::new(),
        phi_sup: Vec::new(),
    };
    let mut prev_traj: Option<Vec<ScalarField>> = None;
    for i in 0..n_levels {
        let delta = level(delta_list, i);
        let lambda = level(lambda_list, i);
        let mut lcfg = cfg.clone();
        lcfg.delta = delta;
        lcfg.lambda = lambda;
        let rho0 = mollify_density(rho0_raw, delta);
        let run = picard_iterate(&rho0, u0, f, &|_| 1.0, &lcfg, prev_traj.as_deref());
        let out = match run {
            Ok(o) => o,
            Err(_) if !table.levels.is_empty() => break,
            Err(e) => return Err(e),
        };
        table.levels.push((delta, lambda));
        table.converged.push(out.converged);
        table.iterations.push(out.iterations);
        let phi_sup = out
            .rho_traj
            .iter()
            .zip(&out.u_traj)
            .map(|(r, u)| crate::norms::phi_functional(r, u))
            .fold(0.0, f64::max);
        table.phi_sup.push(phi_sup);
        if let Some(prev) = &prev_traj {
            let mut d = 0.0f64;
            for n in 0..out.u_traj.len() {
                d = d.max(lp_norm(&out.u_traj[n].sub(&prev[n]), 2.0)?);
            }
            table.diffs.push(d);
        }
        if !out.converged {
            break;
        }
        prev_traj = Some(out.u_traj);
    }
    Ok(table)
}

/// Two-run stability experiment: solve from two data sets and track the
/// combined squared distance E(t) together with the accumulated exponential
/// rate of its bound.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub e_series: Vec<f64>,
    /// Accumulated rate integral int_0^t (1 + |grad(f - u_t)|^2 + |u|_H3^2).
    pub rate_integral: Vec<f64>,
    /// Least-squares fit of log(E(t)/E(0)) = c * rate_integral(t); None when
    /// E vanishes identically (identical data).
    pub c_fit: Option<f64>,
    /// |u0_a - u0_b|_L2 + |rho0_a - rho0_b|_L2.
    pub epsilon: f64,
}

pub fn stability_experiment(
    rho0_a: &ScalarField,
    u0_a: &ScalarField,
    rho0_b: &ScalarField,
    u0_b: &ScalarField,
    f: &ScalarField,
    cfg: &PicardConfig,
) -> Result<StabilityReport> {
    let out_a = picard_iterate(rho0_a, u0_a, f, &|_| 1.0, cfg, None)?;
    let out_b = picard_iterate(rho0_b, u0_b, f, &|_| 1.0, cfg, None)?;
    if !out_a.converged || !out_b.converged {
        return Err(Error::NonConvergence(
            "stability experiment requires both runs to converge".into(),
        ));
    }
    let steps = out_a.times.len() - 1;
    let dt = out_a.times[1] - out_a.times[0];
    let epsilon = lp_norm(&u0_a.sub(u0_b), 2.0)? + lp_norm(&rho0_a.sub(rho0_b), 2.0)?;

    let mut e_series = Vec::with_capacity(steps + 1);
    let mut rate_integral = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    for n in 0..=steps {
        let drho = out_a.rho_traj[n].sub(&out_b.rho_traj[n]);
        let du = out_a.u_traj[n].sub(&out_b.u_traj[n]);
        let e = lp_norm(&drho, 2.0)?.powi(2) + weighted_l2(&out_a.rho_traj[n], &du).powi(2);
        e_series.push(e);
        rate_integral.push(acc);
        if n < steps {
            let u_t = out_a.u_traj[n + 1].sub(&out_a.u_traj[n]).scale(1.0 / dt);
            let gfu = grad_l2(&f.sub(&u_t));
            let h3 = sobolev_norm(&out_a.u_traj[n], 3)?;
            acc += dt * (1.0 + gfu * gfu + h3 * h3);
        }
    }
    let c_fit = if e_series[0] > 0.0 {
        let mut num = 0.0;
        let mut den = 0.0;
        for n in 1..=steps {
            if e_series[n] > 0.0 && rate_integral[n] > 0.0 {
                let y = (e_series[n] / e_series[0]).ln();
                num += y * rate_integral[n];
                den += rate_integral[n] * rate_integral[n];
            }
        }
        if den > 0.0 {
            Some(num / den)
        } else {
            None
        }
    } else {
        None
    };
    Ok(StabilityReport { times: out_a.times.clone(), e_series, rate_integral, c_fit, epsilon })
}
