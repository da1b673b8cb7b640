//! Semi-implicit time stepping for the linearized momentum equation with a
//! known transport velocity v: diffusion and pressure are treated implicitly
//! through the saddle-point kernel with a rho/dt shift, advection explicitly
//! with the lagged velocity. Includes the compatibility-condition
//! initialization (initial pressure and acceleration) and the per-step
//! discrete kinetic-energy ledger.

use crate::error::{Error, Result};
use crate::grid::{BoundaryY, Grid, PressureProfile, ScalarField};
use crate::hstokes::{
    assemble, dissipation, FaceAveraging, ViscosityLaw,
};
use crate::transport::vertical_velocity;
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};

/// Vacuum regularization used only in divisions by the density.
pub const EPS_RHO: f64 = 1e-10;

/// Initial pressure, acceleration, and the compatibility residual.
#[derive(Debug, Clone)]
pub struct CompatibilityData {
    pub p0: PressureProfile,
    pub v1: ScalarField,
    /// L2 norm of rho0*V1 minus the momentum-balance bracket, over nodes with
    /// rho0 >= the vacuum regularization.
    pub residual: f64,
    /// Number of nodes flagged as vacuum (rho0 below the regularization),
    /// where V1 is defined through the regularized division.
    pub vacuum_nodes: usize,
    /// max over x of |d/dx int_0^1 V1 dy|.
    pub constraint_residual: f64,
}

/// The momentum-balance bracket of the initial data, everything except the
/// pressure gradient: -rho0 u0 du0/dx + rho0 (int_0^y du0/dx) du0/dy
/// + div(mu(rho0) grad u0) + rho0 f0.
fn initial_bracket(
    rho0: &ScalarField,
    u0: &ScalarField,
    f0: &ScalarField,
    law: &ViscosityLaw,
    avg: FaceAveraging,
) -> Result<ScalarField> {
    let mu = law.eval_field(rho0)?;
    let diff = crate::hstokes::apply_lmu(&mu, None, u0, avg).scale(-1.0);
    let ux = u0.dx();
    let uy = u0.dy();
    let w0 = vertical_velocity(u0)?;
    let adv = u0.mul(&ux).add_scaled(1.0, &w0.mul(&uy));
    Ok(rho0
        .mul(&f0.add_scaled(-1.0, &adv))
        .add_scaled(1.0, &diff))
}

/// Solve the 1D periodic projection problem for the initial pressure: with
/// a(x) = int_0^1 dy / max(rho0, eps) and b(x) = int_0^1 bracket / max(rho0,
/// eps) dy, find the mean-zero profile P0 with d/dx(a dP0/dx) = db/dx, so
/// that the initial acceleration satisfies the differentiated constraint.
/// Like the full saddle-point system, the centered stencil decouples the two
/// x-sublattices, so the 1D system is bordered with plain and alternating
/// gauge rows and two multipliers.
pub fn compute_initial_pressure(
    rho0: &ScalarField,
    u0: &ScalarField,
    f0: &ScalarField,
    law: &ViscosityLaw,
) -> Result<PressureProfile> {
    let g = rho0.grid;
    if u0.bc_y != BoundaryY::DirichletZero {
        return Err(Error::InvalidArgument("initial velocity must be dirichlet_zero".into()));
    }
    if crate::hstokes::constraint_residual(u0) > 1e-8 {
        return Err(Error::InvalidArgument(
            "initial velocity violates the y-integral constraint".into(),
        ));
    }
    let bracket = initial_bracket(rho0, u0, f0, law, FaceAveraging::Arithmetic)?;
    let inv_rho = rho0.map(BoundaryY::Free, |r| 1.0 / r.max(EPS_RHO));
    let a = inv_rho.integral_y();
    let b = bracket.mul(&inv_rho).integral_y();

    let nx = g.nx;
    let n = nx + 2;
    let c = 1.0 / (2.0 * g.hx);
    let mut trip: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(5 * nx + 4 * nx);
    let mut rhs = faer::Mat::<f64>::zeros(n, 1);
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        let ipp = (i + 2) % nx;
        let imm = (i + nx - 2) % nx;
        // d/dx(a dP/dx) at node i with centered stencils.
        trip.push(Triplet::new(i, ipp, c * c * a[ip]));
        trip.push(Triplet::new(i, i, -c * c * (a[ip] + a[im])));
        trip.push(Triplet::new(i, imm, c * c * a[im]));
        trip.push(Triplet::new(i, nx, 1.0));
        trip.push(Triplet::new(i, nx + 1, if i % 2 == 0 { 1.0 } else { -1.0 }));
        rhs[(i, 0)] = c * (b[ip] - b[im]);
        // Gauge rows.
        trip.push(Triplet::new(nx, i, 1.0));
        trip.push(Triplet::new(nx + 1, i, if i % 2 == 0 { 1.0 } else { -1.0 }));
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::LinearSolve(format!("initial-pressure assembly failed: {e:?}")))?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::LinearSolve(format!("initial-pressure factorization failed: {e:?}")))?;
    let x = lu.solve(&rhs);
    PressureProfile::from_values(g, (0..nx).map(|i| x[(i, 0)]).collect())
}

/// Assemble the compatibility data: the initial acceleration V1 from the
/// momentum balance at t = 0 with the given initial pressure.
pub fn compatibility_v1(
    rho0: &ScalarField,
    u0: &ScalarField,
    p0: &PressureProfile,
    f0: &ScalarField,
    law: &ViscosityLaw,
) -> Result<CompatibilityData> {
    let g = rho0.grid;
    let bracket = initial_bracket(rho0, u0, f0, law, FaceAveraging::Arithmetic)?;
    let dp = p0.dx();
    let mut num = ScalarField::zeros(g, BoundaryY::Free);
    for i in 0..g.nx {
        for j in 0..=g.ny {
            num.set(i, j, bracket.at(i, j) - dp[i]);
        }
    }
    let mut v1 = ScalarField::zeros(g, BoundaryY::Free);
    let mut vacuum_nodes = 0usize;
    let mut res2 = 0.0;
    for i in 0..g.nx {
        for j in 0..=g.ny {
            let r = rho0.at(i, j);
            let v = num.at(i, j) / r.max(EPS_RHO);
            v1.set(i, j, v);
            if r < EPS_RHO {
                vacuum_nodes += 1;
            } else {
                let d = r * v - num.at(i, j);
                res2 += g.y_weight(j) * d * d;
            }
        }
    }
    let residual = (res2 * g.hx).sqrt();
    let constraint_residual = {
        let col = v1.integral_y();
        let mut m = 0.0f64;
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            let im = (i + g.nx - 1) % g.nx;
            m = m.max(((col[ip] - col[im]) / (2.0 * g.hx)).abs());
        }
        m
    };
    Ok(CompatibilityData { p0: p0.clone(), v1, residual, vacuum_nodes, constraint_residual })
}

/// Per-step energy ledger record.
#[derive(Debug, Clone, Copy)]
pub struct MomentumStepReport {
    pub t: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub sqrt_rho_ut_l2: f64,
    pub constraint_residual: f64,
    pub kinetic_energy: f64,
}

/// Parameters of a momentum step beyond the per-step fields.
#[derive(Debug, Clone, Copy)]
pub struct MomentumParams {
    pub dt: f64,
    /// x-diffusion coefficient of the density regularization; enters only the
    /// transport-residual term of the energy ledger.
    pub lambda: f64,
    pub avg: FaceAveraging,
}

fn kinetic_energy(rho: &ScalarField, u: &ScalarField) -> f64 {
    rho.zip(u, BoundaryY::Free, |r, v| r.max(0.0) * v * v).integral_domain()
}

/// One backward-Euler step of the linearized momentum equation. `rho` is the
/// density at the current (old) time level; `rho_next`, when available, is
/// the transported density at the new level and feeds the viscosity-change
/// correction of the energy ledger.
pub fn momentum_step(
    rho: &ScalarField,
    rho_next: Option<&ScalarField>,
    v: &ScalarField,
    u_old: &ScalarField,
    f: &ScalarField,
    law: &ViscosityLaw,
    params: &MomentumParams,
    t_old: f64,
) -> Result<(ScalarField, PressureProfile, MomentumStepReport)> {
    let g = rho.grid;
    let dt = params.dt;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let w_v = vertical_velocity(v)?;
    let cfl = dt * (v.max_abs() / g.hx + w_v.max_abs() / g.hy);
    if cfl > 1.0 {
        return Err(Error::CflViolation(format!(
            "momentum advection CFL number {cfl:.3} exceeds 1"
        )));
    }

    let mu = law.eval_field(rho)?;
    let shift = rho.scale(1.0 / dt);
    let op = assemble(&mu, Some(&shift), params.avg, law.floor)?;

    // Explicit advection with the lagged transport velocity.
    let adv = v.mul(&u_old.dx()).add_scaled(1.0, &w_v.mul(&u_old.dy()));
    let rhs = rho.mul(&f.add_scaled(-1.0, &adv)).add_scaled(1.0, &shift.mul(u_old));
    let sol = op.solve(&rhs)?;
    let u_new = sol.u;
    let p_new = sol.p;

    // Energy ledger. u_t is the backward difference; the viscosity at the new
    // level (when the transported density is known) enters both sides through
    // the same discrete viscosity-change term, mirroring the substitution of
    // the density equation into d/dt int mu |grad u|^2.
    let u_t = u_new.sub(u_old).scale(1.0 / dt);
    let sqrt_rho_ut_l2 = kinetic_energy(rho, &u_t).max(0.0).sqrt();

    let mu_new = match rho_next {
        Some(rn) => {
            // mu(rho^{n+1}) approximated through the transport residual:
            // mu + mu'(rho) * (rho_next - rho), the discrete counterpart of
            // mu_t = mu'(rho) rho_t.
            let dmu = rho.map(BoundaryY::Free, |r| law.derivative(r));
            mu.add_scaled(1.0, &dmu.mul(&rn.sub(rho)))
        }
        None => mu.clone(),
    };
    let d_new = dissipation(&mu_new, &u_new, params.avg);
    let d_old = dissipation(&mu, u_old, params.avg);
    let energy_lhs = sqrt_rho_ut_l2 * sqrt_rho_ut_l2 + (d_new - d_old) / (2.0 * dt);

    let mut rhs_work = 0.0;
    for i in 0..g.nx {
        for j in 1..g.ny {
            rhs_work += (rho.at(i, j) * (f.at(i, j) - adv.at(i, j))) * u_t.at(i, j) * g.hy;
        }
    }
    rhs_work *= g.hx;
    // Viscosity-change correction, in the same face form as the dissipation
    // so the ledger defect is first order in dt.
    let mu_change = mu_new.sub(&mu);
    let correction = dissipation(&mu_change, &u_new, params.avg) / (2.0 * dt);
    let energy_rhs = rhs_work + correction;

    let report = MomentumStepReport {
        t: t_old + dt,
        energy_lhs,
        energy_rhs,
        sqrt_rho_ut_l2,
        constraint_residual: sol.constraint_residual,
        kinetic_energy: kinetic_energy(rho, &u_new),
    };
    Ok((u_new, p_new, report))
}

/// Momentum trajectory with accumulated diagnostics.
#[derive(Debug, Clone)]
pub struct MomentumTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<ScalarField>,
    pub p: Vec<PressureProfile>,
    pub reports: Vec<MomentumStepReport>,
    /// Running integral of |sqrt(rho) u_t|_L2^2.
    pub ut_integral: f64,
    /// sup over time levels of |grad u|_L2.
    pub sup_grad_u: f64,
}

/// March the momentum equation against known density and transport-velocity
/// trajectories (aligned on the same time levels, length steps + 1). The
/// forcing is separable: f(t, x, y) = modulation(t) * f(x, y).
pub fn momentum_solve(
    rho_traj: &[ScalarField],
    v_traj: &[ScalarField],
    u0: &ScalarField,
    f: &ScalarField,
    modulation: impl Fn(f64) -> f64,
    law: &ViscosityLaw,
    params: &MomentumParams,
) -> Result<MomentumTrajectory> {
    if rho_traj.len() != v_traj.len() || rho_traj.is_empty() {
        return Err(Error::InvalidArgument(
            "density and velocity trajectories must be non-empty and aligned".into(),
        ));
    }
    let steps = rho_traj.len() - 1;
    let dt = params.dt;
    let mut traj = MomentumTrajectory {
        times: vec![0.0],
        u: vec![u0.clone()],
        p: Vec::new(),
        reports: Vec::new(),
        ut_integral: 0.0,
        sup_grad_u: crate::norms::grad_l2(u0),
    };
    let mut u = u0.clone();
    for n in 0..steps {
        let t_old = n as f64 * dt;
        let f_n = f.scale(modulation(t_old));
        let (u_new, p_new, report) = momentum_step(
            &rho_traj[n],
            Some(&rho_traj[n + 1]),
            &v_traj[n],
            &u,
            &f_n,
            law,
            params,
            t_old,
        )?;
        traj.ut_integral += dt * report.sqrt_rho_ut_l2 * report.sqrt_rho_ut_l2;
        traj.sup_grad_u = traj.sup_grad_u.max(crate::norms::grad_l2(&u_new));
        traj.times.push(t_old + dt);
        traj.u.push(u_new.clone());
        traj.p.push(p_new);
        traj.reports.push(report);
        u = u_new;
    }
    Ok(traj)
}

/// Helper for building constant-in-time trajectories in tests and drivers.
pub fn constant_trajectory(field: &ScalarField, steps: usize) -> Vec<ScalarField> {
    vec![field.clone(); steps + 1]
}

/// Grid accessor shared by driver code.
pub fn grid_of(traj: &MomentumTrajectory) -> Grid {
    traj.u[0].grid
}
