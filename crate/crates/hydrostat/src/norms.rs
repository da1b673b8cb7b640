//! Discrete Lebesgue, anisotropic, and Sobolev norms, the diagnostic
//! functionals Phi(t) and J(t), interpolation-inequality spot checks, and the
//! blow-up monitor.

use crate::error::{Error, Result};
use crate::grid::{PressureProfile, ScalarField};

/// L^p norm over the domain; `p = f64::INFINITY` gives the nodal max norm.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidArgument(format!("lp_norm requires p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let g = f.grid;
    let mut acc = 0.0;
    for i in 0..g.nx {
        for j in 0..=g.ny {
            acc += g.y_weight(j) * f.at(i, j).abs().powf(p);
        }
    }
    Ok((acc * g.hx).powf(1.0 / p))
}

/// Inner/outer norm selector for the mixed anisotropic norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormTag {
    Two,
    Inf,
}

/// Mixed norm: inner norm in x per y row, then outer norm in y.
/// Supported pairs (outer in y, inner in x): (2,inf), (inf,2), (inf,inf), (2,2).
pub fn aniso_norm(f: &ScalarField, p_y: NormTag, q_x: NormTag) -> f64 {
    let g = f.grid;
    // Inner norm over x per y row.
    let row_norm: Vec<f64> = (0..=g.ny)
        .map(|j| match q_x {
            NormTag::Inf => (0..g.nx).fold(0.0f64, |m, i| m.max(f.at(i, j).abs())),
            NormTag::Two => {
                let s: f64 = (0..g.nx).map(|i| f.at(i, j) * f.at(i, j)).sum();
                (s * g.hx).sqrt()
            }
        })
        .collect();
    match p_y {
        NormTag::Inf => row_norm.iter().cloned().fold(0.0, f64::max),
        NormTag::Two => {
            let s: f64 = (0..=g.ny).map(|j| g.y_weight(j) * row_norm[j] * row_norm[j]).sum();
            s.sqrt()
        }
    }
}

/// Full H^k norm: square root of the sum of squared L2 norms of all mixed
/// derivatives d_x^a d_y^b f with a + b <= k, composed from the grid stencils.
pub fn sobolev_norm(f: &ScalarField, k: usize) -> Result<f64> {
    if k > 3 {
        return Err(Error::InvalidArgument(format!("sobolev_norm supports k <= 3, got {k}")));
    }
    let mut sum = 0.0;
    for a in 0..=k {
        for b in 0..=(k - a) {
            let mut d = f.clone();
            for _ in 0..a {
                d = d.dx();
            }
            for _ in 0..b {
                d = d.dy();
            }
            let n = lp_norm(&d, 2.0)?;
            sum += n * n;
        }
    }
    Ok(sum.sqrt())
}

/// L2 norm of the gradient vector.
pub fn grad_l2(f: &ScalarField) -> f64 {
    let nx = lp_norm(&f.dx(), 2.0).unwrap();
    let ny = lp_norm(&f.dy(), 2.0).unwrap();
    (nx * nx + ny * ny).sqrt()
}

/// Max-norm of the gradient vector magnitude.
pub fn grad_linf(f: &ScalarField) -> f64 {
    let fx = f.dx();
    let fy = f.dy();
    let g = f.grid;
    let mut m = 0.0f64;
    for i in 0..g.nx {
        for j in 0..=g.ny {
            m = m.max(fx.at(i, j).hypot(fy.at(i, j)));
        }
    }
    m
}

/// Frobenius L2 norm of the Hessian (both mixed entries counted).
pub fn hess_l2(f: &ScalarField) -> f64 {
    let fx = f.dx();
    let fy = f.dy();
    let parts = [fx.dx(), fx.dy(), fy.dx(), fy.dy()];
    let mut sum = 0.0;
    for p in &parts {
        let n = lp_norm(p, 2.0).unwrap();
        sum += n * n;
    }
    sum.sqrt()
}

/// Phi(t) = 1 + |grad rho|_Linf + |hess rho|_L2 + |grad u|_L2.
pub fn phi_functional(rho: &ScalarField, u: &ScalarField) -> f64 {
    1.0 + grad_linf(rho) + hess_l2(rho) + grad_l2(u)
}

/// Per-time-level record of every norm entering the diagnostic functionals.
#[derive(Debug, Clone, Default)]
pub struct NormSnapshot {
    pub t: f64,
    pub l2_u: f64,
    pub h1_u: f64,
    pub h2_u: f64,
    pub h3_u: f64,
    pub linf_grad_rho: f64,
    pub l2_hess_rho: f64,
    pub w1inf_rho: f64,
    pub w22_rho: f64,
    pub l2_sqrt_rho_ut: f64,
    pub h1_p: f64,
    pub energy_residual: f64,
}

impl NormSnapshot {
    /// Assemble a snapshot from the state fields. `u_t` may be absent at the
    /// initial time; the weighted acceleration norm is then zero.
    pub fn compute(
        t: f64,
        rho: &ScalarField,
        u: &ScalarField,
        p: &PressureProfile,
        u_t: Option<&ScalarField>,
        energy_residual: f64,
    ) -> Result<NormSnapshot> {
        let l2_sqrt_rho_ut = match u_t {
            Some(ut) => {
                let w = rho.zip(ut, crate::grid::BoundaryY::Free, |r, a| r.max(0.0) * a * a);
                w.integral_domain().max(0.0).sqrt()
            }
            None => 0.0,
        };
        Ok(NormSnapshot {
            t,
            l2_u: lp_norm(u, 2.0)?,
            h1_u: sobolev_norm(u, 1)?,
            h2_u: sobolev_norm(u, 2)?,
            h3_u: sobolev_norm(u, 3)?,
            linf_grad_rho: grad_linf(rho),
            l2_hess_rho: hess_l2(rho),
            w1inf_rho: lp_norm(rho, f64::INFINITY)? + grad_linf(rho),
            w22_rho: sobolev_norm(rho, 2)?,
            l2_sqrt_rho_ut,
            h1_p: sobolev_norm(&p.as_field(), 1)?,
            energy_residual,
        })
    }

    pub fn phi(&self) -> f64 {
        1.0 + self.linf_grad_rho + self.l2_hess_rho + self.h1_u_seminorm_proxy()
    }

    // Phi uses |grad u|_L2; recover it from the stored full norms.
    fn h1_u_seminorm_proxy(&self) -> f64 {
        (self.h1_u * self.h1_u - self.l2_u * self.l2_u).max(0.0).sqrt()
    }
}

/// J(t) = 1 + |u|_H2 + |P|_H1 + |sqrt(rho) u_t|_L2 + |rho|_W1inf + |rho|_W22
/// plus the accumulated time integral of the higher-order dissipation terms.
pub fn j_functional(snapshot: &NormSnapshot, accumulated: f64) -> Result<f64> {
    if accumulated < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "accumulated integral must be non-negative, got {accumulated}"
        )));
    }
    Ok(1.0
        + snapshot.h2_u
        + snapshot.h1_p
        + snapshot.l2_sqrt_rho_ut
        + snapshot.w1inf_rho
        + snapshot.w22_rho
        + accumulated)
}

/// Time series of the blow-up functionals.
#[derive(Debug, Clone, Default)]
pub struct PhiSeries {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub j: Vec<f64>,
}

impl PhiSeries {
    pub fn push(&mut self, t: f64, phi: f64, j: f64) {
        self.times.push(t);
        self.phi.push(phi);
        self.j.push(j);
    }
}

/// First crossing of the blow-up threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreachRecord {
    pub index: usize,
    pub time: f64,
    pub phi: f64,
}

/// Scan a Phi series for the first value at or above the threshold.
pub fn blowup_monitor(series: &PhiSeries, threshold: f64) -> Result<Option<BreachRecord>> {
    if threshold <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "blow-up threshold must exceed 1, got {threshold}"
        )));
    }
    for (k, &phi) in series.phi.iter().enumerate() {
        if phi >= threshold {
            return Ok(Some(BreachRecord { index: k, time: series.times[k], phi }));
        }
    }
    Ok(None)
}

/// Interpolation-inequality spot check with trial constants C1 = C2 = 1.
#[derive(Debug, Clone, Copy)]
pub struct GnReport {
    /// |f|_L6 over |grad f|^(2/3) |f|^(1/3) + |f|.
    pub ratio_l6: f64,
    /// |f|_{L2_y L^inf_x} over |f_x|^(1/2) |f|^(1/2) + |f|.
    pub ratio_mixed: f64,
    /// True when f is (numerically) zero and the ratios are 0/0.
    pub degenerate: bool,
}

pub fn gn_check(f: &ScalarField) -> GnReport {
    let l2 = lp_norm(f, 2.0).unwrap();
    if l2 < 1e-300 {
        return GnReport { ratio_l6: 0.0, ratio_mixed: 0.0, degenerate: true };
    }
    let l6 = lp_norm(f, 6.0).unwrap();
    let grad = grad_l2(f);
    let fx = lp_norm(&f.dx(), 2.0).unwrap();
    let mixed = aniso_norm(f, NormTag::Two, NormTag::Inf);
    GnReport {
        ratio_l6: l6 / (grad.powf(2.0 / 3.0) * l2.powf(1.0 / 3.0) + l2),
        ratio_mixed: mixed / (fx.sqrt() * l2.sqrt() + l2),
        degenerate: false,
    }
}
