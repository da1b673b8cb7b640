//! Deterministic CSV emission for norm snapshots, blow-up functionals, and
//! per-iterate diagnostics. Values are written with 17 significant digits in
//! scientific notation so that re-encoding is lossless and byte-reproducible.

use crate::error::Result;
use crate::norms::{NormSnapshot, PhiSeries};
use crate::picard::IterateDiagnostics;
use std::fmt::Write as _;
use std::path::Path;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub const NORM_COLUMNS: &[&str] = &[
    "t",
    "l2_u",
    "h1_u",
    "h2_u",
    "h3_u",
    "linf_grad_rho",
    "l2_hess_rho",
    "w1inf_rho",
    "w22_rho",
    "l2_sqrt_rho_ut",
    "h1_p",
    "energy_residual",
    "phi",
    "j",
];

/// Render per-time norm rows. `phi` may carry the matching functional series;
/// rows beyond its length get the recomputed snapshot Phi and a zero J.
pub fn norm_csv(snaps: &[NormSnapshot], phi: Option<&PhiSeries>) -> String {
    let mut out = String::new();
    out.push_str(&NORM_COLUMNS.join(","));
    out.push('\n');
    for (n, s) in snaps.iter().enumerate() {
        let (p, j) = match phi {
            Some(series) if n < series.times.len() => (series.phi[n], series.j[n]),
            _ => (s.phi(), 0.0),
        };
        let row = [
            s.t,
            s.l2_u,
            s.h1_u,
            s.h2_u,
            s.h3_u,
            s.linf_grad_rho,
            s.l2_hess_rho,
            s.w1inf_rho,
            s.w22_rho,
            s.l2_sqrt_rho_ut,
            s.h1_p,
            s.energy_residual,
            p,
            j,
        ];
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt(v));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub const DIAG_COLUMNS: &[&str] = &[
    "k",
    "sigma_l2_sup",
    "eta_weighted_sup",
    "eta_l2_sup",
    "eta_grad_l2_int",
    "bk_integral",
    "ratio",
    "phi_k_total",
    "lambda_rho_xx_l2",
];

/// Render per-iterate diagnostic rows. Undefined entries (the first iterate's
/// density increment and ratio) are emitted as "nan".
pub fn diag_csv(diags: &[IterateDiagnostics]) -> String {
    let mut out = String::new();
    out.push_str(&DIAG_COLUMNS.join(","));
    out.push('\n');
    for d in diags {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}\n",
            d.k,
            fmt(d.sigma_l2_sup.unwrap_or(f64::NAN)),
            fmt(d.eta_weighted_sup),
            fmt(d.eta_l2_sup),
            fmt(d.eta_grad_l2_int),
            fmt(d.bk_integral),
            fmt(d.ratio.unwrap_or(f64::NAN)),
            fmt(d.phi_k.total()),
            fmt(d.lambda_rho_xx_l2),
        );
    }
    out
}

/// Render a generic named-column table of f64 rows.
pub fn table_csv(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt(*v));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}
