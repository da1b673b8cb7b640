//! Run configuration: TOML parsing with strict unknown-key rejection,
//! documented defaults, and the preset catalog of initial data and forcings.
//!
//! Defaults: `time.dt` is derived from a unit-velocity CFL estimate when
//! omitted, `solver.tol` defaults to 1e-8, `monitor.threshold` to 1e6,
//! `params.lambda` to 1e-3, `params.delta` to 0.1, and the viscosity law to
//! the constant 1.

use crate::error::{Error, Result};
use crate::grid::{BoundaryY, Grid, PressureProfile, ScalarField};
use crate::hstokes::{FaceAveraging, LawKind, MmsCase, ViscosityLaw};
use serde::Deserialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSec {
    l: f64,
    nx: usize,
    ny: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TimeSec {
    t_final: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamsSec {
    lambda: Option<f64>,
    delta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LawSec {
    kind: Option<String>,
    value: Option<f64>,
    a0: Option<f64>,
    a1: Option<f64>,
    a2: Option<f64>,
    rho: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
    floor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct InitialSec {
    preset: Option<String>,
    path: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ForcingSec {
    preset: Option<String>,
    path: Option<String>,
    amplitude: Option<f64>,
    /// Separable time factor: "constant", "ramp", or "sinusoid".
    modulation: Option<String>,
    /// Ramp length or sinusoid frequency, depending on the modulation.
    modulation_scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSec {
    dir: Option<String>,
    /// Write a field snapshot every this many steps (0 disables).
    snapshot_cadence: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSec {
    tol: Option<f64>,
    max_iters: Option<usize>,
    /// "direct" is the only supported linear-solver mode.
    mode: Option<String>,
    /// "arithmetic" or "harmonic" viscosity face averaging.
    face_averaging: Option<String>,
    cfl_guard: Option<bool>,
    /// Fixed-point tolerance of the scaled-pressure cross-check path.
    ptilde_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MonitorSec {
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MmsSec {
    case: Option<String>,
    levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: GridSec,
    #[serde(default)]
    time: TimeSec,
    #[serde(default)]
    params: ParamsSec,
    #[serde(default)]
    law: LawSec,
    #[serde(default)]
    initial: InitialSec,
    #[serde(default)]
    forcing: ForcingSec,
    #[serde(default)]
    output: OutputSec,
    #[serde(default)]
    solver: SolverSec,
    #[serde(default)]
    monitor: MonitorSec,
    #[serde(default)]
    mms: MmsSec,
}

/// Time factor of the separable forcing g(t) * F(x, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    Constant,
    /// min(t / t1, 1).
    Ramp { t1: f64 },
    /// cos(2 pi freq t).
    Sinusoid { freq: f64 },
}

impl Modulation {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Modulation::Constant => 1.0,
            Modulation::Ramp { t1 } => (t / t1).min(1.0),
            Modulation::Sinusoid { freq } => (2.0 * PI * freq * t).cos(),
        }
    }
}

/// Source of a field: a named preset or a snapshot file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldSource {
    Preset(String),
    Path(String),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Grid,
    pub t_final: f64,
    pub dt: f64,
    pub lambda: f64,
    pub delta: f64,
    pub law: ViscosityLaw,
    pub initial: FieldSource,
    pub forcing: FieldSource,
    pub forcing_amplitude: f64,
    pub modulation: Modulation,
    pub out_dir: String,
    pub snapshot_cadence: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub avg: FaceAveraging,
    pub cfl_guard: bool,
    pub ptilde_tol: f64,
    pub threshold: f64,
    pub mms_case: String,
    pub mms_levels: Vec<usize>,
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
    }
    Ok(v)
}

fn non_negative(v: f64, key: &str) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::Config(format!("`{key}` must be non-negative, got {v}")));
    }
    Ok(v)
}

fn resolve_law(sec: &LawSec) -> Result<ViscosityLaw> {
    let kind_name = sec.kind.as_deref().unwrap_or("constant");
    let kind = match kind_name {
        "constant" => LawKind::Constant(sec.value.unwrap_or(1.0)),
        "affine" => LawKind::Affine {
            a0: sec.a0.ok_or_else(|| Error::Config("`law.a0` required for affine law".into()))?,
            a1: sec.a1.ok_or_else(|| Error::Config("`law.a1` required for affine law".into()))?,
        },
        "quadratic" => LawKind::Quadratic {
            a0: sec.a0.unwrap_or(0.0),
            a1: sec.a1.unwrap_or(0.0),
            a2: sec.a2.unwrap_or(0.0),
        },
        "table" => LawKind::Table {
            rho: sec
                .rho
                .clone()
                .ok_or_else(|| Error::Config("`law.rho` required for table law".into()))?,
            mu: sec
                .mu
                .clone()
                .ok_or_else(|| Error::Config("`law.mu` required for table law".into()))?,
        },
        other => {
            return Err(Error::Config(format!(
                "`law.kind` must be constant|affine|quadratic|table, got '{other}'"
            )))
        }
    };
    let floor = match (&kind, sec.floor) {
        (_, Some(fl)) => positive(fl, "law.floor")?,
        (LawKind::Constant(v), None) => 0.5 * v,
        (_, None) => return Err(Error::Config("`law.floor` required for non-constant laws".into())),
    };
    ViscosityLaw::new(kind, floor).map_err(|e| Error::Config(format!("law: {e}")))
}

fn resolve_source(sec_preset: &Option<String>, sec_path: &Option<String>, section: &str) -> Result<FieldSource> {
    match (sec_preset, sec_path) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "`{section}` must set either `preset` or `path`, not both"
        ))),
        (Some(p), None) => Ok(FieldSource::Preset(p.clone())),
        (None, Some(p)) => Ok(FieldSource::Path(p.clone())),
        (None, None) => Ok(FieldSource::Preset("uniform".into())),
    }
}

/// Parse and validate a TOML run configuration. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;

    let grid = Grid::new(raw.grid.l, raw.grid.nx, raw.grid.ny)
        .map_err(|e| Error::Config(format!("grid: {e}")))?;

    let lambda = non_negative(raw.params.lambda.unwrap_or(1e-3), "params.lambda")?;
    let delta = non_negative(raw.params.delta.unwrap_or(0.1), "params.delta")?;
    let law = resolve_law(&raw.law)?;

    let t_final = positive(raw.time.t_final.unwrap_or(0.1), "time.t_final")?;
    // Default dt from a unit-velocity CFL estimate with the diffusion term.
    let dt_default = 0.5 / (1.0 / grid.hx + 1.0 / grid.hy + 2.0 * lambda / (grid.hx * grid.hx));
    let dt = positive(raw.time.dt.unwrap_or(dt_default.min(t_final)), "time.dt")?;
    if dt > t_final {
        return Err(Error::Config(format!(
            "`time.dt` ({dt}) must not exceed `time.t_final` ({t_final})"
        )));
    }

    let initial = resolve_source(&raw.initial.preset, &raw.initial.path, "initial")?;
    let forcing = match (&raw.forcing.preset, &raw.forcing.path) {
        (None, None) => FieldSource::Preset("zero".into()),
        _ => resolve_source(&raw.forcing.preset, &raw.forcing.path, "forcing")?,
    };
    let forcing_amplitude = raw.forcing.amplitude.unwrap_or(1.0);
    let modulation = match raw.forcing.modulation.as_deref().unwrap_or("constant") {
        "constant" => Modulation::Constant,
        "ramp" => Modulation::Ramp {
            t1: positive(raw.forcing.modulation_scale.unwrap_or(t_final), "forcing.modulation_scale")?,
        },
        "sinusoid" => Modulation::Sinusoid {
            freq: positive(raw.forcing.modulation_scale.unwrap_or(1.0), "forcing.modulation_scale")?,
        },
        other => {
            return Err(Error::Config(format!(
                "`forcing.modulation` must be constant|ramp|sinusoid, got '{other}'"
            )))
        }
    };

    let mode = raw.solver.mode.as_deref().unwrap_or("direct");
    if mode != "direct" {
        return Err(Error::Config(format!(
            "`solver.mode` supports only 'direct', got '{mode}'"
        )));
    }
    let avg = match raw.solver.face_averaging.as_deref().unwrap_or("arithmetic") {
        "arithmetic" => FaceAveraging::Arithmetic,
        "harmonic" => FaceAveraging::Harmonic,
        other => {
            return Err(Error::Config(format!(
                "`solver.face_averaging` must be arithmetic|harmonic, got '{other}'"
            )))
        }
    };

    let threshold = raw.monitor.threshold.unwrap_or(1e6);
    if !(threshold > 1.0) {
        return Err(Error::Config(format!(
            "`monitor.threshold` must exceed 1, got {threshold}"
        )));
    }

    let cfg = RunConfig {
        grid,
        t_final,
        dt,
        lambda,
        delta,
        law,
        initial,
        forcing,
        forcing_amplitude,
        modulation,
        out_dir: raw.output.dir.unwrap_or_else(|| "out".into()),
        snapshot_cadence: raw.output.snapshot_cadence.unwrap_or(0),
        tol: positive(raw.solver.tol.unwrap_or(1e-8), "solver.tol")?,
        max_iters: raw.solver.max_iters.unwrap_or(20).max(2),
        avg,
        cfl_guard: raw.solver.cfl_guard.unwrap_or(true),
        ptilde_tol: positive(raw.solver.ptilde_tol.unwrap_or(1e-10), "solver.ptilde_tol")?,
        threshold,
        mms_case: raw.mms.case.unwrap_or_else(|| "constant-mu".into()),
        mms_levels: raw.mms.levels.unwrap_or_else(|| vec![16, 32, 64]),
    };
    Ok(cfg)
}

/// Initial data resolved from a preset: density, velocity, and the nominal
/// density floor below which the catalog entry is not meaningful.
pub struct InitialPreset {
    pub rho0: ScalarField,
    pub u0: ScalarField,
}

/// Resolve an initial-data preset on the given grid.
pub fn preset_initial(id: &str, grid: Grid) -> Result<InitialPreset> {
    let uniform_rho = |_: f64, _: f64| 1.0;
    let stratified = |_: f64, y: f64| 1.0 + 0.5 * (PI * y).cos();
    let shear = |x: f64, y: f64| (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
    let vacuum = |x: f64, _: f64| (2.0 * PI * x).sin().max(0.0).powi(2);
    let zero_u = ScalarField::zeros(grid, BoundaryY::DirichletZero);
    match id {
        "uniform" => Ok(InitialPreset {
            rho0: ScalarField::sample(grid, BoundaryY::Free, uniform_rho)?,
            u0: zero_u,
        }),
        "stratified" => Ok(InitialPreset {
            rho0: ScalarField::sample(grid, BoundaryY::Free, stratified)?,
            u0: zero_u,
        }),
        "shear" => Ok(InitialPreset {
            rho0: ScalarField::sample(grid, BoundaryY::Free, stratified)?,
            u0: ScalarField::sample(grid, BoundaryY::DirichletZero, shear)?,
        }),
        "vacuum-band" => Ok(InitialPreset {
            rho0: ScalarField::sample(grid, BoundaryY::Free, vacuum)?,
            u0: zero_u,
        }),
        "mms-steady" => {
            let case = MmsCase::variable_mu();
            Ok(InitialPreset {
                rho0: ScalarField::sample(grid, BoundaryY::Free, |x, y| {
                    // Shifted above the law floor; the manufactured density
                    // ranges over [-1, 1].
                    1.0 + 0.5 * (case.rho_exact)(x, y)
                })?,
                u0: ScalarField::sample(grid, BoundaryY::DirichletZero, |x, y| {
                    (case.u_exact)(x, y)
                })?,
            })
        }
        other => Err(Error::Config(format!("unknown initial preset '{other}'"))),
    }
}

/// Resolve a forcing preset on the given grid.
pub fn preset_forcing(id: &str, grid: Grid) -> Result<ScalarField> {
    match id {
        "zero" => Ok(ScalarField::zeros(grid, BoundaryY::Free)),
        // f = -d/dx q with q = cos(2 pi x) / (2 pi): a pure discrete-gradient
        // forcing absorbed by the pressure.
        "gradient-forcing" => {
            let q = PressureProfile::sample(grid, |x| (2.0 * PI * x).cos() / (2.0 * PI))?;
            let dq = q.dx();
            let mut f = ScalarField::zeros(grid, BoundaryY::Free);
            for i in 0..grid.nx {
                for j in 0..=grid.ny {
                    f.set(i, j, -dq[i]);
                }
            }
            Ok(f)
        }
        "mms-steady" => {
            let case = MmsCase::constant_mu();
            let fx = case.forcing_exact.as_ref().expect("constant-mu has analytic forcing");
            ScalarField::sample(grid, BoundaryY::Free, |x, y| fx(x, y))
        }
        other => Err(Error::Config(format!("unknown forcing preset '{other}'"))),
    }
}
