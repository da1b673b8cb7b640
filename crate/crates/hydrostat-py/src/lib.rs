//! Python bindings for the hydrostat solver: grids, fields, norms, the
//! hydrostatic Stokes kernel, the transport step, and the full Picard
//! pipeline driven by a TOML configuration string.

use hydrostat::config::{parse_config, preset_forcing, preset_initial};
use hydrostat::grid::{BoundaryY, Grid as RsGrid, ScalarField};
use hydrostat::hstokes::{assemble, constraint_residual, convergence_study, FaceAveraging, MmsCase};
use hydrostat::norms;
use hydrostat::picard::{mollify_density, norm_series, picard_iterate, PicardConfig};
use hydrostat::transport::{transport_step, vertical_velocity, TransportParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: hydrostat::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_bc(bc: &str) -> PyResult<BoundaryY> {
    match bc {
        "dirichlet_zero" => Ok(BoundaryY::DirichletZero),
        "free" => Ok(BoundaryY::Free),
        other => Err(PyValueError::new_err(format!(
            "boundary must be 'dirichlet_zero' or 'free', got '{other}'"
        ))),
    }
}

/// Uniform channel grid: x-periodic on [0, l), walls at y = 0 and y = 1.
#[pyclass(name = "Grid", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: RsGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(l: f64, nx: usize, ny: usize) -> PyResult<Self> {
        Ok(PyGrid { inner: RsGrid::new(l, nx, ny).map_err(err)? })
    }

    #[getter]
    fn l(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.inner.ny
    }

    #[getter]
    fn hx(&self) -> f64 {
        self.inner.hx
    }

    #[getter]
    fn hy(&self) -> f64 {
        self.inner.hy
    }

    fn __repr__(&self) -> String {
        format!("Grid(l={}, nx={}, ny={})", self.inner.length, self.inner.nx, self.inner.ny)
    }
}

/// Scalar field on the grid nodes, stored row-major as nx blocks of ny+1.
#[pyclass(name = "Field", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: ScalarField,
}

#[pymethods]
impl PyField {
    #[staticmethod]
    fn zeros(grid: PyGrid, bc: &str) -> PyResult<Self> {
        Ok(PyField { inner: ScalarField::zeros(grid.inner, parse_bc(bc)?) })
    }

    #[staticmethod]
    fn from_values(grid: PyGrid, bc: &str, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyField {
            inner: ScalarField::from_values(grid.inner, parse_bc(bc)?, values).map_err(err)?,
        })
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn bc(&self) -> &'static str {
        match self.inner.bc_y {
            BoundaryY::DirichletZero => "dirichlet_zero",
            BoundaryY::Free => "free",
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.inner.at(i, j)
    }

    fn min(&self) -> f64 {
        self.inner.min()
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn dx(&self) -> PyField {
        PyField { inner: self.inner.dx() }
    }

    fn dy(&self) -> PyField {
        PyField { inner: self.inner.dy() }
    }

    fn sub(&self, other: &PyField) -> PyField {
        PyField { inner: self.inner.sub(&other.inner) }
    }

    fn add_scaled(&self, alpha: f64, other: &PyField) -> PyField {
        PyField { inner: self.inner.add_scaled(alpha, &other.inner) }
    }

    fn scale(&self, alpha: f64) -> PyField {
        PyField { inner: self.inner.scale(alpha) }
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(nx={}, ny={}, bc={})",
            self.inner.grid.nx,
            self.inner.grid.ny,
            self.bc()
        )
    }
}

/// Discrete Lp norm of a field (p = inf for the sup norm).
#[pyfunction]
fn lp_norm(f: &PyField, p: f64) -> PyResult<f64> {
    norms::lp_norm(&f.inner, p).map_err(err)
}

/// Full H^k Sobolev norm, k <= 3.
#[pyfunction]
fn sobolev_norm(f: &PyField, k: usize) -> PyResult<f64> {
    norms::sobolev_norm(&f.inner, k).map_err(err)
}

/// L2 norm of the discrete gradient.
#[pyfunction]
fn grad_l2(f: &PyField) -> f64 {
    norms::grad_l2(&f.inner)
}

/// Blow-up functional 1 + |grad rho|_inf + |hess rho|_L2 + |grad u|_L2.
#[pyfunction]
fn phi_functional(rho: &PyField, u: &PyField) -> f64 {
    norms::phi_functional(&rho.inner, &u.inner)
}

/// Residual of the hydrostatic constraint max_x |d/dx int_0^1 u dy|.
#[pyfunction(name = "constraint_residual")]
fn py_constraint_residual(u: &PyField) -> f64 {
    constraint_residual(&u.inner)
}

/// Vertical velocity w = -int_0^y du/dx recovered from the constraint.
#[pyfunction(name = "vertical_velocity")]
fn py_vertical_velocity(u: &PyField) -> PyResult<PyField> {
    Ok(PyField { inner: vertical_velocity(&u.inner).map_err(err)? })
}

/// Solve the hydrostatic Stokes system for a nodal viscosity field and
/// forcing. Returns (u, p, constraint_residual, linsolve_residual).
#[pyfunction]
#[pyo3(signature = (mu, f, floor=1e-8))]
fn stokes_solve(mu: &PyField, f: &PyField, floor: f64) -> PyResult<(PyField, Vec<f64>, f64, f64)> {
    let op = assemble(&mu.inner, None, FaceAveraging::Arithmetic, floor).map_err(err)?;
    let sol = op.solve(&f.inner).map_err(err)?;
    Ok((
        PyField { inner: sol.u },
        sol.p.values().to_vec(),
        sol.constraint_residual,
        sol.linsolve_residual,
    ))
}

/// One upwind transport step of the density with x-diffusion.
#[pyfunction]
#[pyo3(name = "transport_step", signature = (rho, u, w, lam, dt, cfl_guard=true))]
fn py_transport_step(
    rho: &PyField,
    u: &PyField,
    w: &PyField,
    lam: f64,
    dt: f64,
    cfl_guard: bool,
) -> PyResult<PyField> {
    let params = TransportParams::new(lam, dt, cfl_guard).map_err(err)?;
    Ok(PyField {
        inner: transport_step(&rho.inner, &u.inner, &w.inner, &params).map_err(err)?,
    })
}

/// Manufactured-solution convergence study. Returns a dict with per-level
/// errors and the observed orders.
#[pyfunction]
fn mms_convergence(py: Python<'_>, case: &str, levels: Vec<usize>) -> PyResult<Py<PyDict>> {
    let case = MmsCase::by_name(case).map_err(err)?;
    let rep = convergence_study(&case, &levels).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("levels", rep.levels)?;
    d.set_item("u_l2_errors", rep.u_l2_errors)?;
    d.set_item("u_h1_errors", rep.u_h1_errors)?;
    d.set_item("p_l2_errors", rep.p_l2_errors)?;
    d.set_item("u_l2_order", rep.u_l2_order)?;
    d.set_item("u_h1_order", rep.u_h1_order)?;
    d.set_item("p_l2_order", rep.p_l2_order)?;
    Ok(d.into())
}

/// Resolve an initial-data preset. Returns (rho0, u0).
#[pyfunction]
fn initial_preset(id: &str, grid: PyGrid) -> PyResult<(PyField, PyField)> {
    let p = preset_initial(id, grid.inner).map_err(err)?;
    Ok((PyField { inner: p.rho0 }, PyField { inner: p.u0 }))
}

/// Run the full pipeline from a TOML configuration string. Returns a dict
/// with the convergence record, per-iterate increments, the blow-up
/// functional series, and the final state.
#[pyfunction]
fn solve(py: Python<'_>, config_toml: &str) -> PyResult<Py<PyDict>> {
    let cfg = parse_config(config_toml).map_err(err)?;
    let (rho0_raw, u0) = match &cfg.initial {
        hydrostat::config::FieldSource::Preset(id) => {
            let p = preset_initial(id, cfg.grid).map_err(err)?;
            (p.rho0, p.u0)
        }
        hydrostat::config::FieldSource::Path(_) => {
            return Err(PyValueError::new_err(
                "snapshot-path initial data is not supported through the bindings",
            ))
        }
    };
    let f = match &cfg.forcing {
        hydrostat::config::FieldSource::Preset(id) => {
            preset_forcing(id, cfg.grid).map_err(err)?.scale(cfg.forcing_amplitude)
        }
        hydrostat::config::FieldSource::Path(_) => {
            return Err(PyValueError::new_err(
                "snapshot-path forcing is not supported through the bindings",
            ))
        }
    };
    let rho0 = mollify_density(&rho0_raw, cfg.delta);
    let pcfg = PicardConfig {
        t_final: cfg.t_final,
        dt: cfg.dt,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        lambda: cfg.lambda,
        delta: cfg.delta,
        law: cfg.law.clone(),
        avg: cfg.avg,
        cfl_guard: cfg.cfl_guard,
    };
    let modulation = cfg.modulation;
    let out = picard_iterate(&rho0, &u0, &f, &move |t| modulation.eval(t), &pcfg, None)
        .map_err(err)?;
    let (_, phi) = norm_series(&out).map_err(err)?;

    let d = PyDict::new(py);
    d.set_item("converged", out.converged)?;
    d.set_item("iterations", out.iterations)?;
    d.set_item("times", out.times.clone())?;
    d.set_item(
        "eta",
        out.diags.iter().map(|x| x.eta_l2_sup).collect::<Vec<_>>(),
    )?;
    d.set_item("phi", phi.phi)?;
    d.set_item("j", phi.j)?;
    let n = out.times.len() - 1;
    d.set_item("rho", PyField { inner: out.rho_traj[n].clone() })?;
    d.set_item("u", PyField { inner: out.u_traj[n].clone() })?;
    Ok(d.into())
}

#[pymodule]
fn hydrostat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(lp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(sobolev_norm, m)?)?;
    m.add_function(wrap_pyfunction!(grad_l2, m)?)?;
    m.add_function(wrap_pyfunction!(phi_functional, m)?)?;
    m.add_function(wrap_pyfunction!(py_constraint_residual, m)?)?;
    m.add_function(wrap_pyfunction!(py_vertical_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_solve, m)?)?;
    m.add_function(wrap_pyfunction!(py_transport_step, m)?)?;
    m.add_function(wrap_pyfunction!(mms_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(initial_preset, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
