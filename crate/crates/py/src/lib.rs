//! Python bindings: symbol and kernel evaluation, bifurcation points, branch
//! continuation, sheets and the identity checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use whitham_core::asymptotics::expansion_at;
use whitham_core::continuation::{
    continue_branch as core_continue, outward_tangent, resume_branch, switch_at_simple, Branch as CoreBranch,
    ContinuationConfig, Origin,
};
use whitham_core::diagnostics::{check_state as core_check, nodal_report};
use whitham_core::io::{branch_from_str, branch_to_string};
use whitham_core::kernel::{kernel_periodic, kernel_whole_line, probe_complete_monotonicity, uniform_grid, KernelKind};
use whitham_core::symbol::{self, BifurcationKind};
use whitham_core::twodim::{rho_grid, sample_sheet as core_sample_sheet, theta_grid, SheetOptions};
use whitham_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Precondition(_) | Error::DegeneratePair(_) | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn params(t: f64, kappa: f64) -> PyResult<whitham_core::SymbolParams> {
    whitham_core::SymbolParams::new(t, kappa).map_err(to_py)
}

/// Dispersion symbol `m_T(κξ)` and its inverse `l_T`.
#[pyclass(name = "SymbolParams", frozen, from_py_object)]
#[derive(Clone)]
struct PySymbolParams {
    inner: whitham_core::SymbolParams,
}

#[pymethods]
impl PySymbolParams {
    #[new]
    #[pyo3(signature = (t, kappa = 1.0))]
    fn new(t: f64, kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: params(t, kappa)? })
    }

    #[getter(T)]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn m(&self, xi: f64) -> PyResult<f64> {
        symbol::eval_m(&self.inner, xi).map_err(to_py)
    }

    fn l(&self, xi: f64) -> PyResult<f64> {
        symbol::eval_l(&self.inner, xi).map_err(to_py)
    }

    fn l_prime(&self, xi: f64) -> PyResult<f64> {
        symbol::eval_l_prime(&self.inner, xi).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SymbolParams(T={}, kappa={})", self.inner.t, self.inner.kappa)
    }
}

/// A steady wave: cosine coefficients `a_0..a_N`, speed `c` and symbol parameters.
#[pyclass(name = "SteadyState", frozen, from_py_object)]
#[derive(Clone)]
struct PySteadyState {
    inner: whitham_core::SteadyState,
}

#[pymethods]
impl PySteadyState {
    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.u.coeffs.clone()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter(T)]
    fn t(&self) -> f64 {
        self.inner.params.t
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.params.kappa
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }

    /// `u(x)`.
    fn eval(&self, x: f64) -> f64 {
        self.inner.u.eval(x)
    }

    fn __repr__(&self) -> String {
        format!("SteadyState(N={}, c={}, residual={:e})", self.inner.order(), self.inner.c, self.inner.residual_norm)
    }
}

#[pyclass(name = "StateCheck", frozen, get_all)]
struct PyStateCheck {
    residual: f64,
    identity: f64,
    galilean_residual: f64,
    max_u: f64,
    bound_gap: Option<f64>,
    passed: bool,
}

#[pyclass(name = "Event", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyEvent {
    index: usize,
    kind: String,
    c: f64,
}

#[pyclass(name = "Branch")]
struct PyBranch {
    inner: CoreBranch,
    cfg: ContinuationConfig,
}

#[pymethods]
impl PyBranch {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Wavespeeds of all points.
    fn speeds(&self) -> Vec<f64> {
        self.inner.points.iter().map(|s| s.c).collect()
    }

    fn state(&self, i: usize) -> PyResult<PySteadyState> {
        self.inner
            .points
            .get(i)
            .map(|s| PySteadyState { inner: s.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("index {i} out of range")))
    }

    #[getter]
    fn events(&self) -> Vec<PyEvent> {
        self.inner.events.iter().map(|e| PyEvent { index: e.index, kind: e.kind.tag().to_string(), c: e.c }).collect()
    }

    /// Appends up to `steps` points.
    fn resume(&mut self, steps: usize) -> PyResult<()> {
        resume_branch(&mut self.inner, steps, &self.cfg).map_err(to_py)?;
        self.cfg.max_steps += steps;
        Ok(())
    }

    /// Canonical branch file contents.
    fn to_jsonl(&self) -> String {
        branch_to_string(&self.inner, &self.cfg)
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        let (inner, cfg) = branch_from_str(text).map_err(to_py)?;
        Ok(Self { inner, cfg })
    }
}

#[pyclass(name = "Sheet", frozen, get_all)]
struct PySheet {
    kappa0: f64,
    c0: f64,
    resonant: bool,
    rho: Vec<f64>,
    theta: Vec<f64>,
    /// Ray-major flags: entry `i * len(rho) + j` belongs to `(rho[j], theta[i])`.
    converged: Vec<bool>,
    r: Vec<f64>,
    p: Vec<f64>,
    convergence_ratio: f64,
}

/// `T*(k1; k2)`, the Bond number at which `l_T(k1) = l_T(k2)`.
#[pyfunction]
fn critical_t(k1: f64, k2: f64) -> PyResult<f64> {
    symbol::critical_T(k1, k2).map_err(to_py)
}

/// `(label, c0)` for each bifurcation point with wavenumber up to `k_max`.
#[pyfunction]
#[pyo3(signature = (t, k_max, kappa = 1.0))]
fn bifurcation_points(t: f64, k_max: u32, kappa: f64) -> PyResult<Vec<(String, f64)>> {
    let p = params(t, kappa)?;
    Ok(symbol::simple_bifurcation_points(&p, k_max)
        .into_iter()
        .map(|b| {
            let label = match b.kind {
                BifurcationKind::Simple { k } => format!("simple k={k}"),
                BifurcationKind::Double { k1, k2 } => format!("double k={k1},{k2}"),
                BifurcationKind::Transcritical => "transcritical".to_string(),
            };
            (label, b.c0)
        })
        .collect())
}

/// `(kappa0, c0, resonant)` of the double point `(k1, k2)` at Bond number `t`.
#[pyfunction]
fn find_double_point(t: f64, k1: u32, k2: u32) -> PyResult<(f64, f64, bool)> {
    let b = symbol::find_double_point(t, k1, k2).map_err(to_py)?;
    Ok((b.params.kappa, b.c0, b.is_resonant()))
}

/// `K_T(x)` on the line or, with `periodic`, its 2π-periodization.
#[pyfunction]
#[pyo3(signature = (t, x, kappa = 1.0, periodic = false))]
fn kernel(t: f64, x: f64, kappa: f64, periodic: bool) -> PyResult<f64> {
    let p = params(t, kappa)?;
    if periodic {
        kernel_periodic(&p, x, whitham_core::kernel::DEFAULT_PERIODIC_TERMS).map_err(to_py)
    } else {
        kernel_whole_line(&p, x).map_err(to_py)
    }
}

/// Violations `(order, x, value)` of the complete-monotonicity probe on a uniform grid.
#[pyfunction]
#[pyo3(signature = (t, a, b, n, order, periodic = false))]
fn probe_monotonicity(t: f64, a: f64, b: f64, n: usize, order: usize, periodic: bool) -> PyResult<Vec<(usize, f64, f64)>> {
    let kind = if periodic { KernelKind::Periodic } else { KernelKind::WholeLine };
    let rep = probe_complete_monotonicity(&params(t, 1.0)?, kind, &uniform_grid(a, b, n), order).map_err(to_py)?;
    Ok(rep.violations.iter().map(|v| (v.order, v.x, v.value)).collect())
}

/// `(c0, c2dot)` of the second-order expansion at wavenumber `k`.
#[pyfunction]
#[pyo3(signature = (t, k, kappa = 1.0))]
fn expansion(t: f64, k: u32, kappa: f64) -> PyResult<(f64, f64)> {
    let e = expansion_at(&params(t, kappa)?, k).map_err(to_py)?;
    Ok((e.c0, e.c2dot))
}

/// Leaves the simple point of wavenumber `k` with amplitude `t0` and continues.
#[pyfunction]
#[pyo3(signature = (t, k, kappa = 1.0, t0 = 0.01, ds = 0.005, ds_max = 0.1, steps = 50))]
fn continue_branch(t: f64, k: u32, kappa: f64, t0: f64, ds: f64, ds_max: f64, steps: usize) -> PyResult<PyBranch> {
    let p = params(t, kappa)?;
    let bp = symbol::simple_bifurcation_points(&p, k)
        .into_iter()
        .find(|b| b.kind == BifurcationKind::Simple { k })
        .ok_or_else(|| PyValueError::new_err(format!("k = {k} is not a simple bifurcation point here")))?;
    let cfg = ContinuationConfig { ds, ds_max, max_steps: steps, ..Default::default() };
    let start = switch_at_simple(&bp, t0, 1.0, 32, cfg.newton_tol, cfg.max_newton_iters).map_err(to_py)?.state;
    let dir = outward_tangent(&start, k as usize).map_err(to_py)?;
    let inner = core_continue(&start, &dir, Origin::Bifurcation { point: bp }, &cfg).map_err(to_py)?;
    Ok(PyBranch { inner, cfg })
}

/// Samples the sheet at the double point `(k1, k2)` on a polar grid.
#[pyfunction]
#[pyo3(signature = (t, k1, k2, rho_max = 0.05, rho_steps = 10, theta_steps = 64))]
fn sample_sheet(t: f64, k1: u32, k2: u32, rho_max: f64, rho_steps: usize, theta_steps: usize) -> PyResult<PySheet> {
    let base = symbol::find_double_point(t, k1, k2).map_err(to_py)?;
    let opts = SheetOptions { rho_max, ..Default::default() };
    let s = core_sample_sheet(&base, &rho_grid(rho_max, rho_steps), &theta_grid(theta_steps), &opts).map_err(to_py)?;
    Ok(PySheet {
        kappa0: base.params.kappa,
        c0: base.c0,
        resonant: s.resonant,
        convergence_ratio: s.convergence_ratio(),
        converged: s.samples.iter().map(|q| q.converged).collect(),
        r: s.samples.iter().map(|q| q.r).collect(),
        p: s.samples.iter().map(|q| q.p).collect(),
        rho: s.rho,
        theta: s.theta,
    })
}

/// Exact-identity checks on a state.
#[pyfunction]
fn check_state(state: &PySteadyState) -> PyStateCheck {
    let c = core_check(&state.inner);
    PyStateCheck {
        residual: c.residual,
        identity: c.identity,
        galilean_residual: c.galilean_residual,
        max_u: c.region.max_u,
        bound_gap: c.region.bound_gap,
        passed: c.passed(1e-10),
    }
}

/// Largest mismatch of the nodal identity on `points` abscissae.
#[pyfunction]
#[pyo3(signature = (state, quad_points = 2000, points = 16))]
fn nodal_mismatch(state: &PySteadyState, quad_points: usize, points: usize) -> PyResult<f64> {
    Ok(nodal_report(&state.inner, quad_points, points).map_err(to_py)?.mismatch)
}

#[pymodule]
fn whitham(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", whitham_core::VERSION)?;
    m.add_class::<PySymbolParams>()?;
    m.add_class::<PySteadyState>()?;
    m.add_class::<PyBranch>()?;
    m.add_class::<PyEvent>()?;
    m.add_class::<PySheet>()?;
    m.add_class::<PyStateCheck>()?;
    m.add_function(wrap_pyfunction!(critical_t, m)?)?;
    m.add_function(wrap_pyfunction!(bifurcation_points, m)?)?;
    m.add_function(wrap_pyfunction!(find_double_point, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(probe_monotonicity, m)?)?;
    m.add_function(wrap_pyfunction!(expansion, m)?)?;
    m.add_function(wrap_pyfunction!(continue_branch, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sheet, m)?)?;
    m.add_function(wrap_pyfunction!(check_state, m)?)?;
    m.add_function(wrap_pyfunction!(nodal_mismatch, m)?)?;
    Ok(())
}
