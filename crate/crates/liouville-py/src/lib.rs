//! Python bindings for the liouville crate.

use ndarray::Array2;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use liouville::dynamics::{self, IntegrateOptions, TimeDependentGenerator};
use liouville::models::{self, ModelSpec};
use liouville::perturb::{BranchAccuracy, PerturbOrder, Sector};
use liouville::qbm;
use liouville::superop::{spectral_decompose, DensityMatrix};
use liouville::Tolerances;

fn to_py<T>(r: liouville::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

fn matrix_out(m: &Array2<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[[i, j]]).collect())
        .collect()
}

fn matrix_in(rows: Vec<Vec<Complex64>>) -> PyResult<Array2<Complex64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a square nested list"));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

fn parse_order(order: u8) -> PyResult<PerturbOrder> {
    match order {
        0 => Ok(PerturbOrder::Zero),
        2 => Ok(PerturbOrder::Two),
        other => Err(PyValueError::new_err(format!(
            "order must be 0 or 2, got {other}"
        ))),
    }
}

fn accuracy_label(a: BranchAccuracy) -> &'static str {
    match a {
        BranchAccuracy::Order0 => "order0",
        BranchAccuracy::Order2DiagonalOrder0 => "order2-diagonal-order0",
        BranchAccuracy::Order2 => "order2",
    }
}

/// A serializable model: Hamiltonian plus perturbative generator blocks.
#[pyclass(name = "Model", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    /// Two-level amplitude damping with `H = diag(0, omega)`; the physical
    /// decay rate is `coupling**2`.
    #[staticmethod]
    fn amplitude_damping(omega: f64, coupling: f64) -> Self {
        PyModel {
            inner: models::amplitude_damping_model(omega, coupling),
        }
    }

    /// The three-level zero-temperature positivity demonstration.
    #[staticmethod]
    fn positivity_demo() -> Self {
        PyModel {
            inner: models::demo_positivity_model(),
        }
    }

    /// Seeded random full model with nonzero fourth-order block.
    #[staticmethod]
    fn synthetic(seed: u64, dim: usize) -> PyResult<Self> {
        Ok(PyModel {
            inner: to_py(models::synthetic_full_model(seed, dim))?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: to_py(models::load_model(path))?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        to_py(models::save_model(&self.inner, path))
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn coupling(&self) -> f64 {
        self.inner.coupling
    }

    #[getter]
    fn has_l4(&self) -> bool {
        self.inner.l4.is_some()
    }

    fn hamiltonian(&self) -> Vec<Vec<Complex64>> {
        matrix_out(&self.inner.hamiltonian)
    }

    /// Drop the fourth-order block (the "naive" second-order treatment).
    fn without_l4(&self) -> Self {
        let mut inner = self.inner.clone();
        inner.l4 = None;
        PyModel { inner }
    }

    /// Perturbative steady state in the energy basis; returns the matrix
    /// and its accuracy label.
    #[pyo3(signature = (coupling = None, order = 2))]
    fn steady_state(
        &self,
        coupling: Option<f64>,
        order: u8,
    ) -> PyResult<(Vec<Vec<Complex64>>, String)> {
        let tol = Tolerances::default();
        let p = to_py(self.inner.perturbative(coupling, &tol))?;
        let ss = to_py(p.steady_state(parse_order(order)?, &tol))?;
        Ok((
            matrix_out(ss.state.matrix()),
            accuracy_label(ss.accuracy).to_string(),
        ))
    }

    /// Exact steady state from dense diagonalization of the assembled
    /// generator, in the energy basis.
    #[pyo3(signature = (coupling = None))]
    fn exact_steady_state(&self, coupling: Option<f64>) -> PyResult<Vec<Vec<Complex64>>> {
        let tol = Tolerances::default();
        let p = to_py(self.inner.perturbative(coupling, &tol))?;
        let dec = to_py(spectral_decompose(&p.assembled(), &tol))?;
        let ss = to_py(dec.steady_state(1e-9))?;
        Ok(matrix_out(ss.matrix()))
    }

    /// Perturbative spectrum: list of (sector, eigenvalue, accuracy).
    #[pyo3(signature = (coupling = None, order = 2))]
    fn spectrum(
        &self,
        coupling: Option<f64>,
        order: u8,
    ) -> PyResult<Vec<(String, Complex64, String)>> {
        let tol = Tolerances::default();
        let p = to_py(self.inner.perturbative(coupling, &tol))?;
        let spec = to_py(p.assemble_spectrum(parse_order(order)?, &tol))?;
        Ok(spec
            .branches
            .iter()
            .map(|b| {
                let sector = match b.sector {
                    Sector::OffDiagonal(i, j) => format!("off-diagonal({i},{j})"),
                    Sector::Degenerate(k) => format!("degenerate({k})"),
                };
                (
                    sector,
                    b.eigenvalue,
                    accuracy_label(b.accuracy).to_string(),
                )
            })
            .collect())
    }

    /// Exact eigenvalues of the assembled generator.
    #[pyo3(signature = (coupling = None))]
    fn exact_spectrum(&self, coupling: Option<f64>) -> PyResult<Vec<Complex64>> {
        let tol = Tolerances::default();
        let p = to_py(self.inner.perturbative(coupling, &tol))?;
        let dec = to_py(spectral_decompose(&p.assembled(), &tol))?;
        Ok(dec.branches.iter().map(|b| b.eigenvalue).collect())
    }

    /// Integrate the master equation from `rho0` (energy basis) and return
    /// the state at `t_end`.
    #[pyo3(signature = (rho0, t_end, tol = 1e-9, coupling = None))]
    fn evolve(
        &self,
        rho0: Vec<Vec<Complex64>>,
        t_end: f64,
        tol: f64,
        coupling: Option<f64>,
    ) -> PyResult<Vec<Vec<Complex64>>> {
        let tols = Tolerances::default();
        let p = to_py(self.inner.perturbative(coupling, &tols))?;
        let rho0 = to_py(DensityMatrix::new(matrix_in(rho0)?, &tols))?;
        let c = coupling.unwrap_or(self.inner.coupling);
        let gen = TimeDependentGenerator::stationary(
            p.basis().energy_hamiltonian(),
            p.assembled(),
            c * c,
        );
        let (state, _) = to_py(dynamics::evolve(
            &gen,
            &rho0,
            t_end,
            &IntegrateOptions::with_tol(tol),
        ))?;
        Ok(matrix_out(&state))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(name={:?}, dim={}, coupling={})",
            self.inner.name, self.inner.dim, self.inner.coupling
        )
    }
}

/// Harmonic number `H(z)`, analytically continued; `H(0) = 0`.
#[pyfunction]
fn harmonic_number(z: Complex64) -> PyResult<Complex64> {
    to_py(qbm::harmonic_number(z))
}

/// Positivity audit of a unit-trace matrix: returns
/// `(min_eigenvalue, worst_pair, worst_pair_residual, trace_deviation)`.
#[pyfunction]
fn positivity_audit(
    rho: Vec<Vec<Complex64>>,
) -> PyResult<(f64, (usize, usize), Complex64, f64)> {
    let m = matrix_in(rho)?;
    let report = to_py(dynamics::positivity_audit(&m))?;
    Ok((
        report.min_eigenvalue,
        report.worst_pair,
        report.worst_pair_residual,
        report.trace_deviation,
    ))
}

/// Least-squares slope of log(magnitude) against log(c) on a geometric
/// grid: returns `(slope, fit_residual)`.
#[pyfunction]
fn order_scan(grid: Vec<f64>, magnitudes: Vec<f64>) -> PyResult<(f64, f64)> {
    let res = to_py(dynamics::order_scan_values(&grid, &magnitudes))?;
    Ok((res.slope, res.fit_residual))
}

fn spec_from_args(gamma0: f64, temperature: f64, cutoff: f64, omega: f64, mass: f64) -> qbm::OhmicSpec {
    qbm::OhmicSpec {
        gamma0,
        temperature,
        cutoff,
        frequency: omega,
        mass,
    }
}

/// Late-time damped-oscillator coefficients (exact or second-order
/// truncated).
#[pyfunction]
#[pyo3(signature = (gamma0, temperature, cutoff, omega = 1.0, mass = 1.0, truncated = false))]
fn qbm_coefficients<'py>(
    py: Python<'py>,
    gamma0: f64,
    temperature: f64,
    cutoff: f64,
    omega: f64,
    mass: f64,
    truncated: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec_from_args(gamma0, temperature, cutoff, omega, mass);
    let q = to_py(if truncated {
        qbm::truncated_coefficients(&spec)
    } else {
        qbm::late_time_coefficients(&spec)
    })?;
    let out = PyDict::new(py);
    out.set_item("omega_r", q.omega_r)?;
    out.set_item("gamma", q.gamma)?;
    out.set_item("d_pp", q.d_pp)?;
    out.set_item("d_xp", q.d_xp)?;
    out.set_item("omega_tilde", q.omega_tilde)?;
    out.set_item("i0", q.i0)?;
    out.set_item("mode", if truncated { "truncated-2nd" } else { "exact" })?;
    let _ = mass;
    Ok(out)
}

/// Stationary phase-space covariance `(sigma_xx, sigma_xp, sigma_pp)`.
#[pyfunction]
#[pyo3(signature = (gamma0, temperature, cutoff, omega = 1.0, mass = 1.0, truncated = false))]
fn qbm_stationary_covariance(
    gamma0: f64,
    temperature: f64,
    cutoff: f64,
    omega: f64,
    mass: f64,
    truncated: bool,
) -> PyResult<(f64, f64, f64)> {
    let spec = spec_from_args(gamma0, temperature, cutoff, omega, mass);
    let q = to_py(if truncated {
        qbm::truncated_coefficients(&spec)
    } else {
        qbm::late_time_coefficients(&spec)
    })?;
    let s = to_py(qbm::stationary_covariance(&q, mass))?;
    Ok((s.sigma_xx, s.sigma_xp, s.sigma_pp))
}

type CutoffRowTuple = (f64, f64, f64, f64, bool, bool);

/// Cutoff scan rows
/// `(lambda, sxx_exact, sxx_mixed, det_mixed, heisenberg_ok, positive_ok)`.
#[pyfunction]
#[pyo3(signature = (gamma0, temperature, lambda_grid, omega = 1.0, mass = 1.0))]
fn qbm_cutoff_scan(
    gamma0: f64,
    temperature: f64,
    lambda_grid: Vec<f64>,
    omega: f64,
    mass: f64,
) -> PyResult<Vec<CutoffRowTuple>> {
    let spec = spec_from_args(gamma0, temperature, lambda_grid.first().copied().unwrap_or(0.0), omega, mass);
    let rows = to_py(qbm::cutoff_scan(&spec, &lambda_grid))?;
    Ok(rows
        .iter()
        .map(|r| {
            (
                r.cutoff,
                r.sxx_exact,
                r.sxx_mixed,
                r.det_mixed,
                r.heisenberg_ok,
                r.positive_ok,
            )
        })
        .collect())
}

#[pymodule]
fn liouville_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(harmonic_number, m)?)?;
    m.add_function(wrap_pyfunction!(positivity_audit, m)?)?;
    m.add_function(wrap_pyfunction!(order_scan, m)?)?;
    m.add_function(wrap_pyfunction!(qbm_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(qbm_stationary_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(qbm_cutoff_scan, m)?)?;
    Ok(())
}
