//! Python bindings. Reports are returned as plain dicts mirroring the JSON
//! produced by the command-line tool.

use aym_core::discretize;
use aym_core::equilibrium::{self, IntegerLadder};
use aym_core::fit::{self, TailDataset, TailPoint};
use aym_core::sampler::{self, ChainConfig};
use aym_core::verify::{self, NumericsConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn to_py_err(e: aym_core::Error) -> PyErr {
    if e.is_convergence_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, value_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

/// Economy with productivity levels, worker count `n` and aggregate demand `D`.
#[pyclass(name = "EconomyParams", module = "aym", from_py_object)]
#[derive(Clone)]
struct PyEconomy {
    inner: aym_core::EconomyParams,
}

#[pymethods]
impl PyEconomy {
    #[new]
    #[pyo3(signature = (levels, n, demand, a0 = 0.0))]
    fn new(levels: Vec<f64>, n: f64, demand: f64, a0: f64) -> PyResult<Self> {
        let inner = aym_core::EconomyParams::new(levels, n, demand, a0).validate().map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Ladder `a_i = i·a0` for `i = 1..=g`.
    #[staticmethod]
    fn ladder(a0: f64, g: usize, n: f64, demand: f64) -> PyResult<Self> {
        let inner = aym_core::EconomyParams::ladder(a0, g, n, demand).validate().map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn levels(&self) -> Vec<f64> {
        self.inner.levels.clone()
    }

    #[getter]
    fn n(&self) -> f64 {
        self.inner.n
    }

    #[getter]
    fn demand(&self) -> f64 {
        self.inner.demand
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.inner.a0
    }

    #[pyo3(signature = (tol = 1e-9))]
    fn solve(&self, tol: f64) -> PyResult<PySolution> {
        equilibrium::solve_boltzmann(&self.inner, tol)
            .map(PySolution::from)
            .map_err(to_py_err)
    }

    #[pyo3(signature = (c, tol = 1e-9))]
    fn solve_generalized(&self, c: f64, tol: f64) -> PyResult<PySolution> {
        equilibrium::solve_generalized(&self.inner, c, tol)
            .map(PySolution::from)
            .map_err(to_py_err)
    }

    /// Feasible integer vectors with exact weights (as decimal strings).
    #[pyo3(signature = (unit = None, cap = equilibrium::DEFAULT_ENUMERATION_CAP))]
    fn enumerate<'py>(&self, py: Python<'py>, unit: Option<f64>, cap: usize) -> PyResult<Bound<'py, PyAny>> {
        let ladder = IntegerLadder::from_params(&self.inner, unit).map_err(to_py_err)?;
        let e = equilibrium::enumerate_feasible(&ladder, cap).map_err(to_py_err)?;
        to_dict(py, &e)
    }

    #[pyo3(signature = (steps = 110_000, burn_in = 10_000, seed = 1, thin = 1, chains = 1, unit = None))]
    #[allow(clippy::too_many_arguments)]
    fn sample<'py>(
        &self,
        py: Python<'py>,
        steps: u64,
        burn_in: u64,
        seed: u64,
        thin: u64,
        chains: u64,
        unit: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let ladder = IntegerLadder::from_params(&self.inner, unit).map_err(to_py_err)?;
        let config = ChainConfig {
            steps,
            burn_in,
            seed,
            thin,
        };
        config.check().map_err(to_py_err)?;
        let summary = py.detach(|| sampler::run_chains(&ladder, &config, chains)).map_err(to_py_err)?;
        to_dict(py, &summary)
    }

    fn __repr__(&self) -> String {
        format!(
            "EconomyParams(levels={:?}, n={}, D={}, a0={})",
            self.inner.levels, self.inner.n, self.inner.demand, self.inner.a0
        )
    }
}

#[pyclass(name = "EquilibriumSolution", module = "aym", frozen, get_all)]
struct PySolution {
    nu: f64,
    beta: f64,
    c: f64,
    occupations: Vec<f64>,
    residuals: (f64, f64),
    iterations: usize,
}

impl From<equilibrium::EquilibriumSolution> for PySolution {
    fn from(s: equilibrium::EquilibriumSolution) -> Self {
        Self {
            nu: s.multipliers.nu,
            beta: s.multipliers.beta,
            c: s.multipliers.c,
            occupations: s.occupations,
            residuals: s.residuals,
            iterations: s.iterations,
        }
    }
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!("EquilibriumSolution(nu={}, beta={}, c={})", self.nu, self.beta, self.c)
    }
}

/// Shifted exponential law on `[a0, ∞)` with mean `mean_demand`.
#[pyclass(name = "EpiDistribution", module = "aym", frozen)]
struct PyEpi {
    inner: aym_core::EpiDistribution,
}

#[pymethods]
impl PyEpi {
    #[new]
    #[pyo3(signature = (mean_demand, a0 = 0.0))]
    fn new(mean_demand: f64, a0: f64) -> PyResult<Self> {
        aym_core::EpiDistribution::new(mean_demand, a0)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn mean_demand(&self) -> f64 {
        self.inner.mean_demand
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.inner.a0
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    fn pdf(&self, a: f64) -> f64 {
        self.inner.pdf(a)
    }

    fn tail(&self, a: f64) -> f64 {
        self.inner.tail(a)
    }

    /// Amplitude at displacement `x = a − D/n`.
    fn amplitude(&self, x: f64) -> PyResult<f64> {
        let x = aym_core::Displacement::new(&self.inner, x).map_err(to_py_err)?;
        Ok(self.inner.amplitude(x))
    }

    fn moments(&self) -> (f64, f64) {
        self.inner.moments()
    }

    #[pyo3(signature = (count, seed = 1))]
    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        self.inner.sample(&mut sampler::chain_rng(seed, 0), count)
    }

    /// Information-principle report with default numerics.
    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = verify::verify(&self.inner, &NumericsConfig::default()).map_err(to_py_err)?;
        to_dict(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("EpiDistribution(mean_demand={}, a0={})", self.inner.mean_demand, self.inner.a0)
    }
}

/// Bins the continuous law onto the ladder and compares with the discrete PMF.
#[pyfunction]
#[pyo3(signature = (r, i_max = None))]
fn compare<'py>(py: Python<'py>, r: f64, i_max: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let m = discretize::compare(r, i_max.unwrap_or_else(|| discretize::default_i_max(r))).map_err(to_py_err)?;
    to_dict(py, &m)
}

#[pyfunction]
fn epi_binned_ladder(r: f64, i: u64) -> PyResult<f64> {
    discretize::epi_binned_ladder(r, i).map_err(to_py_err)
}

#[pyfunction]
fn aym_ladder_pmf(r: f64, i: u64) -> PyResult<f64> {
    discretize::aym_ladder_pmf(r, i).map_err(to_py_err)
}

fn dataset(points: Vec<(f64, f64)>) -> PyResult<TailDataset> {
    let points = points
        .into_iter()
        .map(|(a, p_gt)| TailPoint { a, p_gt, weight: None })
        .collect();
    TailDataset::new(points, "python").map_err(to_py_err)
}

/// Fits the exponential tail to `(a, p_gt)` pairs; `a0` is fitted when `None`.
#[pyfunction]
#[pyo3(signature = (points, a0 = None))]
fn fit_tail<'py>(py: Python<'py>, points: Vec<(f64, f64)>, a0: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let data = dataset(points)?;
    let result = fit::fit_tail(&data, a0).map_err(to_py_err)?;
    to_dict(py, &result)
}

#[pyfunction]
fn load_tail_csv(path: &str) -> PyResult<Vec<(f64, f64)>> {
    let data = TailDataset::load_csv(path).map_err(to_py_err)?;
    Ok(data.points.iter().map(|p| (p.a, p.p_gt)).collect())
}

/// CSV overlay table of model tails (and optional data) on `grid`.
#[pyfunction]
#[pyo3(signature = (d_over_n_values, grid, a0 = 0.0, points = None))]
fn emit_overlay(d_over_n_values: Vec<f64>, grid: Vec<f64>, a0: f64, points: Option<Vec<(f64, f64)>>) -> PyResult<String> {
    let data = points.map(dataset).transpose()?;
    fit::emit_overlay(data.as_ref(), &d_over_n_values, a0, &grid).map_err(to_py_err)
}

#[pymodule]
fn aym(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEconomy>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyEpi>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(epi_binned_ladder, m)?)?;
    m.add_function(wrap_pyfunction!(aym_ladder_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tail, m)?)?;
    m.add_function(wrap_pyfunction!(load_tail_csv, m)?)?;
    m.add_function(wrap_pyfunction!(emit_overlay, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
