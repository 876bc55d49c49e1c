//! Python bindings: instance generation and I/O, the solver, the exact
//! oracle, property metrics and schedule evaluation.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sparrow_core::instances::{self, Family, GenSpec};
use sparrow_core::model::{self, ScheduledOrder};
use sparrow_core::{oracle, solver, Error, Schedule, SolverConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Instance", module = "sparrow", frozen)]
struct PyInstance {
    inner: sparrow_core::Instance,
}

#[pymethods]
impl PyInstance {
    /// Generates an instance. `family` is one of cesaret, satellite,
    /// commerce (uses `q`) or repairman (uses `c`).
    #[staticmethod]
    #[pyo3(signature = (n, tau = 0.5, r = 0.5, seed = 0, family = "cesaret", q = 0.5, c = 1.2, initial_setup = false))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        n: usize,
        tau: f64,
        r: f64,
        seed: u64,
        family: &str,
        q: f64,
        c: f64,
        initial_setup: bool,
    ) -> PyResult<Self> {
        let family = match family {
            "cesaret" => Family::Cesaret,
            "satellite" => Family::Satellite,
            "commerce" => Family::Commerce { q },
            "repairman" => Family::Repairman { c },
            other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
        };
        let spec = GenSpec {
            n,
            tau,
            due_range: r,
            family,
            seed,
            initial_setup,
        };
        Ok(Self {
            inner: instances::generate(&spec).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: instances::read_instance(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, label = "instance"))]
    fn parse(text: &str, label: &str) -> PyResult<Self> {
        Ok(Self {
            inner: instances::parse_canonical(text, label).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        instances::write_instance(&self.inner, path).map_err(to_py)
    }

    fn to_canonical(&self) -> String {
        instances::to_canonical_string(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    /// Per-order tuples `(release, processing, due, deadline, revenue, weight)`.
    fn orders(&self) -> Vec<(f64, f64, f64, f64, f64, f64)> {
        self.inner
            .orders
            .iter()
            .map(|o| (o.release, o.processing, o.due, o.deadline, o.revenue, o.weight))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Instance(label={:?}, n={})", self.inner.label, self.inner.n())
    }
}

fn schedule_dict<'py>(py: Python<'py>, s: &Schedule) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("fitness", s.fitness)?;
    d.set_item("sequence", s.sequence())?;
    d.set_item("starts", s.entries.iter().map(|e| e.start).collect::<Vec<_>>())?;
    d.set_item("tardiness", s.entries.iter().map(|e| e.tardiness).collect::<Vec<_>>())?;
    Ok(d)
}

/// Runs the solver. `params` overrides config fields by name after the
/// parameter set is applied, e.g. `{"max_iterations": "200"}`.
#[pyfunction]
#[pyo3(signature = (instance, seed = 0, parameter_set = 3, params = None))]
fn solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    seed: u64,
    parameter_set: u8,
    params: Option<HashMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = SolverConfig::for_parameter_set(parameter_set, seed).map_err(to_py)?;
    let mut keys: Vec<_> = params.unwrap_or_default().into_iter().collect();
    keys.sort();
    for (k, v) in &keys {
        config.set(k, v).map_err(to_py)?;
    }
    config.validate().map_err(to_py)?;
    let r = solver::solve(&instance.inner, &config).map_err(to_py)?;
    let d = schedule_dict(py, &r.best)?;
    d.set_item("generations", r.generations)?;
    d.set_item("termination", r.termination.as_str())?;
    d.set_item("alns_passes", r.alns_passes)?;
    d.set_item("trace", r.trace)?;
    d.set_item("wall_time_secs", r.wall_time_secs)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (instance, limit = oracle::DEFAULT_LIMIT))]
fn exact_solve<'py>(py: Python<'py>, instance: &PyInstance, limit: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = oracle::exact_solve(&instance.inner, limit).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("optimal", r.optimal)?;
    d.set_item("sequence", r.sequence)?;
    d.set_item("nodes", r.nodes)?;
    d.set_item("proven_optimal", r.proven_optimal)?;
    Ok(d)
}

#[pyfunction]
fn properties<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyDict>> {
    let p = instances::properties(&instance.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    for (name, value) in instances::PropertyReport::CSV_HEADER.split(',').zip(p.csv_row().split(',')) {
        d.set_item(name, value.parse::<f64>().unwrap_or(f64::NAN))?;
    }
    Ok(d)
}

/// Earliest-start schedule of `sequence`; raises ValueError if infeasible.
#[pyfunction]
fn schedule<'py>(py: Python<'py>, instance: &PyInstance, sequence: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
    let s = model::earliest_start_schedule(&instance.inner, &sequence).map_err(to_py)?;
    schedule_dict(py, &s)
}

/// Constraint violations of an explicit `(sequence, starts)` assignment.
/// The empty list means feasible.
#[pyfunction]
fn validate(instance: &PyInstance, sequence: Vec<usize>, starts: Vec<f64>) -> PyResult<Vec<String>> {
    if sequence.len() != starts.len() {
        return Err(PyValueError::new_err("sequence and starts differ in length"));
    }
    let inst = &instance.inner;
    let entries: Vec<ScheduledOrder> = sequence
        .iter()
        .zip(&starts)
        .map(|(&order, &start)| ScheduledOrder {
            order,
            start,
            tardiness: if order < inst.n() { inst.order(order).tardiness_at(start) } else { 0.0 },
        })
        .collect();
    let fitness = entries
        .iter()
        .filter(|e| e.order < inst.n())
        .map(|e| inst.order(e.order).reward_at(e.start))
        .sum();
    let s = Schedule { entries, fitness };
    Ok(model::validate(inst, &s).iter().map(|v| format!("{v:?}")).collect())
}

#[pymodule]
fn sparrow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(exact_solve, m)?)?;
    m.add_function(wrap_pyfunction!(properties, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
