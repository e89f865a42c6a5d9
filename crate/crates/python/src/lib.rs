//! Python bindings: parameter selection, kernel values, and fast or direct
//! evaluation of the model transform.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mlmi::discretization::{build_input, l2_error, reference_solution, sample_u};
use mlmi::fast_eval::{evaluate_fast, CorrectionStrategy, EvalReport};
use mlmi::grid::GridSpec;
use mlmi::kernels::integrated_kernel_22;
use mlmi::softening::{SoftenedKernel, SofteningParams};
use mlmi::transfer_params::{select_params as select, ParamConfig, TransferSchedule};

fn py_err(e: mlmi::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run(k: u32, l: u32, strategy: &str, c_a: f64) -> PyResult<EvalReport> {
    let strategy: CorrectionStrategy = strategy.parse().map_err(py_err)?;
    let input = build_input(&sample_u(GridSpec::new(k).map_err(py_err)?));
    let schedule = TransferSchedule::optimal(k, l, &ParamConfig { c_a }).map_err(py_err)?;
    evaluate_fast(&input, &schedule, strategy).map_err(py_err)
}

/// `(p, m)` for the coarsening step onto level `l` of a transform on level `k`.
#[pyfunction]
#[pyo3(signature = (k, l, c_a = 0.0))]
fn select_params(k: u32, l: u32, c_a: f64) -> PyResult<(usize, u32)> {
    select(k, l, &ParamConfig { c_a }).map_err(py_err)
}

#[pyfunction]
fn integrated_kernel(t1: f64, t2: f64) -> f64 {
    integrated_kernel_22(t1, t2)
}

/// Integrated kernel softened on both axes with order `p` and band `m * mesh`.
#[pyfunction]
fn softened_kernel(t1: f64, t2: f64, p: usize, m: u32, mesh: f64) -> PyResult<f64> {
    let q = SofteningParams::new(p, m, mesh).map_err(py_err)?;
    let k = SoftenedKernel::uniform(Some(q)).map_err(py_err)?;
    Ok(k.value(t1, t2))
}

/// Fast evaluation of the model problem on level `k` with direct summation
/// on level `l`. Returns the nodal values (row-major rows) and the
/// operation count per node.
#[pyfunction]
#[pyo3(signature = (k, l, strategy = "multilevel", c_a = 0.0))]
fn evaluate(k: u32, l: u32, strategy: &str, c_a: f64) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let r = run(k, l, strategy, c_a)?;
    let v = r.values.values();
    let rows = (0..v.rows()).map(|i| v.row(i).to_vec()).collect();
    Ok((rows, r.ops_per_node()))
}

/// l2 distance of the fast evaluation from the extrapolated reference.
#[pyfunction]
#[pyo3(signature = (k, l, strategy = "multilevel", c_a = 0.0))]
fn fast_error(k: u32, l: u32, strategy: &str, c_a: f64) -> PyResult<f64> {
    let r = run(k, l, strategy, c_a)?;
    let reference = reference_solution(k).map_err(py_err)?;
    l2_error(&r.values, &reference).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "mlmi")]
fn mlmi_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(select_params, m)?)?;
    m.add_function(wrap_pyfunction!(integrated_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(softened_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(fast_error, m)?)?;
    Ok(())
}
