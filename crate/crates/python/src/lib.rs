//! Python bindings. Indices follow the library and are zero-based.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use polycor::estimate::fit_twostep;
use polycor::simulation::{generate_pair as generate, MixtureSpec, Misspecification};
use polycor::{
    cell_probs as probs, confidence_interval, empirical_frequencies, fit as fit_table, flag_misfit_cells,
    pearson_residuals as residuals, pearson_sample_correlation, ContingencyTable, DiscrepancyConfig, Error,
    EstimateResult, FitOptions, MlCovariance, OrdinalDataset, Theta, Warning,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NoConvergence(_) | Error::NearZeroCell { .. } | Error::SingularM { .. } | Error::NotPositiveDefinite => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn table_from(rows: Vec<Vec<u64>>) -> PyResult<ContingencyTable> {
    ContingencyTable::from_rows(&rows).map_err(py_err)
}

fn theta_from(rho: f64, a: Vec<f64>, b: Vec<f64>) -> PyResult<Theta> {
    Theta::new(rho, a, b).map_err(py_err)
}

fn grid_rows(g: &polycor::CellGrid) -> Vec<Vec<f64>> {
    g.rows().map(<[f64]>::to_vec).collect()
}

fn warning_dict<'py>(py: Python<'py>, w: &Warning) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let kind = match w {
        Warning::ThresholdGap { margin, index, gap } | Warning::ThresholdMerge { margin, index, gap } => {
            d.set_item("margin", margin.to_string())?;
            d.set_item("index", index)?;
            d.set_item("gap", gap)?;
            if matches!(w, Warning::ThresholdGap { .. }) { "threshold-gap" } else { "threshold-merge" }
        }
        Warning::DegenerateSimplex => "degenerate-simplex",
        Warning::CorrelationClamped => "correlation-clamped",
        Warning::EmptyCategory { margin, index } => {
            d.set_item("margin", margin.to_string())?;
            d.set_item("index", index)?;
            "empty-category"
        }
        Warning::TheoremBoundary { row, col } => {
            d.set_item("row", row)?;
            d.set_item("col", col)?;
            "theorem-boundary"
        }
        Warning::CovarianceUnavailable { reason } => {
            d.set_item("reason", reason)?;
            "covariance-unavailable"
        }
    };
    d.set_item("kind", kind)?;
    Ok(d)
}

fn result_dict<'py>(py: Python<'py>, r: &EstimateResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", r.method.to_string())?;
    d.set_item("c", r.c)?;
    d.set_item("rho", r.theta.rho())?;
    d.set_item("a", r.theta.a().to_vec())?;
    d.set_item("b", r.theta.b().to_vec())?;
    d.set_item("std_errors", r.std_errors.clone())?;
    d.set_item("loss", r.loss)?;
    d.set_item("converged", r.converged)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("n", r.n)?;
    let warnings = r.warnings.iter().map(|w| warning_dict(py, w)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("warnings", warnings)?;
    Ok(d)
}

fn options(ml_se: &str, max_iterations: usize) -> PyResult<FitOptions> {
    let ml_covariance = match ml_se {
        "fisher" => MlCovariance::Fisher,
        "sandwich" => MlCovariance::Sandwich,
        other => return Err(PyValueError::new_err(format!("ml_se must be 'fisher' or 'sandwich', not '{other}'"))),
    };
    Ok(FitOptions { max_iterations, ml_covariance, ..Default::default() })
}

/// Fit the polychoric model to a table of counts. `c = inf` gives maximum likelihood.
#[pyfunction]
#[pyo3(signature = (table, c = 0.6, ml_se = "fisher", max_iterations = 5000))]
fn fit<'py>(
    py: Python<'py>,
    table: Vec<Vec<u64>>,
    c: f64,
    ml_se: &str,
    max_iterations: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let table = table_from(table)?;
    let cfg = DiscrepancyConfig::new(c).map_err(py_err)?;
    let opts = options(ml_se, max_iterations)?;
    let r = py.detach(|| fit_table(&table, cfg, &opts)).map_err(py_err)?;
    result_dict(py, &r)
}

/// Two-step estimate: thresholds from the margins, then the correlation.
#[pyfunction]
fn twostep<'py>(py: Python<'py>, table: Vec<Vec<u64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = fit_twostep(&table_from(table)?).map_err(py_err)?;
    result_dict(py, &r)
}

/// Pearson correlation of the category scores and its standard error.
#[pyfunction]
fn sample_correlation(table: Vec<Vec<u64>>) -> PyResult<(f64, f64)> {
    pearson_sample_correlation(&table_from(table)?).map_err(py_err)
}

#[pyfunction]
fn cell_probs(rho: f64, a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(grid_rows(&probs(&theta_from(rho, a, b)?)))
}

#[pyfunction]
fn frequencies(table: Vec<Vec<u64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(grid_rows(&empirical_frequencies(&table_from(table)?).map_err(py_err)?))
}

/// Pearson residuals `f / π - 1`; cells with a vanishing model probability hold `inf`.
#[pyfunction]
fn pearson_residuals(table: Vec<Vec<u64>>, rho: f64, a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let pr = residuals(&table_from(table)?, &theta_from(rho, a, b)?).map_err(py_err)?;
    Ok(grid_rows(&pr.grid))
}

/// `(row, col, residual)` of cells at or above `threshold`, largest first.
#[pyfunction]
#[pyo3(signature = (residuals, threshold = 3.0))]
fn flag_cells(residuals: Vec<Vec<f64>>, threshold: f64) -> PyResult<Vec<(usize, usize, f64)>> {
    let kx = residuals.len();
    let ky = residuals.first().map_or(0, Vec::len);
    if residuals.iter().any(|r| r.len() != ky) {
        return Err(PyValueError::new_err("residual rows differ in length"));
    }
    let grid = polycor::CellGrid::new(kx, ky, residuals.concat(), polycor::GridKind::PearsonResidual).map_err(py_err)?;
    Ok(flag_misfit_cells(&grid, threshold).into_iter().map(|m| (m.row, m.col, m.residual)).collect())
}

/// Wald interval `(lower, upper)` at the given level.
#[pyfunction]
#[pyo3(signature = (estimate, std_error, level = 0.95))]
fn wald_interval(estimate: f64, std_error: f64, level: f64) -> PyResult<(f64, f64)> {
    let ci = confidence_interval(estimate, std_error, level).map_err(py_err)?;
    Ok((ci.lower, ci.upper))
}

/// Pairwise correlation matrix of item columns; `None` marks a missing response.
#[pyfunction]
#[pyo3(signature = (columns, names = None, c = 0.6))]
fn correlation_matrix<'py>(
    py: Python<'py>,
    columns: Vec<Vec<Option<u32>>>,
    names: Option<Vec<String>>,
    c: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let names = names.unwrap_or_else(|| (1..=columns.len()).map(|k| format!("item{k}")).collect());
    let data = OrdinalDataset::new(names, columns).map_err(py_err)?;
    let cfg = DiscrepancyConfig::new(c).map_err(py_err)?;
    let m = py.detach(|| polycor::fit_matrix(&data, cfg, &FitOptions::default()));
    let q = data.q();
    let square = |get: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..q).map(|i| (0..q).map(|j| get(i, j)).collect()).collect()
    };
    let d = PyDict::new(py);
    d.set_item("estimates", square(&|i, j| m.estimates[(i, j)]))?;
    d.set_item("std_errors", square(&|i, j| m.std_errors[(i, j)]))?;
    d.set_item("min_eigenvalue", m.min_eigenvalue)?;
    let failed: Vec<(usize, usize, String)> =
        m.pairs.iter().filter_map(|p| p.result.as_ref().err().map(|e| (p.i, p.j, e.clone()))).collect();
    d.set_item("failed_pairs", failed)?;
    Ok(d)
}

/// Table of `n` draws from the polychoric model, reproducible from `seed`.
#[pyfunction]
#[pyo3(signature = (rho, a, b, n, seed = 1))]
fn simulate_table(rho: f64, a: Vec<f64>, b: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<Vec<u64>>> {
    let spec = MixtureSpec::new(0.0, theta_from(rho, a, b)?, Misspecification::None).map_err(py_err)?;
    Ok(generate(&spec, n, seed).rows().map(<[u64]>::to_vec).collect())
}

#[pymodule]
#[pyo3(name = "polycor")]
fn polycor_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(twostep, m)?)?;
    m.add_function(wrap_pyfunction!(sample_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(cell_probs, m)?)?;
    m.add_function(wrap_pyfunction!(frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(flag_cells, m)?)?;
    m.add_function(wrap_pyfunction!(wald_interval, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_table, m)?)?;
    Ok(())
}
