//! Python bindings. Matrices cross the boundary as lists of rows, tensor
//! series as `(dims, steps)` with each step flattened `i_1` fastest.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tfm::bench::{run_benchmark, BenchConfig, Estimator};
use tfm::dgp::{simulate_setting, DgpConfig, Setting};
use tfm::preaverage::{preaverage_direction, PreaverageConfig};
use tfm::projection::{estimate_loading_space, refine_directions, RefineConfig};
use tfm::rank::{estimate_rank, RankConfig};
use tfm::{Matrix, TensorSeries};

fn py_err(e: tfm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> PyResult<Matrix> {
    let ncols = r.first().map_or(0, Vec::len);
    if r.iter().any(|row| row.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(Matrix::from_fn(r.len(), ncols, |i, j| r[i][j]))
}

fn series(dims: Vec<usize>, steps: Vec<Vec<f64>>) -> PyResult<TensorSeries> {
    let t = steps.len();
    let flat: Vec<f64> = steps.into_iter().flatten().collect();
    TensorSeries::from_flat(dims, t, &flat).map_err(py_err)
}

/// Simulate one of the six designs. Returns `{"dims", "steps", "bases"}`.
#[pyfunction]
#[pyo3(signature = (setting, dims, t, seed=0))]
fn simulate<'py>(py: Python<'py>, setting: &str, dims: Vec<usize>, t: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let setting: Setting = setting.parse().map_err(py_err)?;
    let truth = simulate_setting(&DgpConfig::for_setting(setting, dims.clone(), t, seed)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("dims", dims)?;
    out.set_item("steps", truth.series.steps().iter().map(|s| s.data().to_vec()).collect::<Vec<_>>())?;
    out.set_item("bases", truth.bases.iter().map(rows).collect::<Vec<_>>())?;
    Ok(out)
}

/// Pre-averaging, projection refinement and (unless `ranks` is given)
/// bootstrap rank estimation. Returns `{"ranks", "loadings", "sweeps"}`.
#[pyfunction]
#[pyo3(signature = (dims, steps, ranks=None, seed=0, m0=200, replicates=50))]
fn estimate<'py>(
    py: Python<'py>,
    dims: Vec<usize>,
    steps: Vec<Vec<f64>>,
    ranks: Option<Vec<usize>>,
    seed: u64,
    m0: usize,
    replicates: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let x = series(dims, steps)?;
    let k = x.order();
    if ranks.as_ref().is_some_and(|r| r.len() != k) {
        return Err(PyValueError::new_err(format!("need {k} ranks")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre = PreaverageConfig { m0, ..Default::default() };
    let init = (0..k)
        .map(|mode| preaverage_direction(&x, mode, &pre, &mut rng).map(|o| o.estimate.columns.column(0).into_owned()))
        .collect::<tfm::Result<Vec<_>>>()
        .map_err(py_err)?;
    let state = refine_directions(&x, &init, &RefineConfig::default()).map_err(py_err)?;
    let rank_cfg = RankConfig { replicates, ..Default::default() };
    let mut chosen = Vec::with_capacity(k);
    let mut loadings = Vec::with_capacity(k);
    for mode in 0..k {
        let r = match &ranks {
            Some(r) => r[mode],
            None => estimate_rank(&x, mode, &state, &rank_cfg, &mut rng).map_err(py_err)?.rank,
        };
        loadings.push(rows(&estimate_loading_space(&x, mode, &state, r).map_err(py_err)?.columns));
        chosen.push(r);
    }
    let out = PyDict::new(py);
    out.set_item("ranks", chosen)?;
    out.set_item("loadings", loadings)?;
    out.set_item("sweeps", state.iteration)?;
    Ok(out)
}

fn baseline(dims: Vec<usize>, steps: Vec<Vec<f64>>, ranks: &[usize], iters: Option<usize>) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let x = series(dims, steps)?;
    let est = match iters {
        None => tfm::baselines::hosvd(&x, ranks),
        Some(n) => tfm::baselines::hooi(&x, ranks, n),
    }
    .map_err(py_err)?;
    Ok(est.iter().map(|e| rows(&e.columns)).collect())
}

#[pyfunction]
fn hosvd(dims: Vec<usize>, steps: Vec<Vec<f64>>, ranks: Vec<usize>) -> PyResult<Vec<Vec<Vec<f64>>>> {
    baseline(dims, steps, &ranks, None)
}

#[pyfunction]
#[pyo3(signature = (dims, steps, ranks, iters=30))]
fn hooi(dims: Vec<usize>, steps: Vec<Vec<f64>>, ranks: Vec<usize>, iters: usize) -> PyResult<Vec<Vec<Vec<f64>>>> {
    baseline(dims, steps, &ranks, Some(iters))
}

/// Spectral norm of the difference of the two column-space projectors.
#[pyfunction]
fn projection_error(estimate: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<f64> {
    tfm::bench::projection_error(&from_rows(&estimate)?, &from_rows(&truth)?).map_err(py_err)
}

/// Monte Carlo summary rows as dicts.
#[pyfunction]
#[pyo3(name = "bench", signature = (setting, dims, t, reps, estimators=None, seed=0))]
fn run_bench<'py>(
    py: Python<'py>,
    setting: &str,
    dims: Vec<usize>,
    t: usize,
    reps: usize,
    estimators: Option<Vec<String>>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let setting: Setting = setting.parse().map_err(py_err)?;
    let est: Vec<Estimator> = match estimators {
        None => Estimator::ALL.to_vec(),
        Some(names) => names.iter().map(|n| n.parse()).collect::<tfm::Result<_>>().map_err(py_err)?,
    };
    let cfg = BenchConfig::new(setting, dims, t, reps, est, seed);
    let res = py.detach(|| run_benchmark(&cfg)).map_err(py_err)?;
    res.summary()
        .into_iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("estimator", row.estimator)?;
            d.set_item("mode", row.mode)?;
            d.set_item("metric", row.metric)?;
            d.set_item("mean", row.mean)?;
            d.set_item("median", row.median)?;
            d.set_item("correct_prop", row.correct_prop)?;
            d.set_item("failures", row.failures)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn tensor_factor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(hosvd, m)?)?;
    m.add_function(wrap_pyfunction!(hooi, m)?)?;
    m.add_function(wrap_pyfunction!(projection_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
