//! Python bindings. Arrays cross the boundary as plain lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use censrank::data::{Dataset, SurvivalRecord, TimeGrid};
use censrank::error::Error;
use censrank::estimators::kaplan_meier as km;
use censrank::harness::{self, ExperimentConfig, GridPoint, TrainRun, TrainedModel};
use censrank::losses::{self, GroundWeights, LossConfig, LossKind, Phi, TieMethod};
use censrank::metrics::{self, ScoreVector};
use censrank::pipeline::{generate_records, SyntheticConfig};

type Columns = (Vec<Vec<f64>>, Vec<f64>, Vec<bool>);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::UndefinedMetric(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(format!("{}: {other}", other.kind())),
    }
}

fn records(features: Option<Vec<Vec<f64>>>, times: &[f64], events: &[bool]) -> PyResult<Vec<SurvivalRecord>> {
    if times.len() != events.len() {
        return Err(PyValueError::new_err("times and events differ in length"));
    }
    let features = features.unwrap_or_else(|| vec![Vec::new(); times.len()]);
    if features.len() != times.len() {
        return Err(PyValueError::new_err("features and times differ in length"));
    }
    features
        .into_iter()
        .zip(times.iter().zip(events))
        .map(|(x, (&t, &e))| SurvivalRecord::new(x, t, e).map_err(py_err))
        .collect()
}

fn dataset(features: Option<Vec<Vec<f64>>>, times: &[f64], events: &[bool], bin_width: f64) -> PyResult<Dataset> {
    Dataset::from_records(records(features, times, events)?, bin_width).map_err(py_err)
}

/// Concordance index; `scores` are oriented higher = later event unless `risk` is set.
#[pyfunction]
#[pyo3(signature = (times, events, scores, risk = false))]
fn c_index(times: Vec<f64>, events: Vec<bool>, scores: Vec<f64>, risk: bool) -> PyResult<f64> {
    let ds = dataset(None, &times, &events, 1.0)?;
    let s = if risk { ScoreVector::from_risk(&scores) } else { ScoreVector::new(scores) }.map_err(py_err)?;
    metrics::c_index(&ds, &s).map_err(py_err)
}

/// Kaplan-Meier curve on grid bins as a dict of lists.
#[pyfunction]
#[pyo3(signature = (times, events, bin_width = 1.0))]
fn kaplan_meier<'py>(py: Python<'py>, times: Vec<f64>, events: Vec<bool>, bin_width: f64) -> PyResult<Bound<'py, PyDict>> {
    let curve = km(&dataset(None, &times, &events, bin_width)?).map_err(py_err)?;
    let out = PyDict::new(py);
    let edges: Vec<f64> = (0..curve.num_bins()).map(|k| curve.grid.left_edge(k)).collect();
    out.set_item("bin_left_edge", edges)?;
    out.set_item("survival", curve.survival)?;
    out.set_item("events", curve.event_counts)?;
    out.set_item("at_risk", curve.at_risk)?;
    Ok(out)
}

/// Negative Cox partial log-likelihood of raw outputs.
#[pyfunction]
#[pyo3(signature = (outputs, times, events, ties = "breslow", bin_width = 1.0))]
fn cox_nll(outputs: Vec<f64>, times: Vec<f64>, events: Vec<bool>, ties: &str, bin_width: f64) -> PyResult<f64> {
    let ties = match ties {
        "breslow" => TieMethod::Breslow,
        "efron" => TieMethod::Efron,
        other => return Err(PyValueError::new_err(format!("unknown tie method '{other}'"))),
    };
    losses::cox_nll(&outputs, &dataset(None, &times, &events, bin_width)?, ties).map_err(py_err)
}

/// Pairwise ranking loss over all acceptable pairs.
#[pyfunction]
#[pyo3(signature = (scores, times, events, phi = "sigmoid"))]
fn ranking_loss(scores: Vec<f64>, times: Vec<f64>, events: Vec<bool>, phi: &str) -> PyResult<f64> {
    let phi = match phi {
        "sigmoid" => Phi::Sigmoid,
        "logsigmoid" => Phi::LogSigmoid,
        "hinge" => Phi::Hinge,
        "exp" => Phi::Exponential,
        other => return Err(PyValueError::new_err(format!("unknown phi '{other}'"))),
    };
    let pairs = metrics::acceptable_pairs(&dataset(None, &times, &events, 1.0)?);
    losses::ranking_loss(&scores, &pairs, phi).map_err(py_err)
}

/// Weighted CDF distance `sum_t w_t |p_t - q_t|^l`; uniform weights by default.
#[pyfunction]
#[pyo3(signature = (pred_cdf, target_cdf, weights = None, l = 1.5))]
fn wm_distance(pred_cdf: Vec<f64>, target_cdf: Vec<f64>, weights: Option<Vec<f64>>, l: f64) -> PyResult<f64> {
    let w = match weights {
        Some(w) => GroundWeights { weights: w, smoothing: 0.0 },
        None => GroundWeights::uniform(pred_cdf.len()),
    };
    losses::wm_distance(&pred_cdf, &target_cdf, &w, l).map_err(py_err)
}

/// Synthetic data: `(features, times, events)`.
#[pyfunction]
#[pyo3(signature = (n, num_features, censor_fraction = 0.3, tie_density = 0.0, seed = 0, signal = 2.0, shape = 1.0, scale = 365.0))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    n: usize,
    num_features: usize,
    censor_fraction: f64,
    tie_density: f64,
    seed: u64,
    signal: f64,
    shape: f64,
    scale: f64,
) -> PyResult<Columns> {
    let cfg = SyntheticConfig::new(n, num_features, censor_fraction, tie_density, seed)
        .with_signal(signal)
        .with_shape(shape)
        .with_scale(scale);
    let recs = generate_records(&cfg).map_err(py_err)?;
    let times = recs.iter().map(|r| r.time).collect();
    let events = recs.iter().map(|r| r.observed).collect();
    Ok((recs.into_iter().map(|r| r.features).collect(), times, events))
}

fn train_run(loss: &str, hidden: Vec<usize>, dropout: f64, max_epochs: usize, patience: usize, seed: u64) -> PyResult<TrainRun> {
    let kind: LossKind = loss.parse().map_err(py_err)?;
    Ok(TrainRun {
        hidden_dims: hidden,
        dropout_rate: dropout,
        max_epochs,
        patience,
        seed,
        ..TrainRun::new(LossConfig::new(kind))
    })
}

/// A network trained with early stopping on a validation set.
#[pyclass(name = "Model", module = "censrank_py")]
struct PyModel {
    inner: TrainedModel,
    grid: TimeGrid,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (
        features, times, events, val_features, val_times, val_events,
        loss = "wm", learning_rate = 1e-3, l2 = 0.0, bin_width = 1.0,
        hidden = vec![100, 100, 100], dropout = 0.5, max_epochs = 200, patience = 10, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        features: Vec<Vec<f64>>,
        times: Vec<f64>,
        events: Vec<bool>,
        val_features: Vec<Vec<f64>>,
        val_times: Vec<f64>,
        val_events: Vec<bool>,
        loss: &str,
        learning_rate: f64,
        l2: f64,
        bin_width: f64,
        hidden: Vec<usize>,
        dropout: f64,
        max_epochs: usize,
        patience: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let run = TrainRun {
            learning_rate,
            l2_coefficient: l2,
            ..train_run(loss, hidden, dropout, max_epochs, patience, seed)?
        };
        let train = dataset(Some(features), &times, &events, bin_width)?;
        let grid = *train.grid();
        let val = Dataset::for_inference(records(Some(val_features), &val_times, &val_events)?, grid).map_err(py_err)?;
        let inner = harness::train_model(&run, &train, &val).map_err(py_err)?;
        Ok(Self { inner, grid })
    }

    /// Scores for new rows, higher = later event.
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let n = features.len();
        let recs = records(Some(features), &vec![0.0; n], &vec![false; n])?;
        let ds = Dataset::for_inference(recs, self.grid).map_err(py_err)?;
        Ok(self.inner.scores(&ds).map_err(py_err)?.as_slice().to_vec())
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.inner.history.best_epoch
    }

    #[getter]
    fn val_c_index(&self) -> Vec<f64> {
        self.inner.history.val_c_index.clone()
    }
}

/// k-fold cross-validation; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (
    features, times, events, loss = "wm", k = 5, seed = 0, bin_width = 1.0,
    learning_rates = vec![1e-2, 1e-3, 1e-4], l2 = vec![0.0, 1e-4, 1e-3, 1e-2],
    hidden = vec![100, 100, 100], dropout = 0.5, max_epochs = 200, patience = 10
))]
#[allow(clippy::too_many_arguments)]
fn cross_validate<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    times: Vec<f64>,
    events: Vec<bool>,
    loss: &str,
    k: usize,
    seed: u64,
    bin_width: f64,
    learning_rates: Vec<f64>,
    l2: Vec<f64>,
    hidden: Vec<usize>,
    dropout: f64,
    max_epochs: usize,
    patience: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let recs = records(Some(features), &times, &events)?;
    let grid = learning_rates
        .iter()
        .flat_map(|&learning_rate| l2.iter().map(move |&l2| GridPoint { learning_rate, l2 }))
        .collect();
    let config = ExperimentConfig {
        k,
        seed,
        bin_width,
        grid,
        ..ExperimentConfig::new(train_run(loss, hidden, dropout, max_epochs, patience, seed)?)
    };
    let report = py.detach(|| harness::run_cv(recs.as_slice(), &config)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("loss", &report.loss)?;
    out.set_item("mean", report.mean)?;
    out.set_item("std_error", report.std_error)?;
    out.set_item("test_c_index", report.folds.iter().map(|f| f.test_c_index).collect::<Vec<_>>())?;
    out.set_item("val_c_index", report.folds.iter().map(|f| f.val_c_index).collect::<Vec<_>>())?;
    Ok(out)
}

#[pymodule]
pub fn censrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(c_index, m)?)?;
    m.add_function(wrap_pyfunction!(kaplan_meier, m)?)?;
    m.add_function(wrap_pyfunction!(cox_nll, m)?)?;
    m.add_function(wrap_pyfunction!(ranking_loss, m)?)?;
    m.add_function(wrap_pyfunction!(wm_distance, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_class::<PyModel>()?;
    m.add("LOSSES", LossKind::all().iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}
