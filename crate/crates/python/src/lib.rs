//! Python bindings: waveforms, STL, features, oversampling, the SVM and
//! evaluation, plus the one-call training pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use pdstl::eval::{self, EvalReport};
use pdstl::features::{self, FeatureSpec, FeatureVector, ScalerParams};
use pdstl::pipeline::{self, CorpusSpec, PipelineConfig};
use pdstl::sampler;
use pdstl::stl::{self, LoessConfig, StlTemplate};
use pdstl::svm::{self, KernelKind, KernelSpec, SvmModel, TrainConfig};
use pdstl::waveform::{self, CorpusFormat, SynthParams};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn waveform_err(e: waveform::WaveformError) -> PyErr {
    match e {
        waveform::WaveformError::Invalid(_) => value_err(e),
        _ => io_err(e),
    }
}

fn pipeline_err(e: pipeline::PipelineError) -> PyErr {
    match e {
        pipeline::PipelineError::Io(_) => io_err(e),
        _ => value_err(e),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Waveform", from_py_object)]
#[derive(Clone)]
struct PyWaveform {
    inner: waveform::Waveform,
}

#[pymethods]
impl PyWaveform {
    #[new]
    #[pyo3(signature = (id, samples, sample_rate_hz, phase = 0, label = None))]
    fn new(id: String, samples: Vec<f64>, sample_rate_hz: f64, phase: u8, label: Option<bool>) -> PyResult<Self> {
        let inner = waveform::Waveform::new(id, phase, label, sample_rate_hz, samples).map_err(waveform_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn phase(&self) -> u8 {
        self.inner.phase
    }

    #[getter]
    fn label(&self) -> Option<bool> {
        self.inner.label
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.sample_rate_hz
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Waveform(id={:?}, n_samples={}, label={:?})",
            self.inner.id,
            self.inner.len(),
            self.inner.label
        )
    }
}

fn unwrap_waveforms(ws: &[PyWaveform]) -> Vec<waveform::Waveform> {
    ws.iter().map(|w| w.inner.clone()).collect()
}

#[pyfunction]
fn read_corpus(path: PathBuf) -> PyResult<Vec<PyWaveform>> {
    Ok(waveform::read_corpus(&path)
        .map_err(waveform_err)?
        .into_iter()
        .map(|inner| PyWaveform { inner })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (waveforms, path, format = None))]
fn write_corpus(waveforms: Vec<PyWaveform>, path: PathBuf, format: Option<&str>) -> PyResult<()> {
    let format = match format {
        None => CorpusFormat::detect(&path),
        Some("csv") => CorpusFormat::Csv,
        Some("pdwf") => CorpusFormat::Pdwf,
        Some(other) => return Err(value_err(format!("unknown format {other:?}"))),
    };
    waveform::write_corpus(&unwrap_waveforms(&waveforms), &path, format).map_err(waveform_err)
}

#[pyfunction]
#[pyo3(signature = (n_samples = 8000, amplitude = 1.0, noise_sigma = 0.02, n_bursts = 0, burst_amplitude = 0.3,
                    burst_decay_samples = 4.0, burst_carrier_cycles_per_burst = 3.0, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn synth_waveform(
    n_samples: usize,
    amplitude: f64,
    noise_sigma: f64,
    n_bursts: usize,
    burst_amplitude: f64,
    burst_decay_samples: f64,
    burst_carrier_cycles_per_burst: f64,
    seed: u64,
) -> PyResult<PyWaveform> {
    let params = SynthParams {
        n_samples,
        amplitude,
        noise_sigma,
        n_bursts,
        burst_amplitude,
        burst_decay_samples,
        burst_carrier_cycles_per_burst,
        seed,
    };
    Ok(PyWaveform { inner: waveform::synth_waveform(&params).map_err(waveform_err)? })
}

#[pyfunction]
#[pyo3(signature = (n_pd, n_nonpd, n_samples = 8000, pd_bursts = 3, seed = 0))]
fn synth_corpus(n_pd: usize, n_nonpd: usize, n_samples: usize, pd_bursts: usize, seed: u64) -> PyResult<Vec<PyWaveform>> {
    let spec = CorpusSpec {
        n_pd,
        n_nonpd,
        pd_bursts,
        params: SynthParams { n_samples, ..SynthParams::default() },
        seed,
    };
    Ok(pipeline::synth_corpus(&spec)
        .map_err(pipeline_err)?
        .into_iter()
        .map(|inner| PyWaveform { inner })
        .collect())
}

/// Returns `(trend, seasonal, residual)`.
#[pyfunction]
#[pyo3(signature = (series, period, seasonal_span = None, trend_span = None, lowpass_span = None,
                    inner_iterations = None, outer_iterations = None))]
fn stl_decompose(
    series: Vec<f64>,
    period: usize,
    seasonal_span: Option<usize>,
    trend_span: Option<usize>,
    lowpass_span: Option<usize>,
    inner_iterations: Option<usize>,
    outer_iterations: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let template = StlTemplate {
        seasonal_span,
        trend_span,
        lowpass_span,
        inner_iterations,
        outer_iterations,
        ..StlTemplate::default()
    };
    let d = stl::stl_decompose(&series, &template.config_for(period)).map_err(value_err)?;
    Ok((d.trend, d.seasonal, d.residual))
}

#[pyfunction]
#[pyo3(signature = (xs, ys, eval_points, span, degree = 1, jump = 1, robustness_weights = None))]
fn loess_smooth(
    xs: Vec<f64>,
    ys: Vec<f64>,
    eval_points: Vec<f64>,
    span: usize,
    degree: u8,
    jump: usize,
    robustness_weights: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let config = LoessConfig { span, degree, jump };
    stl::loess_smooth(&xs, &ys, &eval_points, &config, robustness_weights.as_deref()).map_err(value_err)
}

/// Returns `(sum, max, std)` of `|residual|`.
#[pyfunction]
fn residual_features(residual: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = features::residual_features(&residual).map_err(value_err)?;
    Ok((f.sum_abs, f.max_abs, f.std_abs))
}

#[pyfunction]
#[pyo3(signature = (waveforms, windows = None))]
fn extract_features(py: Python<'_>, waveforms: Vec<PyWaveform>, windows: Option<Vec<usize>>) -> PyResult<Vec<Vec<f64>>> {
    let windows = windows.unwrap_or_else(|| features::DEFAULT_WINDOWS.to_vec());
    let ws = unwrap_waveforms(&waveforms);
    let out = py
        .detach(|| features::extract_many(&ws, &windows, &StlTemplate::default()))
        .map_err(value_err)?;
    Ok(out.into_iter().map(|v| v.values).collect())
}

#[pyclass(name = "Scaler", from_py_object)]
#[derive(Clone)]
struct PyScaler {
    inner: ScalerParams,
}

#[pymethods]
impl PyScaler {
    #[staticmethod]
    fn fit(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let data = unlabeled(rows);
        Ok(Self { inner: features::fit_scaler(&data).map_err(value_err)? })
    }

    fn transform(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.inner.transform(r).map_err(value_err)).collect()
    }

    #[getter]
    fn mins(&self) -> Vec<f64> {
        self.inner.mins.clone()
    }

    #[getter]
    fn maxs(&self) -> Vec<f64> {
        self.inner.maxs.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ScalerParams::from_json(text).map_err(value_err)? })
    }
}

fn unlabeled(rows: Vec<Vec<f64>>) -> Vec<FeatureVector> {
    rows.into_iter()
        .enumerate()
        .map(|(i, values)| FeatureVector { values, label: None, source_id: i.to_string() })
        .collect()
}

fn labeled(rows: Vec<Vec<f64>>, labels: &[bool]) -> PyResult<Vec<FeatureVector>> {
    if rows.len() != labels.len() {
        return Err(value_err(format!("{} rows for {} labels", rows.len(), labels.len())));
    }
    Ok(rows
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (values, &l))| FeatureVector { values, label: Some(l), source_id: i.to_string() })
        .collect())
}

/// Balances classes by duplication; returns `(rows, labels)`.
#[pyfunction]
#[pyo3(signature = (rows, labels, seed = 0))]
fn oversample(rows: Vec<Vec<f64>>, labels: Vec<bool>, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<bool>)> {
    let out = sampler::oversample_duplicate(&labeled(rows, &labels)?, seed).map_err(value_err)?;
    Ok(out.into_iter().map(|v| (v.values, v.label.unwrap_or(false))).unzip())
}

fn kernel_spec(kind: &str, degree: u32, gamma: Option<f64>, dims: usize) -> PyResult<KernelSpec> {
    let kind: KernelKind = kind.parse().map_err(value_err)?;
    let spec = KernelSpec { kind, degree, gamma: gamma.unwrap_or(1.0 / dims.max(1) as f64) };
    spec.validate().map_err(value_err)?;
    Ok(spec)
}

#[pyfunction]
#[pyo3(signature = (kind, x1, x2, degree = 6, gamma = None))]
fn kernel_eval(kind: &str, x1: Vec<f64>, x2: Vec<f64>, degree: u32, gamma: Option<f64>) -> PyResult<f64> {
    let spec = kernel_spec(kind, degree, gamma, x1.len())?;
    svm::kernel_eval(&spec, &x1, &x2).map_err(value_err)
}

#[pyclass(name = "SvmModel", from_py_object)]
#[derive(Clone)]
struct PySvmModel {
    inner: SvmModel,
}

#[pymethods]
impl PySvmModel {
    /// Trains on already-scaled rows.
    #[staticmethod]
    #[pyo3(signature = (rows, labels, kernel = "rbf", c = 1.0, tol = 1e-3, degree = 6, gamma = None, seed = 0,
                        max_passes = None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
        kernel: &str,
        c: f64,
        tol: f64,
        degree: u32,
        gamma: Option<f64>,
        seed: u64,
        max_passes: Option<usize>,
    ) -> PyResult<Self> {
        let spec = kernel_spec(kernel, degree, gamma, rows.first().map_or(1, Vec::len))?;
        let config = TrainConfig { c, tol, max_passes, seed };
        let outcome = py.detach(|| svm::train(&rows, &labels, &spec, &config)).map_err(value_err)?;
        Ok(Self { inner: outcome.model })
    }

    fn decision_value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.decision_value_raw(&x).map_err(value_err)
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<bool>> {
        rows.iter()
            .map(|r| self.inner.decision_value_raw(r).map(|f| f > 0.0).map_err(value_err))
            .collect()
    }

    #[getter]
    fn n_support(&self) -> usize {
        self.inner.support_vectors.len()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: SvmModel::from_json(text).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        svm::save_model(&self.inner, &path).map_err(io_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: svm::load_model(&path).map_err(value_err)? })
    }

    /// Scores raw waveforms with the feature settings stored in the model.
    fn predict_waveforms(&self, py: Python<'_>, waveforms: Vec<PyWaveform>) -> PyResult<Vec<(String, f64, bool)>> {
        let ws = unwrap_waveforms(&waveforms);
        let preds = py
            .detach(|| pipeline::predict_waveforms(&self.inner, &ws))
            .map_err(pipeline_err)?;
        Ok(preds.into_iter().map(|p| (p.id, p.decision_value, p.label)).collect())
    }
}

fn report_to_py<'py>(py: Python<'py>, report: &EvalReport) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &report.to_json().map_err(value_err)?)
}

/// Returns the report as a dict with `per_class`, `macro`, `confusion`, `flags`.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, predictions: Vec<bool>, labels: Vec<bool>) -> PyResult<Bound<'py, PyAny>> {
    let report = eval::evaluate(&predictions, &labels).map_err(value_err)?;
    report_to_py(py, &report)
}

/// Text table of an evaluation.
#[pyfunction]
fn evaluation_table(predictions: Vec<bool>, labels: Vec<bool>) -> PyResult<String> {
    Ok(eval::evaluate(&predictions, &labels).map_err(value_err)?.to_table())
}

/// Extracts features, splits, scales, oversamples, trains and evaluates.
/// `config` is a JSON run configuration (all keys optional). Returns
/// `(model, heldout_report_or_None, training_report)`.
#[pyfunction]
#[pyo3(signature = (waveforms, config = None))]
fn train_pipeline<'py>(
    py: Python<'py>,
    waveforms: Vec<PyWaveform>,
    config: Option<&str>,
) -> PyResult<(PySvmModel, Option<Bound<'py, PyAny>>, Bound<'py, PyAny>)> {
    let config = match config {
        Some(text) => PipelineConfig::from_json(text).map_err(pipeline_err)?,
        None => PipelineConfig::default(),
    };
    let ws = unwrap_waveforms(&waveforms);
    let run = py
        .detach(|| -> pipeline::Result<_> {
            let spec: FeatureSpec = config.feature_spec()?;
            let fv = features::extract_many(&ws, &spec.window_lengths, &spec.stl)?;
            pipeline::train_pipeline(&fv, &config, Some(spec))
        })
        .map_err(pipeline_err)?;
    let heldout = run.heldout.as_ref().map(|r| report_to_py(py, r)).transpose()?;
    let training = report_to_py(py, &run.training)?;
    Ok((PySvmModel { inner: run.model }, heldout, training))
}

#[pymodule]
fn pdstl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWaveform>()?;
    m.add_class::<PyScaler>()?;
    m.add_class::<PySvmModel>()?;
    m.add_function(wrap_pyfunction!(read_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(synth_waveform, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(stl_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(loess_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(residual_features, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(oversample, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_eval, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluation_table, m)?)?;
    m.add_function(wrap_pyfunction!(train_pipeline, m)?)?;
    m.add("DEFAULT_WINDOWS", features::DEFAULT_WINDOWS.to_vec())?;
    Ok(())
}
