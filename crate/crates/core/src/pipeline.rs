//! End-to-end wiring: synthetic corpora, run configuration, stratified
//! splitting, training with held-out evaluation, and batch prediction.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate, EvalError, EvalReport};
use crate::features::{
    apply_scaler, extract_many, fit_scaler, validate_windows, FeatureError, FeatureSpec, FeatureVector,
    DEFAULT_WINDOWS,
};
use crate::sampler::{oversample_duplicate, SamplerError};
use crate::stl::StlTemplate;
use crate::svm::{train_dataset, KernelKind, KernelSpec, SvmError, SvmModel, TrainConfig};
use crate::waveform::{read_corpus, synth_waveform, SynthParams, Waveform, WaveformError, CSV_HEADER};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// A labeled synthetic corpus: `n_pd` waveforms with bursts followed by
/// `n_nonpd` without.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub n_pd: usize,
    pub n_nonpd: usize,
    /// Bursts per PD waveform.
    pub pd_bursts: usize,
    /// Shared generator settings; `n_bursts` and `seed` are set per waveform.
    pub params: SynthParams,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_pd: 60,
            n_nonpd: 240,
            pd_bursts: 3,
            params: SynthParams { n_samples: 8_000, ..SynthParams::default() },
            seed: 0,
        }
    }
}

/// Generates the corpus described by `spec`. Waveform `i` is named
/// `wf-{i:05}` and seeded from the `i`-th draw of the corpus seed stream.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Vec<Waveform>> {
    let total = spec.n_pd + spec.n_nonpd;
    if total == 0 {
        return Err(PipelineError::Config("empty corpus requested".to_string()));
    }
    if spec.n_pd > 0 && spec.pd_bursts == 0 {
        return Err(PipelineError::Config("PD waveforms need at least one burst".to_string()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..total)
        .map(|i| {
            let params = SynthParams {
                n_bursts: if i < spec.n_pd { spec.pd_bursts } else { 0 },
                seed: seeds.next_u64(),
                ..spec.params.clone()
            };
            let mut w = synth_waveform(&params)?;
            w.id = format!("wf-{i:05}");
            Ok(w)
        })
        .collect()
}

/// Every knob of a train/evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_lengths: Vec<usize>,
    /// Multiplies every window length (rounded, at least 2).
    pub scale_factor: Option<f64>,
    pub stl: StlTemplate,
    pub kernel: KernelKind,
    pub degree: u32,
    /// Defaults to `1 / feature count`.
    pub gamma: Option<f64>,
    pub train: TrainConfig,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub oversample_seed: u64,
    pub oversample_test: bool,
    /// Corpus used by the `synth` and `pipeline` commands.
    pub corpus: CorpusSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_lengths: DEFAULT_WINDOWS.to_vec(),
            scale_factor: None,
            stl: StlTemplate::default(),
            kernel: KernelKind::Rbf,
            degree: 6,
            gamma: None,
            train: TrainConfig::default(),
            split_fraction: 0.8,
            split_seed: 0,
            oversample_seed: 0,
            oversample_test: false,
            corpus: CorpusSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string(self)?)
    }

    /// Window lengths after applying `scale_factor`.
    pub fn windows(&self) -> Result<Vec<usize>> {
        let windows = match self.scale_factor {
            Some(f) => scale_windows(&self.window_lengths, f)?,
            None => self.window_lengths.clone(),
        };
        validate_windows(&windows)?;
        Ok(windows)
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        Ok(FeatureSpec { window_lengths: self.windows()?, stl: self.stl })
    }

    pub fn kernel_spec(&self, n_features: usize) -> KernelSpec {
        KernelSpec {
            kind: self.kernel,
            degree: self.degree,
            gamma: self.gamma.unwrap_or(1.0 / n_features.max(1) as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.windows()?;
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(PipelineError::Config("split fraction must lie in (0, 1)".to_string()));
        }
        self.kernel_spec(1).validate()?;
        self.train.validate()?;
        Ok(())
    }
}

/// `round(w * factor)` clamped to at least 2; the result must stay strictly
/// ascending.
pub fn scale_windows(windows: &[usize], factor: f64) -> Result<Vec<usize>> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(PipelineError::Config("scale factor must be positive".to_string()));
    }
    let scaled: Vec<usize> = windows
        .iter()
        .map(|&w| ((w as f64 * factor).round() as usize).max(2))
        .collect();
    if scaled.windows(2).any(|p| p[0] >= p[1]) {
        return Err(PipelineError::Config(format!(
            "scale factor {factor} maps windows {windows:?} to {scaled:?}, which are not distinct"
        )));
    }
    Ok(scaled)
}

/// Splits each class separately: `round(fraction * count)` vectors of each
/// class (at least one) go to the training side, chosen by the seeded
/// shuffle. Both sides keep input order.
pub fn stratified_split(
    dataset: &[FeatureVector],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PipelineError::Config("split fraction must lie in (0, 1]".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; dataset.len()];
    for class in [true, false] {
        let mut idx = Vec::new();
        for (i, v) in dataset.iter().enumerate() {
            match v.label {
                Some(l) if l == class => idx.push(i),
                Some(_) => {}
                None => return Err(SamplerError::Unlabeled(v.source_id.clone()).into()),
            }
        }
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len());
        for &i in &idx[..k] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = dataset.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok((train.into_iter().map(|p| p.0).collect(), test.into_iter().map(|p| p.0).collect()))
}

/// Result of [`train_pipeline`].
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub model: SvmModel,
    /// Training side, before oversampling.
    pub training: EvalReport,
    /// Held-out side; `None` when the split left it empty.
    pub heldout: Option<EvalReport>,
    pub n_train: usize,
    pub n_test: usize,
    /// Ids of the held-out vectors, in input order.
    pub heldout_ids: Vec<String>,
    pub passes: usize,
    pub gap: f64,
}

impl TrainRun {
    /// Human-readable summary for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "trained on {} vectors ({} support vectors, {} passes, KKT gap {:.3e})",
            self.n_train,
            self.model.support_vectors.len(),
            self.passes,
            self.gap
        );
        let _ = writeln!(out, "training accuracy: {:.4}", self.training.confusion.accuracy());
        match &self.heldout {
            Some(r) => {
                let _ = writeln!(out, "held-out evaluation on {} vectors:\n{}", self.n_test, r.to_table());
            }
            None => {
                let _ = writeln!(out, "no held-out vectors");
            }
        }
        out
    }
}

/// Split, fit the scaler on the training side, oversample it, train, and
/// evaluate on both sides.
pub fn train_pipeline(
    dataset: &[FeatureVector],
    config: &PipelineConfig,
    features: Option<FeatureSpec>,
) -> Result<TrainRun> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(PipelineError::Data("no training vectors".to_string()));
    }
    let (train, test) = stratified_split(dataset, config.split_fraction, config.split_seed)?;
    let scaler = fit_scaler(&train)?;
    let scale = |d: &[FeatureVector]| -> Result<Vec<FeatureVector>> {
        Ok(d.iter().map(|v| apply_scaler(&scaler, v)).collect::<std::result::Result<_, _>>()?)
    };
    let train_scaled = scale(&train)?;
    let test_scaled = scale(&test)?;
    let balanced = oversample_duplicate(&train_scaled, config.oversample_seed)?;
    let kernel = config.kernel_spec(scaler.dims());
    let outcome = train_dataset(&balanced, &kernel, &config.train)?;
    let mut model = outcome.model;
    model.scaler = Some(scaler.clone());
    model.features = features;

    let report = |d: &[FeatureVector]| -> Result<EvalReport> {
        let preds = d
            .iter()
            .map(|v| model.predict(&v.values))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let labels: Vec<bool> = d.iter().map(|v| v.label.unwrap_or(false)).collect();
        Ok(evaluate(&preds, &labels)?)
    };
    let training = report(&train_scaled)?;
    let heldout = if test_scaled.is_empty() {
        None
    } else if config.oversample_test {
        Some(report(&oversample_duplicate(&test_scaled, config.oversample_seed)?)?)
    } else {
        Some(report(&test_scaled)?)
    };
    Ok(TrainRun {
        model,
        training,
        heldout,
        n_train: train.len(),
        n_test: test.len(),
        heldout_ids: test.iter().map(|v| v.source_id.clone()).collect(),
        passes: outcome.passes,
        gap: outcome.gap,
    })
}

pub const PREDICTIONS_HEADER: &str = "id,decision_value,predicted_label";

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub decision_value: f64,
    pub label: bool,
}

/// Scores raw (unscaled) feature vectors.
pub fn predict_features(model: &SvmModel, dataset: &[FeatureVector]) -> Result<Vec<Prediction>> {
    dataset
        .iter()
        .map(|v| {
            let f = model.decision_value_raw(&v.values)?;
            Ok(Prediction { id: v.source_id.clone(), decision_value: f, label: f > 0.0 })
        })
        .collect()
}

/// Extracts features with the model's stored settings, then scores them.
pub fn predict_waveforms(model: &SvmModel, waveforms: &[Waveform]) -> Result<Vec<Prediction>> {
    let spec = model.features.as_ref().ok_or_else(|| {
        PipelineError::Data("model does not record its feature windows; predict from a features CSV".to_string())
    })?;
    let features = extract_many(waveforms, &spec.window_lengths, &spec.stl)?;
    predict_features(model, &features)
}

pub fn format_predictions(predictions: &[Prediction]) -> String {
    let mut out = String::with_capacity(48 * (predictions.len() + 1));
    out.push_str(PREDICTIONS_HEADER);
    out.push('\n');
    for p in predictions {
        let _ = writeln!(out, "{},{:.16e},{}", p.id, p.decision_value, u8::from(p.label));
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == PREDICTIONS_HEADER => {}
        _ => {
            return Err(PipelineError::Parse {
                line: 1,
                message: format!("expected header {PREDICTIONS_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| PipelineError::Parse { line: i + 1, message: m.to_string() };
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        let decision_value = fields[1].parse::<f64>().map_err(|_| bad("bad decision value"))?;
        let label = match fields[2] {
            "1" => true,
            "0" => false,
            _ => return Err(bad("predicted label must be 0 or 1")),
        };
        out.push(Prediction { id: fields[0].to_string(), decision_value, label });
    }
    Ok(out)
}

/// Reads `(id, label)` pairs from a waveform corpus (CSV or PDWF), a
/// features CSV, or any CSV whose header starts with `id,label`.
/// Unlabeled entries are skipped.
pub fn read_labels(path: &Path) -> Result<Vec<(String, bool)>> {
    if !path.is_dir() && !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdwf")) {
        let text = std::fs::read_to_string(path)?;
        let header = text.lines().next().unwrap_or("").trim_end();
        if header.starts_with("id,label") {
            return parse_label_rows(&text);
        }
        if header != CSV_HEADER {
            return Err(PipelineError::Parse {
                line: 1,
                message: "expected a waveform CSV or an id,label CSV".to_string(),
            });
        }
    }
    Ok(read_corpus(path)?
        .into_iter()
        .filter_map(|w| w.label.map(|l| (w.id, l)))
        .collect())
}

fn parse_label_rows(text: &str) -> Result<Vec<(String, bool)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.trim_end().split(',');
        let id = fields.next().unwrap_or("");
        match fields.next() {
            Some("1") => out.push((id.to_string(), true)),
            Some("0") => out.push((id.to_string(), false)),
            Some("-") => {}
            _ => {
                return Err(PipelineError::Parse { line: i + 1, message: "label must be 0, 1 or -".to_string() })
            }
        }
    }
    Ok(out)
}

/// Pairs predictions with labels by id, in prediction order. Every id must
/// appear on both sides.
pub fn join_on_id(predictions: &[Prediction], labels: &[(String, bool)]) -> Result<(Vec<bool>, Vec<bool>)> {
    use std::collections::HashMap;
    let by_id: HashMap<&str, bool> = labels.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let pred_ids: std::collections::HashSet<&str> = predictions.iter().map(|p| p.id.as_str()).collect();
    let no_label: Vec<&str> = predictions
        .iter()
        .map(|p| p.id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    let no_pred: Vec<&str> = labels
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !pred_ids.contains(id))
        .collect();
    if !no_label.is_empty() || !no_pred.is_empty() {
        let mut msg = String::from("prediction and label ids differ");
        if !no_label.is_empty() {
            let _ = write!(msg, "; missing labels for: {}", no_label.join(", "));
        }
        if !no_pred.is_empty() {
            let _ = write!(msg, "; missing predictions for: {}", no_pred.join(", "));
        }
        return Err(PipelineError::Data(msg));
    }
    Ok(predictions.iter().map(|p| (p.label, by_id[p.id.as_str()])).unzip())
}
