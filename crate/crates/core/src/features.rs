//! Residual statistics across several STL window lengths, and min-max
//! scaling of the resulting feature vectors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{stl_decompose, StlError, StlTemplate};
use crate::waveform::Waveform;

/// Seasonal window lengths for full-length (800,000 sample) waveforms.
pub const DEFAULT_WINDOWS: [usize; 4] = [100, 1_000, 10_000, 50_000];

/// Statistics per window: sum, max and standard deviation of `|residual|`.
pub const STATS_PER_WINDOW: usize = 3;

/// Feature count for the default four windows.
pub const FEATURE_COUNT: usize = DEFAULT_WINDOWS.len() * STATS_PER_WINDOW;

pub const SCALER_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty input")]
    Empty,
    #[error("invalid window lengths: {0}")]
    InvalidWindows(String),
    #[error("waveform {id} has {len} samples, too short for window {window} (needs {})", 2 * window)]
    WindowTooLarge { id: String, window: usize, len: usize },
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("STL failed on waveform {id}, window {window}: {source}")]
    Stl {
        id: String,
        window: usize,
        #[source]
        source: StlError,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported scaler version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid scaler: {0}")]
    InvalidScaler(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualFeatures {
    pub sum_abs: f64,
    pub max_abs: f64,
    pub std_abs: f64,
}

impl ResidualFeatures {
    pub fn to_array(self) -> [f64; STATS_PER_WINDOW] {
        [self.sum_abs, self.max_abs, self.std_abs]
    }
}

/// Sum, maximum and population standard deviation of `|residual|`.
pub fn residual_features(residual: &[f64]) -> Result<ResidualFeatures> {
    if residual.is_empty() {
        return Err(FeatureError::Empty);
    }
    let n = residual.len() as f64;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for r in residual {
        let a = r.abs();
        sum += a;
        max = max.max(a);
    }
    let mean = sum / n;
    let var = residual
        .iter()
        .map(|r| {
            let d = r.abs() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(ResidualFeatures { sum_abs: sum, max_abs: max, std_abs: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// `(sum, max, std)` triples in ascending window order.
    pub values: Vec<f64>,
    pub label: Option<bool>,
    pub source_id: String,
}

/// Extraction settings carried alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub window_lengths: Vec<usize>,
    #[serde(default)]
    pub stl: StlTemplate,
}

impl FeatureSpec {
    pub fn new(window_lengths: Vec<usize>) -> Self {
        Self { window_lengths, stl: StlTemplate::default() }
    }

    pub fn extract(&self, waveform: &Waveform) -> Result<FeatureVector> {
        extract_features(waveform, &self.window_lengths, &self.stl)
    }
}

pub fn validate_windows(window_lengths: &[usize]) -> Result<()> {
    if window_lengths.is_empty() {
        return Err(FeatureError::InvalidWindows("no windows".to_string()));
    }
    if window_lengths.iter().any(|&w| w < 2) {
        return Err(FeatureError::InvalidWindows("every window must be at least 2".to_string()));
    }
    if window_lengths.windows(2).any(|p| p[0] >= p[1]) {
        return Err(FeatureError::InvalidWindows(
            "windows must be strictly ascending".to_string(),
        ));
    }
    Ok(())
}

/// One STL run per window, concatenating the residual statistics.
pub fn extract_features(
    waveform: &Waveform,
    window_lengths: &[usize],
    template: &StlTemplate,
) -> Result<FeatureVector> {
    validate_windows(window_lengths)?;
    let len = waveform.samples.len();
    if let Some(&window) = window_lengths.iter().find(|&&w| 2 * w > len) {
        return Err(FeatureError::WindowTooLarge { id: waveform.id.clone(), window, len });
    }
    let mut values = Vec::with_capacity(window_lengths.len() * STATS_PER_WINDOW);
    for &window in window_lengths {
        let decomposition = stl_decompose(&waveform.samples, &template.config_for(window))
            .map_err(|source| FeatureError::Stl { id: waveform.id.clone(), window, source })?;
        values.extend(residual_features(&decomposition.residual)?.to_array());
    }
    Ok(FeatureVector { values, label: waveform.label, source_id: waveform.id.clone() })
}

/// Extracts every waveform on the current rayon pool; output order follows
/// the input order.
pub fn extract_many(
    waveforms: &[Waveform],
    window_lengths: &[usize],
    template: &StlTemplate,
) -> Result<Vec<FeatureVector>> {
    waveforms
        .par_iter()
        .map(|w| extract_features(w, window_lengths, template))
        .collect()
}

/// Per-coordinate extrema of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScalerFile {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    version: u32,
}

impl ScalerParams {
    pub fn dims(&self) -> usize {
        self.mins.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mins.len() != self.maxs.len() {
            return Err(FeatureError::InvalidScaler("mins and maxs differ in length".to_string()));
        }
        if self.mins.iter().zip(&self.maxs).any(|(lo, hi)| lo.partial_cmp(hi).is_none_or(std::cmp::Ordering::is_gt)) {
            return Err(FeatureError::InvalidScaler("a min exceeds its max".to_string()));
        }
        Ok(())
    }

    /// `(v - min) / (max - min)` per coordinate, 0 where `max == min`.
    /// Values outside the fitted range are not clamped.
    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dims() {
            return Err(FeatureError::DimensionMismatch { expected: self.dims(), got: values.len() });
        }
        Ok(values
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(v, (lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string(&ScalerFile {
            mins: self.mins.clone(),
            maxs: self.maxs.clone(),
            version: SCALER_VERSION,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScalerFile = serde_json::from_str(text)?;
        if file.version != SCALER_VERSION {
            return Err(FeatureError::UnsupportedVersion(file.version));
        }
        let params = Self { mins: file.mins, maxs: file.maxs };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn fit_scaler(dataset: &[FeatureVector]) -> Result<ScalerParams> {
    let first = dataset.first().ok_or(FeatureError::Empty)?;
    let dims = first.values.len();
    let mut mins = first.values.clone();
    let mut maxs = first.values.clone();
    for v in &dataset[1..] {
        if v.values.len() != dims {
            return Err(FeatureError::DimensionMismatch { expected: dims, got: v.values.len() });
        }
        for (j, &x) in v.values.iter().enumerate() {
            mins[j] = mins[j].min(x);
            maxs[j] = maxs[j].max(x);
        }
    }
    Ok(ScalerParams { mins, maxs })
}

pub fn apply_scaler(params: &ScalerParams, vector: &FeatureVector) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: params.transform(&vector.values)?,
        label: vector.label,
        source_id: vector.source_id.clone(),
    })
}

fn label_token(label: Option<bool>) -> &'static str {
    match label {
        Some(true) => "1",
        Some(false) => "0",
        None => "-",
    }
}

/// Writes `id,label,f0..f{d-1}` rows.
pub fn write_features_csv(vectors: &[FeatureVector], path: &Path) -> Result<()> {
    let dims = vectors.first().map_or(FEATURE_COUNT, |v| v.values.len());
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "id,label")?;
    for j in 0..dims {
        write!(out, ",f{j}")?;
    }
    writeln!(out)?;
    for v in vectors {
        if v.values.len() != dims {
            return Err(FeatureError::DimensionMismatch { expected: dims, got: v.values.len() });
        }
        if v.source_id.contains([',', '\n', '\r']) {
            return Err(FeatureError::InvalidWindows(format!("id {:?} contains a separator", v.source_id)));
        }
        write!(out, "{},{}", v.source_id, label_token(v.label))?;
        for x in &v.values {
            write!(out, ",{x:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    parse_features_csv(&std::fs::read_to_string(path)?)
}

pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let perr = |line: usize, message: String| FeatureError::Parse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(FeatureError::Empty)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let dims = cols.len().saturating_sub(2);
    let expected: Vec<String> = ["id".to_string(), "label".to_string()]
        .into_iter()
        .chain((0..dims).map(|j| format!("f{j}")))
        .collect();
    if cols != expected || dims == 0 {
        return Err(perr(1, "expected header id,label,f0,...".to_string()));
    }
    let mut out = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != dims + 2 {
            return Err(perr(line, format!("expected {} fields, found {}", dims + 2, fields.len())));
        }
        let label = match fields[1] {
            "1" => Some(true),
            "0" => Some(false),
            "-" => None,
            other => return Err(perr(line, format!("bad label {other:?}"))),
        };
        let values = fields[2..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(perr(line, format!("bad feature value {f:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(FeatureVector { values, label, source_id: fields[0].to_string() });
    }
    Ok(out)
}
