//! Single-cycle voltage waveforms: the in-memory type, the CSV and PDWF
//! on-disk formats, and the seeded synthetic generator used for desk-scale
//! corpora.

mod binary;
mod csv;
mod synth;

use std::path::Path;

use thiserror::Error;

pub use binary::{decode_pdwf, encode_pdwf, read_waveform_binary, write_waveform_binary, PDWF_MAGIC, PDWF_VERSION};
pub use csv::{read_waveforms_csv, write_waveforms_csv, CSV_HEADER};
pub use synth::{synth_waveform, synth_waveform_traced, BurstTrace, SynthParams};

/// Fundamental frequency of the recorded line voltage.
pub const LINE_FREQUENCY_HZ: f64 = 50.0;

/// Length of one recorded cycle in the VSB corpus.
pub const CANONICAL_SAMPLES: usize = 800_000;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no waveforms")]
    NoWaveforms,
    #[error("not a PDWF file")]
    NotPdwf,
    #[error("truncated")]
    Truncated,
    #[error("unsupported PDWF version {0}")]
    UnsupportedVersion(u16),
    #[error("invalid waveform: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, WaveformError>;

/// One labeled single-cycle voltage signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub id: String,
    /// Conductor phase, 0..=2.
    pub phase: u8,
    /// `Some(true)` marks partial-discharge activity; `None` is unlabeled.
    pub label: Option<bool>,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(
        id: impl Into<String>,
        phase: u8,
        label: Option<bool>,
        sample_rate_hz: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let waveform = Self {
            id: id.into(),
            phase,
            label,
            sample_rate_hz,
            samples,
        };
        waveform.validate()?;
        Ok(waveform)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(WaveformError::Invalid(format!("{}: no samples", self.id)));
        }
        if self.phase > 2 {
            return Err(WaveformError::Invalid(format!(
                "{}: phase {} outside 0..=2",
                self.id, self.phase
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(WaveformError::Invalid(format!(
                "{}: sample rate must be positive",
                self.id
            )));
        }
        if let Some(k) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(WaveformError::Invalid(format!(
                "{}: non-finite sample at index {k}",
                self.id
            )));
        }
        if self.id.contains([',', '\n', '\r']) {
            return Err(WaveformError::Invalid(format!(
                "id {:?} contains a separator character",
                self.id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Storage format of a waveform corpus on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// A single CSV file holding every waveform.
    Csv,
    /// A directory with one `.pdwf` file per waveform, or a single `.pdwf` file.
    Pdwf,
}

impl CorpusFormat {
    pub fn detect(path: &Path) -> Self {
        let is_pdwf_file = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("pdwf"));
        if path.is_dir() || is_pdwf_file {
            CorpusFormat::Pdwf
        } else {
            CorpusFormat::Csv
        }
    }
}

/// Reads a corpus from a CSV file, a single `.pdwf` file, or a directory of
/// `.pdwf` files (loaded in file-name order).
pub fn read_corpus(path: &Path) -> Result<Vec<Waveform>> {
    match CorpusFormat::detect(path) {
        CorpusFormat::Csv => read_waveforms_csv(path),
        CorpusFormat::Pdwf if path.is_file() => Ok(vec![read_waveform_binary(path)?]),
        CorpusFormat::Pdwf => {
            let mut files = Vec::new();
            for entry in std::fs::read_dir(path)? {
                let p = entry?.path();
                if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdwf")) {
                    files.push(p);
                }
            }
            files.sort();
            files.iter().map(|p| read_waveform_binary(p)).collect()
        }
    }
}

/// Writes a corpus in the requested format. For PDWF, `path` is a directory
/// that receives one `<id>.pdwf` file per waveform.
pub fn write_corpus(waveforms: &[Waveform], path: &Path, format: CorpusFormat) -> Result<()> {
    match format {
        CorpusFormat::Csv => write_waveforms_csv(waveforms, path),
        CorpusFormat::Pdwf => {
            std::fs::create_dir_all(path)?;
            for w in waveforms {
                if w.id.contains(['/', '\\']) || w.id.is_empty() || w.id.starts_with('.') {
                    return Err(WaveformError::Invalid(format!(
                        "id {:?} is not usable as a file name",
                        w.id
                    )));
                }
                write_waveform_binary(w, &path.join(format!("{}.pdwf", w.id)))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_waveforms() {
        assert!(Waveform::new("a", 0, None, 1.0, vec![]).is_err());
        assert!(Waveform::new("a", 3, None, 1.0, vec![0.0]).is_err());
        assert!(Waveform::new("a", 0, None, 0.0, vec![0.0]).is_err());
        assert!(Waveform::new("a", 0, None, 1.0, vec![f64::NAN]).is_err());
        assert!(Waveform::new("a,b", 0, None, 1.0, vec![0.0]).is_err());
        assert!(Waveform::new("a", 2, Some(true), 4e7, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn corpus_round_trip_through_pdwf_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("corpus");
        let ws = vec![
            Waveform::new("w1", 0, Some(true), 100.0, vec![0.5, -0.25, 1.0, 2.0]).unwrap(),
            Waveform::new("w0", 1, None, 100.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        ];
        write_corpus(&ws, &out, CorpusFormat::Pdwf).unwrap();
        let back = read_corpus(&out).unwrap();
        // directory listing is sorted by file name
        assert_eq!(back[0], ws[1]);
        assert_eq!(back[1], ws[0]);
    }
}
