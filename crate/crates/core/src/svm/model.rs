use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KernelSpec, SvmError, TrainConfig};
use crate::features::{FeatureSpec, ScalerParams};

pub const MODEL_VERSION: u32 = 1;

/// Trained classifier: `f(x) = sum_i dual_coefs[i] * k(support_vectors[i], x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    /// Scaling applied to raw features before the kernel expansion.
    pub scaler: Option<ScalerParams>,
    pub train_config: TrainConfig,
    /// How raw waveforms were turned into features, when known.
    pub features: Option<FeatureSpec>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kernel: KernelSpec,
    bias: f64,
    dual_coefs: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    scaler: Option<ScalerParams>,
    train_config: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<FeatureSpec>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

impl SvmModel {
    pub fn dims(&self) -> usize {
        self.support_vectors
            .first()
            .map(Vec::len)
            .or_else(|| self.scaler.as_ref().map(ScalerParams::dims))
            .unwrap_or(0)
    }

    /// Decision value for an already-scaled feature vector.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        let dims = self.dims();
        if x.len() != dims {
            return Err(SvmError::DimensionMismatch { expected: dims, got: x.len() });
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * self.kernel.eval_unchecked(sv, x))
            .sum();
        Ok(sum + self.bias)
    }

    /// Decision value for raw features, applying the stored scaler first.
    pub fn decision_value_raw(&self, raw: &[f64]) -> Result<f64, SvmError> {
        match &self.scaler {
            Some(s) => {
                let scaled = s.transform(raw).map_err(|_| SvmError::DimensionMismatch {
                    expected: s.dims(),
                    got: raw.len(),
                })?;
                self.decision_value(&scaled)
            }
            None => self.decision_value(raw),
        }
    }

    /// PD iff the decision value is strictly positive.
    pub fn predict(&self, x: &[f64]) -> Result<bool, SvmError> {
        Ok(self.decision_value(x)? > 0.0)
    }

    pub fn to_json(&self) -> Result<String, SvmError> {
        let file = ModelFile {
            version: MODEL_VERSION,
            kernel: self.kernel,
            bias: self.bias,
            dual_coefs: self.dual_coefs.clone(),
            support_vectors: self.support_vectors.clone(),
            scaler: self.scaler.clone(),
            train_config: self.train_config,
            features: self.features.clone(),
        };
        Ok(crate::json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != MODEL_VERSION {
            return Err(SvmError::UnsupportedVersion(probe.version));
        }
        let f: ModelFile = serde_json::from_str(text)?;
        f.kernel.validate()?;
        if f.dual_coefs.len() != f.support_vectors.len() {
            return Err(SvmError::Malformed(format!(
                "{} dual coefficients for {} support vectors",
                f.dual_coefs.len(),
                f.support_vectors.len()
            )));
        }
        let dims = f.support_vectors.first().map_or(0, Vec::len);
        if f.support_vectors.iter().any(|sv| sv.len() != dims) {
            return Err(SvmError::Malformed("support vectors differ in length".to_string()));
        }
        if let Some(s) = &f.scaler {
            s.validate().map_err(|e| SvmError::Malformed(e.to_string()))?;
            if !f.support_vectors.is_empty() && s.dims() != dims {
                return Err(SvmError::Malformed("scaler and support vectors differ in length".to_string()));
            }
        }
        Ok(Self {
            kernel: f.kernel,
            support_vectors: f.support_vectors,
            dual_coefs: f.dual_coefs,
            bias: f.bias,
            scaler: f.scaler,
            train_config: f.train_config,
            features: f.features,
        })
    }
}

pub fn decision_function(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    model.decision_value(x)
}

pub fn save_model(model: &SvmModel, path: &Path) -> Result<(), SvmError> {
    std::fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SvmModel, SvmError> {
    SvmModel::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSpec;
    use crate::svm::train;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained() -> SvmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let labels: Vec<bool> = xs.iter().map(|x| x[0] + 0.5 * x[1] > 0.7).collect();
        let mut model = train(&xs, &labels, &KernelSpec::rbf(2.0), &TrainConfig::default()).unwrap().model;
        model.scaler = Some(ScalerParams { mins: vec![0.0; 3], maxs: vec![1.0, 2.0, 0.5] });
        model.features = Some(FeatureSpec::new(vec![2, 10, 100]));
        model
    }

    #[test]
    fn round_trip_preserves_decisions() {
        let model = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
            let a = model.decision_value(&x).unwrap();
            let b = loaded.decision_value(&x).unwrap();
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn field_layout() {
        let json = trained().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["version", "kernel", "bias", "dual_coefs", "support_vectors", "scaler", "train_config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["version"], 1);
        assert_eq!(v["kernel"]["kind"], "rbf");
    }

    #[test]
    fn rejects_unknown_version() {
        let mut v: serde_json::Value = serde_json::from_str(&trained().to_json().unwrap()).unwrap();
        v["version"] = 99.into();
        let err = SvmModel::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("unsupported model version"), "{err}");
    }

    #[test]
    fn rejects_malformed() {
        let mut v: serde_json::Value = serde_json::from_str(&trained().to_json().unwrap()).unwrap();
        v["dual_coefs"] = serde_json::json!([1.0]);
        assert!(matches!(SvmModel::from_json(&v.to_string()), Err(SvmError::Malformed(_))));
        assert!(SvmModel::from_json("{}").is_err());
    }

    #[test]
    fn dimension_checked() {
        let model = trained();
        assert!(matches!(model.decision_value(&[0.0]), Err(SvmError::DimensionMismatch { .. })));
        let raw = model.decision_value_raw(&[0.5, 1.0, 0.25]).unwrap();
        let scaled = model.decision_value(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(raw, scaled);
    }
}
