use serde::{Deserialize, Serialize};

use super::SvmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
    Sigmoid,
}

impl std::str::FromStr for KernelKind {
    type Err = SvmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "poly" | "polynomial" => Ok(KernelKind::Polynomial),
            "rbf" | "gaussian" => Ok(KernelKind::Rbf),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            other => Err(SvmError::InvalidKernel(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Kernel function and its parameters.
///
/// * linear: `x1 . x2`
/// * polynomial: `(x1 . x2)^degree`, no offset or scaling
/// * rbf: `exp(-gamma * |x1 - x2|^2)`
/// * sigmoid: `tanh(gamma * (x1 . x2))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub degree: u32,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, degree: 1, gamma: 1.0 }
    }

    pub fn polynomial(degree: u32) -> Self {
        Self { kind: KernelKind::Polynomial, degree, gamma: 1.0 }
    }

    pub fn rbf(gamma: f64) -> Self {
        Self { kind: KernelKind::Rbf, degree: 1, gamma }
    }

    pub fn sigmoid(gamma: f64) -> Self {
        Self { kind: KernelKind::Sigmoid, degree: 1, gamma }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if self.degree < 1 {
            return Err(SvmError::InvalidKernel("degree must be at least 1".to_string()));
        }
        if matches!(self.kind, KernelKind::Rbf | KernelKind::Sigmoid)
            && !(self.gamma.is_finite() && self.gamma > 0.0)
        {
            return Err(SvmError::InvalidKernel("gamma must be positive".to_string()));
        }
        Ok(())
    }

    /// Kernel value without a length check; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(x1, x2),
            KernelKind::Polynomial => dot(x1, x2).powi(self.degree as i32),
            KernelKind::Rbf => {
                let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Sigmoid => (self.gamma * dot(x1, x2)).tanh(),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64, SvmError> {
    if x1.len() != x2.len() {
        return Err(SvmError::DimensionMismatch { expected: x1.len(), got: x2.len() });
    }
    Ok(spec.eval_unchecked(x1, x2))
}
