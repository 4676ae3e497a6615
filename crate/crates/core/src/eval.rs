//! Confusion counts, per-class precision/recall/F1 and their unweighted
//! average, with PD as the positive class.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_pairs(predictions: &[bool], labels: &[bool]) -> Result<Self, EvalError> {
        if predictions.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                predictions: predictions.len(),
                labels: labels.len(),
            });
        }
        if predictions.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut m = Self::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with non-PD treated as the positive class.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total()).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    /// Unweighted mean of two classes.
    pub fn mean(a: &Self, b: &Self) -> Self {
        Self {
            precision: (a.precision + b.precision) / 2.0,
            recall: (a.recall + b.recall) / 2.0,
            f1: (a.f1 + b.f1) / 2.0,
        }
    }

    /// Metrics rounded for display.
    pub fn rounded(&self) -> Self {
        Self {
            precision: round2(self.precision),
            recall: round2(self.recall),
            f1: round2(self.f1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    #[serde(rename = "non-PD")]
    pub non_pd: ClassMetrics,
    #[serde(rename = "PD")]
    pub pd: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: PerClass,
    #[serde(rename = "macro")]
    pub macro_avg: ClassMetrics,
    pub confusion: ConfusionMatrix,
    /// One entry per metric that hit 0/0 and was reported as 0.
    pub flags: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn class_metrics(tp: u64, fp: u64, fn_: u64, class: &str, flags: &mut Vec<String>) -> ClassMetrics {
    let mut flagged = |metric: &str, v: Option<f64>| {
        v.unwrap_or_else(|| {
            flags.push(format!("{class} {metric} undefined (0/0), reported as 0"));
            0.0
        })
    };
    let precision = flagged("precision", ratio(tp, tp + fp));
    let recall = flagged("recall", ratio(tp, tp + fn_));
    let sum = precision + recall;
    let f1 = flagged("f1", (sum > 0.0).then(|| 2.0 * precision * recall / sum));
    ClassMetrics { precision, recall, f1 }
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let mut flags = Vec::new();
        let non_pd = class_metrics(confusion.tn, confusion.fn_, confusion.fp, "non-PD", &mut flags);
        let pd = class_metrics(confusion.tp, confusion.fp, confusion.fn_, "PD", &mut flags);
        Self {
            per_class: PerClass { non_pd, pd },
            macro_avg: ClassMetrics::mean(&non_pd, &pd),
            confusion,
            flags,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        crate::json::to_string(self)
    }

    /// Aligned two-decimal table with the confusion counts underneath.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20}{:>10}{:>10}{:>10}", "Evaluation Category", "Precision", "Recall", "F1-Score");
        for (name, m) in [
            ("Non-PD Signals", &self.per_class.non_pd),
            ("PD Signals", &self.per_class.pd),
            ("Average", &self.macro_avg),
        ] {
            let r = m.rounded();
            let _ = writeln!(out, "{name:<20}{:>10.2}{:>10.2}{:>10.2}", r.precision, r.recall, r.f1);
        }
        let c = &self.confusion;
        let _ = writeln!(out, "\nconfusion: tp={} fp={} tn={} fn={}", c.tp, c.fp, c.tn, c.fn_);
        for flag in &self.flags {
            let _ = writeln!(out, "note: {flag}");
        }
        out
    }
}

pub fn evaluate(predictions: &[bool], labels: &[bool]) -> Result<EvalReport, EvalError> {
    Ok(EvalReport::from_confusion(ConfusionMatrix::from_pairs(predictions, labels)?))
}

/// Rounds to two decimals, ties away from zero.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_classifier() {
        let labels = [true, false, true, false, false];
        let r = evaluate(&labels, &labels).unwrap();
        for m in [r.per_class.pd, r.per_class.non_pd, r.macro_avg] {
            assert_eq!(m, ClassMetrics { precision: 1.0, recall: 1.0, f1: 1.0 });
        }
        assert!(r.flags.is_empty());
    }

    #[test]
    fn macro_is_unweighted_mean() {
        let a = ClassMetrics { precision: 0.77, recall: 0.58, f1: 0.66 };
        let b = ClassMetrics { precision: 0.67, recall: 0.83, f1: 0.74 };
        let m = ClassMetrics::mean(&a, &b).rounded();
        assert_eq!(m.precision, 0.72);
        assert_eq!(m.f1, 0.70);
    }

    #[test]
    fn never_predicting_pd() {
        let r = evaluate(&[false, false, false], &[true, false, true]).unwrap();
        assert_eq!(r.per_class.pd.precision, 0.0);
        assert_eq!(r.per_class.pd.recall, 0.0);
        assert_eq!(r.per_class.pd.f1, 0.0);
        assert!(r.flags.iter().any(|f| f.starts_with("PD precision")));
        assert!(r.flags.iter().any(|f| f.starts_with("PD f1")));
        assert!(!r.flags.iter().any(|f| f.starts_with("PD recall")));
    }

    #[test]
    fn errors() {
        assert_eq!(evaluate(&[], &[]), Err(EvalError::Empty));
        assert_eq!(
            evaluate(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { predictions: 1, labels: 2 })
        );
    }

    #[test]
    fn brute_force_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(1..200);
            let p: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let l: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let r = evaluate(&p, &l).unwrap();
            let count = |pp: bool, ll: bool| p.iter().zip(&l).filter(|&(&a, &b)| a == pp && b == ll).count() as f64;
            let (tp, fp, tn, fn_) = (count(true, true), count(true, false), count(false, false), count(false, true));
            let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
            let f1 = |pr: f64, re: f64| div(2.0 * pr * re, pr + re);
            let (pp, pr) = (div(tp, tp + fp), div(tp, tp + fn_));
            let (np, nr) = (div(tn, tn + fn_), div(tn, tn + fp));
            assert_eq!(r.confusion.total(), n as u64);
            assert!((r.per_class.pd.precision - pp).abs() < 1e-15);
            assert!((r.per_class.pd.recall - pr).abs() < 1e-15);
            assert!((r.per_class.pd.f1 - f1(pp, pr)).abs() < 1e-15);
            assert!((r.per_class.non_pd.precision - np).abs() < 1e-15);
            assert!((r.per_class.non_pd.recall - nr).abs() < 1e-15);
            assert!((r.per_class.non_pd.f1 - f1(np, nr)).abs() < 1e-15);
        }
    }

    #[test]
    fn rounding_ties_go_away_from_zero() {
        assert_eq!(round2(0.125), 0.13);
        assert_eq!(round2(0.5), 0.5);
        assert_eq!(round2(0.004), 0.0);
        assert_eq!(round2(-0.125), -0.13);
    }

    #[test]
    fn json_layout() {
        let r = evaluate(&[true, false], &[true, true]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert!(v["per_class"]["PD"]["precision"].is_number());
        assert!(v["per_class"]["non-PD"]["recall"].is_number());
        assert!(v["macro"]["f1"].is_number());
        assert_eq!(v["confusion"]["fn"], 1);
        assert!(v["flags"].is_array());
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn table_rows() {
        let r = evaluate(&[true, true, false, false], &[true, false, false, true]).unwrap();
        let t = r.to_table();
        assert!(t.contains("Non-PD Signals"));
        assert!(t.lines().any(|l| l.starts_with("Average") && l.ends_with("0.50")));
    }

    proptest! {
        #[test]
        fn swap_and_permutation(pairs in proptest::collection::vec(any::<(bool, bool)>(), 1..100), seed: u64) {
            let p: Vec<bool> = pairs.iter().map(|x| x.0).collect();
            let l: Vec<bool> = pairs.iter().map(|x| x.1).collect();
            let r = evaluate(&p, &l).unwrap();

            let np: Vec<bool> = p.iter().map(|b| !b).collect();
            let nl: Vec<bool> = l.iter().map(|b| !b).collect();
            let s = evaluate(&np, &nl).unwrap();
            prop_assert_eq!(s.per_class.pd, r.per_class.non_pd);
            prop_assert_eq!(s.per_class.non_pd, r.per_class.pd);
            prop_assert!((s.macro_avg.f1 - r.macro_avg.f1).abs() < 1e-15);
            prop_assert_eq!(r.confusion.swapped(), s.confusion);

            let mut idx: Vec<usize> = (0..p.len()).collect();
            use rand::seq::SliceRandom;
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let pp: Vec<bool> = idx.iter().map(|&i| p[i]).collect();
            let pl: Vec<bool> = idx.iter().map(|&i| l[i]).collect();
            prop_assert_eq!(evaluate(&pp, &pl).unwrap(), r.clone());

            for m in [r.per_class.pd, r.per_class.non_pd, r.macro_avg] {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                if m.precision + m.recall > 0.0 && m != r.macro_avg {
                    prop_assert!((m.f1 * (m.precision + m.recall) - 2.0 * m.precision * m.recall).abs() < 1e-12);
                }
            }
        }
    }
}
