//! SMO on the soft-margin dual
//!
//! ```text
//! maximize   sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j k(x_i, x_j)
//! subject to 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! Working pairs come from a seeded random sweep: each visited index that
//! violates the optimality conditions is paired with the partner maximizing
//! `|E_i - E_j|` in the feasible direction. Training stops once the largest
//! violation drops below `tol`; the bias is then the midpoint of the
//! feasible interval, which puts every multiplier within `tol` of its KKT
//! condition.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelSpec, SvmError, SvmModel};
use crate::features::FeatureVector;

/// Replacement curvature for pairs with `eta <= 0` (indefinite kernels).
const TAU: f64 = 1e-12;

/// Kernel row cache budget in bytes.
const CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Box constraint.
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Limit on full sweeps, each counted together with the non-bound sweeps
    /// that follow it; `None` means 10 x the number of training points.
    pub max_passes: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_passes: None, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig("C must be positive".to_string()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SvmError::InvalidConfig("tol must be positive".to_string()));
        }
        if self.max_passes == Some(0) {
            return Err(SvmError::InvalidConfig("max_passes must be positive".to_string()));
        }
        Ok(())
    }
}

/// A trained model plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SvmModel,
    /// Multiplier of every training point, in input order.
    pub alphas: Vec<f64>,
    /// Dual objective after each accepted pair update, starting from 0.
    pub objective_trace: Vec<f64>,
    pub passes: usize,
    /// Final maximal KKT violation.
    pub gap: f64,
}

/// Trains on labeled feature vectors (PD = +1).
pub fn train_dataset(
    dataset: &[FeatureVector],
    kernel: &KernelSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome, SvmError> {
    let mut xs = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for v in dataset {
        labels.push(v.label.ok_or_else(|| SvmError::Unlabeled(v.source_id.clone()))?);
        xs.push(v.values.clone());
    }
    train(&xs, &labels, kernel, config)
}

pub fn train(
    xs: &[Vec<f64>],
    labels: &[bool],
    kernel: &KernelSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome, SvmError> {
    kernel.validate()?;
    config.validate()?;
    if xs.is_empty() {
        return Err(SvmError::Empty);
    }
    if xs.len() != labels.len() {
        return Err(SvmError::DimensionMismatch { expected: xs.len(), got: labels.len() });
    }
    let dims = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != dims) {
        return Err(SvmError::DimensionMismatch { expected: dims, got: bad.len() });
    }
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SvmError::InvalidConfig("training features must be finite".to_string()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(SvmError::SingleClass);
    }

    let mut solver = Solver::new(xs, labels, *kernel, config);
    let n = xs.len();
    let max_passes = config.max_passes.unwrap_or(10 * n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut examine_all = true;
    let mut passes = 0;
    let mut order: Vec<usize> = Vec::with_capacity(n);

    loop {
        if solver.gap() <= solver.tol {
            // Drop accumulated rounding before accepting convergence.
            solver.refresh_gradient();
            if solver.gap() <= solver.tol {
                break;
            }
            examine_all = true;
        }
        if passes >= max_passes {
            let gap = solver.gap();
            return Err(SvmError::NonConvergence {
                model: Box::new(solver.into_outcome(0).model),
                passes,
                gap,
            });
        }

        order.clear();
        if examine_all {
            order.extend(0..n);
        } else {
            order.extend((0..n).filter(|&i| solver.is_free(i)));
            if order.is_empty() {
                examine_all = true;
                continue;
            }
        }
        order.shuffle(&mut rng);

        let mut changed = 0;
        for &i in &order {
            if let Some((up, low)) = solver.violating_pair(i) {
                if solver.take_step(up, low) {
                    changed += 1;
                }
            }
        }
        if examine_all {
            passes += 1;
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    Ok(solver.into_outcome(passes))
}

struct Solver<'a> {
    xs: &'a [Vec<f64>],
    y: Vec<f64>,
    kernel: KernelSpec,
    config: TrainConfig,
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    /// `sum_j a_j y_j K_ij - y_i`; equals the error `E_i` up to the bias.
    grad: Vec<f64>,
    diag: Vec<f64>,
    cache: RowCache,
    /// Largest `-grad` over indices whose `y * a` may increase, and its index.
    up: (f64, usize),
    /// Smallest `-grad` over indices whose `y * a` may decrease, and its index.
    low: (f64, usize),
    objective_trace: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(xs: &'a [Vec<f64>], labels: &[bool], kernel: KernelSpec, config: &TrainConfig) -> Self {
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let diag = xs.iter().map(|x| kernel.eval_unchecked(x, x)).collect();
        let grad = y.iter().map(|v| -v).collect();
        let rows = (CACHE_BYTES / (8 * xs.len())).clamp(2, xs.len().max(2));
        let mut s = Self {
            xs,
            y,
            kernel,
            config: *config,
            c: config.c,
            tol: config.tol,
            alpha: vec![0.0; xs.len()],
            grad,
            diag,
            cache: RowCache::new(rows),
            up: (f64::NEG_INFINITY, 0),
            low: (f64::INFINITY, 0),
            objective_trace: vec![0.0],
        };
        s.update_extremes();
        s
    }

    fn can_increase(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] < self.c
        } else {
            self.alpha[i] > 0.0
        }
    }

    fn can_decrease(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] > 0.0
        } else {
            self.alpha[i] < self.c
        }
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn gap(&self) -> f64 {
        self.up.0 - self.low.0
    }

    fn update_extremes(&mut self) {
        let mut up = (f64::NEG_INFINITY, usize::MAX);
        let mut low = (f64::INFINITY, usize::MAX);
        for i in 0..self.alpha.len() {
            let v = -self.grad[i];
            if self.can_increase(i) && v > up.0 {
                up = (v, i);
            }
            if self.can_decrease(i) && v < low.0 {
                low = (v, i);
            }
        }
        self.up = up;
        self.low = low;
    }

    /// Pairs `i` with the extreme partner on the opposite side if together
    /// they violate the optimality conditions by more than `tol`.
    fn violating_pair(&self, i: usize) -> Option<(usize, usize)> {
        let v = -self.grad[i];
        let as_up = if self.can_increase(i) { v - self.low.0 } else { f64::NEG_INFINITY };
        let as_low = if self.can_decrease(i) { self.up.0 - v } else { f64::NEG_INFINITY };
        if as_up.max(as_low) <= self.tol {
            return None;
        }
        let pair = if as_up >= as_low { (i, self.low.1) } else { (self.up.1, i) };
        (pair.0 != pair.1).then_some(pair)
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        let (xs, kernel) = (self.xs, self.kernel);
        self.cache.get_or_insert(i, || {
            let xi = &xs[i];
            if xs.len() >= 1024 {
                xs.par_iter().map(|x| kernel.eval_unchecked(xi, x)).collect()
            } else {
                xs.iter().map(|x| kernel.eval_unchecked(xi, x)).collect()
            }
        })
    }

    /// Analytic two-multiplier update; `up` gains `y * a`, `low` loses it.
    fn take_step(&mut self, up: usize, low: usize) -> bool {
        let (i, j) = (up, low);
        let row_i = self.row(i);
        let row_j = self.row(j);
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let c = self.c;

        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        if lo >= hi {
            return false;
        }
        let mut eta = self.diag[i] + self.diag[j] - 2.0 * row_i[j];
        if eta <= 0.0 {
            eta = TAU;
        }
        // E_i - E_j = grad_i - grad_j
        let mut aj_new = (aj + yj * (self.grad[i] - self.grad[j]) / eta).clamp(lo, hi);
        aj_new = snap(aj_new, c);
        if aj_new == aj {
            return false;
        }
        let ai_new = snap(ai + yi * yj * (aj - aj_new), c).clamp(0.0, c);
        let (di, dj) = ((ai_new - ai) * yi, (aj_new - aj) * yj);
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;

        let mut objective = 0.0;
        for t in 0..self.grad.len() {
            self.grad[t] += di * row_i[t] + dj * row_j[t];
            if self.alpha[t] > 0.0 {
                objective += self.alpha[t] - 0.5 * self.alpha[t] * self.y[t] * (self.grad[t] + self.y[t]);
            }
        }
        self.objective_trace.push(objective);
        self.update_extremes();
        true
    }

    fn refresh_gradient(&mut self) {
        let n = self.alpha.len();
        let mut grad: Vec<f64> = self.y.iter().map(|v| -v).collect();
        for j in 0..n {
            if self.alpha[j] == 0.0 {
                continue;
            }
            let row = self.row(j);
            let s = self.alpha[j] * self.y[j];
            for t in 0..n {
                grad[t] += s * row[t];
            }
        }
        self.grad = grad;
        self.update_extremes();
    }

    fn into_outcome(self, passes: usize) -> TrainOutcome {
        let bias = 0.5 * (self.up.0 + self.low.0);
        let gap = self.gap();
        let mut support_vectors = Vec::new();
        let mut dual_coefs = Vec::new();
        for (i, &a) in self.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(self.xs[i].clone());
                dual_coefs.push(a * self.y[i]);
            }
        }
        let model = SvmModel {
            kernel: self.kernel,
            support_vectors,
            dual_coefs,
            bias,
            scaler: None,
            train_config: self.config,
            features: None,
        };
        TrainOutcome { model, alphas: self.alpha, objective_trace: self.objective_trace, passes, gap }
    }
}

fn snap(a: f64, c: f64) -> f64 {
    let eps = 1e-12 * c;
    if a < eps {
        0.0
    } else if a > c - eps {
        c
    } else {
        a
    }
}

/// Bounded cache of kernel rows with first-in first-out eviction.
struct RowCache {
    capacity: usize,
    rows: HashMap<usize, Arc<[f64]>>,
    order: VecDeque<usize>,
}

impl RowCache {
    fn new(capacity: usize) -> Self {
        Self { capacity, rows: HashMap::new(), order: VecDeque::new() }
    }

    fn get_or_insert(&mut self, i: usize, compute: impl FnOnce() -> Vec<f64>) -> Arc<[f64]> {
        if let Some(r) = self.rows.get(&i) {
            return Arc::clone(r);
        }
        if self.rows.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        let row: Arc<[f64]> = compute().into();
        self.rows.insert(i, Arc::clone(&row));
        self.order.push_back(i);
        row
    }
}
