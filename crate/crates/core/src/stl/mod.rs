//! Seasonal-trend decomposition by Loess: splits a series into trend,
//! seasonal and residual parts with `y = trend + seasonal + residual`.

mod loess;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loess::{loess_smooth, LoessConfig};
use loess::Smoother;

#[derive(Debug, Error)]
pub enum StlError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("series of length {len} is too short for period {period} (need at least {})", 2 * period)]
    SeriesTooShort { len: usize, period: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("degenerate neighborhood at evaluation point {eval_index}")]
    DegenerateNeighborhood { eval_index: usize },
}

pub type Result<T> = std::result::Result<T, StlError>;

/// Smallest odd integer that is at least `v`.
pub fn next_odd(v: f64) -> usize {
    let n = v.ceil().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Default stride for a smoother of the given span: `ceil(span / 10)`.
pub fn default_jump(span: usize) -> usize {
    span.div_ceil(10).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StlConfig {
    /// Length of one seasonal cycle.
    pub period: usize,
    pub seasonal_span: usize,
    pub trend_span: usize,
    pub lowpass_span: usize,
    pub inner_iterations: usize,
    /// Robustness passes after the first; 0 disables reweighting.
    pub outer_iterations: usize,
    pub seasonal_jump: usize,
    pub trend_jump: usize,
    pub lowpass_jump: usize,
}

pub const DEFAULT_SEASONAL_SPAN: usize = 11;
pub const DEFAULT_INNER_ITERATIONS: usize = 2;
pub const DEFAULT_OUTER_ITERATIONS: usize = 1;

impl StlConfig {
    /// Configuration for one seasonal window length: the window is the
    /// period, the trend span is the next odd integer at or above 1.5x the
    /// window and the low-pass span the next odd at or above the window.
    pub fn for_window(window: usize) -> Self {
        Self::with_spans(
            window,
            DEFAULT_SEASONAL_SPAN,
            next_odd(1.5 * window as f64),
            next_odd(window as f64),
        )
    }

    /// Explicit spans with default iteration counts and jumps.
    pub fn with_spans(period: usize, seasonal_span: usize, trend_span: usize, lowpass_span: usize) -> Self {
        Self {
            period,
            seasonal_span,
            trend_span,
            lowpass_span,
            inner_iterations: DEFAULT_INNER_ITERATIONS,
            outer_iterations: DEFAULT_OUTER_ITERATIONS,
            seasonal_jump: default_jump(seasonal_span),
            trend_jump: default_jump(trend_span),
            lowpass_jump: default_jump(lowpass_span),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(StlError::InvalidConfig("period must be at least 2".to_string()));
        }
        for (name, span) in [
            ("seasonal", self.seasonal_span),
            ("trend", self.trend_span),
            ("lowpass", self.lowpass_span),
        ] {
            if span < 3 || span % 2 == 0 {
                return Err(StlError::InvalidConfig(format!(
                    "{name} span {span} must be odd and at least 3"
                )));
            }
        }
        if self.inner_iterations == 0 {
            return Err(StlError::InvalidConfig(
                "inner_iterations must be positive".to_string(),
            ));
        }
        if self.seasonal_jump == 0 || self.trend_jump == 0 || self.lowpass_jump == 0 {
            return Err(StlError::InvalidConfig("jumps must be positive".to_string()));
        }
        Ok(())
    }

    fn seasonal_loess(&self) -> LoessConfig {
        LoessConfig { span: self.seasonal_span, degree: 1, jump: self.seasonal_jump }
    }

    fn trend_loess(&self) -> LoessConfig {
        LoessConfig { span: self.trend_span, degree: 1, jump: self.trend_jump }
    }

    fn lowpass_loess(&self) -> LoessConfig {
        LoessConfig { span: self.lowpass_span, degree: 1, jump: self.lowpass_jump }
    }
}

/// Per-window overrides applied on top of [`StlConfig::for_window`].
///
/// Jumps left unset follow the effective span.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StlTemplate {
    pub seasonal_span: Option<usize>,
    pub trend_span: Option<usize>,
    pub lowpass_span: Option<usize>,
    pub inner_iterations: Option<usize>,
    pub outer_iterations: Option<usize>,
    pub seasonal_jump: Option<usize>,
    pub trend_jump: Option<usize>,
    pub lowpass_jump: Option<usize>,
}

impl StlTemplate {
    pub fn config_for(&self, window: usize) -> StlConfig {
        let base = StlConfig::for_window(window);
        let seasonal_span = self.seasonal_span.unwrap_or(base.seasonal_span);
        let trend_span = self.trend_span.unwrap_or(base.trend_span);
        let lowpass_span = self.lowpass_span.unwrap_or(base.lowpass_span);
        StlConfig {
            period: window,
            seasonal_span,
            trend_span,
            lowpass_span,
            inner_iterations: self.inner_iterations.unwrap_or(base.inner_iterations),
            outer_iterations: self.outer_iterations.unwrap_or(base.outer_iterations),
            seasonal_jump: self.seasonal_jump.unwrap_or(default_jump(seasonal_span)),
            trend_jump: self.trend_jump.unwrap_or(default_jump(trend_span)),
            lowpass_jump: self.lowpass_jump.unwrap_or(default_jump(lowpass_span)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlDecomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub config: StlConfig,
}

impl StlDecomposition {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }
}

/// Decomposes `series` with the inner/outer-loop STL procedure.
///
/// Each inner iteration detrends, smooths every cycle-subseries (extended by
/// one position at each end), removes the low-pass of that result to get the
/// seasonal part, and smooths the deseasonalized series into the trend.
/// Between outer passes bisquare robustness weights are recomputed from the
/// residuals. The residual is the remainder `y - (trend + seasonal)`.
pub fn stl_decompose(series: &[f64], config: &StlConfig) -> Result<StlDecomposition> {
    config.validate()?;
    let n = series.len();
    if n < 2 * config.period {
        return Err(StlError::SeriesTooShort { len: n, period: config.period });
    }
    if let Some(index) = series.iter().position(|v| !v.is_finite()) {
        return Err(StlError::NonFinite { index });
    }

    let positions: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut weights: Option<Vec<f64>> = None;

    for outer in 0..=config.outer_iterations {
        for _ in 0..config.inner_iterations {
            let detrended: Vec<f64> = series.iter().zip(&trend).map(|(y, t)| y - t).collect();
            let cycle = smooth_cycle_subseries(&detrended, config, weights.as_deref());
            let lowpass = lowpass_filter(&cycle, &positions, config)?;
            let p = config.period;
            for k in 0..n {
                seasonal[k] = cycle[p + k] - lowpass[k];
            }
            let deseasonalized: Vec<f64> =
                series.iter().zip(&seasonal).map(|(y, s)| y - s).collect();
            let smoother = Smoother::new(&positions, &deseasonalized, weights.as_deref(), &config.trend_loess());
            trend = smoother.smooth(&positions, |k| Ok(deseasonalized[k]))?;
        }
        if outer < config.outer_iterations {
            let residuals: Vec<f64> = (0..n).map(|k| series[k] - trend[k] - seasonal[k]).collect();
            weights = Some(robustness_weights(&residuals));
        }
    }

    let residual = (0..n)
        .map(|k| exact_remainder(series[k], &mut trend[k], &mut seasonal[k]))
        .collect();
    Ok(StlDecomposition { trend, seasonal, residual, config: *config })
}

/// Smooths each cycle-subseries and interleaves the results into a series
/// of length `n + 2 * period` (one extra cycle at each end).
fn smooth_cycle_subseries(detrended: &[f64], config: &StlConfig, weights: Option<&[f64]>) -> Vec<f64> {
    let n = detrended.len();
    let p = config.period;
    let loess = config.seasonal_loess();
    let smoothed: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let ys: Vec<f64> = detrended[j..].iter().step_by(p).copied().collect();
            let rw: Option<Vec<f64>> = weights.map(|w| w[j..].iter().step_by(p).copied().collect());
            let m = ys.len();
            let xs: Vec<f64> = (1..=m).map(|i| i as f64).collect();
            let evals: Vec<f64> = (0..m + 2).map(|i| i as f64).collect();
            let smoother = Smoother::new(&xs, &ys, rw.as_deref(), &loess);
            smoother
                .smooth(&evals, |k| Ok(smoother.nearest_value(evals[k])))
                .expect("fallback never fails")
        })
        .collect();

    let mut cycle = vec![0.0; n + 2 * p];
    for (j, sub) in smoothed.iter().enumerate() {
        for (i, v) in sub.iter().enumerate() {
            cycle[j + i * p] = *v;
        }
    }
    cycle
}

/// Moving averages of length period, period and 3, then a Loess pass.
fn lowpass_filter(cycle: &[f64], positions: &[f64], config: &StlConfig) -> Result<Vec<f64>> {
    let p = config.period;
    let once = moving_average(cycle, p);
    let twice = moving_average(&once, p);
    let thrice = moving_average(&twice, 3);
    debug_assert_eq!(thrice.len(), positions.len());
    let smoother = Smoother::new(positions, &thrice, None, &config.lowpass_loess());
    smoother.smooth(positions, |k| Ok(thrice[k]))
}

/// Running-sum moving average; output length is `xs.len() - len + 1`.
fn moving_average(xs: &[f64], len: usize) -> Vec<f64> {
    let count = xs.len() + 1 - len;
    let mut out = Vec::with_capacity(count);
    let mut acc: f64 = xs[..len].iter().sum();
    let inv = len as f64;
    out.push(acc / inv);
    for k in 1..count {
        acc += xs[k + len - 1] - xs[k - 1];
        out.push(acc / inv);
    }
    out
}

/// Bisquare weights: `(1 - (r / h)^2)^2` for `|r| < h`, else 0, where
/// `h = 6 * median(|r|)`. All weights are 1 when `h` is 0.
pub fn robustness_weights(residuals: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    if abs.is_empty() {
        return abs;
    }
    let h = 6.0 * median_in_place(&mut abs);
    if h <= 0.0 {
        return vec![1.0; residuals.len()];
    }
    residuals
        .iter()
        .map(|r| {
            let u = r.abs() / h;
            if u < 1.0 {
                let c = 1.0 - u * u;
                c * c
            } else {
                0.0
            }
        })
        .collect()
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Residual `y - (trend + seasonal)` such that `trend + seasonal + residual`
/// evaluates to `y` exactly.
///
/// When the plain remainder does not reassemble `y`, trend and seasonal are
/// rounded to the coarsest power-of-two grid on which the sum and the
/// remainder are both exact. That grid exists whenever `y` itself lies on it
/// (always true for inputs decoded from `f32` or fixed-point sources);
/// otherwise the plain remainder is kept.
fn exact_remainder(y: f64, trend: &mut f64, seasonal: &mut f64) -> f64 {
    let r = y - (*trend + *seasonal);
    if *trend + *seasonal + r == y {
        return r;
    }
    let m = trend.abs().max(seasonal.abs()).max(y.abs());
    let q = 2f64.powi((4.0 * m).log2().ceil() as i32 - 52);
    if q > 0.0 && (y / q).fract() == 0.0 {
        let t = (*trend / q).round() * q;
        let s = (*seasonal / q).round() * q;
        let r2 = y - (t + s);
        if t + s + r2 == y {
            *trend = t;
            *seasonal = s;
            return r2;
        }
    }
    r
}
