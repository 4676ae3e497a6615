//! Locally weighted polynomial regression with tricube neighborhood weights.

use serde::{Deserialize, Serialize};

use super::{Result, StlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoessConfig {
    /// Number of nearest neighbors in each local fit.
    pub span: usize,
    /// Local polynomial degree, 0..=2.
    pub degree: u8,
    /// Fit every `jump`-th evaluation point and interpolate linearly between.
    pub jump: usize,
}

impl LoessConfig {
    pub fn new(span: usize, degree: u8, jump: usize) -> Result<Self> {
        let cfg = Self { span, degree, jump };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree > 2 {
            return Err(StlError::InvalidConfig(format!(
                "loess degree {} outside 0..=2",
                self.degree
            )));
        }
        if self.span.is_multiple_of(2) {
            return Err(StlError::InvalidConfig(format!(
                "loess span {} must be odd",
                self.span
            )));
        }
        if self.degree >= 1 && self.span < 3 {
            return Err(StlError::InvalidConfig(
                "loess span must be at least 3 for degree >= 1".to_string(),
            ));
        }
        if self.jump == 0 {
            return Err(StlError::InvalidConfig("loess jump must be positive".to_string()));
        }
        Ok(())
    }
}

/// Smooths `ys` (observed at strictly increasing `xs`) and evaluates the fit
/// at `eval_points`.
///
/// Each fitted value is a weighted least-squares polynomial over the `span`
/// nearest observations, weighted by `(1 - (d / d_max)^3)^3` times the
/// optional robustness weight. `d_max` is the largest distance inside the
/// neighborhood; when `span` exceeds the number of observations it is widened
/// by `(span - n) / 2`. If fewer than `degree + 1` observations carry weight,
/// the fit drops to the highest degree they support. With `jump > 1`,
/// `eval_points` must be non-decreasing.
pub fn loess_smooth(
    xs: &[f64],
    ys: &[f64],
    eval_points: &[f64],
    config: &LoessConfig,
    robustness_weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    config.validate()?;
    validate_inputs(xs, ys, eval_points, config, robustness_weights)?;
    let smoother = Smoother::new(xs, ys, robustness_weights, config);
    smoother.smooth(eval_points, |k| Err(StlError::DegenerateNeighborhood { eval_index: k }))
}

fn validate_inputs(
    xs: &[f64],
    ys: &[f64],
    eval_points: &[f64],
    config: &LoessConfig,
    robustness_weights: Option<&[f64]>,
) -> Result<()> {
    if xs.is_empty() {
        return Err(StlError::InvalidInput("no observations".to_string()));
    }
    if xs.len() != ys.len() {
        return Err(StlError::InvalidInput(format!(
            "xs has {} values, ys has {}",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(k) = xs.iter().chain(ys).chain(eval_points).position(|v| !v.is_finite()) {
        return Err(StlError::NonFinite { index: k });
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StlError::InvalidInput("xs must be strictly increasing".to_string()));
    }
    if config.jump > 1 && eval_points.windows(2).any(|w| w[0] > w[1]) {
        return Err(StlError::InvalidInput(
            "eval points must be non-decreasing when jump > 1".to_string(),
        ));
    }
    if let Some(rw) = robustness_weights {
        if rw.len() != xs.len() {
            return Err(StlError::InvalidInput(format!(
                "{} robustness weights for {} observations",
                rw.len(),
                xs.len()
            )));
        }
        if rw.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(StlError::InvalidInput(
                "robustness weights must lie in [0, 1]".to_string(),
            ));
        }
    }
    Ok(())
}

/// Validated smoothing problem; reused by the STL passes.
pub(crate) struct Smoother<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    rw: Option<&'a [f64]>,
    span: usize,
    degree: u8,
    jump: usize,
}

impl<'a> Smoother<'a> {
    pub(crate) fn new(
        xs: &'a [f64],
        ys: &'a [f64],
        rw: Option<&'a [f64]>,
        config: &LoessConfig,
    ) -> Self {
        Self {
            xs,
            ys,
            rw,
            span: config.span,
            degree: config.degree,
            jump: config.jump,
        }
    }

    /// Evaluates at every point, calling `on_degenerate` for fits where no
    /// observation carries weight.
    pub(crate) fn smooth(
        &self,
        eval_points: &[f64],
        mut on_degenerate: impl FnMut(usize) -> Result<f64>,
    ) -> Result<Vec<f64>> {
        let m = eval_points.len();
        let mut out = vec![0.0; m];
        if m == 0 {
            return Ok(out);
        }
        let mut eval_at = |k: usize| -> Result<f64> {
            match self.fit_at(eval_points[k]) {
                Some(v) => Ok(v),
                None => on_degenerate(k),
            }
        };
        if self.jump <= 1 || m <= 2 {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = eval_at(k)?;
            }
            return Ok(out);
        }

        let mut fitted: Vec<usize> = (0..m).step_by(self.jump).collect();
        if *fitted.last().expect("non-empty") != m - 1 {
            fitted.push(m - 1);
        }
        for &k in &fitted {
            out[k] = eval_at(k)?;
        }
        for pair in fitted.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (xa, xb) = (eval_points[a], eval_points[b]);
            let (va, vb) = (out[a], out[b]);
            for k in a + 1..b {
                out[k] = if xb > xa {
                    va + (vb - va) * (eval_points[k] - xa) / (xb - xa)
                } else {
                    va
                };
            }
        }
        Ok(out)
    }

    /// Index of the first of the `q` nearest observations to `x0`. Ties at
    /// the window edge keep the lower index.
    fn window_start(&self, x0: f64, q: usize) -> usize {
        let xs = self.xs;
        let (mut lo, mut hi) = (0, xs.len() - q);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if x0 - xs[mid] > xs[mid + q] - x0 {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Nearest observation, ties toward the lower index.
    pub(crate) fn nearest_value(&self, x0: f64) -> f64 {
        self.ys[self.window_start(x0, 1)]
    }

    pub(crate) fn fit_at(&self, x0: f64) -> Option<f64> {
        let n = self.xs.len();
        let q = self.span.min(n);
        let lo = self.window_start(x0, q);
        let hi = lo + q;
        let mut d_max = (x0 - self.xs[lo]).abs().max((self.xs[hi - 1] - x0).abs());
        if self.span > n {
            d_max += ((self.span - n) / 2) as f64;
        }
        let scale = if d_max > 0.0 { d_max } else { 1.0 };
        // Every neighbor sits on the window edge (span 1, or two points
        // straddling x0): tricube would zero them all, so weigh them equally.
        let uniform = (lo..hi).all(|i| (self.xs[i] - x0).abs() >= d_max);

        // Moment sums in the centered, scaled coordinate u = (x - x0) / scale.
        let mut s = [0.0f64; 5];
        let mut t = [0.0f64; 3];
        let mut support = 0usize;
        for i in lo..hi {
            let d = (self.xs[i] - x0).abs();
            let mut w = if uniform { 1.0 } else { tricube(d, d_max) };
            if let Some(rw) = self.rw {
                w *= rw[i];
            }
            if w <= 0.0 {
                continue;
            }
            support += 1;
            let u = (self.xs[i] - x0) / scale;
            let y = self.ys[i];
            let u2 = u * u;
            s[0] += w;
            s[1] += w * u;
            s[2] += w * u2;
            s[3] += w * u2 * u;
            s[4] += w * u2 * u2;
            t[0] += w * y;
            t[1] += w * u * y;
            t[2] += w * u2 * y;
        }
        if support == 0 {
            return None;
        }
        let degree = (self.degree as usize).min(support - 1);
        let fit = match degree {
            0 => t[0] / s[0],
            1 => {
                let det = s[0] * s[2] - s[1] * s[1];
                if det > 0.0 {
                    (s[2] * t[0] - s[1] * t[1]) / det
                } else {
                    t[0] / s[0]
                }
            }
            _ => {
                let a = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
                match solve3(a, t) {
                    Some(beta) => beta[0],
                    None => t[0] / s[0],
                }
            }
        };
        Some(fit)
    }
}

#[inline]
fn tricube(d: f64, d_max: f64) -> f64 {
    if d_max <= 0.0 {
        return 1.0;
    }
    let r = d / d_max;
    if r >= 1.0 {
        0.0
    } else {
        let c = 1.0 - r * r * r;
        c * c * c
    }
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= f64::EPSILON * a[0][0].abs().max(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
