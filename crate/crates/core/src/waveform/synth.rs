//! Seeded synthetic waveforms: one power-frequency sine cycle, Gaussian
//! noise, and (for PD signals) damped-oscillation bursts at random onsets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Result, Waveform, WaveformError, LINE_FREQUENCY_HZ};

/// Fractional bits of the fixed-point grid samples are snapped to, relative
/// to the generator's full scale.
const GRID_BITS: i32 = 40;

/// How many decay constants one burst lasts.
const BURST_LENGTH_DECAYS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_samples: usize,
    pub amplitude: f64,
    pub noise_sigma: f64,
    pub n_bursts: usize,
    pub burst_amplitude: f64,
    pub burst_decay_samples: f64,
    pub burst_carrier_cycles_per_burst: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_samples: super::CANONICAL_SAMPLES,
            amplitude: 1.0,
            noise_sigma: 0.02,
            n_bursts: 0,
            burst_amplitude: 0.3,
            burst_decay_samples: 4.0,
            burst_carrier_cycles_per_burst: 3.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(WaveformError::Invalid(m.to_string()));
        if self.n_samples < 4 {
            return bad("n_samples must be at least 4");
        }
        if !self.amplitude.is_finite() || !self.burst_amplitude.is_finite() {
            return bad("amplitudes must be finite");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if self.n_bursts > self.n_samples {
            return bad("more bursts than samples");
        }
        if !(self.burst_decay_samples.is_finite() && self.burst_decay_samples > 0.0) {
            return bad("burst_decay_samples must be positive");
        }
        if !(self.burst_carrier_cycles_per_burst.is_finite()
            && self.burst_carrier_cycles_per_burst > 0.0)
        {
            return bad("burst_carrier_cycles_per_burst must be positive");
        }
        Ok(())
    }

    /// Samples one burst spans before it is cut off.
    pub fn burst_length(&self) -> usize {
        ((BURST_LENGTH_DECAYS * self.burst_decay_samples).ceil() as usize).max(1)
    }

    /// Power of two the samples are rounded to a multiple of.
    fn grid(&self) -> f64 {
        let full_scale = self
            .amplitude
            .abs()
            .max(self.burst_amplitude.abs())
            .max(self.noise_sigma)
            .max(f64::MIN_POSITIVE);
        2f64.powi(full_scale.log2().ceil() as i32 - GRID_BITS)
    }
}

/// Where one burst starts and the height of its decay envelope there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstTrace {
    pub onset: usize,
    pub envelope_peak: f64,
}

pub fn synth_waveform(params: &SynthParams) -> Result<Waveform> {
    synth_waveform_traced(params).map(|(w, _)| w)
}

/// Like [`synth_waveform`], also returning the burst onsets in ascending order.
///
/// Samples are snapped to a fixed-point grid of 2^-40 of full scale, which
/// stays below 1e-12 absolute error for unit amplitude.
pub fn synth_waveform_traced(params: &SynthParams) -> Result<(Waveform, Vec<BurstTrace>)> {
    params.validate()?;
    let n = params.n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut onsets = rand::seq::index::sample(&mut rng, n, params.n_bursts).into_vec();
    onsets.sort_unstable();

    let mut samples: Vec<f64> = (0..n)
        .map(|k| params.amplitude * (std::f64::consts::TAU * k as f64 / n as f64).sin())
        .collect();

    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma)
            .map_err(|e| WaveformError::Invalid(e.to_string()))?;
        for s in samples.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }

    let len = params.burst_length();
    let carrier = params.burst_carrier_cycles_per_burst / len as f64;
    let mut traces = Vec::with_capacity(onsets.len());
    for &onset in &onsets {
        for t in 0..len.min(n - onset) {
            let t = t as f64;
            samples[onset + t as usize] += params.burst_amplitude
                * (-t / params.burst_decay_samples).exp()
                * (std::f64::consts::TAU * carrier * t).sin();
        }
        traces.push(BurstTrace {
            onset,
            envelope_peak: params.burst_amplitude,
        });
    }

    let grid = params.grid();
    for s in samples.iter_mut() {
        *s = (*s / grid).round() * grid;
    }

    let waveform = Waveform::new(
        format!("synth-{:016x}", params.seed),
        0,
        Some(params.n_bursts > 0),
        LINE_FREQUENCY_HZ * n as f64,
        samples,
    )?;
    Ok((waveform, traces))
}
