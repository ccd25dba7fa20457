use std::collections::VecDeque;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{oracle_mask, wiener_mask, ComplexMask, FrameContext, MaskEstimator};
use crate::error::{Error, Result};
use crate::stft::{Spectrum, Stft, StftAnalyzer};
use num_complex::Complex64;

/// Passes the error spectrum through unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityEstimator;

impl MaskEstimator for IdentityEstimator {
    fn step(&mut self, frame: &FrameContext<'_>) -> Result<ComplexMask> {
        Ok(ComplexMask::identity(frame.error.len()))
    }

    fn reset(&mut self) {}

    fn name(&self) -> String {
        "identity".into()
    }
}

/// Suppresses everything.
#[derive(Debug, Clone, Default)]
pub struct ZeroEstimator;

impl MaskEstimator for ZeroEstimator {
    fn step(&mut self, frame: &FrameContext<'_>) -> Result<ComplexMask> {
        Ok(ComplexMask::zeros(frame.error.len()))
    }

    fn reset(&mut self) {}

    fn name(&self) -> String {
        "zero".into()
    }
}

/// Ideal mask computed from the true near-end signal, which the estimator
/// analyzes in lock-step with the pipeline.
#[derive(Debug, Clone)]
pub struct OracleEstimator {
    reference: Vec<f64>,
    analyzer: StftAnalyzer,
    hop: usize,
    cursor: usize,
    alpha: f64,
    ceiling: f64,
}

impl OracleEstimator {
    pub fn new(reference: Vec<f64>, stft: &Stft, alpha: f64, ceiling: f64) -> Self {
        OracleEstimator {
            reference,
            analyzer: StftAnalyzer::new(stft),
            hop: stft.config().hop,
            cursor: 0,
            alpha,
            ceiling,
        }
    }
}

impl MaskEstimator for OracleEstimator {
    fn step(&mut self, frame: &FrameContext<'_>) -> Result<ComplexMask> {
        let mut block = vec![0.0; self.hop];
        let start = self.cursor.min(self.reference.len());
        let end = (self.cursor + self.hop).min(self.reference.len());
        block[..end - start].copy_from_slice(&self.reference[start..end]);
        self.cursor += self.hop;
        let clean = self.analyzer.push(&block)?;
        if clean.frame_index != frame.error.frame_index {
            return Err(Error::invalid(format!(
                "oracle reference is at frame {}, pipeline at {}",
                clean.frame_index, frame.error.frame_index
            )));
        }
        oracle_mask(&clean, frame.error, self.alpha, self.ceiling)
    }

    fn reset(&mut self) {
        self.analyzer.reset();
        self.cursor = 0;
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerParams {
    /// Retention of the per-bin error power smoother.
    pub power_smoothing: f64,
    /// Length of the minimum-search window, in frames.
    pub noise_window: usize,
    /// Smoothed-power to minimum ratio above which a bin counts as speech.
    pub presence_threshold: f64,
    /// Retention of the speech-presence probability smoother.
    pub presence_smoothing: f64,
    /// Retention of the noise average while speech is absent.
    pub noise_smoothing: f64,
    /// Retention of the error power the gain is computed from; 0 uses the
    /// current frame alone.
    pub gain_smoothing: f64,
    /// Scale applied to the noise average before the gain; below 1 trades
    /// residual noise for less speech distortion.
    pub noise_bias: f64,
    /// Fraction of the echo-estimate power assumed to remain as residual.
    pub echo_leak: f64,
}

impl Default for WienerParams {
    fn default() -> Self {
        WienerParams {
            power_smoothing: 0.7,
            noise_window: 96,
            presence_threshold: 5.0,
            presence_smoothing: 0.2,
            noise_smoothing: 0.95,
            gain_smoothing: 0.5,
            noise_bias: 0.8,
            echo_leak: 0.1,
        }
    }
}

/// Number of sub-windows the minimum search is split into.
const NOISE_SUBWINDOWS: usize = 8;

/// Non-neural baseline: minima-controlled recursive noise averaging plus a
/// residual-echo PSD proportional to the echo estimate, fed to
/// [`wiener_mask`].
#[derive(Debug, Clone)]
pub struct WienerEstimator {
    params: WienerParams,
    gain_floor: f64,
    smoothed: Vec<f64>,
    /// Running minimum of the current sub-window.
    current_min: Vec<f64>,
    /// Minima of the most recent completed sub-windows.
    past_mins: VecDeque<Vec<f64>>,
    presence: Vec<f64>,
    noise: Vec<f64>,
    gain_power: Vec<f64>,
    frames: u64,
}

impl WienerEstimator {
    pub fn new(bins: usize, params: WienerParams, gain_floor: f64) -> Self {
        WienerEstimator {
            params,
            gain_floor,
            smoothed: vec![0.0; bins],
            current_min: vec![f64::INFINITY; bins],
            past_mins: VecDeque::with_capacity(NOISE_SUBWINDOWS),
            presence: vec![0.0; bins],
            noise: vec![0.0; bins],
            gain_power: vec![0.0; bins],
            frames: 0,
        }
    }

    /// Tracked noise PSD, before the bias scale.
    pub fn noise_psd(&self) -> &[f64] {
        &self.noise
    }

    fn subwindow_len(&self) -> u64 {
        self.params.noise_window.div_ceil(NOISE_SUBWINDOWS).max(1) as u64
    }
}

impl MaskEstimator for WienerEstimator {
    fn step(&mut self, frame: &FrameContext<'_>) -> Result<ComplexMask> {
        let bins = frame.error.len();
        if bins != self.noise.len() {
            return Err(Error::invalid(format!(
                "wiener estimator built for {} bins, got {bins}",
                self.noise.len()
            )));
        }
        let prm = self.params;
        let first = self.frames == 0;
        let s = prm.power_smoothing;
        let warmup = (1.0 / (1.0 - s)).ceil() as u64;
        for (k, z) in frame.error.bins().iter().enumerate() {
            let p = z.norm_sqr();
            let sm = if first { p } else { s * self.smoothed[k] + (1.0 - s) * p };
            self.smoothed[k] = sm;
            let g = prm.gain_smoothing;
            self.gain_power[k] = if first { p } else { g * self.gain_power[k] + (1.0 - g) * p };
            // the minimum search waits until the smoother has settled
            if self.frames >= warmup {
                self.current_min[k] = self.current_min[k].min(sm);
            }
            let floor = self
                .past_mins
                .iter()
                .map(|m| m[k])
                .fold(self.current_min[k], f64::min)
                .min(sm);
            if first {
                self.noise[k] = p;
                continue;
            }
            let speech = if sm > prm.presence_threshold * floor { 1.0 } else { 0.0 };
            let q = prm.presence_smoothing;
            self.presence[k] = q * self.presence[k] + (1.0 - q) * speech;
            let a = prm.noise_smoothing + (1.0 - prm.noise_smoothing) * self.presence[k];
            self.noise[k] = a * self.noise[k] + (1.0 - a) * p;
        }
        self.frames += 1;
        if self.frames % self.subwindow_len() == 0 {
            if self.past_mins.len() == NOISE_SUBWINDOWS - 1 {
                self.past_mins.pop_front();
            }
            let bins = self.current_min.len();
            let done = std::mem::replace(&mut self.current_min, vec![f64::INFINITY; bins]);
            self.past_mins.push_back(done);
        }
        let noise: Vec<f64> = self.noise.iter().map(|n| n * self.params.noise_bias).collect();
        let echo: Vec<f64> = frame
            .echo
            .bins()
            .iter()
            .map(|e| self.params.echo_leak * e.norm_sqr())
            .collect();
        let power = Spectrum::new(
            self.gain_power.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect(),
            frame.error.frame_index,
        );
        wiener_mask(&power, &noise, &echo, self.gain_floor)
    }

    fn reset(&mut self) {
        self.smoothed.fill(0.0);
        self.current_min.fill(f64::INFINITY);
        self.past_mins.clear();
        self.presence.fill(0.0);
        self.noise.fill(0.0);
        self.gain_power.fill(0.0);
        self.frames = 0;
    }

    fn name(&self) -> String {
        "wiener".into()
    }
}

/// Estimator selector, as written on the command line or in config files:
/// `identity`, `zero`, `oracle`, `wiener` or `neural:<weights path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorSpec {
    Identity,
    Zero,
    Oracle,
    Wiener,
    Neural(PathBuf),
}

impl EstimatorSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" => Ok(EstimatorSpec::Identity),
            "zero" => Ok(EstimatorSpec::Zero),
            "oracle" => Ok(EstimatorSpec::Oracle),
            "wiener" => Ok(EstimatorSpec::Wiener),
            _ => match s.strip_prefix("neural:") {
                Some(path) if !path.is_empty() => Ok(EstimatorSpec::Neural(PathBuf::from(path))),
                _ => Err(Error::config(format!(
                    "unknown estimator '{s}' (expected identity, zero, oracle, wiener or neural:<path>)"
                ))),
            },
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',')
            .filter(|part| !part.trim().is_empty())
            .map(Self::parse)
            .collect()
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, EstimatorSpec::Oracle)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Identity => f.write_str("identity"),
            EstimatorSpec::Zero => f.write_str("zero"),
            EstimatorSpec::Oracle => f.write_str("oracle"),
            EstimatorSpec::Wiener => f.write_str("wiener"),
            EstimatorSpec::Neural(p) => write!(f, "neural:{}", p.display()),
        }
    }
}
