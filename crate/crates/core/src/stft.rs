//! Frame-based analysis/synthesis and power-law magnitude compression.
//!
//! Analysis takes `fft_order` samples, applies the analysis window and
//! returns the `fft_order / 2 + 1` non-negative-frequency bins. Synthesis
//! inverts a spectrum, applies the synthesis window and overlap-adds into a
//! per-stream [`OverlapState`], emitting `hop` samples per frame.
//!
//! The synthesis window is normalised by the overlap-add sum of
//! `analysis * synthesis` so any window pair that overlap-adds to a constant
//! reconstructs exactly, not only pairs that sum to one.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis/synthesis window pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Square-root periodic Hann on both sides.
    SqrtHann,
    /// Periodic Hann for analysis, rectangular synthesis.
    Hann,
    /// Rectangular on both sides.
    Rectangular,
}

impl WindowKind {
    fn analysis(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
                match self {
                    WindowKind::SqrtHann => hann.sqrt(),
                    WindowKind::Hann => hann,
                    WindowKind::Rectangular => 1.0,
                }
            })
            .collect()
    }

    fn synthesis(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::SqrtHann => self.analysis(n),
            WindowKind::Hann | WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub fft_order: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            fft_order: 512,
            hop: 256,
            window: WindowKind::SqrtHann,
            sample_rate: 16_000,
        }
    }
}

impl StftConfig {
    /// Number of non-negative frequency bins, `K = N / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_order / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_order < 2 || !self.fft_order.is_power_of_two() {
            return Err(Error::invalid(format!(
                "fft_order must be a power of two >= 2, got {}",
                self.fft_order
            )));
        }
        if self.hop == 0 || self.hop > self.fft_order {
            return Err(Error::invalid(format!(
                "hop must satisfy 0 < hop <= fft_order ({}), got {}",
                self.fft_order, self.hop
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        Ok(())
    }
}

/// One frame of non-negative-frequency STFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    pub frame_index: u64,
}

impl Spectrum {
    /// Wraps `bins`, projecting the DC and Nyquist bins onto the real axis.
    pub fn new(mut bins: Vec<Complex64>, frame_index: u64) -> Self {
        if let Some(first) = bins.first_mut() {
            first.im = 0.0;
        }
        if bins.len() > 1 {
            if let Some(last) = bins.last_mut() {
                last.im = 0.0;
            }
        }
        Spectrum { bins, frame_index }
    }

    pub fn zeros(bins: usize, frame_index: u64) -> Self {
        Spectrum {
            bins: vec![Complex64::new(0.0, 0.0); bins],
            frame_index,
        }
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn power(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.norm_sqr()).collect()
    }

    pub fn into_bins(self) -> Vec<Complex64> {
        self.bins
    }
}

/// Power-law compressed magnitude plus untouched phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedFrame {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub frame_index: u64,
}

impl CompressedFrame {
    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let two_pi = 2.0 * PI;
    let wrapped = x - two_pi * ((x - PI) / two_pi).ceil();
    // rounding can land exactly on -pi
    if wrapped <= -PI {
        wrapped + two_pi
    } else {
        wrapped
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "compression factor must lie in (0, 1], got {alpha}"
        )))
    }
}

/// `|X|^alpha` and `arg X`; the phase of a zero bin is 0.
pub fn compress(spec: &Spectrum, alpha: f64) -> Result<CompressedFrame> {
    check_alpha(alpha)?;
    let mut magnitude = Vec::with_capacity(spec.len());
    let mut phase = Vec::with_capacity(spec.len());
    for b in spec.bins() {
        let mag = b.norm();
        if mag == 0.0 {
            magnitude.push(0.0);
            phase.push(0.0);
        } else {
            magnitude.push(mag.powf(alpha));
            phase.push(wrap_phase(b.arg()));
        }
    }
    Ok(CompressedFrame {
        magnitude,
        phase,
        frame_index: spec.frame_index,
    })
}

/// Inverse of [`compress`]: `magnitude^(1/alpha) * exp(i * phase)`.
pub fn decompress(frame: &CompressedFrame, alpha: f64) -> Result<Spectrum> {
    check_alpha(alpha)?;
    if frame.phase.len() != frame.magnitude.len() {
        return Err(Error::invalid(format!(
            "magnitude/phase length mismatch: {} vs {}",
            frame.magnitude.len(),
            frame.phase.len()
        )));
    }
    let inv = 1.0 / alpha;
    let bins = frame
        .magnitude
        .iter()
        .zip(&frame.phase)
        .map(|(&m, &p)| {
            if m <= 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(m.powf(inv), p)
            }
        })
        .collect();
    Ok(Spectrum::new(bins, frame.frame_index))
}

/// Immutable transform: FFT plans plus window tables.
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    analysis: Arc<[f64]>,
    synthesis: Arc<[f64]>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for Stft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fft_order;
        let analysis = cfg.window.analysis(n);
        let mut synthesis = cfg.window.synthesis(n);

        // overlap-add sum of the window product at every phase of the hop
        let mut ola = vec![0.0; cfg.hop];
        for i in 0..n {
            ola[i % cfg.hop] += analysis[i] * synthesis[i];
        }
        let (lo, hi) = ola
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if lo <= 0.0 || (hi - lo) > 1e-9 * hi {
            return Err(Error::invalid(format!(
                "window {:?} does not overlap-add to a constant at hop {} (range {lo}..{hi})",
                cfg.window, cfg.hop
            )));
        }
        let gain = (lo + hi) / 2.0;
        // fold the 1/N of the inverse FFT into the synthesis window
        let scale = 1.0 / (gain * n as f64);
        for s in &mut synthesis {
            *s *= scale;
        }

        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Stft {
            cfg,
            analysis: analysis.into(),
            synthesis: synthesis.into(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn bins(&self) -> usize {
        self.cfg.bins()
    }

    pub fn analysis_window(&self) -> &[f64] {
        &self.analysis
    }

    /// Windowed real FFT of one `fft_order`-sample frame.
    pub fn analyze(&self, frame: &[f64], frame_index: u64) -> Result<Spectrum> {
        let n = self.cfg.fft_order;
        if frame.len() != n {
            return Err(Error::invalid(format!(
                "analysis frame has {} samples, expected {n}",
                frame.len()
            )));
        }
        let mut input: Vec<f64> = frame
            .iter()
            .zip(self.analysis.iter())
            .map(|(x, w)| x * w)
            .collect();
        let mut output = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut output)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Spectrum::new(output, frame_index))
    }

    /// Inverse transform of one frame, overlap-added into `state`.
    /// Returns the `hop` samples that are complete after this frame.
    pub fn synthesize(&self, spec: &Spectrum, state: &mut OverlapState) -> Result<Vec<f64>> {
        let n = self.cfg.fft_order;
        let hop = self.cfg.hop;
        if spec.len() != self.bins() {
            return Err(Error::invalid(format!(
                "spectrum has {} bins, expected {}",
                spec.len(),
                self.bins()
            )));
        }
        if state.acc.len() != n {
            return Err(Error::invalid("overlap state was built for another frame size"));
        }
        let mut input = spec.bins().to_vec();
        input[0].im = 0.0;
        if let Some(last) = input.last_mut() {
            last.im = 0.0;
        }
        let mut time = self.inverse.make_output_vec();
        self.inverse
            .process(&mut input, &mut time)
            .map_err(|e| Error::invalid(e.to_string()))?;
        for ((acc, t), w) in state.acc.iter_mut().zip(&time).zip(self.synthesis.iter()) {
            *acc += t * w;
        }
        let out = state.acc[..hop].to_vec();
        state.acc.copy_within(hop.., 0);
        state.acc[n - hop..].fill(0.0);
        Ok(out)
    }

    /// Samples between an input sample entering the analyzer and the same
    /// sample leaving the synthesizer.
    pub fn latency(&self) -> usize {
        self.cfg.fft_order - self.cfg.hop
    }
}

/// Pending overlap-add tail for one output stream.
#[derive(Debug, Clone)]
pub struct OverlapState {
    acc: Vec<f64>,
}

impl OverlapState {
    pub fn new(cfg: &StftConfig) -> Self {
        OverlapState {
            acc: vec![0.0; cfg.fft_order],
        }
    }

    pub fn reset(&mut self) {
        self.acc.fill(0.0);
    }
}

/// Sliding analysis buffer: push `hop` new samples, get the next frame.
#[derive(Debug, Clone)]
pub struct StftAnalyzer {
    stft: Stft,
    buffer: Vec<f64>,
    next_frame: u64,
}

impl StftAnalyzer {
    pub fn new(stft: &Stft) -> Self {
        StftAnalyzer {
            stft: stft.clone(),
            buffer: vec![0.0; stft.cfg.fft_order],
            next_frame: 0,
        }
    }

    pub fn push(&mut self, hop_samples: &[f64]) -> Result<Spectrum> {
        let hop = self.stft.cfg.hop;
        if hop_samples.len() != hop {
            return Err(Error::invalid(format!(
                "expected {hop} new samples, got {}",
                hop_samples.len()
            )));
        }
        let n = self.buffer.len();
        self.buffer.copy_within(hop.., 0);
        self.buffer[n - hop..].copy_from_slice(hop_samples);
        let spec = self.stft.analyze(&self.buffer, self.next_frame)?;
        self.next_frame += 1;
        Ok(spec)
    }

    pub fn reset(&mut self) {
        self.buffer.fill(0.0);
        self.next_frame = 0;
    }
}

/// Analysis followed directly by synthesis over a whole signal. The output
/// is delayed by [`Stft::latency`] samples and has the input's length.
pub fn round_trip(stft: &Stft, signal: &[f64]) -> Result<Vec<f64>> {
    let hop = stft.cfg.hop;
    let mut analyzer = StftAnalyzer::new(stft);
    let mut state = OverlapState::new(&stft.cfg);
    let mut out = Vec::with_capacity(signal.len() + hop);
    let mut block = vec![0.0; hop];
    for chunk in signal.chunks(hop) {
        block[..chunk.len()].copy_from_slice(chunk);
        block[chunk.len()..].fill(0.0);
        let spec = analyzer.push(&block)?;
        out.extend(stft.synthesize(&spec, &mut state)?);
    }
    out.truncate(signal.len());
    Ok(out)
}
