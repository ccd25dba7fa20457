//! Diagonalized partitioned-block frequency-domain Kalman filter.
//!
//! The echo path is split into `P` partitions of `R = hop` taps each. Every
//! frame the newest `R` far-end samples are appended to an `M = fft_order`
//! sample window whose spectrum enters a ring of the `P` most recent far-end
//! blocks. The echo estimate is the overlap-save output of
//! `sum_p W_p * X_p`, and the error block `z = x - e_hat` drives a per-bin,
//! per-partition Kalman update:
//!
//! ```text
//! Psi_vv  <- s * Psi_vv + (1 - s) * |Z|^2
//! D       =  sum_p P_p |X_p|^2 + (M / R) Psi_vv + eps
//! mu_p    =  P_p / D
//! W_p     <- W_p + G(mu_p conj(X_p) Z)          G: gradient constraint
//! P_p     <- (1 - (R / M) mu_p |X_p|^2) P_p
//! Psi_dd  =  (1 - lambda^2) |W_p|^2
//! P_p     <- lambda^2 P_p + Psi_dd
//! ```
//!
//! Cross-partition and cross-bin covariance terms are dropped.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::{Spectrum, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanConfig {
    /// Number of filter partitions `P`.
    pub partitions: usize,
    /// Retention factor of the observation-noise PSD recursion.
    pub smoothing: f64,
    /// Forgetting factor `lambda` of the process-noise model.
    pub forgetting: f64,
    /// Floor added to every PSD denominator.
    pub regularization: f64,
    /// Initial per-bin state covariance.
    pub initial_covariance: f64,
    /// Lower bound on the state covariance so a filter that has decayed to
    /// zero coefficients can still adapt when far-end activity starts.
    pub covariance_floor: f64,
    /// Apply the overlap-save gradient constraint on every update.
    pub constrain_gradient: bool,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            partitions: 10,
            smoothing: 0.8,
            forgetting: 0.999,
            regularization: 1e-10,
            initial_covariance: 1e2,
            covariance_floor: 1e-4,
            constrain_gradient: true,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(Error::invalid("kalman.partitions must be >= 1"));
        }
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return Err(Error::invalid(format!(
                "kalman.smoothing must lie in (0, 1), got {}",
                self.smoothing
            )));
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::invalid(format!(
                "kalman.forgetting must lie in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !(self.regularization > 0.0) {
            return Err(Error::invalid("kalman.regularization must be > 0"));
        }
        if !(self.initial_covariance > 0.0) {
            return Err(Error::invalid("kalman.initial_covariance must be > 0"));
        }
        if !(self.covariance_floor >= 0.0) {
            return Err(Error::invalid("kalman.covariance_floor must be >= 0"));
        }
        Ok(())
    }
}

/// Filter state. All PSD and covariance entries stay non-negative.
#[derive(Debug, Clone)]
pub struct KalmanState {
    /// `P x K` frequency-domain partitions.
    pub coefficients: Vec<Vec<Complex64>>,
    /// `P x K` diagonal state covariance.
    pub state_covariance: Vec<Vec<f64>>,
    /// Observation noise PSD, `K` bins.
    pub obs_noise_psd: Vec<f64>,
    /// `P x K` process noise PSD.
    pub proc_noise_psd: Vec<Vec<f64>>,
    /// Far-end block spectra, newest first; always `P` entries.
    pub farend_history: VecDeque<Vec<Complex64>>,
}

impl KalmanState {
    pub fn new(cfg: &KalmanConfig, bins: usize) -> Self {
        let p = cfg.partitions;
        let zeros = vec![Complex64::new(0.0, 0.0); bins];
        KalmanState {
            coefficients: vec![zeros.clone(); p],
            state_covariance: vec![vec![cfg.initial_covariance; bins]; p],
            obs_noise_psd: vec![0.0; bins],
            proc_noise_psd: vec![vec![0.0; bins]; p],
            farend_history: std::iter::repeat_n(zeros, p).collect(),
        }
    }

    pub fn partitions(&self) -> usize {
        self.coefficients.len()
    }

    pub fn bins(&self) -> usize {
        self.obs_noise_psd.len()
    }

    /// `sum_p W_p[k] X_p[k]`.
    pub fn predict_spectrum(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.bins()];
        for (w, x) in self.coefficients.iter().zip(&self.farend_history) {
            for ((o, w), x) in out.iter_mut().zip(w).zip(x) {
                *o += w * x;
            }
        }
        out
    }

    /// Recursive average of the error power with retention `smoothing`.
    pub fn update_observation_noise(&mut self, error_spectrum: &[Complex64], smoothing: f64) {
        for (psd, z) in self.obs_noise_psd.iter_mut().zip(error_spectrum) {
            *psd = smoothing * *psd + (1.0 - smoothing) * z.norm_sqr();
        }
    }

    /// `Psi_dd = (1 - lambda^2) |W|^2`.
    pub fn update_process_noise(&mut self, forgetting: f64) {
        let scale = 1.0 - forgetting * forgetting;
        for (psd, w) in self.proc_noise_psd.iter_mut().zip(&self.coefficients) {
            for (q, w) in psd.iter_mut().zip(w) {
                *q = scale * w.norm_sqr();
            }
        }
    }

    pub fn coefficient_energy(&self) -> f64 {
        self.coefficients
            .iter()
            .flat_map(|w| w.iter())
            .map(|w| w.norm_sqr())
            .sum()
    }
}

/// Time-domain output of one canceller frame.
#[derive(Debug, Clone)]
pub struct KalmanFrame {
    /// Echo estimate `e_hat`, `hop` samples.
    pub echo: Vec<f64>,
    /// Error signal `z = x - e_hat`, `hop` samples.
    pub error: Vec<f64>,
}

/// Streaming echo canceller: owns the FFT plans, the far-end window and the
/// [`KalmanState`].
#[derive(Clone)]
pub struct KalmanAec {
    cfg: KalmanConfig,
    fft_len: usize,
    block: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    farend_window: Vec<f64>,
    state: KalmanState,
    frames: u64,
}

impl std::fmt::Debug for KalmanAec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KalmanAec")
            .field("cfg", &self.cfg)
            .field("fft_len", &self.fft_len)
            .field("block", &self.block)
            .field("frames", &self.frames)
            .finish()
    }
}

impl KalmanAec {
    pub fn new(cfg: KalmanConfig, stft: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        stft.validate()?;
        if stft.hop > stft.fft_order / 2 {
            return Err(Error::invalid(format!(
                "overlap-save needs hop <= fft_order / 2, got hop {} for fft_order {}",
                stft.hop, stft.fft_order
            )));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(KalmanAec {
            cfg,
            fft_len: stft.fft_order,
            block: stft.hop,
            forward: planner.plan_fft_forward(stft.fft_order),
            inverse: planner.plan_fft_inverse(stft.fft_order),
            farend_window: vec![0.0; stft.fft_order],
            state: KalmanState::new(&cfg, stft.bins()),
            frames: 0,
        })
    }

    pub fn config(&self) -> &KalmanConfig {
        &self.cfg
    }

    pub fn state(&self) -> &KalmanState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut KalmanState {
        &mut self.state
    }

    /// Echo path length covered by the partitions, in samples.
    pub fn modeled_taps(&self) -> usize {
        self.cfg.partitions * (self.fft_len - self.block)
    }

    pub fn reset(&mut self) {
        self.farend_window.fill(0.0);
        self.state = KalmanState::new(&self.cfg, self.fft_len / 2 + 1);
        self.frames = 0;
    }

    fn rfft(&self, mut input: Vec<f64>) -> Vec<Complex64> {
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut out)
            .expect("buffer sizes match the plan");
        out
    }

    fn irfft(&self, mut input: Vec<Complex64>) -> Vec<f64> {
        input[0].im = 0.0;
        if let Some(last) = input.last_mut() {
            last.im = 0.0;
        }
        let mut out = self.inverse.make_output_vec();
        self.inverse
            .process(&mut input, &mut out)
            .expect("buffer sizes match the plan");
        let scale = 1.0 / self.fft_len as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// Shifts `hop` new far-end samples into the window and pushes its
    /// spectrum onto the partition history.
    pub fn push_farend(&mut self, block: &[f64]) -> Result<()> {
        if block.len() != self.block {
            return Err(Error::invalid(format!(
                "far-end block has {} samples, expected {}",
                block.len(),
                self.block
            )));
        }
        let m = self.fft_len;
        self.farend_window.copy_within(self.block.., 0);
        self.farend_window[m - self.block..].copy_from_slice(block);
        let spec = self.rfft(self.farend_window.clone());
        self.state.farend_history.pop_back();
        self.state.farend_history.push_front(spec);
        Ok(())
    }

    /// Echo estimate for the current far-end history: the frequency-domain
    /// sum over partitions and its overlap-save time-domain block.
    pub fn predict_echo(&self) -> (Spectrum, Vec<f64>) {
        let spec = self.state.predict_spectrum();
        let time = self.irfft(spec.clone());
        let echo = time[self.fft_len - self.block..].to_vec();
        (Spectrum::new(spec, self.frames), echo)
    }

    /// Spectrum of the error block zero-padded in front to `fft_order`.
    pub fn error_spectrum(&self, error: &[f64]) -> Result<Spectrum> {
        if error.len() != self.block {
            return Err(Error::invalid(format!(
                "error block has {} samples, expected {}",
                error.len(),
                self.block
            )));
        }
        let mut padded = vec![0.0; self.fft_len];
        padded[self.fft_len - self.block..].copy_from_slice(error);
        Ok(Spectrum::new(self.rfft(padded), self.frames))
    }

    /// Keeps only the first `M - R` taps of a partition update.
    fn constrain(&self, grad: Vec<Complex64>) -> Vec<Complex64> {
        let mut time = self.irfft(grad);
        time[self.fft_len - self.block..].fill(0.0);
        self.rfft(time)
    }

    /// Kalman correction and covariance time update for one frame. Must
    /// follow [`KalmanAec::predict_echo`] on the same far-end history.
    pub fn update(&mut self, error_spectrum: &Spectrum) -> Result<()> {
        let bins = self.state.bins();
        if error_spectrum.len() != bins {
            return Err(Error::invalid(format!(
                "error spectrum has {} bins, expected {bins}",
                error_spectrum.len()
            )));
        }
        let ratio = self.fft_len as f64 / self.block as f64;
        let z = error_spectrum.bins();
        self.state.update_observation_noise(z, self.cfg.smoothing);

        let mut denom: Vec<f64> = self
            .state
            .obs_noise_psd
            .iter()
            .map(|psd| ratio * psd + self.cfg.regularization)
            .collect();
        for (cov, x) in self
            .state
            .state_covariance
            .iter()
            .zip(&self.state.farend_history)
        {
            for ((d, c), x) in denom.iter_mut().zip(cov).zip(x) {
                *d += c * x.norm_sqr();
            }
        }

        for p in 0..self.state.partitions() {
            let x = &self.state.farend_history[p];
            let cov = &self.state.state_covariance[p];
            let mut any = false;
            let grad: Vec<Complex64> = (0..bins)
                .map(|k| {
                    let g = cov[k] / denom[k] * x[k].conj() * z[k];
                    any |= g.norm_sqr() > 0.0;
                    g
                })
                .collect();
            if !any {
                continue;
            }
            let grad = if self.cfg.constrain_gradient {
                self.constrain(grad)
            } else {
                grad
            };
            for (w, g) in self.state.coefficients[p].iter_mut().zip(grad) {
                *w += g;
            }
        }

        let lambda2 = self.cfg.forgetting * self.cfg.forgetting;
        self.state.update_process_noise(self.cfg.forgetting);
        let floor = self.cfg.covariance_floor;
        for p in 0..self.state.partitions() {
            let x = &self.state.farend_history[p];
            let q = &self.state.proc_noise_psd[p];
            for (k, c) in self.state.state_covariance[p].iter_mut().enumerate() {
                let mu = *c / denom[k];
                let posterior = (1.0 - mu * x[k].norm_sqr() / ratio).max(0.0) * *c;
                *c = (lambda2 * posterior + q[k]).max(floor);
            }
        }
        self.frames += 1;
        Ok(())
    }

    /// One full frame: far-end push, echo prediction, error, update.
    pub fn process(&mut self, mic: &[f64], farend: &[f64]) -> Result<KalmanFrame> {
        if mic.len() != self.block {
            return Err(Error::invalid(format!(
                "microphone block has {} samples, expected {}",
                mic.len(),
                self.block
            )));
        }
        self.push_farend(farend)?;
        let (_, echo) = self.predict_echo();
        let error = compute_error(mic, &echo)?;
        let spec = self.error_spectrum(&error)?;
        self.update(&spec)?;
        Ok(KalmanFrame { echo, error })
    }
}

/// `z = x - e_hat`, sample by sample.
pub fn compute_error(mic: &[f64], echo: &[f64]) -> Result<Vec<f64>> {
    if mic.len() != echo.len() {
        return Err(Error::invalid(format!(
            "mic and echo lengths differ: {} vs {}",
            mic.len(),
            echo.len()
        )));
    }
    Ok(mic.iter().zip(echo).map(|(x, e)| x - e).collect())
}

/// Per-frame diagnostic row: block ERLE and total coefficient energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanDiagnostics {
    pub frame: u64,
    pub erle_db: f64,
    pub coefficient_energy: f64,
}

impl KalmanDiagnostics {
    pub const CSV_HEADER: &'static str = "frame,erle_db,coefficient_energy";

    pub fn measure(aec: &KalmanAec, mic: &[f64], error: &[f64]) -> Self {
        let power = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
        let erle_db = 10.0 * (power(mic).max(1e-12) / power(error).max(1e-12)).log10();
        KalmanDiagnostics {
            frame: aec.frames.saturating_sub(1),
            erle_db,
            coefficient_energy: aec.state.coefficient_energy(),
        }
    }

    pub fn write_csv_row<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "{},{:.6},{:.9e}",
            self.frame, self.erle_db, self.coefficient_energy
        )
    }
}
