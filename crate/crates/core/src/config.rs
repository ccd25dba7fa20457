//! Pipeline configuration. Every field is optional in the TOML form and
//! defaults to the reference configuration: 16 kHz, 512-point FFT (257
//! bins), compression 0.3, 48-bin sub-bands at overlap 0.33, 10 Kalman
//! partitions with PSD smoothing 0.8.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{make_layout, LayoutParams, SubbandLayout};
use crate::kalman::KalmanConfig;
use crate::mask::{EstimatorSpec, WienerParams};
use crate::stft::StftConfig;

/// Environment variable naming a default config file for the CLI.
pub const CONFIG_ENV: &str = "AENR_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    pub kalman: KalmanConfig,
    /// Power-law compression factor.
    pub alpha: f64,
    pub layout: LayoutParams,
    pub estimator: String,
    pub mask_ceiling: f64,
    pub gain_floor: f64,
    pub wiener: WienerParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stft: StftConfig::default(),
            kalman: KalmanConfig::default(),
            alpha: 0.3,
            layout: LayoutParams::default(),
            estimator: "wiener".into(),
            mask_ceiling: 2.0,
            gain_floor: 0.05,
            wiener: WienerParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn layout(&self) -> Result<SubbandLayout> {
        make_layout(
            self.stft.bins(),
            self.layout.band_length,
            self.layout.overlap,
        )
    }

    pub fn estimator_spec(&self) -> Result<EstimatorSpec> {
        EstimatorSpec::parse(&self.estimator)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, e: Error| match e {
            Error::InvalidArgument(msg) | Error::Config(msg) => {
                Error::config(format!("[{section}] {msg}"))
            }
            other => other,
        };
        self.stft.validate().map_err(|e| wrap("stft", e))?;
        if self.stft.hop > self.stft.fft_order / 2 {
            return Err(Error::config(format!(
                "[stft] hop {} exceeds fft_order / 2 required by the echo canceller",
                self.stft.hop
            )));
        }
        self.kalman.validate().map_err(|e| wrap("kalman", e))?;
        self.layout().map_err(|e| wrap("layout", e))?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.mask_ceiling > 0.0 && self.mask_ceiling.is_finite()) {
            return Err(Error::config("mask_ceiling must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.gain_floor) {
            return Err(Error::config("gain_floor must lie in [0, 1]"));
        }
        let w = &self.wiener;
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(w.power_smoothing)
            || !unit(w.presence_smoothing)
            || !unit(w.noise_smoothing)
            || !unit(w.gain_smoothing)
            || w.noise_window == 0
            || !(w.presence_threshold > 1.0)
            || !(w.noise_bias > 0.0)
            || !(w.echo_leak >= 0.0)
        {
            return Err(Error::config(format!("[wiener] parameters out of range: {w:?}")));
        }
        self.estimator_spec()?;
        Ok(())
    }
}
