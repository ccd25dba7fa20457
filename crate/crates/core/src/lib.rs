//! Hybrid acoustic echo and noise reduction.
//!
//! A partitioned-block frequency-domain Kalman filter removes the linear
//! echo; an STFT-domain complex ratio mask, estimated from compressed
//! error, echo-estimate and far-end features, removes residual echo and
//! noise. The [`sim`] and [`metrics`] modules provide scenario generation
//! and evaluation.

pub mod config;
pub mod error;
pub mod features;
pub mod kalman;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod sim;
pub mod stft;
pub mod wav;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{Pipeline, ProcessedSignal};
