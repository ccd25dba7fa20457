//! The two-stage streaming engine.
//!
//! Per hop of `R` samples: the Kalman canceller turns mic `x` and far-end
//! `y` into echo estimate `e_hat` and error `z`; the three signals are
//! analyzed with the STFT, compressed and reoriented into a feature block;
//! the estimator's mask is applied to the compressed error spectrum, which
//! is decompressed and overlap-added into the output.

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{frontend_frame, SubbandLayout};
use crate::kalman::KalmanAec;
use crate::mask::{
    apply_mask, EstimatorSpec, FrameContext, IdentityEstimator, MaskEstimator,
    NeuralMaskEstimator, OracleEstimator, WienerEstimator, ZeroEstimator,
};
use crate::stft::{decompress, CompressedFrame, OverlapState, Spectrum, Stft, StftAnalyzer};

/// Builds the estimator named by `spec`. `reference` is the clean near-end
/// signal, required only by the oracle.
pub fn build_estimator(
    spec: &EstimatorSpec,
    cfg: &PipelineConfig,
    reference: Option<&[f64]>,
) -> Result<Box<dyn MaskEstimator>> {
    let layout = cfg.layout()?;
    Ok(match spec {
        EstimatorSpec::Identity => Box::new(IdentityEstimator),
        EstimatorSpec::Zero => Box::new(ZeroEstimator),
        EstimatorSpec::Wiener => Box::new(WienerEstimator::new(
            cfg.stft.bins(),
            cfg.wiener,
            cfg.gain_floor,
        )),
        EstimatorSpec::Oracle => {
            let reference = reference.ok_or_else(|| {
                Error::Config("the oracle estimator needs the clean near-end reference".into())
            })?;
            Box::new(OracleEstimator::new(
                reference.to_vec(),
                &Stft::new(cfg.stft)?,
                cfg.alpha,
                cfg.mask_ceiling,
            ))
        }
        EstimatorSpec::Neural(path) => {
            let est = NeuralMaskEstimator::load(path, &layout).map_err(|e| match e {
                Error::Io(io) => {
                    Error::Config(format!("cannot read weights {}: {io}", path.display()))
                }
                other => other,
            })?;
            Box::new(est)
        }
    })
}

/// Output of one pipeline hop.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    /// Post-filter output, delayed by [`Pipeline::latency`].
    pub output: Vec<f64>,
    /// Canceller error `z`, aligned with the input hop.
    pub error: Vec<f64>,
    /// Canceller echo estimate, aligned with the input hop.
    pub echo: Vec<f64>,
}

/// Whole-signal result with the output latency removed.
#[derive(Debug, Clone)]
pub struct ProcessedSignal {
    pub output: Vec<f64>,
    pub error: Vec<f64>,
    pub echo: Vec<f64>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    stft: Stft,
    layout: SubbandLayout,
    aec: KalmanAec,
    z_analyzer: StftAnalyzer,
    e_analyzer: StftAnalyzer,
    y_analyzer: StftAnalyzer,
    overlap: OverlapState,
    estimator: Box<dyn MaskEstimator>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("cfg", &self.cfg)
            .field("estimator", &self.estimator.name())
            .finish()
    }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, estimator: Box<dyn MaskEstimator>) -> Result<Self> {
        cfg.validate()?;
        let stft = Stft::new(cfg.stft)?;
        let layout = cfg.layout()?;
        let aec = KalmanAec::new(cfg.kalman, &cfg.stft)?;
        Ok(Pipeline {
            z_analyzer: StftAnalyzer::new(&stft),
            e_analyzer: StftAnalyzer::new(&stft),
            y_analyzer: StftAnalyzer::new(&stft),
            overlap: OverlapState::new(&cfg.stft),
            cfg,
            stft,
            layout,
            aec,
            estimator,
        })
    }

    /// Pipeline with the estimator named in the config.
    pub fn from_config(cfg: PipelineConfig, reference: Option<&[f64]>) -> Result<Self> {
        let spec = cfg.estimator_spec()?;
        let estimator = build_estimator(&spec, &cfg, reference)?;
        Self::new(cfg, estimator)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn hop(&self) -> usize {
        self.cfg.stft.hop
    }

    /// Algorithmic latency of the post-filter output, in samples.
    pub fn latency(&self) -> usize {
        self.stft.latency()
    }

    pub fn canceller(&self) -> &KalmanAec {
        &self.aec
    }

    pub fn estimator_name(&self) -> String {
        self.estimator.name()
    }

    pub fn reset(&mut self) {
        self.aec.reset();
        self.z_analyzer.reset();
        self.e_analyzer.reset();
        self.y_analyzer.reset();
        self.overlap.reset();
        self.estimator.reset();
    }

    /// Mask estimation, mask application, decompression and synthesis for
    /// one frame of error, echo-estimate and far-end spectra.
    pub fn postfilter_frame(
        &mut self,
        z_spec: &Spectrum,
        e_spec: &Spectrum,
        y_spec: &Spectrum,
    ) -> Result<Vec<f64>> {
        let front = frontend_frame(z_spec, e_spec, y_spec, self.cfg.alpha, &self.layout)?;
        let mut mask = self.estimator.step(&FrameContext {
            features: &front.block,
            error: z_spec,
            echo: e_spec,
            farend: y_spec,
        })?;
        if mask.len() != z_spec.len() {
            return Err(Error::invalid(format!(
                "estimator {} emitted {} bins, expected {}",
                self.estimator.name(),
                mask.len(),
                z_spec.len()
            )));
        }
        mask.sanitize(self.cfg.mask_ceiling);
        let z = CompressedFrame {
            magnitude: front.z_magnitude,
            phase: front.z_phase,
            frame_index: z_spec.frame_index,
        };
        let s = decompress(&apply_mask(&z, &mask)?, self.cfg.alpha)?;
        self.stft.synthesize(&s, &mut self.overlap)
    }

    pub fn process_frame(&mut self, mic: &[f64], farend: &[f64]) -> Result<FrameOutput> {
        let kf = self.aec.process(mic, farend)?;
        let z_spec = self.z_analyzer.push(&kf.error)?;
        let e_spec = self.e_analyzer.push(&kf.echo)?;
        let y_spec = self.y_analyzer.push(farend)?;
        let output = self.postfilter_frame(&z_spec, &e_spec, &y_spec)?;
        Ok(FrameOutput {
            output,
            error: kf.error,
            echo: kf.echo,
        })
    }

    /// Runs whole signals through the pipeline. The output is shifted back
    /// by the latency so it lines up sample-for-sample with `mic`.
    pub fn process_signal(&mut self, mic: &[f64], farend: &[f64]) -> Result<ProcessedSignal> {
        self.process_signal_observed(mic, farend, |_, _, _| {})
    }

    /// [`Pipeline::process_signal`] that calls `observe(pipeline, mic_block,
    /// frame)` after every hop.
    pub fn process_signal_observed<F>(
        &mut self,
        mic: &[f64],
        farend: &[f64],
        mut observe: F,
    ) -> Result<ProcessedSignal>
    where
        F: FnMut(&Pipeline, &[f64], &FrameOutput),
    {
        if mic.is_empty() {
            return Err(Error::invalid("cannot process an empty signal"));
        }
        if mic.len() != farend.len() {
            return Err(Error::invalid(format!(
                "mic has {} samples, far-end {}",
                mic.len(),
                farend.len()
            )));
        }
        let hop = self.hop();
        let latency = self.latency();
        let total = mic.len() + latency;
        let frames = total.div_ceil(hop);
        let mut output = Vec::with_capacity(frames * hop);
        let mut error = Vec::with_capacity(frames * hop);
        let mut echo = Vec::with_capacity(frames * hop);
        let mut mic_block = vec![0.0; hop];
        let mut far_block = vec![0.0; hop];
        for f in 0..frames {
            let start = (f * hop).min(mic.len());
            let end = ((f + 1) * hop).min(mic.len());
            let n = end - start;
            mic_block[..n].copy_from_slice(&mic[start..end]);
            mic_block[n..].fill(0.0);
            far_block[..n].copy_from_slice(&farend[start..end]);
            far_block[n..].fill(0.0);
            let out = self.process_frame(&mic_block, &far_block)?;
            observe(self, &mic_block, &out);
            output.extend(out.output);
            error.extend(out.error);
            echo.extend(out.echo);
        }
        output.drain(..latency.min(output.len()));
        output.truncate(mic.len());
        error.truncate(mic.len());
        echo.truncate(mic.len());
        Ok(ProcessedSignal {
            output,
            error,
            echo,
        })
    }
}
