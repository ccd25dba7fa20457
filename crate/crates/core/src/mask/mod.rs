//! Complex ratio masks and the estimators that produce them.
//!
//! A mask acts on the compressed error spectrum: the compressed magnitude
//! is scaled by `M_m` and the error phase is rotated by `M_p`,
//!
//! ```text
//! S~(l, k) = Z~_m(l, k) * M_m(l, k) * exp(i (Z~_p(l, k) + M_p(l, k)))
//! ```
//!
//! after which power-law decompression yields the near-end estimate. Since
//! `(m g)^a = m^a g^a`, a compressed-domain gain `M_m` corresponds to a
//! linear-domain gain of `M_m^(1 / alpha)`.

mod estimators;
pub mod neural;

pub use estimators::{
    EstimatorSpec, IdentityEstimator, OracleEstimator, WienerEstimator, WienerParams,
    ZeroEstimator,
};
pub use neural::{NeuralGeometry, NeuralMaskEstimator, NeuralWeights};

use crate::error::{Error, Result};
use crate::features::ReorientedFeatureBlock;
use crate::stft::{compress, wrap_phase, CompressedFrame, Spectrum};

/// Magnitudes of `|Z|` below this are treated as empty bins by the oracle.
pub const ORACLE_ERROR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl ComplexMask {
    pub fn identity(bins: usize) -> Self {
        ComplexMask {
            magnitude: vec![1.0; bins],
            phase: vec![0.0; bins],
        }
    }

    pub fn zeros(bins: usize) -> Self {
        ComplexMask {
            magnitude: vec![0.0; bins],
            phase: vec![0.0; bins],
        }
    }

    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }

    /// Clamps magnitudes into `[0, ceiling]` and wraps phases into
    /// `(-pi, pi]`. Non-finite entries become 0.
    pub fn sanitize(&mut self, ceiling: f64) {
        for m in &mut self.magnitude {
            *m = if m.is_finite() { m.clamp(0.0, ceiling) } else { 0.0 };
        }
        for p in &mut self.phase {
            *p = if p.is_finite() { wrap_phase(*p) } else { 0.0 };
        }
    }

    pub fn check(&self, ceiling: f64) -> Result<()> {
        if self.phase.len() != self.magnitude.len() {
            return Err(Error::invalid("mask magnitude/phase length mismatch"));
        }
        if let Some(m) = self
            .magnitude
            .iter()
            .find(|m| !(0.0..=ceiling).contains(*m))
        {
            return Err(Error::invalid(format!(
                "mask magnitude {m} outside [0, {ceiling}]"
            )));
        }
        if self.phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("mask phase is not finite"));
        }
        Ok(())
    }
}

/// Everything an estimator may look at for one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameContext<'a> {
    pub features: &'a ReorientedFeatureBlock,
    pub error: &'a Spectrum,
    pub echo: &'a Spectrum,
    pub farend: &'a Spectrum,
}

/// Causal per-frame mask estimator. Implementations own their recurrent
/// state; [`MaskEstimator::reset`] returns them to the initial state.
pub trait MaskEstimator: Send {
    fn step(&mut self, frame: &FrameContext<'_>) -> Result<ComplexMask>;

    fn reset(&mut self);

    fn name(&self) -> String;
}

/// Applies a mask to a compressed error frame.
pub fn apply_mask(z_frame: &CompressedFrame, mask: &ComplexMask) -> Result<CompressedFrame> {
    if z_frame.len() != mask.len() || z_frame.phase.len() != mask.phase.len() {
        return Err(Error::invalid(format!(
            "mask has {} bins, frame has {}",
            mask.len(),
            z_frame.len()
        )));
    }
    Ok(CompressedFrame {
        magnitude: z_frame
            .magnitude
            .iter()
            .zip(&mask.magnitude)
            .map(|(z, m)| z * m)
            .collect(),
        phase: z_frame
            .phase
            .iter()
            .zip(&mask.phase)
            .map(|(z, m)| wrap_phase(z + m))
            .collect(),
        frame_index: z_frame.frame_index,
    })
}

/// Mask that maps the error spectrum onto the clean spectrum, up to the
/// magnitude ceiling.
pub fn oracle_mask(
    clean: &Spectrum,
    error: &Spectrum,
    alpha: f64,
    ceiling: f64,
) -> Result<ComplexMask> {
    if clean.len() != error.len() {
        return Err(Error::invalid(format!(
            "clean spectrum has {} bins, error has {}",
            clean.len(),
            error.len()
        )));
    }
    let s = compress(clean, alpha)?;
    let z = compress(error, alpha)?;
    let mut mask = ComplexMask::zeros(clean.len());
    for k in 0..clean.len() {
        if error.bins()[k].norm() < ORACLE_ERROR_FLOOR {
            continue;
        }
        mask.magnitude[k] = (s.magnitude[k] / z.magnitude[k]).min(ceiling);
        mask.phase[k] = wrap_phase(s.phase[k] - z.phase[k]);
    }
    Ok(mask)
}

/// Spectral-subtraction Wiener gain with a floor; zero phase correction.
pub fn wiener_mask(
    error: &Spectrum,
    noise_psd: &[f64],
    echo_psd: &[f64],
    gain_floor: f64,
) -> Result<ComplexMask> {
    let k = error.len();
    if noise_psd.len() != k || echo_psd.len() != k {
        return Err(Error::invalid(format!(
            "PSD lengths ({}, {}) do not match {k} bins",
            noise_psd.len(),
            echo_psd.len()
        )));
    }
    if noise_psd.iter().chain(echo_psd).any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("PSD estimates must be non-negative"));
    }
    let magnitude = error
        .bins()
        .iter()
        .zip(noise_psd.iter().zip(echo_psd))
        .map(|(z, (&n, &e))| {
            let speech = (z.norm_sqr() - n - e).max(0.0);
            let denom = speech + n + e;
            let gain = if denom > 0.0 { speech / denom } else { 1.0 };
            gain.max(gain_floor)
        })
        .collect();
    Ok(ComplexMask {
        magnitude,
        phase: vec![0.0; k],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::decompress;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spectrum(rng: &mut impl Rng, bins: usize) -> Spectrum {
        Spectrum::new(
            (0..bins)
                .map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
                .collect(),
            0,
        )
    }

    #[test]
    fn identity_mask_is_transparent() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let z = compress(&random_spectrum(&mut rng, 257), 0.3).unwrap();
        let out = apply_mask(&z, &ComplexMask::identity(257)).unwrap();
        assert_eq!(out.magnitude, z.magnitude);
        for (a, b) in out.phase.iter().zip(&z.phase) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_mask_suppresses_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = compress(&random_spectrum(&mut rng, 257), 0.3).unwrap();
        let out = apply_mask(&z, &ComplexMask::zeros(257)).unwrap();
        assert!(out.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn apply_mask_matches_complex_multiplication() {
        // Decompressed output equals Z * M_m^(1/alpha) * exp(i M_p).
        let alpha = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let z_spec = random_spectrum(&mut rng, 257);
        let mask = ComplexMask {
            magnitude: (0..257).map(|_| rng.random_range(0.01..2.0)).collect(),
            phase: (0..257).map(|_| rng.random_range(-3.0..3.0)).collect(),
        };
        let out = decompress(&apply_mask(&compress(&z_spec, alpha).unwrap(), &mask).unwrap(), alpha)
            .unwrap();
        for k in 1..256 {
            let oracle = z_spec.bins()[k]
                * Complex64::from_polar(mask.magnitude[k].powf(1.0 / alpha), mask.phase[k]);
            let got = out.bins()[k];
            assert!((got - oracle).norm() <= 1e-7 * oracle.norm(), "bin {k}");
        }
    }

    #[test]
    fn apply_mask_length_mismatch() {
        let z = compress(&Spectrum::zeros(10, 0), 0.3).unwrap();
        assert!(apply_mask(&z, &ComplexMask::identity(9)).is_err());
    }

    #[test]
    fn oracle_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = random_spectrum(&mut rng, 257);
        let m = oracle_mask(&z, &z, 0.3, 2.0).unwrap();
        assert!(m.magnitude.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(m.phase.iter().all(|&v| v.abs() < 1e-12));
        let m = oracle_mask(&Spectrum::zeros(257, 0), &z, 0.3, 2.0).unwrap();
        assert!(m.magnitude.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oracle_round_trip_recovers_clean() {
        let alpha = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let z = random_spectrum(&mut rng, 257);
        let s = random_spectrum(&mut rng, 257);
        let mask = oracle_mask(&s, &z, alpha, 2.0).unwrap();
        let out = decompress(&apply_mask(&compress(&z, alpha).unwrap(), &mask).unwrap(), alpha)
            .unwrap();
        let mut checked = 0;
        for k in 0..257 {
            if mask.magnitude[k] >= 2.0 {
                continue;
            }
            checked += 1;
            let err = (out.bins()[k] - s.bins()[k]).norm();
            assert!(err <= 1e-6 * s.bins()[k].norm().max(1e-12), "bin {k}");
        }
        assert!(checked > 200);
    }

    #[test]
    fn oracle_ceiling_clips() {
        let z = Spectrum::new(vec![Complex64::new(1.0, 0.0); 3], 0);
        let s = Spectrum::new(vec![Complex64::new(1e6, 0.0); 3], 0);
        let m = oracle_mask(&s, &z, 0.3, 2.0).unwrap();
        assert!(m.magnitude.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn wiener_limits() {
        let z = Spectrum::new(vec![Complex64::new(2.0, 0.0); 4], 0);
        let m = wiener_mask(&z, &[0.0; 4], &[0.0; 4], 0.05).unwrap();
        assert!(m.magnitude.iter().all(|&v| v == 1.0));
        let m = wiener_mask(&z, &[4.0; 4], &[0.0; 4], 0.05).unwrap();
        assert!(m.magnitude.iter().all(|&v| v == 0.05));
        assert!(m.phase.iter().all(|&v| v == 0.0));
        assert!(wiener_mask(&z, &[-1.0; 4], &[0.0; 4], 0.05).is_err());
        assert!(wiener_mask(&z, &[0.0; 3], &[0.0; 4], 0.05).is_err());
    }

    #[test]
    fn sanitize_enforces_invariants() {
        let mut m = ComplexMask {
            magnitude: vec![-1.0, 3.0, f64::NAN, 0.5],
            phase: vec![10.0, -10.0, f64::INFINITY, 0.1],
        };
        m.sanitize(2.0);
        assert_eq!(m.magnitude, vec![0.0, 2.0, 0.0, 0.5]);
        assert!(m.check(2.0).is_ok());
        assert!(m.phase.iter().all(|p| *p > -std::f64::consts::PI && *p <= std::f64::consts::PI));
    }
}
