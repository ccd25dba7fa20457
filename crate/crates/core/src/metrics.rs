//! ERLE, SI-SDR, segmental SNR and real-time factor.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};

pub const ERLE_POWER_FLOOR: f64 = 1e-12;
pub const SI_SDR_CAP_DB: f64 = 100.0;
pub const SEG_SNR_BLOCK_S: f64 = 0.03;
pub const SEG_SNR_RANGE_DB: (f64, f64) = (-10.0, 35.0);

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "signal lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Block-wise echo return loss enhancement in dB. Only meaningful where
/// the microphone carries no near-end speech.
pub fn erle(mic: &[f64], error: &[f64], block_s: f64, sample_rate: u32) -> Result<Vec<f64>> {
    same_len(mic, error)?;
    let block = (block_s * sample_rate as f64).round() as usize;
    if block == 0 {
        return Err(Error::invalid("ERLE block must hold at least one sample"));
    }
    Ok(mic
        .chunks(block)
        .zip(error.chunks(block))
        .map(|(m, e)| {
            let pm = energy(m) / m.len() as f64;
            let pe = (energy(e) / e.len() as f64).max(ERLE_POWER_FLOOR);
            10.0 * (pm.max(ERLE_POWER_FLOOR) / pe).log10()
        })
        .collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Scale-invariant SDR in dB, capped at [`SI_SDR_CAP_DB`].
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    same_len(estimate, reference)?;
    let ref_energy = energy(reference);
    if ref_energy == 0.0 {
        return Err(Error::invalid("SI-SDR reference is all zeros"));
    }
    let dot: f64 = estimate.iter().zip(reference).map(|(e, r)| e * r).sum();
    let scale = dot / ref_energy;
    let target = scale * scale * ref_energy;
    let residual: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| (e - scale * r).powi(2))
        .sum();
    if residual <= target * 10f64.powf(-SI_SDR_CAP_DB / 10.0) {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).min(SI_SDR_CAP_DB))
}

/// Mean of per-block SNRs over 30 ms blocks, each clamped to [-10, 35] dB.
pub fn seg_snr(estimate: &[f64], reference: &[f64], sample_rate: u32) -> Result<f64> {
    same_len(estimate, reference)?;
    let block = (SEG_SNR_BLOCK_S * sample_rate as f64).round() as usize;
    if reference.is_empty() {
        return Err(Error::invalid("segmental SNR of an empty signal"));
    }
    let (lo, hi) = SEG_SNR_RANGE_DB;
    let snrs: Vec<f64> = estimate
        .chunks(block)
        .zip(reference.chunks(block))
        .map(|(e, r)| {
            let signal = energy(r).max(ERLE_POWER_FLOOR);
            let noise: f64 = e
                .iter()
                .zip(r)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .max(ERLE_POWER_FLOOR);
            (10.0 * (signal / noise).log10()).clamp(lo, hi)
        })
        .collect();
    Ok(mean(&snrs))
}

/// Wall-clock processing time over audio duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtfReport {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

/// Runs `process` once to warm up, then `runs` (at least 5) timed times.
pub fn rtf<F: FnMut()>(mut process: F, audio_duration_s: f64, runs: usize) -> Result<RtfReport> {
    if !(audio_duration_s > 0.0) {
        return Err(Error::invalid("audio duration must be positive"));
    }
    let runs = runs.max(5);
    process();
    let mut ratios: Vec<f64> = (0..runs)
        .map(|_| {
            let start = Instant::now();
            process();
            // keep the ratio strictly positive for no-op processors
            start.elapsed().as_secs_f64().max(1e-9) / audio_duration_s
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    Ok(RtfReport {
        median: ratios[runs / 2],
        min: ratios[0],
        max: ratios[runs - 1],
        runs,
    })
}

/// One evaluation row. Metrics that are undefined for a scenario (SI-SDR
/// without near-end speech, ERLE with it) are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub estimator: String,
    pub erle_series_db: Vec<f64>,
    pub erle_db: Option<f64>,
    pub si_sdr_db: Option<f64>,
    pub seg_snr_db: Option<f64>,
    pub rtf: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: [&'static str; 6] =
        ["scenario", "estimator", "erle_db", "si_sdr_db", "seg_snr_db", "rtf"];

    pub fn csv_fields(&self) -> [String; 6] {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
        [
            self.scenario.clone(),
            self.estimator.clone(),
            opt(self.erle_db),
            opt(self.si_sdr_db),
            opt(self.seg_snr_db),
            format!("{:.6}", self.rtf),
        ]
    }

    pub fn write_csv_row<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.csv_fields().join(","))
    }
}
