//! Three-input compressed feature frontend.
//!
//! The compressed magnitudes of the error, echo-estimate and far-end spectra
//! are each cut into `B` overlapping sub-bands of `K_B` bins. The bands are
//! interleaved per band index (error, echo, far-end) and stacked into a
//! `3B x K_B` block. Bins past `K - 1` in the last band are zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::{compress, Spectrum};

/// User-facing sub-band parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutParams {
    pub band_length: usize,
    pub overlap: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            band_length: 48,
            overlap: 0.33,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandLayout {
    pub bins: usize,
    pub band_length: usize,
    pub overlap: f64,
    pub hop_bins: usize,
    pub band_count: usize,
    pub padded_length: usize,
    pub band_starts: Vec<usize>,
}

impl SubbandLayout {
    /// Rows of the reoriented block, `3 * B`.
    pub fn rows(&self) -> usize {
        3 * self.band_count
    }
}

/// Builds the sub-band layout for `bins` frequency bins.
pub fn make_layout(bins: usize, band_length: usize, overlap: f64) -> Result<SubbandLayout> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!(
            "sub-band overlap must lie in [0, 1), got {overlap}"
        )));
    }
    if band_length == 0 || band_length > bins {
        return Err(Error::invalid(format!(
            "sub-band length must lie in [1, {bins}], got {band_length}"
        )));
    }
    let hop_bins = (band_length as f64 * (1.0 - overlap)).round() as usize;
    if hop_bins == 0 {
        return Err(Error::invalid(format!(
            "overlap {overlap} leaves no hop for band length {band_length}"
        )));
    }
    let band_count = if bins <= band_length {
        1
    } else {
        1 + (bins - band_length).div_ceil(hop_bins)
    };
    let padded_length = (band_count - 1) * hop_bins + band_length;
    Ok(SubbandLayout {
        bins,
        band_length,
        overlap,
        hop_bins,
        band_count,
        padded_length,
        band_starts: (0..band_count).map(|b| b * hop_bins).collect(),
    })
}

/// `3B x K_B` interleaved feature block, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorientedFeatureBlock {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub frame_index: u64,
}

impl ReorientedFeatureBlock {
    pub fn zeros(layout: &SubbandLayout, frame_index: u64) -> Self {
        ReorientedFeatureBlock {
            rows: layout.rows(),
            cols: layout.band_length,
            data: vec![0.0; layout.rows() * layout.band_length],
            frame_index,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Interleaves the sub-bands of three magnitude vectors: row `3b` holds the
/// error band `b`, row `3b + 1` the echo band, row `3b + 2` the far-end band.
pub fn reorient(
    z_mag: &[f64],
    e_mag: &[f64],
    y_mag: &[f64],
    layout: &SubbandLayout,
) -> Result<ReorientedFeatureBlock> {
    for (name, v) in [("error", z_mag), ("echo", e_mag), ("far-end", y_mag)] {
        if v.len() != layout.bins {
            return Err(Error::invalid(format!(
                "{name} magnitude has {} bins, layout expects {}",
                v.len(),
                layout.bins
            )));
        }
    }
    let mut block = ReorientedFeatureBlock::zeros(layout, 0);
    let cols = layout.band_length;
    for (b, &start) in layout.band_starts.iter().enumerate() {
        let end = (start + cols).min(layout.bins);
        let width = end - start;
        for (c, src) in [z_mag, e_mag, y_mag].into_iter().enumerate() {
            let row = 3 * b + c;
            block.data[row * cols..row * cols + width].copy_from_slice(&src[start..end]);
        }
    }
    Ok(block)
}

/// Frontend output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendFrame {
    pub block: ReorientedFeatureBlock,
    /// Error-signal phase, passed through for mask application.
    pub z_phase: Vec<f64>,
    /// Compressed error magnitude, the quantity the mask scales.
    pub z_magnitude: Vec<f64>,
}

/// Compresses the three spectra and reorients their magnitudes.
pub fn frontend_frame(
    z_spec: &Spectrum,
    e_spec: &Spectrum,
    y_spec: &Spectrum,
    alpha: f64,
    layout: &SubbandLayout,
) -> Result<FrontendFrame> {
    if z_spec.frame_index != e_spec.frame_index || z_spec.frame_index != y_spec.frame_index {
        return Err(Error::invalid(format!(
            "incoherent frame indices: error {}, echo {}, far-end {}",
            z_spec.frame_index, e_spec.frame_index, y_spec.frame_index
        )));
    }
    let z = compress(z_spec, alpha)?;
    let e = compress(e_spec, alpha)?;
    let y = compress(y_spec, alpha)?;
    let mut block = reorient(&z.magnitude, &e.magnitude, &y.magnitude, layout)?;
    block.frame_index = z_spec.frame_index;
    Ok(FrontendFrame {
        block,
        z_phase: z.phase,
        z_magnitude: z.magnitude,
    })
}
