//! Small causal recurrent mask estimator.
//!
//! Topology (version 1):
//!
//! 1. frequency convolution over the `rows x cols` feature block: `F`
//!    output channels, odd kernel width `W`, zero "same" padding, `tanh`;
//! 2. the `F x cols` activations, flattened row-major, feed one GRU layer
//!    with `H` hidden units (gate order reset, update, new);
//! 3. two linear heads on the hidden state: magnitude `sigmoid(.)` and
//!    phase `pi * tanh(.)`, `K` bins each.
//!
//! # Weights file
//!
//! Little-endian throughout.
//!
//! | offset | type      | field                              |
//! |--------|-----------|------------------------------------|
//! | 0      | `[u8; 8]` | magic `AENRMASK`                   |
//! | 8      | `u32`     | version, `1`                       |
//! | 12     | `u32`     | rows (`3B`)                        |
//! | 16     | `u32`     | cols (`K_B`)                       |
//! | 20     | `u32`     | bins (`K`)                         |
//! | 24     | `u32`     | conv channels `F`                  |
//! | 28     | `u32`     | kernel width `W` (odd)             |
//! | 32     | `u32`     | hidden units `H`                   |
//! | 36     | `f32[]`   | tensors, row-major, in order below |
//!
//! Tensors: `conv_weight [F][rows][W]`, `conv_bias [F]`,
//! `gru_w_ih [3H][F*cols]`, `gru_w_hh [3H][H]`, `gru_b_ih [3H]`,
//! `gru_b_hh [3H]`, `mag_weight [K][H]`, `mag_bias [K]`,
//! `phase_weight [K][H]`, `phase_bias [K]`. The file ends right after the
//! last tensor.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ComplexMask, FrameContext, MaskEstimator};
use crate::error::{Error, Result};
use crate::features::{ReorientedFeatureBlock, SubbandLayout};

pub const MAGIC: &[u8; 8] = b"AENRMASK";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeuralGeometry {
    pub rows: usize,
    pub cols: usize,
    pub bins: usize,
    pub conv_channels: usize,
    pub kernel: usize,
    pub hidden: usize,
}

impl NeuralGeometry {
    /// Default topology for a given feature layout.
    pub fn for_layout(layout: &SubbandLayout) -> Self {
        NeuralGeometry {
            rows: layout.rows(),
            cols: layout.band_length,
            bins: layout.bins,
            conv_channels: 8,
            kernel: 3,
            hidden: 64,
        }
    }

    fn validate(&self) -> Result<()> {
        let dims = [
            self.rows,
            self.cols,
            self.bins,
            self.conv_channels,
            self.kernel,
            self.hidden,
        ];
        if dims.iter().any(|&d| d == 0 || d > 1 << 20) {
            return Err(Error::format(format!("implausible network geometry {self:?}")));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::format(format!(
                "kernel width must be odd, got {}",
                self.kernel
            )));
        }
        Ok(())
    }

    /// Element counts of the ten tensors, in file order.
    fn tensor_sizes(&self) -> [usize; 10] {
        let (f, h, k) = (self.conv_channels, self.hidden, self.bins);
        [
            f * self.rows * self.kernel,
            f,
            3 * h * f * self.cols,
            3 * h * h,
            3 * h,
            3 * h,
            k * h,
            k,
            k * h,
            k,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_sizes().iter().sum()
    }
}

/// Network parameters, widened to `f64` on load.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralWeights {
    pub geometry: NeuralGeometry,
    params: Vec<f64>,
}

/// Views into the flat parameter vector.
struct Params<'a> {
    conv_w: &'a [f64],
    conv_b: &'a [f64],
    w_ih: &'a [f64],
    w_hh: &'a [f64],
    b_ih: &'a [f64],
    b_hh: &'a [f64],
    mag_w: &'a [f64],
    mag_b: &'a [f64],
    ph_w: &'a [f64],
    ph_b: &'a [f64],
}

fn split<'a>(geometry: &NeuralGeometry, flat: &'a [f64]) -> Params<'a> {
    let mut rest = flat;
    let parts = geometry.tensor_sizes().map(|n| {
        let (head, tail) = rest.split_at(n);
        rest = tail;
        head
    });
    let [conv_w, conv_b, w_ih, w_hh, b_ih, b_hh, mag_w, mag_b, ph_w, ph_b] = parts;
    Params {
        conv_w,
        conv_b,
        w_ih,
        w_hh,
        b_ih,
        b_hh,
        mag_w,
        mag_b,
        ph_w,
        ph_b,
    }
}

/// Offsets of the ten tensors in the flat parameter vector.
fn offsets(geometry: &NeuralGeometry) -> [usize; 10] {
    let mut out = [0; 10];
    let mut acc = 0;
    for (o, n) in out.iter_mut().zip(geometry.tensor_sizes()) {
        *o = acc;
        acc += n;
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec_acc(out: &mut [f64], w: &[f64], x: &[f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Intermediate values of one forward step, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    conv: Vec<f64>,
    reset: Vec<f64>,
    update: Vec<f64>,
    candidate: Vec<f64>,
    hidden_proj: Vec<f64>,
    pub hidden: Vec<f64>,
    pub mask: ComplexMask,
}

impl NeuralWeights {
    pub fn zeros(geometry: NeuralGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(NeuralWeights {
            geometry,
            params: vec![0.0; geometry.parameter_count()],
        })
    }

    /// Uniform `+-1/sqrt(fan_in)` initialisation, values representable in
    /// `f32` so a saved and reloaded network is bit-identical.
    pub fn random(geometry: NeuralGeometry, seed: u64) -> Result<Self> {
        geometry.validate()?;
        let g = geometry;
        let fan_ins = [
            g.rows * g.kernel,
            g.rows * g.kernel,
            g.conv_channels * g.cols,
            g.hidden,
            g.conv_channels * g.cols,
            g.hidden,
            g.hidden,
            g.hidden,
            g.hidden,
            g.hidden,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(g.parameter_count());
        for (n, fan_in) in g.tensor_sizes().into_iter().zip(fan_ins) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..n).map(|_| rng.random_range(-bound..bound) as f32 as f64));
        }
        Ok(NeuralWeights { geometry, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, i: usize) -> f64 {
        self.params[i]
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        self.params[i] = v;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.geometry;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.params.len());
        out.extend_from_slice(MAGIC);
        for v in [
            VERSION,
            g.rows as u32,
            g.cols as u32,
            g.bins as u32,
            g.conv_channels as u32,
            g.kernel as u32,
            g.hidden as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &p in &self.params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(format!(
                "weights file too short for header: {} bytes",
                bytes.len()
            )));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::format("weights file has wrong magic"));
        }
        let word = |i: usize| {
            let off = 8 + 4 * i;
            u32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"))
        };
        if word(0) != VERSION {
            return Err(Error::format(format!(
                "unsupported weights version {}",
                word(0)
            )));
        }
        let geometry = NeuralGeometry {
            rows: word(1) as usize,
            cols: word(2) as usize,
            bins: word(3) as usize,
            conv_channels: word(4) as usize,
            kernel: word(5) as usize,
            hidden: word(6) as usize,
        };
        geometry.validate()?;
        let expected = geometry.parameter_count();
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * expected {
            return Err(Error::format(format!(
                "weights body has {} bytes, geometry needs {}",
                body.len(),
                4 * expected
            )));
        }
        let params = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        Ok(NeuralWeights { geometry, params })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// One recurrent step from `h_prev`.
    pub fn forward(&self, block: &ReorientedFeatureBlock, h_prev: &[f64]) -> Result<ForwardPass> {
        let g = &self.geometry;
        if block.shape() != (g.rows, g.cols) {
            return Err(Error::invalid(format!(
                "feature block is {:?}, network expects ({}, {})",
                block.shape(),
                g.rows,
                g.cols
            )));
        }
        if h_prev.len() != g.hidden {
            return Err(Error::invalid("hidden state has the wrong size"));
        }
        let p = split(g, &self.params);
        let (f_ch, cols, rows, kw, h) = (g.conv_channels, g.cols, g.rows, g.kernel, g.hidden);
        let half = kw / 2;

        let mut conv = vec![0.0; f_ch * cols];
        for f in 0..f_ch {
            for c in 0..cols {
                let mut acc = p.conv_b[f];
                for r in 0..rows {
                    let w = &p.conv_w[(f * rows + r) * kw..(f * rows + r + 1) * kw];
                    let x = block.row(r);
                    for (j, wj) in w.iter().enumerate() {
                        let col = c + j;
                        if col >= half && col - half < cols {
                            acc += wj * x[col - half];
                        }
                    }
                }
                conv[f * cols + c] = acc.tanh();
            }
        }

        let mut gi = p.b_ih.to_vec();
        matvec_acc(&mut gi, p.w_ih, &conv);
        let mut gh = p.b_hh.to_vec();
        matvec_acc(&mut gh, p.w_hh, h_prev);

        let reset: Vec<f64> = (0..h).map(|i| sigmoid(gi[i] + gh[i])).collect();
        let update: Vec<f64> = (0..h).map(|i| sigmoid(gi[h + i] + gh[h + i])).collect();
        let hidden_proj = gh[2 * h..].to_vec();
        let candidate: Vec<f64> = (0..h)
            .map(|i| (gi[2 * h + i] + reset[i] * hidden_proj[i]).tanh())
            .collect();
        let hidden: Vec<f64> = (0..h)
            .map(|i| (1.0 - update[i]) * candidate[i] + update[i] * h_prev[i])
            .collect();

        let mut mag = p.mag_b.to_vec();
        matvec_acc(&mut mag, p.mag_w, &hidden);
        let mut phase = p.ph_b.to_vec();
        matvec_acc(&mut phase, p.ph_w, &hidden);
        let mask = ComplexMask {
            magnitude: mag.into_iter().map(sigmoid).collect(),
            phase: phase.into_iter().map(|v| PI * v.tanh()).collect(),
        };
        Ok(ForwardPass {
            conv,
            reset,
            update,
            candidate,
            hidden_proj,
            hidden,
            mask,
        })
    }

    /// Gradient of `sum_k M_m[k]` for one step from `h_prev` (treated as a
    /// constant), flattened in parameter order.
    pub fn magnitude_sum_gradient(
        &self,
        block: &ReorientedFeatureBlock,
        h_prev: &[f64],
    ) -> Result<Vec<f64>> {
        let fw = self.forward(block, h_prev)?;
        let g = &self.geometry;
        let p = split(g, &self.params);
        let off = offsets(g);
        let (f_ch, cols, rows, kw, h, k) =
            (g.conv_channels, g.cols, g.rows, g.kernel, g.hidden, g.bins);
        let half = kw / 2;
        let mut grad = vec![0.0; self.params.len()];

        // magnitude head
        let d_mag: Vec<f64> = fw.mask.magnitude.iter().map(|m| m * (1.0 - m)).collect();
        let mut d_hidden = vec![0.0; h];
        for kk in 0..k {
            let row = &p.mag_w[kk * h..(kk + 1) * h];
            let gw = &mut grad[off[6] + kk * h..off[6] + (kk + 1) * h];
            for j in 0..h {
                gw[j] = d_mag[kk] * fw.hidden[j];
                d_hidden[j] += d_mag[kk] * row[j];
            }
            grad[off[7] + kk] = d_mag[kk];
        }

        // GRU
        let mut d_gi = vec![0.0; 3 * h];
        let mut d_gh = vec![0.0; 3 * h];
        for i in 0..h {
            let (r, z, n) = (fw.reset[i], fw.update[i], fw.candidate[i]);
            let dn = d_hidden[i] * (1.0 - z);
            let dz = d_hidden[i] * (h_prev[i] - n);
            let dan = dn * (1.0 - n * n);
            let dr = dan * fw.hidden_proj[i];
            let dar = dr * r * (1.0 - r);
            let daz = dz * z * (1.0 - z);
            d_gi[i] = dar;
            d_gh[i] = dar;
            d_gi[h + i] = daz;
            d_gh[h + i] = daz;
            d_gi[2 * h + i] = dan;
            d_gh[2 * h + i] = dan * r;
        }
        let n_in = f_ch * cols;
        let mut d_conv = vec![0.0; n_in];
        for row in 0..3 * h {
            let w = &p.w_ih[row * n_in..(row + 1) * n_in];
            for (j, wj) in w.iter().enumerate() {
                grad[off[2] + row * n_in + j] = d_gi[row] * fw.conv[j];
                d_conv[j] += d_gi[row] * wj;
            }
            for j in 0..h {
                grad[off[3] + row * h + j] = d_gh[row] * h_prev[j];
            }
            grad[off[4] + row] = d_gi[row];
            grad[off[5] + row] = d_gh[row];
        }

        // convolution
        for f in 0..f_ch {
            for c in 0..cols {
                let a = fw.conv[f * cols + c];
                let d_pre = d_conv[f * cols + c] * (1.0 - a * a);
                grad[off[1] + f] += d_pre;
                for r in 0..rows {
                    let x = block.row(r);
                    for j in 0..kw {
                        let col = c + j;
                        if col >= half && col - half < cols {
                            grad[off[0] + (f * rows + r) * kw + j] += d_pre * x[col - half];
                        }
                    }
                }
            }
        }
        Ok(grad)
    }
}

/// Recurrent estimator wrapping [`NeuralWeights`].
#[derive(Debug, Clone)]
pub struct NeuralMaskEstimator {
    weights: NeuralWeights,
    hidden: Vec<f64>,
}

impl NeuralMaskEstimator {
    pub fn new(weights: NeuralWeights) -> Self {
        let hidden = vec![0.0; weights.geometry.hidden];
        NeuralMaskEstimator { weights, hidden }
    }

    /// Loads weights and checks them against the pipeline's feature layout.
    pub fn load(path: &Path, layout: &SubbandLayout) -> Result<Self> {
        let weights = NeuralWeights::load(path)?;
        let g = weights.geometry;
        if g.rows != layout.rows() || g.cols != layout.band_length || g.bins != layout.bins {
            return Err(Error::config(format!(
                "weights {} expect features ({}, {}) over {} bins, pipeline produces ({}, {}) over {}",
                path.display(),
                g.rows,
                g.cols,
                g.bins,
                layout.rows(),
                layout.band_length,
                layout.bins
            )));
        }
        Ok(Self::new(weights))
    }

    pub fn weights(&self) -> &NeuralWeights {
        &self.weights
    }

    pub fn step_block(&mut self, block: &ReorientedFeatureBlock) -> Result<ComplexMask> {
        let fw = self.weights.forward(block, &self.hidden)?;
        self.hidden = fw.hidden;
        Ok(fw.mask)
    }
}

impl MaskEstimator for NeuralMaskEstimator {
    fn step(&mut self, frame: &FrameContext<'_>) -> Result<ComplexMask> {
        self.step_block(frame.features)
    }

    fn reset(&mut self) {
        self.hidden.fill(0.0);
    }

    fn name(&self) -> String {
        "neural".into()
    }
}
