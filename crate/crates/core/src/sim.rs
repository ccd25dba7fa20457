//! Scenario simulation: synthetic sources, echo paths and SER/SNR-controlled
//! mixing with aligned ground truth for every signal component.
//!
//! Every scenario satisfies `mic = near + echo + noise` sample by sample.
//! Levels are set on active-segment power: 20 ms frames whose mean square
//! is within 40 dB of the loudest frame.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wav::{read_wav_at, write_wav};

pub const SAMPLE_RATE: u32 = 16_000;
/// Longest bulk echo delay the simulator accepts.
pub const MAX_DELAY_S: f64 = 1.5;
const ACTIVE_FRAME_S: f64 = 0.02;
const ACTIVE_THRESHOLD_DB: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Near-end single talk.
    #[serde(rename = "NST")]
    NearEndSingleTalk,
    /// Far-end single talk.
    #[serde(rename = "FST")]
    FarEndSingleTalk,
    /// Double talk.
    #[serde(rename = "DT")]
    DoubleTalk,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::NearEndSingleTalk => "NST",
            ScenarioKind::FarEndSingleTalk => "FST",
            ScenarioKind::DoubleTalk => "DT",
        })
    }
}

/// Synthetic or file-backed signal source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SourceKind {
    /// Gaussian white noise.
    White,
    /// -3 dB/octave noise above 20 Hz.
    Pink,
    /// Stationary noise with a -6 dB/octave PSD tilt above 200 Hz.
    SpeechShaped,
    /// Speech-shaped noise plus a voiced harmonic part, gated into talk
    /// spurts with syllabic modulation and pauses.
    Speech,
    /// Five fixed sinusoids between 200 Hz and 4 kHz.
    Tonal,
    Silence,
    /// 16 kHz mono WAV file.
    Wav(String),
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "white" => SourceKind::White,
            "pink" => SourceKind::Pink,
            "speech-shaped" => SourceKind::SpeechShaped,
            "speech" => SourceKind::Speech,
            "tonal" => SourceKind::Tonal,
            "silence" => SourceKind::Silence,
            _ => match s.strip_prefix("wav:") {
                Some(path) if !path.is_empty() => SourceKind::Wav(path.to_string()),
                _ => {
                    return Err(Error::config(format!(
                        "unknown source '{s}' (white, pink, speech-shaped, speech, tonal, silence, wav:<path>)"
                    )))
                }
            },
        })
    }
}

impl TryFrom<String> for SourceKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SourceKind> for String {
    fn from(s: SourceKind) -> String {
        match s {
            SourceKind::White => "white".into(),
            SourceKind::Pink => "pink".into(),
            SourceKind::SpeechShaped => "speech-shaped".into(),
            SourceKind::Speech => "speech".into(),
            SourceKind::Tonal => "tonal".into(),
            SourceKind::Silence => "silence".into(),
            SourceKind::Wav(p) => format!("wav:{p}"),
        }
    }
}

/// Exponentially decaying random FIR echo path plus bulk delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoPathSpec {
    pub taps: usize,
    /// Time for the tap envelope to decay by 60 dB.
    pub rt60_ms: f64,
    pub delay_samples: usize,
    /// Seed offset for the taps, relative to the scenario seed.
    pub seed: u64,
}

impl Default for EchoPathSpec {
    fn default() -> Self {
        EchoPathSpec {
            taps: 256,
            rt60_ms: 50.0,
            delay_samples: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoPath {
    pub taps: Vec<f64>,
    pub delay: usize,
}

impl EchoPath {
    pub fn new(taps: Vec<f64>, delay: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("echo path needs at least one tap"));
        }
        Ok(EchoPath { taps, delay })
    }

    /// Gaussian taps under an exponential envelope, normalised to unit
    /// energy.
    pub fn decaying(taps: usize, rt60_ms: f64, delay: usize, seed: u64) -> Result<Self> {
        if taps == 0 || rt60_ms <= 0.0 {
            return Err(Error::invalid(format!(
                "echo path needs taps > 0 and rt60 > 0, got {taps} taps, {rt60_ms} ms"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let decay = 3.0 * 10f64.ln() / (rt60_ms * 1e-3 * SAMPLE_RATE as f64);
        let mut h: Vec<f64> = (0..taps)
            .map(|n| normal.sample(&mut rng) * (-decay * n as f64).exp())
            .collect();
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        h.iter_mut().for_each(|v| *v /= norm);
        Self::new(h, delay)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub ser_db: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub echo_path: EchoPathSpec,
    /// Hard-clip level applied to the far-end before the echo path.
    #[serde(default)]
    pub clip_level: Option<f64>,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Active-segment level of the reference component (near-end, or echo
    /// for far-end single talk), dBFS.
    #[serde(default = "default_level")]
    pub level_db: f64,
    #[serde(default = "default_near")]
    pub near: SourceKind,
    #[serde(default = "default_noise")]
    pub noise: SourceKind,
    #[serde(default = "default_farend")]
    pub farend: SourceKind,
}

fn default_snr() -> f64 {
    30.0
}
fn default_duration() -> f64 {
    10.0
}
fn default_level() -> f64 {
    -25.0
}
fn default_near() -> SourceKind {
    SourceKind::Speech
}
fn default_noise() -> SourceKind {
    SourceKind::Pink
}
fn default_farend() -> SourceKind {
    SourceKind::Speech
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, ser_db: f64, snr_db: f64, duration_s: f64, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            ser_db,
            snr_db,
            echo_path: EchoPathSpec::default(),
            clip_level: None,
            duration_s,
            seed,
            level_db: default_level(),
            near: default_near(),
            noise: default_noise(),
            farend: default_farend(),
        }
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * SAMPLE_RATE as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !self.ser_db.is_finite() || !self.snr_db.is_finite() || !self.level_db.is_finite() {
            return Err(Error::config("ser_db, snr_db and level_db must be finite"));
        }
        if self.echo_path.taps == 0 || !(self.echo_path.rt60_ms > 0.0) {
            return Err(Error::config("echo_path needs taps > 0 and rt60_ms > 0"));
        }
        if self.echo_path.delay_samples as f64 > MAX_DELAY_S * SAMPLE_RATE as f64 {
            return Err(Error::config(format!(
                "echo delay of {} samples exceeds the {MAX_DELAY_S} s cap",
                self.echo_path.delay_samples
            )));
        }
        if let Some(c) = self.clip_level {
            if !(c > 0.0) {
                return Err(Error::config("clip_level must be positive"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn echo_path(&self) -> Result<EchoPath> {
        EchoPath::decaying(
            self.echo_path.taps,
            self.echo_path.rt60_ms,
            self.echo_path.delay_samples,
            derive_seed(self.seed, 100 + self.echo_path.seed),
        )
    }
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Aligned components of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub mic: Vec<f64>,
    pub near: Vec<f64>,
    pub echo: Vec<f64>,
    pub noise: Vec<f64>,
    pub farend: Vec<f64>,
    pub sample_rate: u32,
}

/// Mean square over active 20 ms frames, `None` for an all-zero signal.
pub fn active_power(signal: &[f64]) -> Option<f64> {
    let frame = (ACTIVE_FRAME_S * SAMPLE_RATE as f64) as usize;
    let frames: Vec<(f64, usize)> = signal
        .chunks(frame)
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>(), c.len()))
        .collect();
    let peak = frames
        .iter()
        .map(|(e, n)| e / *n as f64)
        .fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    let threshold = peak * 10f64.powf(ACTIVE_THRESHOLD_DB / 10.0);
    let (energy, count) = frames
        .iter()
        .filter(|(e, n)| e / *n as f64 >= threshold)
        .fold((0.0, 0usize), |(e, c), (fe, n)| (e + fe, c + n));
    Some(energy / count as f64)
}

fn db_ratio(a: &[f64], b: &[f64]) -> Option<f64> {
    Some(10.0 * (active_power(a)? / active_power(b)?).log10())
}

impl ScenarioTruth {
    pub fn len(&self) -> usize {
        self.mic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mic.is_empty()
    }

    /// Measured signal-to-echo ratio, `None` when either part is silent.
    pub fn measured_ser_db(&self) -> Option<f64> {
        db_ratio(&self.near, &self.echo)
    }

    /// Measured SNR against the near-end, or against the echo when the
    /// near-end is silent.
    pub fn measured_snr_db(&self) -> Option<f64> {
        db_ratio(&self.near, &self.noise).or_else(|| db_ratio(&self.echo, &self.noise))
    }

    const FILES: [&'static str; 5] = ["mic", "near", "echo", "noise", "farend"];

    fn streams(&self) -> [&Vec<f64>; 5] {
        [&self.mic, &self.near, &self.echo, &self.noise, &self.farend]
    }

    /// Writes the five component WAVs and `manifest.toml` into `dir`.
    pub fn write_dir(&self, dir: &Path, spec: &ScenarioSpec) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, data) in Self::FILES.iter().zip(self.streams()) {
            write_wav(&dir.join(format!("{name}.wav")), data, self.sample_rate)?;
        }
        let manifest = Manifest {
            spec: spec.clone(),
            samples: self.len(),
            sample_rate: self.sample_rate,
            measured_ser_db: self.measured_ser_db(),
            measured_snr_db: self.measured_snr_db(),
        };
        let text = toml::to_string_pretty(&manifest)
            .map_err(|e| Error::format(format!("manifest: {e}")))?;
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }

    /// Reads a directory written by [`ScenarioTruth::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<(ScenarioSpec, ScenarioTruth)> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: Manifest = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", dir.join(MANIFEST).display())))?;
        let mut streams = Vec::with_capacity(5);
        for name in Self::FILES {
            let data = read_wav_at(&dir.join(format!("{name}.wav")), manifest.sample_rate)?;
            if data.len() != manifest.samples {
                return Err(Error::format(format!(
                    "{name}.wav has {} samples, manifest says {}",
                    data.len(),
                    manifest.samples
                )));
            }
            streams.push(data);
        }
        let mut it = streams.into_iter();
        let mut next = || it.next().expect("five streams");
        Ok((
            manifest.spec,
            ScenarioTruth {
                mic: next(),
                near: next(),
                echo: next(),
                noise: next(),
                farend: next(),
                sample_rate: manifest.sample_rate,
            },
        ))
    }
}

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    samples: usize,
    sample_rate: u32,
    measured_ser_db: Option<f64>,
    measured_snr_db: Option<f64>,
    spec: ScenarioSpec,
}

/// Direct-form convolution with bulk delay, truncated to the input length.
/// Long paths go through an FFT.
pub fn render_echo(farend: &[f64], path: &EchoPath, clip_level: Option<f64>) -> Vec<f64> {
    let n = farend.len();
    let drive: Vec<f64> = match clip_level {
        Some(c) => farend.iter().map(|v| v.clamp(-c, c)).collect(),
        None => farend.to_vec(),
    };
    let mut out = vec![0.0; n];
    if path.delay >= n {
        return out;
    }
    let span = n - path.delay;
    let conv = if path.taps.len() <= 32 {
        let mut y = vec![0.0; span];
        for (i, yi) in y.iter_mut().enumerate() {
            for (j, h) in path.taps.iter().enumerate().take(i + 1) {
                *yi += h * drive[i - j];
            }
        }
        y
    } else {
        fft_convolve(&drive[..span], &path.taps, span)
    };
    out[path.delay..].copy_from_slice(&conv);
    out
}

/// First `len` samples of the linear convolution `a * b`.
fn fft_convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let size = (a.len() + b.len()).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let spectrum = |x: &[f64]| {
        let mut buf = vec![0.0; size];
        buf[..x.len()].copy_from_slice(x);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("plan sized buffers");
        out
    };
    let sa = spectrum(a);
    let sb = spectrum(b);
    let mut prod: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
    prod[0].im = 0.0;
    if let Some(last) = prod.last_mut() {
        last.im = 0.0;
    }
    let mut time = inv.make_output_vec();
    inv.process(&mut prod, &mut time).expect("plan sized buffers");
    time.truncate(len);
    time.iter_mut().for_each(|v| *v /= size as f64);
    time
}

/// Gaussian noise shaped by an amplitude response `gain(f_hz)`.
fn shaped_noise(seed: u64, n: usize, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let white = white(seed, n);
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = white;
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut buf, &mut spec).expect("plan sized buffers");
    for (k, s) in spec.iter_mut().enumerate() {
        *s *= gain(k as f64 * SAMPLE_RATE as f64 / n as f64);
    }
    spec[0] = Complex64::new(0.0, 0.0);
    if n % 2 == 0 {
        if let Some(last) = spec.last_mut() {
            last.im = 0.0;
        }
    }
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("plan sized buffers");
    normalize_rms(out)
}

fn normalize_rms(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

pub fn white(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

pub fn pink(seed: u64, n: usize) -> Vec<f64> {
    shaped_noise(derive_seed(seed, 2), n, |f| 1.0 / (f.max(20.0) / 20.0).sqrt())
}

/// Corner below which the speech-shaped spectrum is flat.
pub const SPEECH_SHAPED_CORNER_HZ: f64 = 200.0;

pub fn speech_shaped(seed: u64, n: usize) -> Vec<f64> {
    shaped_noise(derive_seed(seed, 3), n, |f| {
        SPEECH_SHAPED_CORNER_HZ / f.max(SPEECH_SHAPED_CORNER_HZ)
    })
}

pub fn tonal(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let partials: Vec<(f64, f64)> = (0..5)
        .map(|_| (rng.random_range(200.0..4000.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            partials
                .iter()
                .map(|(f, p)| (2.0 * PI * f * t + p).sin())
                .sum::<f64>()
        })
        .collect();
    normalize_rms(x)
}

/// Talk spurts of 0.8-2.5 s separated by 0.2-0.8 s pauses, each spurt
/// modulated at a syllabic rate of 3-6 Hz, over a mix of speech-shaped noise
/// and a harmonic complex with a slowly varying 100-220 Hz fundamental.
pub fn speech(seed: u64, n: usize) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 5));
    let mut envelope = vec![0.0; n];
    let mut pos = (rng.random_range(0.05..0.3) * sr) as usize;
    while pos < n {
        let talk = (rng.random_range(0.8..2.5) * sr) as usize;
        let rate = rng.random_range(3.0..6.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        for i in 0..talk.min(n - pos) {
            let t = i as f64 / sr;
            let syllable = 0.5 - 0.5 * (2.0 * PI * rate * t + phase).cos();
            // 20 ms ramps at spurt edges
            let ramp = (i.min(talk - i) as f64 / (0.02 * sr)).min(1.0);
            envelope[pos + i] = syllable * ramp;
        }
        pos += talk + (rng.random_range(0.2..0.8) * sr) as usize;
    }

    let noise = speech_shaped(derive_seed(seed, 6), n);
    let f0_base = rng.random_range(100.0..220.0);
    let vibrato = rng.random_range(0.2..0.6);
    let mut phase = 0.0;
    let mut voiced = vec![0.0; n];
    for (i, v) in voiced.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let f0 = f0_base * (1.0 + 0.1 * (2.0 * PI * vibrato * t).sin());
        phase += 2.0 * PI * f0 / sr;
        let harmonics = (3500.0 / f0) as usize;
        *v = (1..=harmonics)
            .map(|h| (h as f64 * phase).sin() / h as f64)
            .sum::<f64>();
    }
    let voiced = normalize_rms(voiced);
    let x = (0..n)
        .map(|i| envelope[i] * (0.6 * noise[i] + 0.8 * voiced[i]))
        .collect();
    normalize_rms(x)
}

/// Deterministic source of `n` samples.
pub fn source(kind: &SourceKind, seed: u64, n: usize) -> Result<Vec<f64>> {
    Ok(match kind {
        SourceKind::White => white(seed, n),
        SourceKind::Pink => pink(seed, n),
        SourceKind::SpeechShaped => speech_shaped(seed, n),
        SourceKind::Speech => speech(seed, n),
        SourceKind::Tonal => tonal(seed, n),
        SourceKind::Silence => vec![0.0; n],
        SourceKind::Wav(path) => read_wav_at(Path::new(path), SAMPLE_RATE)?,
    })
}

/// The three sources a scenario spec names, seeded from the spec.
pub fn sources(spec: &ScenarioSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = spec.samples();
    Ok((
        source(&spec.near, derive_seed(spec.seed, 10), n)?,
        source(&spec.noise, derive_seed(spec.seed, 11), n)?,
        source(&spec.farend, derive_seed(spec.seed, 12), n)?,
    ))
}

fn scale_to(signal: &[f64], target_power: f64, what: &str) -> Result<Vec<f64>> {
    let p = active_power(signal)
        .ok_or_else(|| Error::invalid(format!("{what} source is silent and cannot be scaled")))?;
    let g = (target_power / p).sqrt();
    Ok(signal.iter().map(|v| v * g).collect())
}

/// Mixes the given sources according to `spec`.
pub fn mix(
    spec: &ScenarioSpec,
    near: &[f64],
    noise: &[f64],
    farend: &[f64],
) -> Result<ScenarioTruth> {
    spec.validate()?;
    let n = spec.samples();
    for (name, s) in [("near-end", near), ("noise", noise), ("far-end", farend)] {
        if s.len() < n {
            return Err(Error::invalid(format!(
                "{name} source has {} samples, scenario needs {n}",
                s.len()
            )));
        }
    }
    let (near, noise, farend) = (&near[..n], &noise[..n], &farend[..n]);
    let level = 10f64.powf(spec.level_db / 10.0);
    let zeros = vec![0.0; n];

    let (s, e, y) = match spec.kind {
        ScenarioKind::NearEndSingleTalk => (scale_to(near, level, "near-end")?, zeros.clone(), zeros),
        ScenarioKind::FarEndSingleTalk | ScenarioKind::DoubleTalk => {
            let y = scale_to(farend, level, "far-end")?;
            let raw = render_echo(&y, &spec.echo_path()?, spec.clip_level);
            if spec.kind == ScenarioKind::FarEndSingleTalk {
                (zeros, scale_to(&raw, level, "echo")?, y)
            } else {
                let e = scale_to(&raw, level / 10f64.powf(spec.ser_db / 10.0), "echo")?;
                (scale_to(near, level, "near-end")?, e, y)
            }
        }
    };
    let v = match noise.iter().any(|&x| x != 0.0) {
        true => scale_to(noise, level / 10f64.powf(spec.snr_db / 10.0), "noise")?,
        false => vec![0.0; n],
    };
    // f32-representable components so written files keep the mix identity
    let round = |x: Vec<f64>| x.into_iter().map(|v| v as f32 as f64).collect::<Vec<_>>();
    let (s, e, v, y) = (round(s), round(e), round(v), round(y));
    let mic = (0..n).map(|i| s[i] + e[i] + v[i]).collect();
    Ok(ScenarioTruth {
        mic,
        near: s,
        echo: e,
        noise: v,
        farend: y,
        sample_rate: SAMPLE_RATE,
    })
}

/// Generates the sources named in `spec` and mixes them.
pub fn simulate(spec: &ScenarioSpec) -> Result<ScenarioTruth> {
    let (near, noise, farend) = sources(spec)?;
    mix(spec, &near, &noise, &farend)
}
