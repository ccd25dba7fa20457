//! Mono WAV input/output. Reads 16-bit PCM or 32-bit float, writes 32-bit
//! float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

pub fn read_wav(path: &Path) -> Result<WavAudio> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::config(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::config(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        (fmt, bits) => {
            return Err(Error::config(format!(
                "{}: unsupported sample format {fmt:?} with {bits} bits (need 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    };
    Ok(WavAudio {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Reads a file and insists on `sample_rate`.
pub fn read_wav_at(path: &Path, sample_rate: u32) -> Result<Vec<f64>> {
    let audio = read_wav(path)?;
    if audio.sample_rate != sample_rate {
        return Err(Error::config(format!(
            "{}: sample rate {} Hz, expected {sample_rate} Hz",
            path.display(),
            audio.sample_rate
        )));
    }
    Ok(audio.samples)
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}
