use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use super::clip::AudioClip;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

fn ingestion(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Read a PCM16 or float32 WAV. Multi-channel frames are averaged, integer
/// samples divided by 32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported => unsupported(path, "unsupported WAV encoding"),
        other => ingestion(path, other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_rate == 0 {
        return Err(ingestion(path, "sample rate is zero"));
    }
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(unsupported(path, format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ingestion(path, e.to_string()))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ingestion(path, e.to_string()))?,
        (fmt, bits) => {
            return Err(unsupported(
                path,
                format!("{fmt:?} {bits}-bit; expected PCM16 or float32"),
            ))
        }
    };
    let samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|f| f.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    if samples.is_empty() {
        return Err(ingestion(path, "no samples"));
    }
    let utt_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AudioClip::new(samples, spec.sample_rate).with_id(utt_id))
}

/// Write mono PCM16; values are clipped to the representable range.
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let path = path.as_ref();
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => ingestion(path, other.to_string()),
    };
    let mut w = WavWriter::create(path, spec).map_err(to_io)?;
    for &s in &clip.samples {
        let v = (s * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        w.write_sample(v).map_err(to_io)?;
    }
    w.finalize().map_err(to_io)
}

/// Write mono float32 (used by tests and the codec boundary).
pub fn write_wav_f32(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let path = path.as_ref();
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => ingestion(path, other.to_string()),
    };
    let mut w = WavWriter::create(path, spec).map_err(to_io)?;
    for &s in &clip.samples {
        w.write_sample(s as f32).map_err(to_io)?;
    }
    w.finalize().map_err(to_io)
}
