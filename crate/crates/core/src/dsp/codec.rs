//! Lossy-codec round trip through an external encoder/decoder.
//!
//! The codec itself is not implemented here. Two shell command templates
//! are configured; `{input}`, `{output}` and `{bitrate}` are substituted
//! before running them with `sh -c`.

use std::process::Command;

use super::clip::AudioClip;
use super::wav::{load_wav, write_wav_pcm16};
use crate::error::{Error, Result};

pub const DEFAULT_BITRATE_KBPS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecConfig {
    /// e.g. `lame --quiet -b {bitrate} {input} {output}`
    pub encode: String,
    /// e.g. `lame --quiet --decode {input} {output}`
    pub decode: String,
}

fn render(template: &str, input: &str, output: &str, bitrate: u32) -> String {
    template
        .replace("{input}", input)
        .replace("{output}", output)
        .replace("{bitrate}", &bitrate.to_string())
}

fn run(cmd: &str) -> Result<()> {
    let status = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .status()
        .map_err(|e| Error::CodecUnavailable(format!("`{cmd}`: {e}")))?;
    if !status.success() {
        return Err(Error::CodecUnavailable(format!("`{cmd}` exited with {status}")));
    }
    Ok(())
}

/// Linear-interpolation resampling.
pub fn resample_linear(samples: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = from_rate as f64 / to_rate as f64;
    let out_len = ((samples.len() as f64) / ratio).round().max(1.0) as usize;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = pos.floor() as usize;
            let frac = pos - j as f64;
            let a = samples[j.min(samples.len() - 1)];
            let b = samples[(j + 1).min(samples.len() - 1)];
            a + (b - a) * frac
        })
        .collect()
}

/// Encode then decode the clip; the result is brought back to the input's
/// sample rate and length. Without a configured codec this reports
/// [`Error::CodecUnavailable`].
pub fn codec_compress(clip: &AudioClip, bitrate_kbps: u32, codec: Option<&CodecConfig>) -> Result<AudioClip> {
    let codec = codec.ok_or_else(|| Error::CodecUnavailable("no encoder configured".into()))?;
    let dir = tempfile::tempdir()?;
    let src = dir.path().join("in.wav");
    let enc = dir.path().join("coded.bin");
    let dec = dir.path().join("out.wav");
    write_wav_pcm16(&src, clip)?;
    let p = |p: &std::path::Path| p.to_string_lossy().into_owned();
    run(&render(&codec.encode, &p(&src), &p(&enc), bitrate_kbps))?;
    run(&render(&codec.decode, &p(&enc), &p(&dec), bitrate_kbps))?;
    let decoded = load_wav(&dec)?;
    let mut samples = resample_linear(&decoded.samples, decoded.sample_rate, clip.sample_rate);
    samples.resize(clip.len(), 0.0);
    Ok(clip.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone() -> AudioClip {
        AudioClip::new(
            (0..8000)
                .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn unconfigured_codec_is_reported() {
        assert!(matches!(
            codec_compress(&tone(), 64, None),
            Err(Error::CodecUnavailable(_))
        ));
    }

    #[test]
    fn pass_through_codec_round_trip_keeps_length_and_shape() {
        let codec = CodecConfig {
            encode: "cp {input} {output}".into(),
            decode: "cp {input} {output}".into(),
        };
        let c = tone();
        let out = codec_compress(&c, 64, Some(&codec)).unwrap();
        assert_eq!(out.len(), c.len());
        assert_eq!(out.sample_rate, c.sample_rate);
        assert!(correlation(&out.samples, &c.samples) > 0.9);
    }

    #[test]
    fn failing_command_is_an_error() {
        let codec = CodecConfig {
            encode: "exit 3".into(),
            decode: "true".into(),
        };
        assert!(matches!(
            codec_compress(&tone(), 64, Some(&codec)),
            Err(Error::CodecUnavailable(_))
        ));
    }

    #[test]
    fn resampling_preserves_duration() {
        let x: Vec<f64> = (0..441).map(|i| i as f64).collect();
        let y = resample_linear(&x, 44100, 16000);
        assert_eq!(y.len(), 160);
        assert_eq!(y[0], 0.0);
        assert!((y[10] - 27.5625).abs() < 1e-9);
    }
}
