use super::clip::AudioClip;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_DB: f64 = -40.0;
pub const DEFAULT_FRAME_MS: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct TrimOutcome {
    pub clip: AudioClip,
    /// Every frame was below threshold; the clip is returned unchanged.
    pub all_below_threshold: bool,
}

/// RMS level of a frame in dBFS (`-inf` for digital silence).
pub fn frame_rms_db(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return f64::NEG_INFINITY;
    }
    let ms = frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64;
    20.0 * ms.sqrt().log10()
}

/// Drop leading and trailing frames whose RMS is strictly below
/// `threshold_db`; interior frames are kept whatever their level.
pub fn trim_silence(clip: &AudioClip, threshold_db: f64, frame_ms: f64) -> Result<TrimOutcome> {
    if !(threshold_db < 0.0) {
        return Err(Error::config(format!(
            "silence threshold {threshold_db} dBFS must be negative"
        )));
    }
    let frame_len = ((frame_ms / 1000.0) * clip.sample_rate as f64).round() as usize;
    if frame_len == 0 {
        return Err(Error::config(format!("frame of {frame_ms} ms is empty")));
    }
    let loud: Vec<bool> = clip
        .samples
        .chunks(frame_len)
        .map(|f| frame_rms_db(f) >= threshold_db)
        .collect();
    let (Some(first), Some(last)) = (
        loud.iter().position(|&l| l),
        loud.iter().rposition(|&l| l),
    ) else {
        return Ok(TrimOutcome {
            clip: clip.clone(),
            all_below_threshold: true,
        });
    };
    let start = first * frame_len;
    let end = ((last + 1) * frame_len).min(clip.len());
    Ok(TrimOutcome {
        clip: clip.with_samples(clip.samples[start..end].to_vec()),
        all_below_threshold: false,
    })
}
