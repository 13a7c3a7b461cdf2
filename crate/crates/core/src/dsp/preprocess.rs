use super::clip::AudioClip;

pub const TARGET_SECONDS: f64 = 4.0;
pub const ZSCORE_EPSILON: f64 = 1e-8;

pub fn target_len(sample_rate: u32, seconds: f64) -> usize {
    (seconds * sample_rate as f64).round() as usize
}

/// Fix the clip length to `round(seconds * sample_rate)` samples: longer
/// clips keep their head, shorter ones are tiled with themselves and cut.
pub fn standardize_length(clip: &AudioClip, seconds: f64) -> AudioClip {
    standardize_samples(clip, target_len(clip.sample_rate, seconds))
}

/// Same as [`standardize_length`] with the target given in samples.
pub fn standardize_samples(clip: &AudioClip, target: usize) -> AudioClip {
    let src = &clip.samples;
    if src.len() >= target || src.is_empty() {
        return clip.with_samples(src[..target.min(src.len())].to_vec());
    }
    let samples: Vec<f64> = src.iter().copied().cycle().take(target).collect();
    clip.with_samples(samples)
}

/// Per-clip z-score with population standard deviation. A constant clip
/// maps to all zeros.
pub fn zscore_normalize(clip: &AudioClip, epsilon: f64) -> AudioClip {
    let x = &clip.samples;
    if x.is_empty() {
        return clip.clone();
    }
    if x.iter().all(|&v| v == x[0]) {
        return clip.with_samples(vec![0.0; x.len()]);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt().max(epsilon);
    clip.with_samples(x.iter().map(|&v| (v - mean) / sd).collect())
}

/// Standardize to four seconds, then z-score: the network's input contract.
pub fn preprocess(clip: &AudioClip) -> AudioClip {
    zscore_normalize(&standardize_length(clip, TARGET_SECONDS), ZSCORE_EPSILON)
}

/// [`preprocess`] for a network whose input is `samples` long.
pub fn preprocess_to(clip: &AudioClip, samples: usize) -> AudioClip {
    zscore_normalize(&standardize_samples(clip, samples), ZSCORE_EPSILON)
}
