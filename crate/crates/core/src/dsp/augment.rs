use std::fmt;
use std::str::FromStr;

use super::clip::AudioClip;
use super::codec::{codec_compress, CodecConfig, DEFAULT_BITRATE_KBPS};
use super::filter::{highpass_filter, lowpass_filter};
use super::preprocess::{standardize_length, TARGET_SECONDS};
use super::reverb::{reverberate, Impulse, DEFAULT_DECAY_SECONDS};
use super::trim::{trim_silence, DEFAULT_FRAME_MS, DEFAULT_THRESHOLD_DB};
use crate::error::{Error, Result};

pub const DEFAULT_HIGHPASS_HZ: f64 = 300.0;
pub const DEFAULT_LOWPASS_HZ: f64 = 4000.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentKind {
    Mp3 { bitrate_kbps: u32 },
    Highpass { cutoff_hz: f64 },
    Lowpass { cutoff_hz: f64 },
    TrimSilence { threshold_db: f64 },
    Reverb { impulse: Impulse },
}

impl AugmentKind {
    pub fn tag(&self) -> &'static str {
        match self {
            AugmentKind::Mp3 { .. } => "mp3",
            AugmentKind::Highpass { .. } => "highpass",
            AugmentKind::Lowpass { .. } => "lowpass",
            AugmentKind::TrimSilence { .. } => "trim",
            AugmentKind::Reverb { .. } => "reverb",
        }
    }
}

/// One augmentation with its parameters. `seed` is mixed into the per-clip
/// seed so two specs of the same kind draw different randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSpec {
    pub kind: AugmentKind,
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn new(kind: AugmentKind) -> Self {
        AugmentationSpec { kind, seed: 0 }
    }

    /// The five default augmentations.
    pub fn defaults() -> Vec<AugmentationSpec> {
        ["mp3", "highpass", "lowpass", "trim", "reverb"]
            .iter()
            .map(|s| s.parse().expect("default spec"))
            .collect()
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyq = sample_rate as f64 / 2.0;
        match &self.kind {
            AugmentKind::Highpass { cutoff_hz } | AugmentKind::Lowpass { cutoff_hz } => {
                if !(*cutoff_hz > 0.0 && *cutoff_hz < nyq) {
                    return Err(Error::config(format!(
                        "cutoff {cutoff_hz} Hz outside (0, {nyq})"
                    )));
                }
            }
            AugmentKind::TrimSilence { threshold_db } if !(*threshold_db < 0.0) => {
                return Err(Error::config(format!(
                    "silence threshold {threshold_db} dBFS must be negative"
                )));
            }
            AugmentKind::Reverb {
                impulse: Impulse::Waveform(h),
            } if h.is_empty() => return Err(Error::config("empty impulse response")),
            AugmentKind::Reverb {
                impulse: Impulse::Synthetic { decay_seconds },
            } if !(*decay_seconds > 0.0) => {
                return Err(Error::config("reverb decay must be positive"))
            }
            AugmentKind::Mp3 { bitrate_kbps: 0 } => {
                return Err(Error::config("bitrate must be positive"))
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for AugmentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            AugmentKind::Mp3 { bitrate_kbps } => write!(f, "mp3:{bitrate_kbps}"),
            AugmentKind::Highpass { cutoff_hz } => write!(f, "highpass:{cutoff_hz}"),
            AugmentKind::Lowpass { cutoff_hz } => write!(f, "lowpass:{cutoff_hz}"),
            AugmentKind::TrimSilence { threshold_db } => write!(f, "trim:{threshold_db}"),
            AugmentKind::Reverb {
                impulse: Impulse::Synthetic { decay_seconds },
            } => write!(f, "reverb:{decay_seconds}"),
            AugmentKind::Reverb { .. } => write!(f, "reverb:waveform"),
        }
    }
}

/// `kind[:param]`, e.g. `lowpass:4000`, `trim:-40`, `reverb:0.3`, `mp3:64`.
impl FromStr for AugmentationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let num = |default: f64| -> Result<f64> {
            param.map_or(Ok(default), |p| {
                p.parse::<f64>()
                    .map_err(|_| Error::config(format!("bad parameter `{p}` in augmentation `{s}`")))
            })
        };
        let kind = match name {
            "mp3" => AugmentKind::Mp3 {
                bitrate_kbps: num(DEFAULT_BITRATE_KBPS as f64)? as u32,
            },
            "highpass" => AugmentKind::Highpass {
                cutoff_hz: num(DEFAULT_HIGHPASS_HZ)?,
            },
            "lowpass" => AugmentKind::Lowpass {
                cutoff_hz: num(DEFAULT_LOWPASS_HZ)?,
            },
            "trim" | "trim_silence" => AugmentKind::TrimSilence {
                threshold_db: num(DEFAULT_THRESHOLD_DB)?,
            },
            "reverb" => AugmentKind::Reverb {
                impulse: Impulse::Synthetic {
                    decay_seconds: num(DEFAULT_DECAY_SECONDS)?,
                },
            },
            other => return Err(Error::config(format!("unknown augmentation `{other}`"))),
        };
        let spec = AugmentationSpec::new(kind);
        spec.validate(super::clip::CANONICAL_SAMPLE_RATE)?;
        Ok(spec)
    }
}

/// FNV-1a, stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for one (clip, spec) pair; independent of processing order.
pub fn clip_seed(global_seed: u64, utt_id: &str, spec_index: usize, spec_seed: u64) -> u64 {
    let mut key = Vec::with_capacity(utt_id.len() + 24);
    key.extend_from_slice(&global_seed.to_le_bytes());
    key.extend_from_slice(utt_id.as_bytes());
    key.extend_from_slice(&(spec_index as u64).to_le_bytes());
    key.extend_from_slice(&spec_seed.to_le_bytes());
    fnv1a(&key)
}

/// Lineage suffix for augmented copies: `<utt_id>__<index><tag>`.
pub fn augmented_id(utt_id: &str, spec_index: usize, spec: &AugmentationSpec) -> String {
    format!("{utt_id}__{spec_index}{}", spec.kind.tag())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentEvent {
    Applied,
    /// Codec missing: the copy is the unmodified clip.
    CodecSkipped(String),
    /// Trim found no frame above threshold: the copy is the unmodified clip.
    AllSilent,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct AugmentLogRecord {
    pub utt_id: String,
    pub spec: String,
    pub event: AugmentEvent,
}

/// Apply one augmentation. The returned event tells whether the clip was
/// actually transformed.
pub fn augment_clip(
    clip: &AudioClip,
    spec: &AugmentationSpec,
    seed: u64,
    codec: Option<&CodecConfig>,
) -> Result<(AudioClip, AugmentEvent)> {
    spec.validate(clip.sample_rate)?;
    match &spec.kind {
        AugmentKind::Highpass { cutoff_hz } => Ok((highpass_filter(clip, *cutoff_hz)?, AugmentEvent::Applied)),
        AugmentKind::Lowpass { cutoff_hz } => Ok((lowpass_filter(clip, *cutoff_hz)?, AugmentEvent::Applied)),
        AugmentKind::TrimSilence { threshold_db } => {
            let out = trim_silence(clip, *threshold_db, DEFAULT_FRAME_MS)?;
            let ev = if out.all_below_threshold {
                AugmentEvent::AllSilent
            } else {
                AugmentEvent::Applied
            };
            Ok((out.clip, ev))
        }
        AugmentKind::Reverb { impulse } => Ok((reverberate(clip, impulse, seed)?, AugmentEvent::Applied)),
        AugmentKind::Mp3 { bitrate_kbps } => match codec_compress(clip, *bitrate_kbps, codec) {
            Ok(c) => Ok((c, AugmentEvent::Applied)),
            Err(Error::CodecUnavailable(why)) => Ok((clip.clone(), AugmentEvent::CodecSkipped(why))),
            Err(e) => Err(e),
        },
    }
}

#[derive(Debug, Clone, Default)]
pub struct AugmentOutput {
    /// Originals first, then augmented copies grouped by source clip.
    pub clips: Vec<AudioClip>,
    pub log: Vec<AugmentLogRecord>,
    pub codec_skips: usize,
    pub failures: usize,
}

/// Every source clip plus one copy per spec, all standardized to four
/// seconds. Labels and attack ids are inherited; ids gain a lineage suffix.
/// A failing (clip, spec) pair is logged and skipped.
pub fn augment_pipeline(
    clips: &[AudioClip],
    specs: &[AugmentationSpec],
    seed: u64,
    codec: Option<&CodecConfig>,
) -> Result<AugmentOutput> {
    if specs.is_empty() {
        return Err(Error::config("augmentation pipeline needs at least one spec"));
    }
    let mut out = AugmentOutput::default();
    for clip in clips {
        out.clips.push(standardize_length(clip, TARGET_SECONDS));
    }
    for clip in clips {
        for (i, spec) in specs.iter().enumerate() {
            let s = clip_seed(seed, &clip.utt_id, i, spec.seed);
            let id = augmented_id(&clip.utt_id, i, spec);
            let event = match augment_clip(clip, spec, s, codec) {
                Ok((aug, event)) => {
                    let mut aug = standardize_length(&aug, TARGET_SECONDS);
                    aug.utt_id = id;
                    out.clips.push(aug);
                    event
                }
                Err(e) => AugmentEvent::Failed(e.to_string()),
            };
            match &event {
                AugmentEvent::CodecSkipped(_) => out.codec_skips += 1,
                AugmentEvent::Failed(why) => {
                    log::warn!("augmentation {spec} failed on {}: {why}", clip.utt_id);
                    out.failures += 1;
                }
                _ => {}
            }
            out.log.push(AugmentLogRecord {
                utt_id: clip.utt_id.clone(),
                spec: spec.to_string(),
                event,
            });
        }
    }
    Ok(out)
}
