use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Spoof,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
            Label::Unknown => "unknown",
        }
    }

    /// Training target: 1 for bonafide (scores are P(bonafide)).
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Bonafide => Some(1.0),
            Label::Spoof => Some(0.0),
            Label::Unknown => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "spoof" => Ok(Label::Spoof),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::config(format!("unknown label `{other}`"))),
        }
    }
}

/// Mono waveform plus the metadata that travels with it through the
/// pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub utt_id: String,
    pub label: Label,
    pub attack_id: Option<String>,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
            utt_id: String::new(),
            label: Label::Unknown,
            attack_id: None,
        }
    }

    pub fn with_id(mut self, utt_id: impl Into<String>) -> Self {
        self.utt_id = utt_id.into();
        self
    }

    pub fn with_label(mut self, label: Label, attack_id: Option<String>) -> Self {
        self.label = label;
        self.attack_id = attack_id;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        AudioClip {
            samples,
            sample_rate: self.sample_rate,
            utt_id: self.utt_id.clone(),
            label: self.label,
            attack_id: self.attack_id.clone(),
        }
    }
}
