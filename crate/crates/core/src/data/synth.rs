//! Desk-scale corpus: harmonic "voices", spectrally flattened LA-like
//! spoofs and room-coloured PA-like replays.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::clip::{AudioClip, Label, CANONICAL_SAMPLE_RATE};
use crate::dsp::filter::bandpass_filter;
use crate::dsp::reverb::{reverberate, synthetic_impulse, Impulse};
use crate::dsp::spectrum::band_energies;
use crate::dsp::wav::write_wav_pcm16;
use crate::error::{Error, Result};

use super::manifest::{Manifest, TrialEntry};

pub const SYNTH_SECONDS: f64 = 2.0;
pub const LA_ATTACK: &str = "LA01";
pub const PA_ATTACK: &str = "PA01";
pub const PA2_ATTACK: &str = "PA02";
pub const CERTIFICATE_BANDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthClass {
    Bonafide,
    LogicalAccess,
    /// Room response applied `order` times (2 = replay of a replay).
    PhysicalAccess { order: u8 },
}

impl SynthClass {
    fn tag(self) -> &'static str {
        match self {
            SynthClass::Bonafide => "bona",
            SynthClass::LogicalAccess => "la",
            SynthClass::PhysicalAccess { .. } => "pa",
        }
    }

    fn attack(self) -> Option<&'static str> {
        match self {
            SynthClass::Bonafide => None,
            SynthClass::LogicalAccess => Some(LA_ATTACK),
            SynthClass::PhysicalAccess { order: 1 } => Some(PA_ATTACK),
            SynthClass::PhysicalAccess { .. } => Some(PA2_ATTACK),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub seconds: f64,
    pub replay_order: u8,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            seconds: SYNTH_SECONDS,
            replay_order: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest: Manifest,
    pub clips: Vec<AudioClip>,
    pub manifest_path: PathBuf,
}

/// Paul Kellet's economy pink filter over white noise.
fn pink_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = rng.gen_range(-1.0..1.0);
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Harmonic tone with a slow amplitude envelope and vibrato. `flat` keeps
/// every harmonic at equal level up to Nyquist instead of rolling off as
/// 1/h below 4 kHz.
fn harmonic_voice(n: usize, sr: u32, flat: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sr_f = sr as f64;
    let f0: f64 = rng.gen_range(100.0..250.0);
    let ceiling = if flat { sr_f / 2.0 - 200.0 } else { 4000.0 };
    let harmonics = (ceiling / f0).floor() as usize;
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let vib_rate: f64 = rng.gen_range(3.0..6.0);
    let vib_depth: f64 = rng.gen_range(0.005..0.02);
    let env_rate: f64 = rng.gen_range(1.5..4.0);
    let env_phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr_f;
            let f = f0 * (1.0 + vib_depth * (2.0 * PI * vib_rate * t).sin());
            phase += 2.0 * PI * f / sr_f;
            let env = 0.6 + 0.4 * (2.0 * PI * env_rate * t + env_phase).sin();
            let s: f64 = phases
                .iter()
                .enumerate()
                .map(|(h, p)| {
                    let h1 = (h + 1) as f64;
                    let a = if flat { 1.0 } else { 1.0 / h1 };
                    a * (h1 * phase + p).sin()
                })
                .sum();
            env * s
        })
        .collect()
}

/// Pink noise at -25 dB relative to the tone, random overall gain.
fn finish(mut x: Vec<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = pink_noise(x.len(), rng);
    let level = rms(&x) * 10f64.powf(-25.0 / 20.0);
    for (v, n) in x.iter_mut().zip(&noise) {
        *v += level * n;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain: f64 = rng.gen_range(0.3..0.9);
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= gain / peak);
    }
    x
}

fn clip_seed(seed: u64, class: SynthClass, index: usize) -> u64 {
    let c = match class {
        SynthClass::Bonafide => 0u64,
        SynthClass::LogicalAccess => 1,
        SynthClass::PhysicalAccess { order } => 1 + order as u64,
    };
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (c << 56) ^ index as u64
}

/// One synthetic clip; deterministic in its arguments.
pub fn synth_clip(class: SynthClass, seed: u64, index: usize, opts: &SynthOptions) -> Result<AudioClip> {
    let sr = CANONICAL_SAMPLE_RATE;
    let n = (opts.seconds * sr as f64).round() as usize;
    if n == 0 {
        return Err(Error::config("synthetic clips need a positive duration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(clip_seed(seed, class, index));
    let id = format!("syn{seed}_{}_{:04}", class.tag(), index + 1);
    let label = if class == SynthClass::Bonafide { Label::Bonafide } else { Label::Spoof };
    let base = |flat, rng: &mut ChaCha8Rng| {
        let v = harmonic_voice(n, sr, flat, rng);
        AudioClip::new(finish(v, rng), sr)
    };
    let clip = match class {
        SynthClass::Bonafide => base(false, &mut rng),
        SynthClass::LogicalAccess => base(true, &mut rng),
        SynthClass::PhysicalAccess { order } => {
            let mut c = base(false, &mut rng);
            let decay: f64 = rng.gen_range(0.2..0.5);
            let room = synthetic_impulse(decay, sr, rng.gen())?;
            for _ in 0..order.max(1) {
                c = reverberate(&c, &Impulse::Waveform(room.clone()), 0)?;
                c = bandpass_filter(&c, 300.0, 3400.0)?;
            }
            let peak = c.peak();
            let gain: f64 = rng.gen_range(0.3..0.9);
            if peak > 0.0 {
                c.samples.iter_mut().for_each(|v| *v *= gain / peak);
            }
            c
        }
    };
    Ok(clip.with_id(id).with_label(label, class.attack().map(str::to_owned)))
}

/// `n_per_class` clips of each of bonafide, LA-like and PA-like, written as
/// PCM16 under `out_dir/wav` with `out_dir/manifest.txt`.
pub fn generate_synthetic_corpus(n_per_class: usize, seed: u64, out_dir: &Path) -> Result<SynthCorpus> {
    generate_with(n_per_class, seed, out_dir, &SynthOptions::default())
}

pub fn generate_with(n_per_class: usize, seed: u64, out_dir: &Path, opts: &SynthOptions) -> Result<SynthCorpus> {
    if n_per_class == 0 {
        return Err(Error::config("n_per_class must be at least 1"));
    }
    let wav_dir = out_dir.join("wav");
    fs::create_dir_all(&wav_dir)?;
    let classes = [
        SynthClass::Bonafide,
        SynthClass::LogicalAccess,
        SynthClass::PhysicalAccess { order: opts.replay_order },
    ];
    let mut entries = Vec::new();
    let mut clips = Vec::new();
    for class in classes {
        for i in 0..n_per_class {
            let clip = synth_clip(class, seed, i, opts)?;
            let rel = PathBuf::from("wav").join(format!("{}.wav", clip.utt_id));
            write_wav_pcm16(out_dir.join(&rel), &clip)?;
            entries.push(TrialEntry {
                speaker_id: format!("SYN{:02}", i % 10),
                utt_id: clip.utt_id.clone(),
                attack_id: clip.attack_id.clone(),
                key: clip.label,
                path: rel,
            });
            clips.push(clip);
        }
    }
    let manifest = Manifest::new(entries, out_dir);
    let manifest_path = out_dir.join("manifest.txt");
    manifest.write(&manifest_path)?;
    Ok(SynthCorpus {
        manifest,
        clips,
        manifest_path,
    })
}

/// Log band energies, the certificate's feature vector.
pub fn band_features(clip: &AudioClip) -> Vec<f64> {
    band_energies(&clip.samples, clip.sample_rate, CERTIFICATE_BANDS)
        .into_iter()
        .map(|e| (e + 1e-12).ln())
        .collect()
}

fn class_index(clip: &AudioClip) -> usize {
    match clip.attack_id.as_deref() {
        None => 0,
        Some(a) if a.starts_with("LA") => 1,
        Some(_) => 2,
    }
}

/// Training accuracy of a softmax-linear classifier on standardized log
/// band energies, fitted by full-batch gradient descent. Classes are
/// bonafide, LA-like and PA-like.
pub fn separability_certificate(clips: &[AudioClip]) -> f64 {
    if clips.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<Vec<f64>> = clips.iter().map(band_features).collect();
    let ys: Vec<usize> = clips.iter().map(class_index).collect();
    let d = CERTIFICATE_BANDS;
    let n = xs.len() as f64;
    for j in 0..d {
        let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-9);
        xs.iter_mut().for_each(|x| x[j] = (x[j] - mean) / sd);
    }
    let k = 3;
    let mut w = vec![vec![0.0; d + 1]; k];
    let lr = 0.5;
    for _ in 0..500 {
        let mut grad = vec![vec![0.0; d + 1]; k];
        for (x, &y) in xs.iter().zip(&ys) {
            let p = softmax(&logits(&w, x));
            for c in 0..k {
                let err = p[c] - if c == y { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[c][j] += err * x[j];
                }
                grad[c][d] += err;
            }
        }
        for c in 0..k {
            for j in 0..=d {
                w[c][j] -= lr * grad[c][j] / n;
            }
        }
    }
    let hits = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| {
            let z = logits(&w, x);
            (0..k).max_by(|&a, &b| z[a].total_cmp(&z[b])) == Some(y)
        })
        .count();
    hits as f64 / n
}

fn logits(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    w.iter()
        .map(|row| row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[d])
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
