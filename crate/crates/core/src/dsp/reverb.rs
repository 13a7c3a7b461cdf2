use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::clip::AudioClip;
use crate::error::{Error, Result};

pub const DEFAULT_DECAY_SECONDS: f64 = 0.3;
/// Level of the diffuse tail relative to the direct path.
const TAIL_GAIN: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub enum Impulse {
    /// Measured or hand-made response.
    Waveform(Vec<f64>),
    /// Unit direct path followed by Gaussian noise decaying by 60 dB over
    /// `decay_seconds`.
    Synthetic { decay_seconds: f64 },
}

pub fn synthetic_impulse(decay_seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    if !(decay_seconds > 0.0) {
        return Err(Error::config(format!(
            "reverb decay {decay_seconds} s must be positive"
        )));
    }
    let len = (decay_seconds * sample_rate as f64).ceil().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 60 dB amplitude decay: exp(-ln(1000) * t / T60).
    let rate = 1000f64.ln() / len as f64;
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let g: f64 = StandardNormal.sample(&mut rng);
            TAIL_GAIN * g * (-rate * n as f64).exp()
        })
        .collect();
    h[0] = 1.0;
    Ok(h)
}

/// Full linear convolution via FFT (`a.len() + b.len() - 1` samples).
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Convolve with an impulse response, keep the input length and rescale so
/// the output peak equals the input peak.
pub fn reverberate(clip: &AudioClip, impulse: &Impulse, seed: u64) -> Result<AudioClip> {
    let h = match impulse {
        Impulse::Waveform(h) => {
            if h.is_empty() {
                return Err(Error::config("reverb impulse response is empty"));
            }
            h.clone()
        }
        Impulse::Synthetic { decay_seconds } => {
            synthetic_impulse(*decay_seconds, clip.sample_rate, seed)?
        }
    };
    let mut y = fft_convolve(&clip.samples, &h);
    y.truncate(clip.len());
    let peak_in = clip.peak();
    let peak_out = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak_out > 0.0 {
        let g = peak_in / peak_out;
        y.iter_mut().for_each(|v| *v *= g);
    }
    Ok(clip.with_samples(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919 % 1013) as f64 / 1013.0 - 0.5) * (1.0 + (i as f64 * 0.01).sin())).collect()
    }

    fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let a = signal(300);
        let b = signal(57);
        for (x, y) in fft_convolve(&a, &b).iter().zip(direct(&a, &b)) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_delta_is_identity() {
        let c = AudioClip::new(signal(2000), 16000);
        let y = reverberate(&c, &Impulse::Waveform(vec![1.0]), 0).unwrap();
        for (a, b) in y.samples.iter().zip(&c.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delayed_delta_shifts_and_renormalizes() {
        let c = AudioClip::new(signal(1500), 16000);
        let mut h = vec![0.0; 101];
        h[100] = 1.0;
        let y = reverberate(&c, &Impulse::Waveform(h.clone()), 0).unwrap();
        let mut expect = direct(&c.samples, &h);
        expect.truncate(1500);
        let pk = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let g = c.peak() / pk;
        assert_eq!(y.len(), 1500);
        for (a, e) in y.samples.iter().zip(&expect) {
            assert!((a - e * g).abs() < 1e-10);
        }
        assert!(y.samples[..100].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn synthetic_response_is_seeded() {
        let c = AudioClip::new(signal(4000), 16000);
        let imp = Impulse::Synthetic { decay_seconds: 0.05 };
        let a = reverberate(&c, &imp, 42).unwrap();
        let b = reverberate(&c, &imp, 42).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.samples), bits(&b.samples));
        let other = reverberate(&c, &imp, 43).unwrap();
        assert_ne!(bits(&a.samples), bits(&other.samples));
    }

    #[test]
    fn empty_impulse_rejected() {
        let c = AudioClip::new(signal(10), 16000);
        assert!(matches!(
            reverberate(&c, &Impulse::Waveform(vec![]), 0),
            Err(Error::Config(_))
        ));
    }
}
