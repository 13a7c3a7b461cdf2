//! Linear-phase windowed-sinc FIR filters (Hamming window).

use std::f64::consts::PI;

use super::clip::AudioClip;
use crate::error::{Error, Result};

/// Odd tap count keeps the filter type-I, so the high-pass has no forced
/// zero at Nyquist.
pub const FIR_TAPS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Lowpass,
    Highpass,
}

fn check_cutoff(cutoff_hz: f64, sample_rate: u32) -> Result<()> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::config(format!(
            "cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
        )));
    }
    Ok(())
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Tap weights of a windowed-sinc filter; the low-pass is normalized to
/// unit DC gain and the high-pass is its spectral inversion.
pub fn design_fir(band: Band, cutoff_hz: f64, sample_rate: u32, taps: usize) -> Result<Vec<f64>> {
    check_cutoff(cutoff_hz, sample_rate)?;
    if taps % 2 == 0 || taps < 3 {
        return Err(Error::config(format!("FIR tap count {taps} must be odd and >= 3")));
    }
    let fc = cutoff_hz / sample_rate as f64;
    let mid = (taps - 1) / 2;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let w = 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos();
            2.0 * fc * sinc(2.0 * fc * (n as f64 - mid as f64)) * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    if band == Band::Highpass {
        h.iter_mut().for_each(|v| *v = -*v);
        h[mid] += 1.0;
    }
    Ok(h)
}

/// Zero-padded convolution, centred on the filter's group delay so the
/// output aligns with and has the length of the input.
pub fn apply_fir(samples: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mid = (taps.len() - 1) / 2;
    (0..n)
        .map(|i| {
            // y[i] = sum_k h[k] * x[i + mid - k]
            let k_lo = (i + mid + 1).saturating_sub(n);
            let k_hi = (i + mid).min(taps.len() - 1);
            let mut acc = 0.0;
            for k in k_lo..=k_hi {
                acc += taps[k] * samples[i + mid - k];
            }
            acc
        })
        .collect()
}

pub fn lowpass_filter(clip: &AudioClip, cutoff_hz: f64) -> Result<AudioClip> {
    let h = design_fir(Band::Lowpass, cutoff_hz, clip.sample_rate, FIR_TAPS)?;
    Ok(clip.with_samples(apply_fir(&clip.samples, &h)))
}

pub fn highpass_filter(clip: &AudioClip, cutoff_hz: f64) -> Result<AudioClip> {
    let h = design_fir(Band::Highpass, cutoff_hz, clip.sample_rate, FIR_TAPS)?;
    Ok(clip.with_samples(apply_fir(&clip.samples, &h)))
}

/// Band-pass as a low-pass/high-pass cascade.
pub fn bandpass_filter(clip: &AudioClip, low_hz: f64, high_hz: f64) -> Result<AudioClip> {
    if low_hz >= high_hz {
        return Err(Error::config(format!(
            "band-pass edges {low_hz} >= {high_hz} Hz"
        )));
    }
    highpass_filter(&lowpass_filter(clip, high_hz)?, low_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_range_enforced() {
        let c = AudioClip::new(vec![0.0; 10], 16000);
        for bad in [0.0, -5.0, 8000.0, 9000.0] {
            assert!(matches!(lowpass_filter(&c, bad), Err(Error::Config(_))));
            assert!(matches!(highpass_filter(&c, bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn linear_phase_symmetry() {
        let h = design_fir(Band::Lowpass, 4000.0, 16000, FIR_TAPS).unwrap();
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-15);
        }
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolution_matches_direct_definition() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = vec![0.1, -0.2, 0.5, 0.3, 0.05];
        let y = apply_fir(&x, &h);
        for i in 0..x.len() {
            let mut e = 0.0;
            for (k, &hk) in h.iter().enumerate() {
                let j = i as isize + 2 - k as isize;
                if j >= 0 && (j as usize) < x.len() {
                    e += hk * x[j as usize];
                }
            }
            assert!((y[i] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn highpass_rejects_dc() {
        let c = AudioClip::new(vec![0.5; 4000], 16000);
        let y = highpass_filter(&c, 300.0).unwrap();
        // Away from the zero-padded edges.
        for &v in &y.samples[200..3800] {
            assert!(v.abs() < 1e-12);
        }
    }
}
