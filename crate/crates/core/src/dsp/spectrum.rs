//! FFT measurements: band energy, spectral centroid, tone level.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Power spectrum `|X[k]|^2` for bins `0..=n/2` of a Hann-windowed frame.
pub fn power_spectrum(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = if n > 1 {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
            } else {
                1.0
            };
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn bin_hz(n: usize, sample_rate: u32) -> f64 {
    sample_rate as f64 / n as f64
}

/// Total power in `[lo_hz, hi_hz)`.
pub fn band_energy(samples: &[f64], sample_rate: u32, lo_hz: f64, hi_hz: f64) -> f64 {
    let p = power_spectrum(samples);
    let df = bin_hz(samples.len(), sample_rate);
    p.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * df;
            f >= lo_hz && f < hi_hz
        })
        .map(|(_, v)| v)
        .sum()
}

/// Power in `bands` equal-width bands from 0 Hz to Nyquist.
pub fn band_energies(samples: &[f64], _sample_rate: u32, bands: usize) -> Vec<f64> {
    let p = power_spectrum(samples);
    let mut out = vec![0.0; bands];
    let last = p.len().saturating_sub(1).max(1);
    for (k, v) in p.iter().enumerate() {
        let b = (k * bands / (last + 1)).min(bands - 1);
        out[b] += v;
    }
    out
}

/// Power-weighted mean frequency in Hz.
pub fn spectral_centroid(samples: &[f64], sample_rate: u32) -> f64 {
    let p = power_spectrum(samples);
    let df = bin_hz(samples.len(), sample_rate);
    let total: f64 = p.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    p.iter()
        .enumerate()
        .map(|(k, v)| k as f64 * df * v)
        .sum::<f64>()
        / total
}

/// Energy within `±width_hz` of a probe tone.
pub fn tone_energy(samples: &[f64], sample_rate: u32, freq_hz: f64, width_hz: f64) -> f64 {
    band_energy(samples, sample_rate, freq_hz - width_hz, freq_hz + width_hz)
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
            .collect()
    }

    #[test]
    fn tone_energy_concentrates_at_frequency() {
        let x = tone(1000.0, 16000);
        let near = tone_energy(&x, 16000, 1000.0, 20.0);
        let total: f64 = power_spectrum(&x).iter().sum();
        assert!(near / total > 0.999);
    }

    #[test]
    fn centroid_of_tone() {
        let x = tone(2500.0, 8000);
        assert!((spectral_centroid(&x, 16000) - 2500.0).abs() < 5.0);
    }

    #[test]
    fn band_energies_partition_total() {
        let x = tone(3100.0, 4096);
        let bands = band_energies(&x, 16000, 8);
        let total: f64 = power_spectrum(&x).iter().sum();
        assert!((bands.iter().sum::<f64>() - total).abs() < 1e-9 * total);
        let loudest = bands
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(loudest, 3);
    }
}
