use std::cmp::Ordering;

use super::scores::ScoreSet;
use crate::error::Result;

/// One point of the threshold sweep. A trial is accepted when its score is
/// `>= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    /// Bonafide rejected (miss) rate.
    pub frr: f64,
    /// Spoof accepted (false-alarm) rate.
    pub far: f64,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Rates at every distinct score and at `+inf` (reject everything), in
/// increasing threshold order. Tied scores share one point.
pub fn threshold_sweep(bonafide: &[f64], spoof: &[f64]) -> Vec<SweepPoint> {
    let b = sorted(bonafide);
    let s = sorted(spoof);
    let mut thresholds: Vec<f64> = b.iter().chain(&s).copied().collect();
    thresholds.sort_by(|a, c| a.partial_cmp(c).unwrap_or(Ordering::Equal));
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let (nb, ns) = (b.len() as f64, s.len() as f64);
    let (mut ib, mut is) = (0usize, 0usize);
    thresholds
        .into_iter()
        .map(|t| {
            while ib < b.len() && b[ib] < t {
                ib += 1;
            }
            while is < s.len() && s[is] < t {
                is += 1;
            }
            SweepPoint {
                threshold: t,
                frr: ib as f64 / nb,
                far: (s.len() - is) as f64 / ns,
            }
        })
        .collect()
}

/// Equal error rate and the threshold where FRR meets FAR, linearly
/// interpolated between adjacent sweep points.
pub fn compute_eer(scores: &ScoreSet) -> Result<(f64, f64)> {
    let (b, s) = scores.require_both_classes("EER")?;
    Ok(eer_from_sweep(&threshold_sweep(&b, &s)))
}

pub(crate) fn eer_from_sweep(sweep: &[SweepPoint]) -> (f64, f64) {
    // frr - far goes from -1 at the lowest score to +1 at +inf.
    let i = sweep
        .iter()
        .position(|p| p.frr - p.far >= 0.0)
        .expect("the +inf point has frr - far = 1");
    let hi = sweep[i];
    if i == 0 || hi.frr == hi.far {
        return (hi.frr, hi.threshold);
    }
    let lo = sweep[i - 1];
    let d_lo = lo.frr - lo.far;
    let d_hi = hi.frr - hi.far;
    let a = -d_lo / (d_hi - d_lo);
    let eer = lo.frr + a * (hi.frr - lo.frr);
    let threshold = if hi.threshold.is_finite() {
        lo.threshold + a * (hi.threshold - lo.threshold)
    } else {
        lo.threshold
    };
    (eer, threshold)
}

/// Probability that a random bonafide trial outscores a random spoof
/// trial, ties counting one half (Mann-Whitney U over mid-ranks).
pub fn compute_auc(scores: &ScoreSet) -> Result<f64> {
    let (b, s) = scores.require_both_classes("AUC")?;
    let mut all: Vec<(f64, bool)> = b.iter().map(|&v| (v, true)).chain(s.iter().map(|&v| (v, false))).collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
    // Twice the rank sum keeps mid-ranks integral.
    let mut rank2_sum: u64 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u64;
        rank2_sum += mid2 * all[i..=j].iter().filter(|e| e.1).count() as u64;
        i = j + 1;
    }
    let nb = b.len() as u64;
    let u2 = rank2_sum - nb * (nb + 1);
    Ok(u2 as f64 / (2 * nb * s.len() as u64) as f64)
}

/// LA and PA EERs summed into one comparator. Units pass through: feed
/// percentages to get percentages.
pub fn cumulative_eer(eer_la: f64, eer_pa: f64) -> f64 {
    eer_la + eer_pa
}
