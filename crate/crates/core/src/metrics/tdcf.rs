use std::fs;
use std::path::Path;

use super::rates::threshold_sweep;
use super::scores::ScoreSet;
use crate::error::{Error, Result};

/// Priors, costs and the fixed ASV operating point of the tandem cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TDcfParams {
    pub p_tar: f64,
    pub p_non: f64,
    pub p_spoof: f64,
    pub c_miss_asv: f64,
    pub c_fa_asv: f64,
    pub c_miss_cm: f64,
    pub c_fa_cm: f64,
    pub p_miss_asv: f64,
    pub p_fa_asv: f64,
    /// ASV miss rate on spoofed trials.
    pub p_miss_spoof_asv: f64,
}

impl Default for TDcfParams {
    fn default() -> Self {
        TDcfParams {
            p_tar: 0.9405,
            p_non: 0.0095,
            p_spoof: 0.05,
            c_miss_asv: 1.0,
            c_fa_asv: 10.0,
            c_miss_cm: 1.0,
            c_fa_cm: 10.0,
            p_miss_asv: 0.01,
            p_fa_asv: 0.01,
            p_miss_spoof_asv: 0.10,
        }
    }
}

const KEYS: [&str; 10] = [
    "p_tar",
    "p_non",
    "p_spoof",
    "c_miss_asv",
    "c_fa_asv",
    "c_miss_cm",
    "c_fa_cm",
    "p_miss_asv",
    "p_fa_asv",
    "p_miss_spoof_asv",
];

impl TDcfParams {
    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "p_tar" => &mut self.p_tar,
            "p_non" => &mut self.p_non,
            "p_spoof" => &mut self.p_spoof,
            "c_miss_asv" => &mut self.c_miss_asv,
            "c_fa_asv" => &mut self.c_fa_asv,
            "c_miss_cm" => &mut self.c_miss_cm,
            "c_fa_cm" => &mut self.c_fa_cm,
            "p_miss_asv" => &mut self.p_miss_asv,
            "p_fa_asv" => &mut self.p_fa_asv,
            "p_miss_spoof_asv" => &mut self.p_miss_spoof_asv,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let priors = self.p_tar + self.p_non + self.p_spoof;
        if (priors - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("t-DCF priors sum to {priors}, not 1")));
        }
        for (name, v) in [
            ("p_tar", self.p_tar),
            ("p_non", self.p_non),
            ("p_spoof", self.p_spoof),
            ("p_miss_asv", self.p_miss_asv),
            ("p_fa_asv", self.p_fa_asv),
            ("p_miss_spoof_asv", self.p_miss_spoof_asv),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("t-DCF {name} = {v} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("c_miss_asv", self.c_miss_asv),
            ("c_fa_asv", self.c_fa_asv),
            ("c_miss_cm", self.c_miss_cm),
            ("c_fa_cm", self.c_fa_cm),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("t-DCF cost {name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// (C1, C2): weights of the CM miss and false-alarm rates.
    pub fn coefficients(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let c1 = self.p_tar * (self.c_miss_cm - self.c_miss_asv * self.p_miss_asv)
            - self.p_non * self.c_fa_asv * self.p_fa_asv;
        let c2 = self.c_fa_cm * self.p_spoof * (1.0 - self.p_miss_spoof_asv);
        if !(c1 > 0.0) || !(c2 > 0.0) {
            return Err(Error::config(format!(
                "degenerate ASV operating point: C1 = {c1}, C2 = {c2}"
            )));
        }
        Ok((c1, c2))
    }

    /// Flat `key = value` text; missing keys keep their defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut p = TDcfParams::default();
        for (line, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: line + 1,
                reason: format!("expected `key = value`, got `{l}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            let slot = p
                .slot(k)
                .ok_or_else(|| Error::config(format!("unknown t-DCF key `{k}` in {}", path.display())))?;
            *slot = v
                .parse()
                .map_err(|_| Error::config(format!("t-DCF key `{k}`: bad number `{v}`")))?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        TDcfParams::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut p = *self;
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", p.slot(k).expect("known key")))
            .collect()
    }
}

/// Normalized tandem cost at one CM operating point.
pub fn normalized_tdcf(p_miss_cm: f64, p_fa_cm: f64, c1: f64, c2: f64) -> f64 {
    (c1 * p_miss_cm + c2 * p_fa_cm) / c1.min(c2)
}

/// Minimum normalized t-DCF over the threshold sweep, with its threshold.
pub fn compute_min_tdcf(scores: &ScoreSet, params: &TDcfParams) -> Result<(f64, f64)> {
    let (c1, c2) = params.coefficients()?;
    let (b, s) = scores.require_both_classes("t-DCF")?;
    let mut best = (f64::INFINITY, f64::NAN);
    for p in threshold_sweep(&b, &s) {
        let v = normalized_tdcf(p.frr, p.far, c1, c2);
        if v < best.0 {
            best = (v, p.threshold);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let (c1, c2) = TDcfParams::default().coefficients().unwrap();
        assert!(c1 > 0.0 && c2 > 0.0);
    }

    #[test]
    fn perfect_cm_costs_nothing() {
        let s = ScoreSet::from_scores(&[0.9, 0.7], &[0.1, 0.3]).unwrap();
        assert_eq!(compute_min_tdcf(&s, &TDcfParams::default()).unwrap().0, 0.0);
    }

    #[test]
    fn degenerate_operating_point_is_config_error() {
        let p = TDcfParams {
            p_miss_spoof_asv: 1.0,
            ..TDcfParams::default()
        };
        assert!(matches!(p.coefficients(), Err(Error::Config(_))));
    }

    #[test]
    fn text_round_trip_and_unknown_key() {
        let p = TDcfParams::default();
        let q = TDcfParams::parse(&p.to_text(), Path::new("t")).unwrap();
        assert_eq!(p, q);
        assert!(TDcfParams::parse("p_bogus = 1", Path::new("t")).is_err());
        assert!(TDcfParams::parse("p_tar = 0.5", Path::new("t")).is_err());
    }
}
