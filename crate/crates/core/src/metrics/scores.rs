use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::dsp::clip::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub utt_id: String,
    pub score: f64,
    pub key: Label,
    pub attack_id: Option<String>,
}

/// Detection scores with ground-truth keys. Higher score means more
/// bonafide.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.utt_id.as_str()) {
                return Err(Error::contract(format!("duplicate utt_id `{}` in score set", e.utt_id)));
            }
            if e.key == Label::Unknown {
                return Err(Error::contract(format!("`{}` has no bonafide/spoof key", e.utt_id)));
            }
            if !e.score.is_finite() {
                return Err(Error::Numeric(format!("non-finite score for `{}`", e.utt_id)));
            }
        }
        Ok(ScoreSet { entries })
    }

    /// Build from two score vectors; ids are generated.
    pub fn from_scores(bonafide: &[f64], spoof: &[f64]) -> Result<Self> {
        let b = bonafide.iter().enumerate().map(|(i, &s)| ScoreEntry {
            utt_id: format!("b{i}"),
            score: s,
            key: Label::Bonafide,
            attack_id: None,
        });
        let sp = spoof.iter().enumerate().map(|(i, &s)| ScoreEntry {
            utt_id: format!("s{i}"),
            score: s,
            key: Label::Spoof,
            attack_id: None,
        });
        ScoreSet::new(b.chain(sp).collect())
    }

    /// Join a score listing with a key listing on utt_id. Scores without a
    /// key are an error; keys without a score are ignored.
    pub fn join(scores: &[(String, f64)], keys: &[(String, Label, Option<String>)]) -> Result<Self> {
        let by_id: HashMap<&str, (Label, &Option<String>)> =
            keys.iter().map(|(u, l, a)| (u.as_str(), (*l, a))).collect();
        let entries = scores
            .iter()
            .map(|(u, s)| {
                let (key, attack) = by_id
                    .get(u.as_str())
                    .ok_or_else(|| Error::contract(format!("no key for scored utterance `{u}`")))?;
                Ok(ScoreEntry {
                    utt_id: u.clone(),
                    score: *s,
                    key: *key,
                    attack_id: (*attack).clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreSet::new(entries)
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bonafide_scores(&self) -> Vec<f64> {
        self.scores_for(Label::Bonafide)
    }

    pub fn spoof_scores(&self) -> Vec<f64> {
        self.scores_for(Label::Spoof)
    }

    fn scores_for(&self, key: Label) -> Vec<f64> {
        self.entries.iter().filter(|e| e.key == key).map(|e| e.score).collect()
    }

    /// All bonafide trials plus the spoof trials whose attack id passes `keep`.
    pub fn subset_attacks(&self, keep: impl Fn(&str) -> bool) -> ScoreSet {
        ScoreSet {
            entries: self
                .entries
                .iter()
                .filter(|e| e.key == Label::Bonafide || e.attack_id.as_deref().is_some_and(&keep))
                .cloned()
                .collect(),
        }
    }

    /// Same set with every key swapped.
    pub fn flipped(&self) -> ScoreSet {
        ScoreSet {
            entries: self
                .entries
                .iter()
                .map(|e| ScoreEntry {
                    key: if e.key == Label::Bonafide { Label::Spoof } else { Label::Bonafide },
                    ..e.clone()
                })
                .collect(),
        }
    }

    pub(crate) fn require_both_classes(&self, metric: &str) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.bonafide_scores();
        let s = self.spoof_scores();
        if b.is_empty() || s.is_empty() {
            return Err(Error::contract(format!(
                "{metric} needs both classes, got {} bonafide and {} spoof",
                b.len(),
                s.len()
            )));
        }
        Ok((b, s))
    }
}

/// Non-blank, non-comment lines split on whitespace, with 1-based line numbers.
pub(crate) fn columns(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// `utt_id<TAB>score` per line.
pub fn read_score_file(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    columns(&text)
        .map(|(line, cols)| {
            if cols.len() != 2 {
                return Err(parse_err(path, line, format!("expected 2 columns, found {}", cols.len())));
            }
            let s: f64 = cols[1]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad score `{}`", cols[1])))?;
            Ok((cols[0].to_owned(), s))
        })
        .collect()
}

/// `utt_id<TAB>bonafide|spoof<TAB>attack_id` per line; attack `-` means none.
pub fn read_key_file(path: &Path) -> Result<Vec<(String, Label, Option<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    columns(&text)
        .map(|(line, cols)| {
            if !(2..=3).contains(&cols.len()) {
                return Err(parse_err(path, line, format!("expected 3 columns, found {}", cols.len())));
            }
            let key: Label = cols[1]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad key `{}`", cols[1])))?;
            let attack = cols.get(2).filter(|a| **a != "-").map(|a| a.to_string());
            Ok((cols[0].to_owned(), key, attack))
        })
        .collect()
}

pub fn format_score_lines(scores: &[(String, f64)]) -> String {
    scores.iter().map(|(u, s)| format!("{u}\t{s}\n")).collect()
}
