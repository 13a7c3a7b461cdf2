use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dsp::clip::{AudioClip, Label};
use crate::dsp::wav::load_wav;
use crate::error::{Error, Result};

/// One protocol line: `speaker utt attack key path`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialEntry {
    pub speaker_id: String,
    pub utt_id: String,
    /// `None` is written as `-` and means bonafide.
    pub attack_id: Option<String>,
    pub key: Label,
    /// As written in the manifest; relative paths resolve against the
    /// manifest's directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<TrialEntry>,
    pub base_dir: PathBuf,
}

#[derive(Debug, Default)]
pub struct LoadedClips {
    pub clips: Vec<AudioClip>,
    /// Entries whose audio could not be read, with the reason.
    pub failures: Vec<(String, Error)>,
}

impl Manifest {
    pub fn new(entries: Vec<TrialEntry>, base_dir: impl Into<PathBuf>) -> Self {
        Manifest {
            entries,
            base_dir: base_dir.into(),
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            reason,
        };
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = l.split_whitespace().collect();
            if cols.len() != 5 {
                return Err(err(line, format!("expected 5 columns, found {}", cols.len())));
            }
            let key = match cols[3] {
                "bonafide" => Label::Bonafide,
                "spoof" => Label::Spoof,
                other => return Err(err(line, format!("key must be bonafide or spoof, got `{other}`"))),
            };
            let attack_id = (cols[2] != "-").then(|| cols[2].to_owned());
            match (key, &attack_id) {
                (Label::Bonafide, Some(a)) => {
                    return Err(err(line, format!("bonafide entry carries attack `{a}`")))
                }
                (Label::Spoof, None) => return Err(err(line, "spoof entry needs an attack id".into())),
                _ => {}
            }
            if !seen.insert(cols[1].to_owned()) {
                return Err(err(line, format!("duplicate utt_id `{}`", cols[1])));
            }
            entries.push(TrialEntry {
                speaker_id: cols[0].to_owned(),
                utt_id: cols[1].to_owned(),
                attack_id,
                key,
                path: PathBuf::from(cols[4]),
            });
        }
        let base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { entries, base_dir })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                e.speaker_id,
                e.utt_id,
                e.attack_id.as_deref().unwrap_or("-"),
                e.key,
                e.path.display()
            );
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        for e in &self.entries {
            let fields = [&e.speaker_id, &e.utt_id, &e.path.display().to_string()];
            if fields.iter().any(|f| f.is_empty() || f.contains(char::is_whitespace)) {
                return Err(Error::contract(format!(
                    "manifest entry `{}` has an empty or whitespace-bearing field",
                    e.utt_id
                )));
            }
        }
        fs::write(path, self.to_text())?;
        Ok(())
    }

    /// (bonafide, spoof) counts.
    pub fn counts(&self) -> (usize, usize) {
        let b = self.entries.iter().filter(|e| e.key == Label::Bonafide).count();
        (b, self.entries.len() - b)
    }

    pub fn resolve(&self, entry: &TrialEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Read every entry's audio; unreadable files are collected, not fatal.
    pub fn load_clips(&self) -> LoadedClips {
        let mut out = LoadedClips::default();
        for e in &self.entries {
            match load_wav(self.resolve(e)) {
                Ok(c) => out.clips.push(c.with_id(e.utt_id.clone()).with_label(e.key, e.attack_id.clone())),
                Err(err) => {
                    log::warn!("skipping {}: {err}", e.utt_id);
                    out.failures.push((e.utt_id.clone(), err));
                }
            }
        }
        out
    }

    /// Like [`Manifest::load_clips`] but any failure is an error.
    pub fn load_all(&self) -> Result<Vec<AudioClip>> {
        let mut loaded = self.load_clips();
        if let Some((_, e)) = loaded.failures.drain(..).next() {
            return Err(e);
        }
        Ok(loaded.clips)
    }

    /// `utt_id<TAB>key<TAB>attack` lines for the metric tools.
    pub fn key_file_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.utt_id, e.key, e.attack_id.as_deref().unwrap_or("-")))
            .collect()
    }
}

pub fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Manifest::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Manifest> {
        Manifest::parse(text, Path::new("m.txt"))
    }

    #[test]
    fn bonafide_line() {
        let m = parse("S01 utt_0001 - bonafide clips/utt_0001.wav\n").unwrap();
        let e = &m.entries[0];
        assert_eq!(e.key, Label::Bonafide);
        assert_eq!(e.attack_id, None);
        assert_eq!(e.path, PathBuf::from("clips/utt_0001.wav"));
    }

    #[test]
    fn inconsistent_key_reports_line() {
        let text = "S01 a - bonafide a.wav\nS01 b A06 bonafide b.wav\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_reports_line() {
        let text = "S01 a - bonafide a.wav\n\nS02 a A01 spoof b.wav\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn counts_and_round_trip() {
        let mut text = String::new();
        for i in 0..3 {
            text += &format!("S0{i} b{i} - bonafide b{i}.wav\n");
        }
        for i in 0..5 {
            text += &format!("S0{i} s{i} A0{i} spoof s{i}.wav\n");
        }
        let m = parse(&text).unwrap();
        assert_eq!(m.counts(), (3, 5));
        assert_eq!(parse(&m.to_text()).unwrap(), m);
    }
}
