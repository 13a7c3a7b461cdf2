//! Multi-step jobs behind the CLI: scoring a manifest, writing augmented
//! corpora, full training runs, the cardinality/width sweep and the
//! ablation grid.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dsp::clip::AudioClip;
use crate::dsp::preprocess::preprocess_to;
use crate::dsp::wav::write_wav_pcm16;
use crate::dsp::{augment_pipeline, AugmentOutput, AugmentationSpec, CodecConfig};
use crate::error::{Error, Result};
use crate::metrics::{compute_auc, compute_eer, format_score_lines, LA_PREFIX, PA_PREFIX};
use crate::model::{count_params, ModelConfig, Network, Variant};
use crate::tensor::Real;
use crate::train::{format_log, score_clips, score_set, train_loop, RunResult, TrainConfig};

use super::config::RunConfig;
use super::manifest::{parse_manifest, Manifest, TrialEntry};

const SCORE_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreSummary {
    pub written: usize,
    pub warnings: usize,
}

/// Score every readable manifest entry in manifest order.
pub fn score_manifest<T: Real>(net: &Network<T>, manifest: &Manifest) -> Result<(Vec<(String, f64)>, usize)> {
    let loaded = manifest.load_clips();
    let clips: Vec<AudioClip> = loaded
        .clips
        .iter()
        .map(|c| preprocess_to(c, net.config.input_length))
        .collect();
    let scores = score_clips(net, &clips, SCORE_BATCH)?;
    let pairs = clips.iter().map(|c| c.utt_id.clone()).zip(scores).collect();
    Ok((pairs, loaded.failures.len()))
}

/// One `utt_id<TAB>score` line per readable entry. Unreadable clips are
/// skipped and counted.
pub fn write_scores<T: Real>(net: &Network<T>, manifest: &Manifest, out_path: &Path) -> Result<ScoreSummary> {
    let (pairs, warnings) = score_manifest(net, manifest)?;
    fs::write(out_path, format_score_lines(&pairs))?;
    if warnings > 0 {
        log::warn!("{warnings} manifest entries could not be scored");
    }
    Ok(ScoreSummary {
        written: pairs.len(),
        warnings,
    })
}

/// Run the augmentation pipeline over a manifest's audio and write the
/// result (originals plus copies) as a new corpus under `out_dir`.
pub fn augment_manifest(
    manifest: &Manifest,
    specs: &[AugmentationSpec],
    seed: u64,
    codec: Option<&CodecConfig>,
    out_dir: &Path,
) -> Result<(Manifest, AugmentOutput)> {
    let loaded = manifest.load_clips();
    let out = augment_pipeline(&loaded.clips, specs, seed, codec)?;
    let by_id: HashMap<&str, &TrialEntry> = manifest.entries.iter().map(|e| (e.utt_id.as_str(), e)).collect();
    fs::create_dir_all(out_dir.join("wav"))?;
    let mut entries = Vec::with_capacity(out.clips.len());
    for clip in &out.clips {
        let source = by_id
            .get(clip.utt_id.as_str())
            .or_else(|| clip.utt_id.rsplit_once("__").and_then(|(u, _)| by_id.get(u)))
            .ok_or_else(|| Error::contract(format!("augmented clip `{}` has no source entry", clip.utt_id)))?;
        let rel = PathBuf::from("wav").join(format!("{}.wav", clip.utt_id));
        write_wav_pcm16(out_dir.join(&rel), clip)?;
        entries.push(TrialEntry {
            speaker_id: source.speaker_id.clone(),
            utt_id: clip.utt_id.clone(),
            attack_id: clip.attack_id.clone(),
            key: clip.label,
            path: rel,
        });
    }
    let m = Manifest::new(entries, out_dir);
    m.write(&out_dir.join("manifest.txt"))?;
    Ok((m, out))
}

fn load_required(path: &Option<PathBuf>, key: &str) -> Result<Vec<AudioClip>> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::config(format!("{key}: required for training")))?;
    let m = parse_manifest(p)?;
    if m.entries.is_empty() {
        return Err(Error::config(format!("{key}: manifest {} is empty", p.display())));
    }
    m.load_all()
}

/// Train from the manifests named in the config and write checkpoints, logs,
/// dev scores and a JSON summary into `out_dir`.
pub fn run_training(cfg: &RunConfig) -> Result<RunResult> {
    let mut train = load_required(&cfg.train_manifest, "train_manifest")?;
    let dev = load_required(&cfg.dev_manifest, "dev_manifest")?;
    if !cfg.augment.is_empty() {
        let out = augment_pipeline(&train, &cfg.augment, cfg.augment_seed, cfg.codec.as_ref())?;
        log::info!(
            "augmented {} clips to {} ({} codec skips, {} failures)",
            train.len(),
            out.clips.len(),
            out.codec_skips,
            out.failures
        );
        train = out.clips;
    }
    let result = train_loop(&train, &dev, &cfg.model, &cfg.train)?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("run.cfg"), cfg.to_text())?;
    let dev_pre: Vec<AudioClip> = dev.iter().map(|c| preprocess_to(c, cfg.model.input_length)).collect();
    for s in &result.seeds {
        s.best.save(&dir.join(format!("best_seed{}.ckpt.json", s.seed)))?;
        fs::write(dir.join(format!("train_log_seed{}.csv", s.seed)), format_log(&s.log))?;
        let net = s.best.to_network::<f32>()?;
        let scores = score_clips(&net, &dev_pre, SCORE_BATCH)?;
        let pairs: Vec<(String, f64)> = dev_pre.iter().map(|c| c.utt_id.clone()).zip(scores).collect();
        fs::write(dir.join(format!("dev_scores_seed{}.tsv", s.seed)), format_score_lines(&pairs))?;
    }
    fs::write(dir.join("run_result.json"), result.to_json())?;
    Ok(result)
}

/// `CxD` pairs, e.g. `1x64,2x40,4x24`.
pub fn parse_grid(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|cell| {
            let cell = cell.trim();
            let bad = || Error::config(format!("grid: `{cell}` is not CxD"));
            let (c, d) = cell.split_once(['x', 'X']).ok_or_else(bad)?;
            let c: usize = c.trim().parse().map_err(|_| bad())?;
            let d: usize = d.trim().trim_end_matches('d').parse().map_err(|_| bad())?;
            if c == 0 || d == 0 {
                return Err(bad());
            }
            Ok((c, d))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cardinality: usize,
    pub width: usize,
    pub params: u64,
    pub auc_la: f64,
    pub auc_pa: f64,
}

impl SweepRow {
    pub fn label(&self) -> String {
        format!("{}x{}d", self.cardinality, self.width)
    }
}

fn best_dev_scores(result: &RunResult, dev: &[AudioClip], input_length: usize) -> Result<crate::metrics::ScoreSet> {
    let best = result
        .seeds
        .iter()
        .min_by(|a, b| a.best_dev_loss.total_cmp(&b.best_dev_loss))
        .ok_or_else(|| Error::config("no seeds trained"))?;
    let net = best.best.to_network::<f32>()?;
    let pre: Vec<AudioClip> = dev.iter().map(|c| preprocess_to(c, input_length)).collect();
    let scores = score_clips(&net, &pre, SCORE_BATCH)?;
    score_set(&pre, &scores)
}

/// Train one model per (C, d) cell and report dev AUC on the LA and PA
/// subsets.
pub fn run_sweep(
    grid: &[(usize, usize)],
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    train: &[AudioClip],
    dev: &[AudioClip],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for &(c, d) in grid {
        let model = ModelConfig {
            cardinality: c,
            bottleneck_width: d,
            ..base.clone()
        };
        model.validate()?;
        log::info!("sweep cell {c}x{d}d");
        let result = train_loop(train, dev, &model, train_cfg)?;
        let set = best_dev_scores(&result, dev, model.input_length)?;
        rows.push(SweepRow {
            cardinality: c,
            width: d,
            params: count_params(&model)?,
            auc_la: compute_auc(&set.subset_attacks(|a| a.starts_with(LA_PREFIX)))?,
            auc_pa: compute_auc(&set.subset_attacks(|a| a.starts_with(PA_PREFIX)))?,
        });
    }
    Ok(rows)
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from("setting\tparams\tAUC_LA\tAUC_PA\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{:.4}\t{:.4}", r.label(), r.params, r.auc_la, r.auc_pa);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub name: String,
    pub model: ModelConfig,
}

/// Residual vs aggregated, with and without SE and spatial dropout, at each
/// depth. Residual cells keep the aggregated cells' bottleneck width.
pub fn ablation_grid(base: &ModelConfig, depths: &[usize], dropout: f64) -> Vec<AblationCell> {
    let mut cells = Vec::new();
    for &depth in depths {
        for variant in [Variant::PlainResnet, Variant::Aggregated] {
            for use_se in [false, true] {
                for drop in [false, true] {
                    let mut m = ModelConfig {
                        depth,
                        use_se,
                        variant,
                        spatial_dropout: if drop { dropout } else { 0.0 },
                        ..base.clone()
                    };
                    if variant == Variant::PlainResnet {
                        m.bottleneck_width = base.cardinality * base.bottleneck_width;
                        m.cardinality = 1;
                    }
                    let family = match variant {
                        Variant::PlainResnet => "ResNet",
                        Variant::Aggregated => "Aggregated Nets",
                    };
                    let name = format!(
                        "{}{family}-{depth}{}",
                        if use_se { "SE-" } else { "" },
                        if drop { " (Spatial Dropout)" } else { "" }
                    );
                    cells.push(AblationCell { name, model: m });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub eer: f64,
}

pub fn run_ablation(
    cells: &[AblationCell],
    train_cfg: &TrainConfig,
    train: &[AudioClip],
    dev: &[AudioClip],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        log::info!("ablation cell {}", cell.name);
        let result = train_loop(train, dev, &cell.model, train_cfg)?;
        let set = best_dev_scores(&result, dev, cell.model.input_length)?;
        rows.push(AblationRow {
            name: cell.name.clone(),
            eer: compute_eer(&set)?.0,
        });
    }
    Ok(rows)
}

/// Two columns, EER in percent.
pub fn format_ablation(rows: &[AblationRow]) -> String {
    let mut s = String::from("Network\tEER(%)\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{:.2}", r.name, 100.0 * r.eer);
    }
    s
}
