use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsp::clip::{AudioClip, Label};
use crate::dsp::preprocess::preprocess_to;
use crate::error::{Error, Result};
use crate::metrics::{compute_eer, compute_min_tdcf, ScoreEntry, ScoreSet, TDcfParams};
use crate::model::{batch_from_clips, predict, Checkpoint, Ctx, ModelConfig, Network, Prediction};
use crate::tensor::ops::{bce_loss, BCE_CLAMP};
use crate::tensor::Real;

use super::init::kaiming_init;
use super::optim::{Adam, AdamConfig};
use super::schedule::ScheduleConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub schedule: ScheduleConfig,
    pub adam: AdamConfig,
    pub tdcf: TDcfParams,
    /// Measure eval-mode accuracy on the training set after every epoch.
    pub track_train_accuracy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            seeds: vec![1, 2, 3],
            schedule: ScheduleConfig::default(),
            adam: AdamConfig::default(),
            tdcf: TDcfParams::default(),
            track_train_accuracy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_eer: f64,
    pub train_accuracy: Option<f64>,
}

pub const LOG_HEADER: &str = "epoch,step,lr,train_loss,dev_loss,dev_eer";

pub fn format_log(log: &[EpochLog]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for e in log {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.epoch, e.step, e.lr, e.train_loss, e.dev_loss, e.dev_eer
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub dev_eer: f64,
    pub dev_min_tdcf: f64,
    pub final_train_accuracy: Option<f64>,
    pub log: Vec<EpochLog>,
    #[serde(skip)]
    pub best: Checkpoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub seeds: Vec<SeedResult>,
    pub mean_dev_eer: f64,
    pub mean_dev_min_tdcf: f64,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Lowest dev loss; the earlier epoch wins a tie.
pub fn select_best(checkpoints: &[Checkpoint]) -> Option<&Checkpoint> {
    checkpoints.iter().reduce(|best, c| if is_better(c, best) { c } else { best })
}

fn is_better(c: &Checkpoint, best: &Checkpoint) -> bool {
    c.dev_loss < best.dev_loss || (c.dev_loss == best.dev_loss && c.epoch < best.epoch)
}

/// Mean binary cross-entropy of bonafide probabilities, clamped like the
/// training loss.
pub fn bce_mean(scores: &[f64], targets: &[f64]) -> f64 {
    let lo = BCE_CLAMP;
    let total: f64 = scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let s = s.clamp(lo, 1.0 - lo);
            -(t * s.ln() + (1.0 - t) * (1.0 - s).ln())
        })
        .sum();
    total / scores.len() as f64
}

pub fn targets_of(clips: &[AudioClip]) -> Result<Vec<f64>> {
    clips
        .iter()
        .map(|c| {
            c.label
                .target()
                .ok_or_else(|| Error::config(format!("clip `{}` has no bonafide/spoof label", c.utt_id)))
        })
        .collect()
}

/// Eval-mode scores for every clip, batched, in input order.
pub fn score_clips<T: Real>(net: &Network<T>, clips: &[AudioClip], batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(batch_size.max(1)) {
        let refs: Vec<&AudioClip> = chunk.iter().collect();
        out.extend(net.infer(&batch_from_clips(&refs)?)?);
    }
    Ok(out)
}

pub fn score_set(clips: &[AudioClip], scores: &[f64]) -> Result<ScoreSet> {
    ScoreSet::new(
        clips
            .iter()
            .zip(scores)
            .map(|(c, &s)| ScoreEntry {
                utt_id: c.utt_id.clone(),
                score: s,
                key: c.label,
                attack_id: c.attack_id.clone(),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevEval {
    pub loss: f64,
    pub eer: f64,
    pub min_tdcf: f64,
}

/// Dev loss, EER and min t-DCF of a network on preprocessed clips.
pub fn evaluate<T: Real>(net: &Network<T>, clips: &[AudioClip], batch_size: usize, tdcf: &TDcfParams) -> Result<DevEval> {
    let scores = score_clips(net, clips, batch_size)?;
    let set = score_set(clips, &scores)?;
    Ok(DevEval {
        loss: bce_mean(&scores, &targets_of(clips)?),
        eer: compute_eer(&set)?.0,
        min_tdcf: compute_min_tdcf(&set, tdcf)?.0,
    })
}

pub fn accuracy(clips: &[AudioClip], scores: &[f64]) -> f64 {
    let hits = clips
        .iter()
        .zip(scores)
        .filter(|(c, &s)| (predict(s) == Prediction::Bonafide) == (c.label == Label::Bonafide))
        .count();
    hits as f64 / clips.len() as f64
}

/// One optimizer step on a batch; returns the batch loss.
pub fn train_step<T: Real>(
    net: &Network<T>,
    opt: &mut Adam<T>,
    batch: &[&AudioClip],
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let x = batch_from_clips::<T>(batch)?;
    let targets: Vec<T> = batch
        .iter()
        .map(|c| {
            c.label
                .target()
                .map(T::lit)
                .ok_or_else(|| Error::config(format!("clip `{}` has no bonafide/spoof label", c.utt_id)))
        })
        .collect::<Result<_>>()?;
    net.zero_grad();
    let scores = net.forward(&x, &mut Ctx::train(rng))?;
    let n = scores.numel();
    let loss = bce_loss(&crate::tensor::ops::reshape(&scores, &[n])?, &targets)?;
    loss.backward()?;
    let value = loss.item().to_f64_lossy();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("training loss became {value}")));
    }
    opt.step(&net.parameters(), lr)?;
    Ok(value)
}

fn prepare(clips: &[AudioClip], len: usize) -> Vec<AudioClip> {
    clips.iter().map(|c| preprocess_to(c, len)).collect()
}

fn check_inputs(train: &[AudioClip], dev: &[AudioClip], cfg: &TrainConfig) -> Result<()> {
    if train.is_empty() || dev.is_empty() {
        return Err(Error::config(format!(
            "training needs non-empty train and dev sets, got {} and {}",
            train.len(),
            dev.len()
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.seeds.is_empty() {
        return Err(Error::config("epochs, batch size and seed list must be non-empty"));
    }
    cfg.schedule.validate()?;
    let ids: HashSet<&str> = train.iter().map(|c| c.utt_id.as_str()).collect();
    if let Some(c) = dev.iter().find(|c| ids.contains(c.utt_id.as_str())) {
        return Err(Error::config(format!("`{}` is in both train and dev sets", c.utt_id)));
    }
    targets_of(train)?;
    targets_of(dev)?;
    Ok(())
}

/// Train one model per seed and keep each seed's lowest-dev-loss epoch.
pub fn train_loop(
    train: &[AudioClip],
    dev: &[AudioClip],
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<RunResult> {
    check_inputs(train, dev, cfg)?;
    model.validate()?;
    let train = prepare(train, model.input_length);
    let dev = prepare(dev, model.input_length);
    let mut seeds = Vec::new();
    for &seed in &cfg.seeds {
        seeds.push(train_seed::<f32>(&train, &dev, model, cfg, seed)?);
    }
    let k = seeds.len() as f64;
    Ok(RunResult {
        mean_dev_eer: seeds.iter().map(|s| s.dev_eer).sum::<f64>() / k,
        mean_dev_min_tdcf: seeds.iter().map(|s| s.dev_min_tdcf).sum::<f64>() / k,
        seeds,
    })
}

fn train_seed<T: Real>(
    train: &[AudioClip],
    dev: &[AudioClip],
    model: &ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SeedResult> {
    let net = Network::<T>::build(model)?;
    kaiming_init(&net, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut opt = Adam::new(&net.parameters(), cfg.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(Checkpoint, DevEval)> = None;
    let mut train_acc = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        let mut lr = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&AudioClip> = chunk.iter().map(|&i| &train[i]).collect();
            lr = cfg.schedule.lr_at(opt.step + 1);
            loss_sum += train_step(&net, &mut opt, &batch, lr, &mut rng)?;
            batches += 1;
        }
        let ev = evaluate(&net, dev, cfg.batch_size, &cfg.tdcf)?;
        if cfg.track_train_accuracy {
            train_acc = Some(accuracy(train, &score_clips(&net, train, cfg.batch_size)?));
        }
        let entry = EpochLog {
            epoch,
            step: opt.step,
            lr,
            train_loss: loss_sum / batches as f64,
            dev_loss: ev.loss,
            dev_eer: ev.eer,
            train_accuracy: train_acc,
        };
        log::info!(
            "seed {seed} epoch {epoch}: train_loss {:.4} dev_loss {:.4} dev_eer {:.4}{}",
            entry.train_loss,
            ev.loss,
            ev.eer,
            train_acc.map(|a| format!(" train_acc {a:.3}")).unwrap_or_default()
        );
        log.push(entry);
        let ckpt = Checkpoint::capture(&net, epoch, ev.loss, ev.eer, Some(&rng));
        if best.as_ref().map_or(true, |(b, _)| is_better(&ckpt, b)) {
            best = Some((ckpt, ev));
        }
    }
    let (best, ev) = best.expect("at least one epoch");
    Ok(SeedResult {
        seed,
        best_epoch: best.epoch,
        best_dev_loss: best.dev_loss,
        dev_eer: ev.eer,
        dev_min_tdcf: ev.min_tdcf,
        final_train_accuracy: train_acc,
        log,
        best,
    })
}
