use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dsp::{AugmentationSpec, CodecConfig};
use crate::error::{Error, Result};
use crate::metrics::TDcfParams;
use crate::model::{ModelConfig, Variant};
use crate::train::{Decay, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Reference network and optimizer settings.
    Full,
    /// Small network with a short warmup, sized for a laptop CPU.
    Tiny,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "tiny" => Ok(Preset::Tiny),
            other => Err(Error::config(format!("preset: unknown value `{other}` (full|tiny)"))),
        }
    }
}

/// Everything one CLI run needs. Every field has a default; the config file
/// only lists overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Applied in order, one augmented copy per spec.
    pub augment: Vec<AugmentationSpec>,
    pub augment_seed: u64,
    pub codec: Option<CodecConfig>,
    pub tdcf_params: Option<PathBuf>,
    pub train_manifest: Option<PathBuf>,
    pub dev_manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Full)
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| num(key, x.trim())).collect()
}

fn triple(key: &str, v: &str) -> Result<[usize; 3]> {
    list::<usize>(key, v)?
        .try_into()
        .map_err(|_| Error::config(format!("{key}: expected three comma-separated values")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let (model, train) = match p {
            Preset::Full => (ModelConfig::default(), TrainConfig::default()),
            Preset::Tiny => {
                let mut t = TrainConfig {
                    epochs: 20,
                    batch_size: 8,
                    seeds: vec![1],
                    ..TrainConfig::default()
                };
                t.schedule.base_lr = 1e-3;
                t.schedule.warmup_steps = 50;
                (ModelConfig::tiny(), t)
            }
        };
        RunConfig {
            preset: p,
            model,
            train,
            augment: Vec::new(),
            augment_seed: 0,
            codec: None,
            tdcf_params: None,
            train_manifest: None,
            dev_manifest: None,
            out_dir: PathBuf::from("runs"),
        }
    }

    /// Parse `key = value` lines. Relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_owned()) {
                return Err(Error::config(format!("{k}: given twice (line {})", i + 1)));
            }
            pairs.push((i + 1, k, v));
        }
        let preset = match pairs.iter().find(|(_, k, _)| *k == "preset") {
            Some((_, _, v)) => v.parse()?,
            None => Preset::Full,
        };
        let mut cfg = RunConfig::preset(preset);
        let mut encode = None;
        let mut decode = None;
        let mut period = None;
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        for (line, k, v) in pairs {
            let m = &mut cfg.model;
            let t = &mut cfg.train;
            match k {
                "preset" => {}
                "cardinality" => m.cardinality = num(k, v)?,
                "bottleneck_width" => m.bottleneck_width = num(k, v)?,
                "depth" => m.depth = num(k, v)?,
                "se" => m.use_se = flag(k, v)?,
                "se_reduction" => m.se_reduction = num(k, v)?,
                "spatial_dropout" => m.spatial_dropout = num(k, v)?,
                "variant" => m.variant = v.parse()?,
                "head_hidden" => m.head_hidden = num(k, v)?,
                "input_length" => m.input_length = num(k, v)?,
                "stage_widths" => m.stage_widths = list(k, v)?,
                "stage_strides" => m.stage_strides = list(k, v)?,
                "stem_filters" => m.stem_filters = triple(k, v)?,
                "stem_kernels" => m.stem_kernels = triple(k, v)?,
                "stem_strides" => m.stem_strides = triple(k, v)?,
                "augment" => {
                    cfg.augment = if v.is_empty() || v == "none" {
                        Vec::new()
                    } else {
                        v.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?
                    }
                }
                "augment_seed" => cfg.augment_seed = num(k, v)?,
                "codec_encode" => encode = Some(v.to_owned()),
                "codec_decode" => decode = Some(v.to_owned()),
                "lr" => t.schedule.base_lr = num(k, v)?,
                "warmup_steps" => t.schedule.warmup_steps = num(k, v)?,
                "decay" => {
                    t.schedule.decay = match v {
                        "inverse_sqrt" => Decay::InverseSqrt,
                        "cosine_restarts" => Decay::CosineRestarts { period: 1000 },
                        _ => return Err(Error::config(format!("decay: unknown schedule `{v}`"))),
                    }
                }
                "restart_period" => period = Some(num::<u64>(k, v)?),
                "epochs" => t.epochs = num(k, v)?,
                "batch_size" => t.batch_size = num(k, v)?,
                "seeds" => t.seeds = list(k, v)?,
                "weight_decay" => t.adam.weight_decay = num(k, v)?,
                "max_grad_norm" => {
                    t.adam.max_grad_norm = if v == "none" { None } else { Some(num(k, v)?) }
                }
                "track_train_accuracy" => t.track_train_accuracy = flag(k, v)?,
                "tdcf_params" => cfg.tdcf_params = Some(path(v)),
                "train_manifest" => cfg.train_manifest = Some(path(v)),
                "dev_manifest" => cfg.dev_manifest = Some(path(v)),
                "out_dir" => cfg.out_dir = path(v),
                _ => return Err(Error::config(format!("{k}: unknown key (line {line})"))),
            }
        }
        if let Some(p) = period {
            match &mut cfg.train.schedule.decay {
                Decay::CosineRestarts { period } => *period = p,
                Decay::InverseSqrt => {
                    return Err(Error::config("restart_period: only valid with decay = cosine_restarts"))
                }
            }
        }
        cfg.codec = match (encode, decode) {
            (Some(encode), Some(decode)) => Some(CodecConfig { encode, decode }),
            (None, None) => None,
            _ => return Err(Error::config("codec_encode: codec_encode and codec_decode go together")),
        };
        if let Some(p) = &cfg.tdcf_params {
            cfg.train.tdcf = TDcfParams::load(p)?;
        }
        cfg.model.validate()?;
        cfg.train.schedule.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Every key with its current value; `parse` accepts the output.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("preset", match self.preset {
            Preset::Full => "full".into(),
            Preset::Tiny => "tiny".into(),
        });
        kv("cardinality", m.cardinality.to_string());
        kv("bottleneck_width", m.bottleneck_width.to_string());
        kv("depth", m.depth.to_string());
        kv("se", m.use_se.to_string());
        kv("se_reduction", m.se_reduction.to_string());
        kv("spatial_dropout", m.spatial_dropout.to_string());
        kv("variant", match m.variant {
            Variant::Aggregated => "aggregated".into(),
            Variant::PlainResnet => "plain_resnet".into(),
        });
        kv("head_hidden", m.head_hidden.to_string());
        kv("input_length", m.input_length.to_string());
        kv("stage_widths", join(&m.stage_widths));
        kv("stage_strides", join(&m.stage_strides));
        kv("stem_filters", join(&m.stem_filters));
        kv("stem_kernels", join(&m.stem_kernels));
        kv("stem_strides", join(&m.stem_strides));
        kv(
            "augment",
            if self.augment.is_empty() { "none".into() } else { join(&self.augment) },
        );
        kv("augment_seed", self.augment_seed.to_string());
        if let Some(c) = &self.codec {
            kv("codec_encode", c.encode.clone());
            kv("codec_decode", c.decode.clone());
        }
        kv("lr", t.schedule.base_lr.to_string());
        kv("warmup_steps", t.schedule.warmup_steps.to_string());
        match t.schedule.decay {
            Decay::InverseSqrt => kv("decay", "inverse_sqrt".into()),
            Decay::CosineRestarts { period } => {
                kv("decay", "cosine_restarts".into());
                kv("restart_period", period.to_string());
            }
        }
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("seeds", join(&t.seeds));
        kv("weight_decay", t.adam.weight_decay.to_string());
        kv(
            "max_grad_norm",
            t.adam.max_grad_norm.map_or("none".into(), |v| v.to_string()),
        );
        kv("track_train_accuracy", t.track_train_accuracy.to_string());
        for (k, p) in [
            ("tdcf_params", &self.tdcf_params),
            ("train_manifest", &self.train_manifest),
            ("dev_manifest", &self.dev_manifest),
        ] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        kv("out_dir", self.out_dir.display().to_string());
        s
    }
}
