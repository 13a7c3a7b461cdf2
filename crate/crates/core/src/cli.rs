//! Command-line surface. `run` parses arguments, dispatches and maps errors
//! to exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 numeric.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::data::{
    ablation_grid, augment_manifest, format_ablation, format_sweep, generate_with, parse_grid, parse_manifest,
    run_ablation, run_sweep, run_training, separability_certificate, write_scores, RunConfig, SynthOptions,
};
use crate::dsp::{AugmentationSpec, CodecConfig};
use crate::error::{Error, Result};
use crate::metrics::{
    emit_report, parse_report_csv, read_key_file, read_score_file, summarize, ScoreSet, TDcfParams, LA_PREFIX,
    PA_PREFIX,
};
use crate::model::Checkpoint;
use crate::tensor::gradcheck::{run_suite, DEFAULT_STEP, DEFAULT_TOLERANCE};

pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "psa", about = "Raw-waveform spoofing countermeasure toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train from a run config; writes checkpoints, logs and dev scores.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// EER, AUC and min t-DCF from a score file and key file, or from a
    /// checkpoint scored on a manifest.
    Evaluate {
        #[arg(long, requires = "keys", conflicts_with_all = ["checkpoint", "manifest"])]
        scores: Option<PathBuf>,
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        tdcf_params: Option<PathBuf>,
    },
    /// Score every entry of a manifest with a checkpoint.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write originals plus one augmented copy per spec as a new corpus.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated `kind[:param]`; defaults to all five.
        #[arg(long)]
        specs: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, requires = "codec_decode")]
        codec_encode: Option<String>,
        #[arg(long, requires = "codec_encode")]
        codec_decode: Option<String>,
    },
    /// Finite-difference check of every differentiable op.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate the synthetic three-class corpus.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// 2 applies the room response twice.
        #[arg(long, default_value_t = 1)]
        replay_order: u8,
        #[arg(long, default_value_t = crate::data::SYNTH_SECONDS)]
        seconds: f64,
    },
    /// Cardinality x width grid; prints a dev AUC table.
    Sweep {
        #[arg(long)]
        grid: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual/aggregated x SE x spatial-dropout grid; prints an EER table.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "18,34")]
        depths: String,
        /// Dropout rate of the "with spatial dropout" cells.
        #[arg(long, default_value_t = 0.2)]
        dropout: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render per-system results (CSV rows) as text, CSV or plot data.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(stdout: &mut dyn Write, out: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = out {
        fs::write(p, text)?;
    }
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

fn load_tdcf(path: Option<&Path>) -> Result<TDcfParams> {
    path.map_or_else(|| Ok(TDcfParams::default()), TDcfParams::load)
}

fn metric_lines(set: &ScoreSet, params: &TDcfParams) -> Result<String> {
    let mut s = String::new();
    let all = summarize(set, params)?;
    s += &format!(
        "EER {:.4}\nEER_threshold {:.6}\nAUC {:.4}\nmin_tDCF {:.4}\n",
        all.eer, all.eer_threshold, all.auc, all.min_tdcf
    );
    for prefix in [LA_PREFIX, PA_PREFIX] {
        let sub = set.subset_attacks(|a| a.starts_with(prefix));
        if sub.spoof_scores().is_empty() || sub.len() == set.len() {
            continue;
        }
        let m = summarize(&sub, params)?;
        s += &format!(
            "EER_{prefix} {:.4}\nAUC_{prefix} {:.4}\nmin_tDCF_{prefix} {:.4}\n",
            m.eer, m.auc, m.min_tdcf
        );
    }
    Ok(s)
}

fn training_clips(cfg: &RunConfig) -> Result<(Vec<crate::dsp::AudioClip>, Vec<crate::dsp::AudioClip>)> {
    let get = |p: &Option<PathBuf>, key: &str| -> Result<Vec<crate::dsp::AudioClip>> {
        let p = p.as_ref().ok_or_else(|| Error::Config(format!("{key}: required")))?;
        parse_manifest(p)?.load_all()
    };
    Ok((get(&cfg.train_manifest, "train_manifest")?, get(&cfg.dev_manifest, "dev_manifest")?))
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Train { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let r = run_training(&cfg)?;
            for s in &r.seeds {
                writeln!(
                    stdout,
                    "seed {} best_epoch {} dev_loss {:.6} dev_EER {:.4} dev_min_tDCF {:.4}",
                    s.seed, s.best_epoch, s.best_dev_loss, s.dev_eer, s.dev_min_tdcf
                )?;
            }
            writeln!(stdout, "mean dev_EER {:.4}", r.mean_dev_eer)?;
        }
        Command::Evaluate {
            scores,
            keys,
            checkpoint,
            manifest,
            tdcf_params,
        } => {
            let params = load_tdcf(tdcf_params.as_deref())?;
            let set = match (scores, keys, checkpoint, manifest) {
                (Some(s), Some(k), None, None) => ScoreSet::join(&read_score_file(&s)?, &read_key_file(&k)?)?,
                (None, None, Some(c), Some(m)) => {
                    let net = Checkpoint::load(&c)?.to_network::<f32>()?;
                    let manifest = parse_manifest(&m)?;
                    let (pairs, warnings) = crate::data::score_manifest(&net, &manifest)?;
                    if warnings > 0 {
                        log::warn!("{warnings} entries skipped");
                    }
                    let keys: Vec<_> = manifest
                        .entries
                        .iter()
                        .map(|e| (e.utt_id.clone(), e.key, e.attack_id.clone()))
                        .collect();
                    ScoreSet::join(&pairs, &keys)?
                }
                _ => return Err(Error::Config("evaluate needs --scores/--keys or --checkpoint/--manifest".into())),
            };
            stdout.write_all(metric_lines(&set, &params)?.as_bytes())?;
        }
        Command::Score {
            checkpoint,
            manifest,
            out,
        } => {
            let net = Checkpoint::load(&checkpoint)?.to_network::<f32>()?;
            let s = write_scores(&net, &parse_manifest(&manifest)?, &out)?;
            writeln!(stdout, "scored {} warnings {}", s.written, s.warnings)?;
        }
        Command::Augment {
            manifest,
            out,
            specs,
            seed,
            codec_encode,
            codec_decode,
        } => {
            let specs: Vec<AugmentationSpec> = match specs {
                Some(s) => s.split(',').map(|x| x.trim().parse()).collect::<Result<_>>()?,
                None => AugmentationSpec::defaults(),
            };
            let codec = codec_encode.zip(codec_decode).map(|(encode, decode)| CodecConfig { encode, decode });
            let (m, o) = augment_manifest(&parse_manifest(&manifest)?, &specs, seed, codec.as_ref(), &out)?;
            writeln!(
                stdout,
                "wrote {} entries, codec_skips {} failures {}",
                m.entries.len(),
                o.codec_skips,
                o.failures
            )?;
        }
        Command::Gradcheck { cases, seed } => {
            let report = run_suite(cases, seed, DEFAULT_STEP, DEFAULT_TOLERANCE)?;
            for (op, worst, n) in report.worst_by_op() {
                writeln!(stdout, "{op:<32} cases {n:>3} max_rel_err {worst:.3e}")?;
            }
            if !report.all_passed() {
                let n = report.failures().count();
                return Err(Error::Numeric(format!("{n} gradient checks exceeded {DEFAULT_TOLERANCE:e}")));
            }
            writeln!(stdout, "all {} checks passed", report.entries.len())?;
        }
        Command::Synth {
            n,
            seed,
            out,
            replay_order,
            seconds,
        } => {
            let opts = SynthOptions { seconds, replay_order };
            let corpus = generate_with(n, seed, &out, &opts)?;
            let (b, s) = corpus.manifest.counts();
            writeln!(
                stdout,
                "wrote {} clips ({b} bonafide, {s} spoof) to {}; band-energy certificate accuracy {:.3}",
                corpus.clips.len(),
                corpus.manifest_path.display(),
                separability_certificate(&corpus.clips)
            )?;
        }
        Command::Sweep { grid, config, out } => {
            let grid = parse_grid(&grid)?;
            let cfg = RunConfig::load(&config)?;
            let (train, dev) = training_clips(&cfg)?;
            let rows = run_sweep(&grid, &cfg.model, &cfg.train, &train, &dev)?;
            emit(stdout, out.as_deref(), &format_sweep(&rows))?;
        }
        Command::Ablate {
            config,
            depths,
            dropout,
            out,
        } => {
            let depths: Vec<usize> = depths
                .split(',')
                .map(|d| d.trim().parse().map_err(|_| Error::Config(format!("depths: bad value `{d}`"))))
                .collect::<Result<_>>()?;
            let cfg = RunConfig::load(&config)?;
            let (train, dev) = training_clips(&cfg)?;
            let cells = ablation_grid(&cfg.model, &depths, dropout);
            let rows = run_ablation(&cells, &cfg.train, &train, &dev)?;
            emit(stdout, out.as_deref(), &format_ablation(&rows))?;
        }
        Command::Report { input, format, out } => {
            let text = fs::read_to_string(&input).map_err(|e| Error::Ingestion {
                path: input.clone(),
                reason: e.to_string(),
            })?;
            let rows = parse_report_csv(&text)?;
            emit(stdout, out.as_deref(), &emit_report(&rows, format.parse()?)?)?;
        }
    }
    Ok(())
}
