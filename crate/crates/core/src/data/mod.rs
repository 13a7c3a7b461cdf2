//! Protocol manifests, the synthetic corpus, run configuration and the
//! jobs the CLI runs.

mod config;
mod manifest;
mod runs;
mod synth;

pub use config::{Preset, RunConfig};
pub use manifest::{parse_manifest, LoadedClips, Manifest, TrialEntry};
pub use runs::{
    ablation_grid, augment_manifest, format_ablation, format_sweep, parse_grid, run_ablation, run_sweep,
    run_training, score_manifest, write_scores, AblationCell, AblationRow, ScoreSummary, SweepRow,
};
pub use synth::{
    band_features, generate_synthetic_corpus, generate_with, separability_certificate, synth_clip, SynthClass,
    SynthCorpus, SynthOptions, CERTIFICATE_BANDS, LA_ATTACK, PA2_ATTACK, PA_ATTACK, SYNTH_SECONDS,
};
