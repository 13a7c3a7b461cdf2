//! EER, AUC, minimum normalized t-DCF and report emission.

mod rates;
mod report;
mod scores;
mod tdcf;

pub use rates::{compute_auc, compute_eer, cumulative_eer, threshold_sweep, SweepPoint};
pub use report::{emit_report, parse_report_csv, sorted_rows, ReportFormat, ReportRow, CSV_HEADER};
pub use scores::{format_score_lines, read_key_file, read_score_file, ScoreEntry, ScoreSet};
pub use tdcf::{compute_min_tdcf, normalized_tdcf, TDcfParams};

/// Attack ids of logical-access spoofs start with this prefix.
pub const LA_PREFIX: &str = "LA";
/// Attack ids of physical-access spoofs start with this prefix.
pub const PA_PREFIX: &str = "PA";

/// EER, AUC and min t-DCF of one score set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub eer: f64,
    pub eer_threshold: f64,
    pub auc: f64,
    pub min_tdcf: f64,
}

pub fn summarize(scores: &ScoreSet, params: &TDcfParams) -> crate::Result<Summary> {
    let (eer, eer_threshold) = compute_eer(scores)?;
    Ok(Summary {
        eer,
        eer_threshold,
        auc: compute_auc(scores)?,
        min_tdcf: compute_min_tdcf(scores, params)?.0,
    })
}
