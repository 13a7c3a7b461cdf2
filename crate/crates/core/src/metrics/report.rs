use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::rates::cumulative_eer;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "system,EER_LA,tDCF_LA,EER_PA,tDCF_PA,cumulative";

/// One system's results. EERs are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub system: String,
    pub eer_la: f64,
    pub tdcf_la: f64,
    pub eer_pa: f64,
    pub tdcf_pa: f64,
    /// Spread of the cumulative EER across seeds, drawn as the error bar.
    pub spread: f64,
}

impl ReportRow {
    pub fn cumulative(&self) -> f64 {
        cumulative_eer(self.eer_la, self.eer_pa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    PlotData,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "plot-data" | "plot" => Ok(ReportFormat::PlotData),
            other => Err(Error::config(format!(
                "unknown report format `{other}` (text, csv, plot-data)"
            ))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::PlotData => "json",
        }
    }
}

#[derive(Serialize)]
struct Series {
    x: Vec<String>,
    y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    yerr: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct PlotData {
    eer_la: Series,
    eer_pa: Series,
    cumulative: Series,
}

/// Rows ordered by cumulative EER, ties by system name.
pub fn sorted_rows(rows: &[ReportRow]) -> Vec<ReportRow> {
    let mut r = rows.to_vec();
    r.sort_by(|a, b| {
        a.cumulative()
            .total_cmp(&b.cumulative())
            .then_with(|| a.system.cmp(&b.system))
    });
    r
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::contract("report needs at least one row"));
    }
    let rows = sorted_rows(rows);
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.system,
                    r.eer_la,
                    r.tdcf_la,
                    r.eer_pa,
                    r.tdcf_pa,
                    r.cumulative()
                );
            }
        }
        ReportFormat::Text => {
            let w = rows.iter().map(|r| r.system.len()).max().unwrap_or(6).max(6);
            let _ = writeln!(
                out,
                "{:<w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}",
                "system", "EER_LA", "tDCF_LA", "EER_PA", "tDCF_PA", "cumulative"
            );
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{:<w$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>10.4}",
                    r.system,
                    r.eer_la,
                    r.tdcf_la,
                    r.eer_pa,
                    r.tdcf_pa,
                    r.cumulative()
                );
            }
            out.push_str("# cumulative = EER_LA + EER_PA\n");
        }
        ReportFormat::PlotData => {
            let x: Vec<String> = rows.iter().map(|r| r.system.clone()).collect();
            let series = |f: &dyn Fn(&ReportRow) -> f64, err: bool| Series {
                x: x.clone(),
                y: rows.iter().map(f).collect(),
                yerr: err.then(|| rows.iter().map(|r| r.spread).collect()),
            };
            let data = PlotData {
                eer_la: series(&|r| r.eer_la, false),
                eer_pa: series(&|r| r.eer_pa, false),
                cumulative: series(&|r| r.cumulative(), true),
            };
            out = serde_json::to_string_pretty(&data).map_err(|e| Error::contract(e.to_string()))?;
            out.push('\n');
        }
    }
    Ok(out)
}

/// Inverse of the CSV form; the cumulative column is checked, not trusted.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::contract("report csv header mismatch"));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::contract(format!("report csv row `{l}` has {} fields", f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::contract(format!("bad number `{s}` in report csv")))
            };
            let row = ReportRow {
                system: f[0].to_owned(),
                eer_la: num(f[1])?,
                tdcf_la: num(f[2])?,
                eer_pa: num(f[3])?,
                tdcf_pa: num(f[4])?,
                spread: 0.0,
            };
            if row.cumulative() != num(f[5])? {
                return Err(Error::contract(format!("cumulative column disagrees in `{l}`")));
            }
            Ok(row)
        })
        .collect()
}
