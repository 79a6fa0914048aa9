//! Experiment reports and their CSV / JSON encodings.
//!
//! Numbers are written in shortest round-trip form in both encodings, so a
//! value read back from either file is bit-identical to the original.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::CensoringMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::invalid(format!("unknown report format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub val_c_index: f64,
    pub test_c_index: f64,
    pub learning_rate: f64,
    pub l2: f64,
    pub best_epoch: usize,
    /// Training time for the fold's whole grid, when timings are requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub loss: String,
    pub folds: Vec<FoldResult>,
    /// Mean test C-index over folds.
    pub mean: f64,
    /// Sample standard deviation over folds divided by sqrt(k).
    pub std_error: f64,
    pub mean_val_c_index: f64,
}

impl ExperimentReport {
    pub fn new(loss: &str, folds: Vec<FoldResult>) -> Self {
        let test: Vec<f64> = folds.iter().map(|f| f.test_c_index).collect();
        let val: Vec<f64> = folds.iter().map(|f| f.val_c_index).collect();
        let (mean, std_error) = mean_and_std_error(&test);
        let (mean_val_c_index, _) = mean_and_std_error(&val);
        Self { loss: loss.to_owned(), folds, mean, std_error, mean_val_c_index }
    }
}

/// Mean and `std / sqrt(k)` with the `k - 1` denominator (0 for a single value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, var.sqrt() / (k as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub loss: String,
    pub mode: CensoringMode,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn get(&self, loss: &str, mode: CensoringMode) -> Option<&ExperimentReport> {
        self.rows.iter().find(|r| r.loss == loss && r.mode == mode).map(|r| &r.report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub loss: String,
    pub rows: Vec<SweepRow>,
}

pub trait Report: Serialize {
    fn write_csv<W: Write>(&self, out: W) -> Result<()>;
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl Report for ExperimentReport {
    /// One row per fold, then an `aggregate` row holding means and the standard error.
    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let timed = self.folds.iter().any(|f| f.seconds.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "row", "loss", "fold", "val_c_index", "test_c_index", "std_error", "learning_rate", "l2", "best_epoch",
        ];
        if timed {
            header.push("seconds");
        }
        w.write_record(&header)?;
        for f in &self.folds {
            let mut row = vec![
                "fold".to_owned(),
                self.loss.clone(),
                f.fold.to_string(),
                num(f.val_c_index),
                num(f.test_c_index),
                String::new(),
                num(f.learning_rate),
                num(f.l2),
                f.best_epoch.to_string(),
            ];
            if timed {
                row.push(f.seconds.map(num).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        let mut agg = vec![
            "aggregate".to_owned(),
            self.loss.clone(),
            String::new(),
            num(self.mean_val_c_index),
            num(self.mean),
            num(self.std_error),
            String::new(),
            String::new(),
            String::new(),
        ];
        if timed {
            agg.push(String::new());
        }
        w.write_record(&agg)?;
        w.flush()?;
        Ok(())
    }
}

impl Report for AblationReport {
    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["loss", "mode", "mean", "std_error"])?;
        for r in &self.rows {
            w.write_record([r.loss.clone(), r.mode.name().to_owned(), num(r.report.mean), num(r.report.std_error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Report for SweepReport {
    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fraction", "mean", "std_error"])?;
        for r in &self.rows {
            w.write_record([num(r.fraction), num(r.report.mean), num(r.report.std_error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn emit_report<R: Report, W: Write>(report: &R, format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::Csv => report.write_csv(out),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn save_report<R: Report>(report: &R, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    emit_report(report, format, std::io::BufWriter::new(file))
}
