//! Feature encoding fitted on a training fold: min-max scaling for
//! continuous columns, one-hot for categorical ones, and one missing-value
//! indicator per column that had gaps in the training rows.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::table::{ColumnData, RawTable};
use crate::data::SurvivalRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnStats {
    Continuous { name: String, min: f64, max: f64, missing_indicator: bool },
    Categorical { name: String, levels: Vec<String>, missing_indicator: bool },
}

impl ColumnStats {
    fn width(&self) -> usize {
        match self {
            ColumnStats::Continuous { missing_indicator, .. } => 1 + usize::from(*missing_indicator),
            ColumnStats::Categorical { levels, missing_indicator, .. } => {
                levels.len() + usize::from(*missing_indicator)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub columns: Vec<ColumnStats>,
}

impl PreprocessStats {
    /// Learns scaling ranges, vocabularies and indicator flags from `rows`.
    pub fn fit(table: &RawTable, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot fit preprocessing on zero rows"));
        }
        let mut columns = Vec::with_capacity(table.columns.len());
        for col in &table.columns {
            let missing_indicator = rows.iter().any(|&r| col.data.is_missing(r));
            let stats = match &col.data {
                ColumnData::Continuous(values) => {
                    let present = rows.iter().filter_map(|&r| values[r]);
                    let (min, max) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                    if min > max {
                        return Err(Error::invalid(format!(
                            "column '{}' has no values in the training rows",
                            col.name
                        )));
                    }
                    ColumnStats::Continuous { name: col.name.clone(), min, max, missing_indicator }
                }
                ColumnData::Categorical(values) => {
                    let levels: BTreeSet<&str> =
                        rows.iter().filter_map(|&r| values[r].as_deref()).collect();
                    if levels.is_empty() {
                        return Err(Error::invalid(format!(
                            "column '{}' has no levels in the training rows",
                            col.name
                        )));
                    }
                    ColumnStats::Categorical {
                        name: col.name.clone(),
                        levels: levels.into_iter().map(str::to_owned).collect(),
                        missing_indicator,
                    }
                }
            };
            columns.push(stats);
        }
        Ok(Self { columns })
    }

    pub fn num_features(&self) -> usize {
        self.columns.iter().map(ColumnStats::width).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_features());
        for c in &self.columns {
            match c {
                ColumnStats::Continuous { name, missing_indicator, .. } => {
                    names.push(name.clone());
                    if *missing_indicator {
                        names.push(format!("{name}__missing"));
                    }
                }
                ColumnStats::Categorical { name, levels, missing_indicator } => {
                    names.extend(levels.iter().map(|l| format!("{name}={l}")));
                    if *missing_indicator {
                        names.push(format!("{name}__missing"));
                    }
                }
            }
        }
        names
    }

    /// Encodes `rows` with these statistics.
    pub fn apply(&self, table: &RawTable, rows: &[usize]) -> Result<Vec<SurvivalRecord>> {
        if self.columns.len() != table.columns.len() {
            return Err(Error::invalid("preprocessing statistics do not match the table"));
        }
        let width = self.num_features();
        rows.iter()
            .map(|&r| {
                let mut features = Vec::with_capacity(width);
                for (stats, col) in self.columns.iter().zip(&table.columns) {
                    match (stats, &col.data) {
                        (ColumnStats::Continuous { min, max, missing_indicator, .. }, ColumnData::Continuous(v)) => {
                            let scaled = match v[r] {
                                Some(x) if max > min => (x - min) / (max - min),
                                _ => 0.0,
                            };
                            features.push(scaled);
                            if *missing_indicator {
                                features.push(if v[r].is_none() { 1.0 } else { 0.0 });
                            }
                        }
                        (ColumnStats::Categorical { levels, missing_indicator, .. }, ColumnData::Categorical(v)) => {
                            let value = v[r].as_deref();
                            features.extend(levels.iter().map(|l| {
                                if value == Some(l.as_str()) {
                                    1.0
                                } else {
                                    0.0
                                }
                            }));
                            if *missing_indicator {
                                features.push(if value.is_none() { 1.0 } else { 0.0 });
                            }
                        }
                        _ => {
                            return Err(Error::invalid(format!(
                                "column '{}' changed kind since fitting",
                                col.name
                            )))
                        }
                    }
                }
                SurvivalRecord::new(features, table.times[r], table.observed[r])
            })
            .collect()
    }
}

/// Fits on `rows` when `stats` is `None`, then encodes `rows`.
pub fn preprocess(
    table: &RawTable,
    rows: &[usize],
    stats: Option<&PreprocessStats>,
) -> Result<(Vec<SurvivalRecord>, PreprocessStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => PreprocessStats::fit(table, rows)?,
    };
    let records = stats.apply(table, rows)?;
    Ok((records, stats))
}

/// Writes encoded records as CSV: feature columns, then `time,event`.
pub fn write_features_csv<W: Write>(
    out: W,
    names: &[String],
    records: &[SurvivalRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = names.to_vec();
    header.push("time".into());
    header.push("event".into());
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.time.to_string());
        row.push(r.event_indicator().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
