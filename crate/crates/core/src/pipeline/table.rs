use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, DatasetSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Continuous(v) => v[row].is_none(),
            ColumnData::Categorical(v) => v[row].is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub data: ColumnData,
}

/// Typed rows before encoding: raw feature columns plus time and event.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<FeatureColumn>,
    pub times: Vec<f64>,
    pub observed: Vec<bool>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_censored(&self) -> usize {
        self.observed.iter().filter(|&&o| !o).count()
    }

    pub fn num_unique_times(&self) -> usize {
        let mut t = self.times.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t.len()
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema)
}

const MAX_REPORTED_ROWS: usize = 10;

/// Parses delimited text; row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(input: R, schema: &DatasetSchema) -> Result<RawTable> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();

    for spec in &schema.columns {
        if !header.iter().any(|h| h == &spec.name) {
            return Err(Error::Parse(format!(
                "column '{}' declared in the schema is missing from the CSV header",
                spec.name
            )));
        }
    }

    // (csv position, schema column) for every used column, in header order
    let used: Vec<(usize, &super::schema::ColumnSpec)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| schema.column(h).map(|s| (i, s)))
        .collect();
    let mut columns: Vec<FeatureColumn> = used
        .iter()
        .filter_map(|(_, s)| match s.kind {
            ColumnKind::Continuous => Some(FeatureColumn {
                name: s.name.clone(),
                data: ColumnData::Continuous(Vec::new()),
            }),
            ColumnKind::Categorical => Some(FeatureColumn {
                name: s.name.clone(),
                data: ColumnData::Categorical(Vec::new()),
            }),
            _ => None,
        })
        .collect();

    let mut times = Vec::new();
    let mut observed = Vec::new();
    let mut bad_rows: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let mut feature = 0;
        let mut time = None;
        let mut event = None;
        let mut row_errors = Vec::new();
        for &(pos, spec) in &used {
            let raw = record.get(pos).unwrap_or("").trim();
            let missing = schema.is_missing(spec, raw);
            match spec.kind {
                ColumnKind::Time => match raw.parse::<f64>() {
                    Ok(t) if !missing && t.is_finite() && t >= 0.0 => time = Some(t),
                    _ => row_errors.push(format!("time '{raw}'")),
                },
                ColumnKind::EventIndicator => match parse_event(raw) {
                    Some(e) if !missing => event = Some(e),
                    _ => row_errors.push(format!("event '{raw}'")),
                },
                ColumnKind::Continuous => {
                    let value = if missing {
                        None
                    } else {
                        match raw.parse::<f64>() {
                            Ok(v) if v.is_finite() => Some(v),
                            _ => {
                                row_errors.push(format!("{} '{raw}'", spec.name));
                                None
                            }
                        }
                    };
                    if let ColumnData::Continuous(v) = &mut columns[feature].data {
                        v.push(value);
                    }
                    feature += 1;
                }
                ColumnKind::Categorical => {
                    let value = (!missing).then(|| raw.to_owned());
                    if let ColumnData::Categorical(v) = &mut columns[feature].data {
                        v.push(value);
                    }
                    feature += 1;
                }
            }
        }
        match (time, event) {
            (Some(t), Some(e)) if row_errors.is_empty() => {
                times.push(t);
                observed.push(e);
            }
            _ => bad_rows.push(format!("row {row}: {}", row_errors.join(", "))),
        }
    }
    if !bad_rows.is_empty() {
        let shown: Vec<&str> = bad_rows.iter().take(MAX_REPORTED_ROWS).map(String::as_str).collect();
        let more = bad_rows.len().saturating_sub(MAX_REPORTED_ROWS);
        let suffix = if more > 0 { format!(" (and {more} more)") } else { String::new() };
        return Err(Error::Parse(format!(
            "{} malformed rows: {}{suffix}",
            bad_rows.len(),
            shown.join("; ")
        )));
    }
    Ok(RawTable { columns, times, observed })
}

fn parse_event(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" => Some(true),
        "0" | "0.0" | "false" | "no" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::schema::ColumnSpec;

    fn schema() -> DatasetSchema {
        let col = |name: &str, kind| ColumnSpec { name: name.into(), kind, missing: vec![] };
        DatasetSchema::new(vec![
            col("time", ColumnKind::Time),
            col("event", ColumnKind::EventIndicator),
            col("age", ColumnKind::Continuous),
            col("sex", ColumnKind::Categorical),
        ])
        .unwrap()
    }

    #[test]
    fn reads_toy_csv() {
        let text = "id,time,event,age,sex\n1,10,1,50,m\n2,20.5,0,NA,f\n3,3,1,61.5,\n";
        let t = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.times, vec![10.0, 20.5, 3.0]);
        assert_eq!(t.observed, vec![true, false, true]);
        assert_eq!(t.num_censored(), 1);
        assert_eq!(t.columns.len(), 2);
        assert_eq!(t.columns[0].data, ColumnData::Continuous(vec![Some(50.0), None, Some(61.5)]));
        assert_eq!(
            t.columns[1].data,
            ColumnData::Categorical(vec![Some("m".into()), Some("f".into()), None])
        );
    }

    #[test]
    fn missing_time_column_is_named() {
        let text = "event,age,sex\n1,50,m\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("'time'"), "{err}");
    }

    #[test]
    fn malformed_rows_are_listed() {
        let text = "time,event,age,sex\n1,1,2,a\nabc,1,2,a\n3,maybe,2,a\n-4,0,1,b\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err().to_string();
        assert!(err.contains("3 malformed rows"), "{err}");
        assert!(err.contains("row 2") && err.contains("row 3") && err.contains("row 4"), "{err}");
    }

    #[test]
    fn quoted_fields_and_custom_delimiter() {
        let mut s = schema();
        s.delimiter = b';';
        let text = "time;event;age;sex\n1;1;2;\"a;b\"\n";
        let t = read_csv(text.as_bytes(), &s).unwrap();
        assert_eq!(t.columns[1].data, ColumnData::Categorical(vec![Some("a;b".into())]));
    }
}
