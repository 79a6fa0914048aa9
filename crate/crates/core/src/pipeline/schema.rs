//! Dataset schema files.
//!
//! A schema is a small TOML document:
//!
//! ```toml
//! delimiter = ","          # optional, single byte, default ","
//! missing = ["", "NA"]     # optional global missing-value sentinels
//!
//! [columns]
//! time = "time"            # exactly one time column (days)
//! event = "event_indicator" # exactly one event column: 1/0, true/false, yes/no
//! age = "continuous"
//! sex = "categorical"
//! income = { kind = "categorical", missing = ["?"] }  # per-column sentinels
//! ```
//!
//! CSV columns not named in the schema are ignored. Feature order follows
//! the CSV header.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    Time,
    EventIndicator,
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Self::Continuous),
            "categorical" => Ok(Self::Categorical),
            "time" => Ok(Self::Time),
            "event_indicator" | "event" => Ok(Self::EventIndicator),
            other => Err(Error::Parse(format!("unknown column kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Extra sentinels for this column, on top of the schema-wide ones.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub delimiter: u8,
    pub missing: Vec<String>,
    pub columns: Vec<ColumnSpec>,
}

impl DatasetSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { delimiter: b',', missing: vec![String::new(), "NA".into()], columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let count = |kind| self.columns.iter().filter(|c| c.kind == kind).count();
        if count(ColumnKind::Time) != 1 {
            return Err(Error::Parse("schema needs exactly one time column".into()));
        }
        if count(ColumnKind::EventIndicator) != 1 {
            return Err(Error::Parse("schema needs exactly one event_indicator column".into()));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn is_missing(&self, spec: &ColumnSpec, value: &str) -> bool {
        let v = value.trim();
        self.missing.iter().any(|m| m == v) || spec.missing.iter().any(|m| m == v)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(format!("schema: {e}")))?;
        let delimiter = match doc.get("delimiter") {
            None => b',',
            Some(toml::Value::String(s)) if s.len() == 1 => s.as_bytes()[0],
            Some(toml::Value::String(s)) if s == "\\t" || s == "tab" => b'\t',
            Some(other) => {
                return Err(Error::Parse(format!("schema: delimiter must be one byte, got {other}")))
            }
        };
        let missing = match doc.get("missing") {
            None => vec![String::new(), "NA".into()],
            Some(v) => string_list(v, "missing")?,
        };
        let columns_table = doc
            .get("columns")
            .and_then(|v| v.as_table())
            .ok_or_else(|| Error::Parse("schema: missing [columns] table".into()))?;
        let mut columns = Vec::with_capacity(columns_table.len());
        for (name, value) in columns_table {
            let (kind, missing) = match value {
                toml::Value::String(kind) => (kind.parse()?, Vec::new()),
                toml::Value::Table(t) => {
                    let kind = t
                        .get("kind")
                        .and_then(|k| k.as_str())
                        .ok_or_else(|| Error::Parse(format!("schema: column '{name}' has no kind")))?
                        .parse()?;
                    let missing = match t.get("missing") {
                        Some(v) => string_list(v, name)?,
                        None => Vec::new(),
                    };
                    (kind, missing)
                }
                other => {
                    return Err(Error::Parse(format!("schema: column '{name}' has invalid entry {other}")))
                }
            };
            columns.push(ColumnSpec { name: name.clone(), kind, missing });
        }
        let schema = Self { delimiter, missing, columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn string_list(v: &toml::Value, what: &str) -> Result<Vec<String>> {
    match v {
        toml::Value::String(s) => Ok(vec![s.clone()]),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| Error::Parse(format!("schema: '{what}' sentinels must be strings")))
            })
            .collect(),
        _ => Err(Error::Parse(format!("schema: '{what}' must be a string or list of strings"))),
    }
}
