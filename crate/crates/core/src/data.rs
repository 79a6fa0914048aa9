//! Survival records, the discrete time grid and datasets binned on it.
//!
//! Bins are left-closed and right-open: bin `k` covers
//! `[origin + k*w, origin + (k+1)*w)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: preprocessed features, event-or-censoring time (days) and
/// whether the event was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub features: Vec<f64>,
    pub time: f64,
    pub observed: bool,
}

impl SurvivalRecord {
    pub fn new(features: Vec<f64>, time: f64, observed: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::invalid(format!("record time must be finite and >= 0, got {time}")));
        }
        Ok(Self { features, time, observed })
    }

    /// The 0/1 event indicator (1 = observed).
    pub fn event_indicator(&self) -> u8 {
        u8::from(self.observed)
    }

    pub fn from_indicator(features: Vec<f64>, time: f64, indicator: u8) -> Result<Self> {
        match indicator {
            0 | 1 => Self::new(features, time, indicator == 1),
            other => Err(Error::invalid(format!("event indicator must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    bin_width: f64,
    num_bins: usize,
    origin: f64,
}

impl TimeGrid {
    pub fn new(bin_width: f64, num_bins: usize, origin: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
        }
        if num_bins == 0 {
            return Err(Error::invalid("a time grid needs at least one bin"));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self { bin_width, num_bins, origin })
    }

    /// Smallest origin-0 grid of the given width covering every time.
    pub fn from_times(times: &[f64], bin_width: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("cannot build a time grid from no times"));
        }
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
        }
        let mut max = 0.0f64;
        for &t in times {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::invalid(format!("times must be finite and >= 0, got {t}")));
            }
            max = max.max(t);
        }
        let num_bins = (max / bin_width).floor() as usize + 1;
        Self::new(bin_width, num_bins, 0.0)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn left_edge(&self, bin: usize) -> f64 {
        self.origin + bin as f64 * self.bin_width
    }

    /// Bin of `time`, clamped into `[0, T-1]`.
    pub fn bin_index(&self, time: f64) -> Result<usize> {
        if time.is_nan() || time < 0.0 {
            return Err(Error::invalid(format!("time must be >= 0, got {time}")));
        }
        Ok(self.raw_bin(time).min(self.num_bins - 1))
    }

    /// Bin of `time` without clamping; `None` when it falls outside the grid.
    pub fn bin_index_exact(&self, time: f64) -> Option<usize> {
        if time.is_nan() || time < self.origin {
            return None;
        }
        let k = self.raw_bin(time);
        (k < self.num_bins).then_some(k)
    }

    fn raw_bin(&self, time: f64) -> usize {
        let k = ((time - self.origin) / self.bin_width).floor();
        if k <= 0.0 {
            0
        } else if k >= usize::MAX as f64 {
            usize::MAX
        } else {
            k as usize
        }
    }
}

/// Records binned on a grid. Training sets must fit the grid exactly;
/// held-out sets may be built with [`Dataset::for_inference`], which clamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    grid: TimeGrid,
    bins: Vec<usize>,
}

impl Dataset {
    pub fn new(records: Vec<SurvivalRecord>, grid: TimeGrid) -> Result<Self> {
        check_feature_widths(&records)?;
        let bins = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                grid.bin_index_exact(r.time).ok_or_else(|| {
                    Error::invalid(format!(
                        "record {i} has time {} outside the grid ({} bins of width {})",
                        r.time,
                        grid.num_bins(),
                        grid.bin_width()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, grid, bins })
    }

    /// Builds a dataset whose grid is derived from its own times.
    pub fn from_records(records: Vec<SurvivalRecord>, bin_width: f64) -> Result<Self> {
        let times: Vec<f64> = records.iter().map(|r| r.time).collect();
        let grid = TimeGrid::from_times(&times, bin_width)?;
        Self::new(records, grid)
    }

    /// Held-out data on a grid fitted elsewhere; late times clamp to the last bin.
    pub fn for_inference(records: Vec<SurvivalRecord>, grid: TimeGrid) -> Result<Self> {
        check_feature_widths(&records)?;
        let bins = records
            .iter()
            .map(|r| grid.bin_index(r.time))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, grid, bins })
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SurvivalRecord> {
        self.records
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn observed(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.observed).collect()
    }

    pub fn num_observed(&self) -> usize {
        self.records.iter().filter(|r| r.observed).count()
    }

    pub fn num_features(&self) -> usize {
        self.records.first().map_or(0, |r| r.features.len())
    }

    pub fn feature_matrix(&self) -> Array2<f64> {
        feature_matrix(&self.records, self.num_features())
    }

    /// Subset by index, keeping this dataset's grid and clamping rule.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            grid: self.grid,
            bins: indices.iter().map(|&i| self.bins[i]).collect(),
        }
    }
}

pub(crate) fn feature_matrix(records: &[SurvivalRecord], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((records.len(), width));
    for (mut row, r) in m.rows_mut().into_iter().zip(records) {
        for (dst, &src) in row.iter_mut().zip(&r.features) {
            *dst = src;
        }
    }
    m
}

fn check_feature_widths(records: &[SurvivalRecord]) -> Result<()> {
    if let Some(first) = records.first() {
        let width = first.features.len();
        if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.features.len() != width) {
            return Err(Error::invalid(format!(
                "record {i} has {} features, expected {width}",
                r.features.len()
            )));
        }
    }
    for (i, r) in records.iter().enumerate() {
        if !r.time.is_finite() || r.time < 0.0 {
            return Err(Error::invalid(format!("record {i} has invalid time {}", r.time)));
        }
    }
    Ok(())
}
