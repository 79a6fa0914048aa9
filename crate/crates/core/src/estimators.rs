//! Kaplan–Meier estimation on the time grid and target CDFs for the
//! distribution-matching loss, including imputation of censored targets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SurvivalRecord, TimeGrid};
use crate::error::{Error, Result};

/// Product-limit survival estimate, one value per grid bin taken at the
/// bin's right edge (after that bin's events).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierCurve {
    pub grid: TimeGrid,
    pub survival: Vec<f64>,
    pub event_counts: Vec<usize>,
    pub at_risk: Vec<usize>,
}

/// How a censored record's target CDF is filled in from the KM curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMode {
    /// `1 - S(t)/S(k)` after the censoring bin `k`: KM conditioned on survival to `k`.
    #[default]
    Conditional,
    /// The raw `1 - S(t)` curve, zeroed at and before the censoring bin.
    Global,
}

impl std::str::FromStr for ImputeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(Self::Conditional),
            "global" => Ok(Self::Global),
            other => Err(Error::invalid(format!("unknown KM imputation mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    pub cdf: Vec<f64>,
    pub is_imputed: bool,
}

impl TargetDistribution {
    /// Step CDF with all mass at `bin`.
    pub fn dirac(bin: usize, num_bins: usize) -> Self {
        let cdf = (0..num_bins).map(|t| if t >= bin { 1.0 } else { 0.0 }).collect();
        Self { cdf, is_imputed: false }
    }
}

/// Kaplan–Meier curve over the dataset's grid bins.
///
/// Records binned together are tied: all events in a bin form one step with
/// the risk set counted before any of them leave, and records censored in a
/// bin are still at risk for that bin's events.
pub fn kaplan_meier(dataset: &Dataset) -> Result<KaplanMeierCurve> {
    if dataset.is_empty() {
        return Err(Error::invalid("Kaplan-Meier needs at least one record"));
    }
    let grid = *dataset.grid();
    let num_bins = grid.num_bins();
    let mut events = vec![0usize; num_bins];
    let mut censored = vec![0usize; num_bins];
    for (r, &bin) in dataset.records().iter().zip(dataset.bins()) {
        if r.observed {
            events[bin] += 1;
        } else {
            censored[bin] += 1;
        }
    }

    let mut survival = Vec::with_capacity(num_bins);
    let mut at_risk = Vec::with_capacity(num_bins);
    let mut remaining = dataset.len();
    // The product of (n_k - d_k)/n_k telescopes across bins without
    // censoring, so each censoring-free run is evaluated with one division.
    let mut base = 1.0f64;
    let mut run_start_at_risk = remaining;
    for k in 0..num_bins {
        let n = remaining;
        let d = events[k];
        at_risk.push(n);
        let s = if run_start_at_risk == 0 {
            base
        } else {
            base * ((n - d) as f64 / run_start_at_risk as f64)
        };
        survival.push(s);
        remaining = n - d - censored[k];
        if censored[k] > 0 {
            base = s;
            run_start_at_risk = remaining;
        }
    }

    Ok(KaplanMeierCurve { grid, survival, event_counts: events, at_risk })
}

impl KaplanMeierCurve {
    pub fn num_bins(&self) -> usize {
        self.survival.len()
    }

    /// CSV with columns `bin_left_edge,survival,events,at_risk`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_left_edge", "survival", "events", "at_risk"])?;
        for k in 0..self.num_bins() {
            w.write_record([
                self.grid.left_edge(k).to_string(),
                self.survival[k].to_string(),
                self.event_counts[k].to_string(),
                self.at_risk[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Target CDF for one record: a step at the event bin when observed,
/// a KM-derived CDF after the censoring bin otherwise.
pub fn impute_target_cdf(
    record: &SurvivalRecord,
    km: &KaplanMeierCurve,
    mode: ImputeMode,
) -> Result<TargetDistribution> {
    let bin = km.grid.bin_index_exact(record.time).ok_or_else(|| {
        Error::invalid(format!("record time {} lies outside the KM grid", record.time))
    })?;
    Ok(target_for_bin(bin, record.observed, km, mode))
}

/// Same as [`impute_target_cdf`] for a record already binned.
pub fn target_for_bin(
    bin: usize,
    observed: bool,
    km: &KaplanMeierCurve,
    mode: ImputeMode,
) -> TargetDistribution {
    let num_bins = km.num_bins();
    if observed {
        return TargetDistribution::dirac(bin, num_bins);
    }
    let mut cdf = vec![0.0; num_bins];
    match mode {
        ImputeMode::Conditional => {
            let at_censoring = km.survival[bin];
            for (c, s) in cdf.iter_mut().zip(&km.survival).skip(bin + 1) {
                *c = if at_censoring > 0.0 { (1.0 - s / at_censoring).clamp(0.0, 1.0) } else { 1.0 };
            }
        }
        ImputeMode::Global => {
            let mut running = 0.0f64;
            for (t, (c, s)) in cdf.iter_mut().zip(&km.survival).enumerate() {
                running = running.max(1.0 - s);
                if t > bin {
                    *c = running.clamp(0.0, 1.0);
                }
            }
        }
    }
    TargetDistribution { cdf, is_imputed: true }
}

/// Targets for every record of a training set.
pub fn targets_for_dataset(
    dataset: &Dataset,
    km: &KaplanMeierCurve,
    mode: ImputeMode,
) -> Vec<TargetDistribution> {
    dataset
        .records()
        .iter()
        .zip(dataset.bins())
        .map(|(r, &bin)| target_for_bin(bin.min(km.num_bins() - 1), r.observed, km, mode))
        .collect()
}
