use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{AblationReport, AblationRow, ExperimentReport, FoldResult, SweepReport, SweepRow};
use super::seed::{derive_seed, STREAM_INJECT, STREAM_SPLIT};
use super::train::{train_model, TrainRun, TrainedModel};
use crate::data::{Dataset, SurvivalRecord, TimeGrid};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::pipeline::preprocess::PreprocessStats;
use crate::pipeline::split::{kfold_split, FoldSplit};
use crate::pipeline::table::RawTable;

/// Encoded records of one fold, before any training-set modification.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecords {
    pub train: Vec<SurvivalRecord>,
    pub val: Vec<SurvivalRecord>,
    pub test: Vec<SurvivalRecord>,
}

/// Something that can be split into folds of encoded records.
pub trait FoldSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Censored share of all rows.
    fn censored_fraction(&self) -> f64;

    fn fold_records(&self, split: &FoldSplit) -> Result<FoldRecords>;
}

/// Preprocessing is fitted on each fold's training rows.
impl FoldSource for RawTable {
    fn len(&self) -> usize {
        RawTable::len(self)
    }

    fn censored_fraction(&self) -> f64 {
        self.num_censored() as f64 / RawTable::len(self).max(1) as f64
    }

    fn fold_records(&self, split: &FoldSplit) -> Result<FoldRecords> {
        let stats = PreprocessStats::fit(self, &split.train)?;
        Ok(FoldRecords {
            train: stats.apply(self, &split.train)?,
            val: stats.apply(self, &split.val)?,
            test: stats.apply(self, &split.test)?,
        })
    }
}

/// Records that are already numeric (e.g. synthetic data).
impl FoldSource for [SurvivalRecord] {
    fn len(&self) -> usize {
        <[SurvivalRecord]>::len(self)
    }

    fn censored_fraction(&self) -> f64 {
        self.iter().filter(|r| !r.observed).count() as f64 / <[SurvivalRecord]>::len(self).max(1) as f64
    }

    fn fold_records(&self, split: &FoldSplit) -> Result<FoldRecords> {
        let pick = |idx: &[usize]| idx.iter().map(|&i| self[i].clone()).collect();
        Ok(FoldRecords { train: pick(&split.train), val: pick(&split.val), test: pick(&split.test) })
    }
}

/// How censored training records are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringMode {
    WithCensored,
    NoCensored,
    DeathAtCensoring,
}

impl CensoringMode {
    pub fn all() -> [CensoringMode; 3] {
        [CensoringMode::WithCensored, CensoringMode::NoCensored, CensoringMode::DeathAtCensoring]
    }

    pub fn name(&self) -> &'static str {
        match self {
            CensoringMode::WithCensored => "with_censored",
            CensoringMode::NoCensored => "no_censored",
            CensoringMode::DeathAtCensoring => "death_at_censoring",
        }
    }

    /// Applies the mode to a training set.
    pub fn apply(&self, train: Vec<SurvivalRecord>) -> Vec<SurvivalRecord> {
        match self {
            CensoringMode::WithCensored => train,
            CensoringMode::NoCensored => train.into_iter().filter(|r| r.observed).collect(),
            CensoringMode::DeathAtCensoring => train
                .into_iter()
                .map(|mut r| {
                    r.observed = true;
                    r
                })
                .collect(),
        }
    }
}

impl std::str::FromStr for CensoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CensoringMode::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown censoring mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub l2: f64,
}

/// Learning rate {1e-2, 1e-3, 1e-4} × L2 {0, 1e-4, 1e-3, 1e-2}.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for learning_rate in [1e-2, 1e-3, 1e-4] {
        for l2 in [0.0, 1e-4, 1e-3, 1e-2] {
            grid.push(GridPoint { learning_rate, l2 });
        }
    }
    grid
}

#[derive(Deserialize)]
struct GridFile {
    learning_rate: Vec<f64>,
    l2: Vec<f64>,
}

/// Cartesian grid from TOML: `learning_rate = [...]` and `l2 = [...]`.
pub fn grid_from_toml_str(text: &str) -> Result<Vec<GridPoint>> {
    let file: GridFile = toml::from_str(text).map_err(|e| Error::Parse(format!("grid: {e}")))?;
    let grid: Vec<GridPoint> = file
        .learning_rate
        .iter()
        .flat_map(|&learning_rate| file.l2.iter().map(move |&l2| GridPoint { learning_rate, l2 }))
        .collect();
    if grid.is_empty() {
        return Err(Error::Parse("grid: no points".into()));
    }
    Ok(grid)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Vec<GridPoint>> {
    grid_from_toml_str(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub val_fraction: f64,
    pub bin_width: f64,
    pub seed: u64,
    pub grid: Vec<GridPoint>,
    /// Loss and training options; learning rate, L2 and seed are overridden per job.
    pub template: TrainRun,
    /// Record wall-clock seconds per fold in reports.
    pub timings: bool,
}

impl ExperimentConfig {
    pub fn new(template: TrainRun) -> Self {
        Self {
            k: 5,
            val_fraction: 0.2,
            bin_width: 1.0,
            seed: template.seed,
            grid: default_grid(),
            template,
            timings: false,
        }
    }

    pub fn splits(&self, n: usize) -> Result<Vec<FoldSplit>> {
        kfold_split(n, self.k, self.val_fraction, derive_seed(self.seed, STREAM_SPLIT, 0))
    }

    /// Training seed for fold `f`: shared by every grid point and setting.
    pub fn fold_seed(&self, fold: usize) -> u64 {
        derive_seed(self.seed, super::seed::STREAM_INIT, fold as u64)
    }
}

/// Datasets of one fold. The grid comes from the training times.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl FoldData {
    pub fn new(records: FoldRecords, bin_width: f64) -> Result<Self> {
        let times: Vec<f64> = records.train.iter().map(|r| r.time).collect();
        let grid = TimeGrid::from_times(&times, bin_width)?;
        Ok(Self {
            train: Dataset::new(records.train, grid)?,
            val: Dataset::for_inference(records.val, grid)?,
            test: Dataset::for_inference(records.test, grid)?,
        })
    }
}

/// The grid point chosen for one fold and its model.
#[derive(Debug, Clone)]
pub struct FoldSelection {
    pub point: GridPoint,
    pub model: TrainedModel,
    pub seconds: f64,
}

/// Trains every (fold, grid point) pair and keeps, per fold, the best
/// validation C-index; ties go to lower L2, then lower learning rate.
/// Diverged points are skipped.
pub fn grid_search(folds: &[FoldData], grid: &[GridPoint], config: &ExperimentConfig) -> Result<Vec<FoldSelection>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid search needs at least one grid point"));
    }
    let jobs: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..grid.len()).map(move |g| (f, g)))
        .collect();
    let results: Vec<(Result<TrainedModel>, f64)> = jobs
        .par_iter()
        .map(|&(f, g)| {
            let run = TrainRun {
                learning_rate: grid[g].learning_rate,
                l2_coefficient: grid[g].l2,
                seed: config.fold_seed(f),
                ..config.template.clone()
            };
            let start = Instant::now();
            let model = train_model(&run, &folds[f].train, &folds[f].val);
            (model, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut per_fold: Vec<Vec<(usize, Result<TrainedModel>, f64)>> = (0..folds.len()).map(|_| Vec::new()).collect();
    for (&(f, g), (model, secs)) in jobs.iter().zip(results) {
        per_fold[f].push((g, model, secs));
    }

    per_fold
        .into_iter()
        .enumerate()
        .map(|(f, candidates)| {
            let total_secs: f64 = candidates.iter().map(|c| c.2).sum();
            let mut best: Option<(usize, TrainedModel)> = None;
            let mut failures = Vec::new();
            for (g, model, _) in candidates {
                match model {
                    Ok(m) => {
                        let better = match &best {
                            None => true,
                            Some((bg, bm)) => prefer(
                                (m.history.best_val_c_index, grid[g]),
                                (bm.history.best_val_c_index, grid[*bg]),
                            ),
                        };
                        if better {
                            best = Some((g, m));
                        }
                    }
                    Err(e @ Error::TrainingDiverged { .. }) => failures.push(e.to_string()),
                    Err(e) => return Err(e),
                }
            }
            let (g, model) = best.ok_or_else(|| {
                Error::ExperimentFailed(format!("fold {f}: every grid point diverged ({})", failures.join("; ")))
            })?;
            Ok(FoldSelection { point: grid[g], model, seconds: total_secs })
        })
        .collect()
}

fn prefer(a: (f64, GridPoint), b: (f64, GridPoint)) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    if a.1.l2 != b.1.l2 {
        return a.1.l2 < b.1.l2;
    }
    a.1.learning_rate < b.1.learning_rate
}

/// Encodes every fold of `source` and applies `modify` to each training set.
pub fn build_folds<F>(source: &(impl FoldSource + ?Sized), config: &ExperimentConfig, modify: F) -> Result<Vec<FoldData>>
where
    F: Fn(usize, Vec<SurvivalRecord>) -> Result<Vec<SurvivalRecord>>,
{
    config
        .splits(source.len())?
        .iter()
        .enumerate()
        .map(|(f, split)| {
            let mut records = source.fold_records(split)?;
            records.train = modify(f, records.train)?;
            FoldData::new(records, config.bin_width)
        })
        .collect()
}

/// k-fold cross-validation with a per-fold grid search.
pub fn run_cv(source: &(impl FoldSource + ?Sized), config: &ExperimentConfig) -> Result<ExperimentReport> {
    let folds = build_folds(source, config, |_, train| Ok(train))?;
    cv_on_folds(&folds, config)
}

pub fn cv_on_folds(folds: &[FoldData], config: &ExperimentConfig) -> Result<ExperimentReport> {
    let selections = grid_search(folds, &config.grid, config)?;
    let rows = folds
        .iter()
        .zip(&selections)
        .enumerate()
        .map(|(f, (fold, sel))| {
            Ok(FoldResult {
                fold: f,
                val_c_index: sel.model.history.best_val_c_index,
                test_c_index: sel.model.c_index(&fold.test)?,
                learning_rate: sel.point.learning_rate,
                l2: sel.point.l2,
                best_epoch: sel.model.history.best_epoch,
                seconds: config.timings.then_some(sel.seconds),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(config.template.loss.kind.name(), rows))
}

/// Cross-validation for every (loss, censoring mode) combination on the same folds.
pub fn censoring_ablation(
    source: &(impl FoldSource + ?Sized),
    losses: &[LossKind],
    modes: &[CensoringMode],
    config: &ExperimentConfig,
) -> Result<AblationReport> {
    if source.censored_fraction() == 0.0 {
        return Err(Error::invalid("censoring ablation needs censored records"));
    }
    let mut rows = Vec::new();
    for &mode in modes {
        let folds = build_folds(source, config, |_, train| Ok(mode.apply(train)))?;
        for &kind in losses {
            let mut cfg = config.clone();
            cfg.template.loss.kind = kind;
            let report = cv_on_folds(&folds, &cfg)?;
            rows.push(AblationRow { loss: kind.name().to_owned(), mode, report });
        }
    }
    Ok(AblationReport { rows })
}

/// Converts observed training records to censored so that the overall
/// censored fraction would reach `fraction`: each fold converts the share
/// `(fraction - native) / (1 - native)` of its observed training records,
/// each censored at a uniform time in `(0, event time)`.
pub fn inject_censoring(
    train: Vec<SurvivalRecord>,
    fraction: f64,
    native: f64,
    seed: u64,
) -> Result<Vec<SurvivalRecord>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("censoring fraction {fraction} not in [0, 1]")));
    }
    if fraction < native {
        return Err(Error::invalid(format!(
            "requested censoring fraction {fraction} is below the native fraction {native:.4}"
        )));
    }
    let share = if native >= 1.0 { 0.0 } else { (fraction - native) / (1.0 - native) };
    let mut observed: Vec<usize> = (0..train.len()).filter(|&i| train[i].observed).collect();
    let convert = ((share * observed.len() as f64).round() as usize).min(observed.len());
    if convert == 0 {
        return Ok(train);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    observed.shuffle(&mut rng);
    let mut chosen = observed[..convert].to_vec();
    chosen.sort_unstable();
    let mut train = train;
    for i in chosen {
        let u: f64 = rng.random();
        let r = &mut train[i];
        r.time *= u;
        r.observed = false;
    }
    Ok(train)
}

/// One cross-validation per requested censoring fraction.
pub fn censoring_sweep(
    source: &(impl FoldSource + ?Sized),
    fractions: &[f64],
    config: &ExperimentConfig,
) -> Result<SweepReport> {
    let native = source.censored_fraction();
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let folds = build_folds(source, config, |f, train| {
            inject_censoring(train, fraction, native, derive_seed(config.seed, STREAM_INJECT, f as u64))
        })?;
        let report = cv_on_folds(&folds, config)?;
        rows.push(SweepRow { fraction, report });
    }
    Ok(SweepReport { loss: config.template.loss.kind.name().to_owned(), rows })
}
