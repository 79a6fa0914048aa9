//! Training with early stopping, grid search, cross-validation, censoring
//! experiments and reports.

pub mod experiment;
pub mod report;
pub mod seed;
pub mod train;

pub use experiment::{
    build_folds, censoring_ablation, censoring_sweep, cv_on_folds, default_grid, grid_from_toml_str, grid_search,
    inject_censoring, load_grid, run_cv, CensoringMode, ExperimentConfig, FoldData, FoldRecords, FoldSelection,
    FoldSource, GridPoint,
};
pub use report::{
    emit_report, mean_and_std_error, save_report, AblationReport, AblationRow, ExperimentReport, FoldResult, Report,
    ReportFormat, SweepReport, SweepRow,
};
pub use seed::derive_seed;
pub use train::{minibatches, score_outputs, train_model, EarlyStopping, StopDecision, TrainHistory, TrainRun, TrainedModel, WmScore};
