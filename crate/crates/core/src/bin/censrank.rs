use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use censrank::data::{Dataset, SurvivalRecord, TimeGrid};
use censrank::error::{Error, Result};
use censrank::estimators::{kaplan_meier, ImputeMode};
use censrank::harness::{
    censoring_ablation, censoring_sweep, default_grid, emit_report, load_grid, run_cv, train_model, CensoringMode,
    ExperimentConfig, FoldData, FoldRecords, Report, ReportFormat, TrainRun, WmScore,
};
use censrank::losses::{LossConfig, LossKind, RankSign, WmWeighting};
use censrank::metrics::{c_index, ScoreVector};
use censrank::neural::save_checkpoint;
use censrank::pipeline::{
    generate_records, load_csv, preprocess, train_val_split, write_features_csv, DatasetSchema, PreprocessStats,
    RawTable, SyntheticConfig,
};

#[derive(Parser)]
#[command(name = "censrank", version, about = "Ranking models for right-censored survival data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kaplan-Meier curve of a dataset as CSV.
    Km {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1.0)]
        bin_width: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model on a train/validation split and save a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Also write scores for every row (column `score`, higher = later event).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// C-index of a scores CSV against a dataset.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// CSV with a `score` column, one row per dataset row.
        #[arg(long)]
        scores: PathBuf,
        /// Treat scores as risks (higher = earlier event).
        #[arg(long)]
        risk: bool,
    },
    /// k-fold cross-validation with a per-fold grid search.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        experiment: ExperimentArgs,
    },
    /// Cross-validation of several losses under each censoring treatment.
    AblateCensoring {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "wm,rank-sigmoid,cox-efron")]
        losses: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "with_censored,no_censored,death_at_censoring")]
        modes: Vec<String>,
    },
    /// Cross-validation at increasing censoring fractions.
    SweepCensoring {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        fractions: Vec<f64>,
    },
    /// Generate a synthetic dataset and its schema.
    Synth {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 0.3)]
        censor_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        tie_density: f64,
        #[arg(long, default_value_t = 2.0)]
        signal: f64,
        #[arg(long, default_value_t = 1.0)]
        shape: f64,
        #[arg(long, default_value_t = 365.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; the schema is written next to it with a `.toml` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a dataset (one-hot, scaling, missing indicators) and write it as CSV.
    Preprocess {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<RawTable> {
        let schema = DatasetSchema::from_path(&self.schema)?;
        load_csv(&self.dataset, &schema)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "wm")]
    loss: String,
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
    #[arg(long, default_value_t = 1.5)]
    wm_l: f64,
    #[arg(long, default_value_t = 1.0)]
    wm_smoothing: f64,
    #[arg(long, default_value = "events")]
    wm_weighting: String,
    #[arg(long, default_value = "conditional")]
    km_impute: String,
    #[arg(long, default_value = "expectation")]
    wm_score: String,
    #[arg(long, default_value = "concordant")]
    rank_sign: String,
    #[arg(long, value_delimiter = ',', default_value = "100,100,100")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long)]
    no_batch_norm: bool,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Cox risk sets over the whole training set.
    #[arg(long)]
    cox_full_batch: bool,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn run(&self) -> Result<TrainRun> {
        let rank_sign = match self.rank_sign.as_str() {
            "concordant" => RankSign::Concordant,
            "literal" => RankSign::Literal,
            other => return Err(Error::InvalidArgument(format!("unknown rank sign '{other}'"))),
        };
        let loss = LossConfig {
            wm_l: self.wm_l,
            wm_smoothing: self.wm_smoothing,
            wm_weighting: self.wm_weighting.parse::<WmWeighting>()?,
            km_impute: self.km_impute.parse::<ImputeMode>()?,
            rank_sign,
            ..LossConfig::new(self.loss.parse::<LossKind>()?)
        };
        Ok(TrainRun {
            hidden_dims: self.hidden.clone(),
            dropout_rate: self.dropout,
            batch_norm: !self.no_batch_norm,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            cox_full_batch: self.cox_full_batch,
            wm_score: self.wm_score.parse::<WmScore>()?,
            seed: self.seed,
            ..TrainRun::new(loss)
        })
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// TOML file with `learning_rate = [...]` and `l2 = [...]`.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Include wall-clock seconds per fold (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
}

impl ExperimentArgs {
    fn config(&self, model: &ModelArgs) -> Result<ExperimentConfig> {
        let template = model.run()?;
        Ok(ExperimentConfig {
            k: self.k,
            val_fraction: model.val_fraction,
            bin_width: model.bin_width,
            seed: model.seed,
            grid: match &self.grid {
                Some(p) => load_grid(p)?,
                None => default_grid(),
            },
            template,
            timings: self.timings,
        })
    }

    fn emit<R: Report>(&self, report: &R) -> Result<()> {
        let format: ReportFormat = self.format.parse()?;
        with_output(self.out.as_deref(), |w| emit_report(report, format, w))
    }
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Km { data, bin_width, out } => {
            let table = data.load()?;
            let all: Vec<usize> = (0..table.len()).collect();
            let (records, _) = preprocess(&table, &all, None)?;
            let km = kaplan_meier(&Dataset::from_records(records, bin_width)?)?;
            with_output(out.as_deref(), |w| km.write_csv(w))
        }
        Command::Train { data, model, lr, l2, out, predictions } => {
            let table = data.load()?;
            let run = TrainRun { learning_rate: lr, l2_coefficient: l2, ..model.run()? };
            let (train_rows, val_rows) = train_val_split(table.len(), model.val_fraction, model.seed)?;
            let stats = PreprocessStats::fit(&table, &train_rows)?;
            let fold = FoldData::new(
                FoldRecords {
                    train: stats.apply(&table, &train_rows)?,
                    val: stats.apply(&table, &val_rows)?,
                    test: Vec::new(),
                },
                model.bin_width,
            )?;
            let trained = train_model(&run, &fold.train, &fold.val)?;
            save_checkpoint(&trained.network, &out)?;
            eprintln!(
                "best epoch {} of {}, validation C-index {}",
                trained.history.best_epoch,
                trained.history.epochs_run(),
                trained.history.best_val_c_index
            );
            if let Some(p) = predictions {
                let all: Vec<usize> = (0..table.len()).collect();
                let everything = Dataset::for_inference(stats.apply(&table, &all)?, *fold.train.grid())?;
                let scores = trained.scores(&everything)?;
                let mut w = csv::Writer::from_path(p)?;
                w.write_record(["score"])?;
                for s in scores.as_slice() {
                    w.write_record([s.to_string()])?;
                }
                w.flush()?;
            }
            Ok(())
        }
        Command::Evaluate { data, scores, risk } => {
            let table = data.load()?;
            let mut reader = csv::Reader::from_path(&scores)?;
            let col = reader
                .headers()?
                .iter()
                .position(|h| h == "score")
                .ok_or_else(|| Error::Parse("scores file has no 'score' column".into()))?;
            let mut values = Vec::new();
            for (i, row) in reader.records().enumerate() {
                let row = row?;
                let v: f64 = row
                    .get(col)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("scores row {}: not a number", i + 1)))?;
                values.push(v);
            }
            let scores = if risk { ScoreVector::from_risk(&values)? } else { ScoreVector::new(values)? };
            let records: Vec<SurvivalRecord> = table
                .times
                .iter()
                .zip(&table.observed)
                .map(|(&t, &o)| SurvivalRecord::new(Vec::new(), t, o))
                .collect::<Result<_>>()?;
            let grid = TimeGrid::from_times(&table.times, 1.0)?;
            let c = c_index(&Dataset::new(records, grid)?, &scores)?;
            println!("{c}");
            Ok(())
        }
        Command::Cv { data, model, experiment } => {
            let table = data.load()?;
            let report = run_cv(&table, &experiment.config(&model)?)?;
            experiment.emit(&report)
        }
        Command::AblateCensoring { data, model, experiment, losses, modes } => {
            let table = data.load()?;
            let losses: Vec<LossKind> = losses.iter().map(|l| l.parse()).collect::<Result<_>>()?;
            let modes: Vec<CensoringMode> = modes.iter().map(|m| m.parse()).collect::<Result<_>>()?;
            let report = censoring_ablation(&table, &losses, &modes, &experiment.config(&model)?)?;
            experiment.emit(&report)
        }
        Command::SweepCensoring { data, model, experiment, fractions } => {
            let table = data.load()?;
            let report = censoring_sweep(&table, &fractions, &experiment.config(&model)?)?;
            experiment.emit(&report)
        }
        Command::Synth { n, features, censor_fraction, tie_density, signal, shape, scale, seed, out } => {
            let cfg = SyntheticConfig::new(n, features, censor_fraction, tie_density, seed)
                .with_signal(signal)
                .with_shape(shape)
                .with_scale(scale);
            let records = generate_records(&cfg)?;
            let names: Vec<String> = (0..features).map(|i| format!("x{i}")).collect();
            write_features_csv(BufWriter::new(File::create(&out)?), &names, &records)?;
            let mut schema = String::from("[columns]\ntime = \"time\"\nevent = \"event_indicator\"\n");
            for name in &names {
                schema.push_str(&format!("{name} = \"continuous\"\n"));
            }
            std::fs::write(out.with_extension("toml"), schema)?;
            Ok(())
        }
        Command::Preprocess { data, out } => {
            let table = data.load()?;
            let all: Vec<usize> = (0..table.len()).collect();
            let (records, stats) = preprocess(&table, &all, None)?;
            with_output(out.as_deref(), |w| write_features_csv(w, &stats.feature_names(), &records))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(2)
        }
    }
}
