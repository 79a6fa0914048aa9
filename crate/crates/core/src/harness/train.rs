use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::seed::{derive_seed, STREAM_INIT, STREAM_SHUFFLE};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossKind, Objective};
use crate::metrics::{c_index, ScoreVector};
use crate::neural::{AdamState, Head, Mode, Network, NetworkConfig};

/// How a softmax head's pmf is reduced to a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WmScore {
    /// `sum_t t * pmf[t]` over bin indices.
    #[default]
    Expectation,
    /// First bin whose CDF reaches 1/2.
    Median,
}

impl std::str::FromStr for WmScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expectation" => Ok(Self::Expectation),
            "median" => Ok(Self::Median),
            other => Err(Error::invalid(format!("unknown WM score '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub loss: LossConfig,
    pub hidden_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub batch_norm: bool,
    pub learning_rate: f64,
    pub l2_coefficient: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Cox risk sets over the whole training set instead of the minibatch.
    pub cox_full_batch: bool,
    pub wm_score: WmScore,
    pub seed: u64,
}

impl TrainRun {
    pub fn new(loss: LossConfig) -> Self {
        Self {
            loss,
            hidden_dims: vec![100, 100, 100],
            dropout_rate: 0.5,
            batch_norm: true,
            learning_rate: 1e-3,
            l2_coefficient: 0.0,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            cox_full_batch: false,
            wm_score: WmScore::Expectation,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::invalid("max epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be at least 2"));
        }
        if !(self.l2_coefficient.is_finite() && self.l2_coefficient >= 0.0) {
            return Err(Error::invalid("L2 coefficient must be non-negative"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    fn network_config(&self, train: &Dataset) -> NetworkConfig {
        let head = match self.loss.kind {
            LossKind::Wm => Head::Softmax { bins: train.grid().num_bins() },
            _ => Head::ScalarLinear,
        };
        NetworkConfig {
            input_dim: train.num_features(),
            hidden_dims: self.hidden_dims.clone(),
            head,
            dropout_rate: self.dropout_rate,
            l2_coefficient: self.l2_coefficient,
            batch_norm: self.batch_norm,
            seed: derive_seed(self.seed, STREAM_INIT, 0),
        }
    }
}

/// Tracks the best validation value; `patience` non-improving epochs stop training.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, stale: 0 }
    }

    /// Epochs are numbered from 1. Only a strict improvement resets patience.
    pub fn observe(&mut self, epoch: usize, value: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if value <= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, value));
                self.stale = 0;
                StopDecision::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training objective per epoch (batches without signal excluded).
    pub train_loss: Vec<f64>,
    pub val_c_index: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_c_index: f64,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.val_c_index.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub loss: LossConfig,
    pub wm_score: WmScore,
    pub history: TrainHistory,
}

impl TrainedModel {
    /// Scores oriented as higher = later event.
    pub fn scores(&self, dataset: &Dataset) -> Result<ScoreVector> {
        let outputs = self.network.predict(dataset.feature_matrix().view())?;
        score_outputs(&outputs, &self.loss, self.wm_score)
    }

    pub fn c_index(&self, dataset: &Dataset) -> Result<f64> {
        c_index(dataset, &self.scores(dataset)?)
    }
}

/// Converts raw network outputs into a [`ScoreVector`].
pub fn score_outputs(outputs: &Array2<f64>, loss: &LossConfig, wm_score: WmScore) -> Result<ScoreVector> {
    let scores: Vec<f64> = match loss.kind {
        LossKind::Wm => outputs
            .rows()
            .into_iter()
            .map(|pmf| match wm_score {
                WmScore::Expectation => pmf.iter().enumerate().map(|(t, p)| t as f64 * p).sum(),
                WmScore::Median => {
                    let mut acc = 0.0;
                    let last = pmf.len().saturating_sub(1);
                    pmf.iter()
                        .position(|p| {
                            acc += p;
                            acc >= 0.5
                        })
                        .unwrap_or(last) as f64
                }
            })
            .collect(),
        _ if loss.output_is_risk() => outputs.column(0).iter().map(|o| -o).collect(),
        _ => outputs.column(0).to_vec(),
    };
    ScoreVector::new(scores)
}

/// Trains with Adam on shuffled minibatches, evaluating the validation
/// C-index after every epoch and keeping the best epoch's parameters.
pub fn train_model(run: &TrainRun, train: &Dataset, val: &Dataset) -> Result<TrainedModel> {
    run.validate()?;
    if train.len() < 2 {
        return Err(Error::invalid("training needs at least two records"));
    }
    if !has_acceptable_pair(val) {
        return Err(Error::UndefinedMetric("validation set has no acceptable pairs".into()));
    }
    if val.num_features() != train.num_features() {
        return Err(Error::invalid("training and validation feature widths differ"));
    }
    match run.loss.kind {
        LossKind::Cox(_) if train.num_observed() == 0 => {
            return Err(Error::invalid("Cox training needs at least one observed event"));
        }
        LossKind::Rank(_) if !has_acceptable_pair(train) => {
            return Err(Error::invalid("ranking training needs at least one acceptable pair"));
        }
        _ => {}
    }

    let objective = Objective::new(run.loss, train)?;
    let mut network = Network::new(run.network_config(train))?;
    let shapes: Vec<usize> = network.params_mut().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(run.learning_rate, &shapes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, STREAM_SHUFFLE, 0));
    let features = train.feature_matrix();
    let val_features = val.feature_matrix();

    let mut stopper = EarlyStopping::new(run.patience);
    let mut best_network = network.clone();
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_c_index: Vec::new(),
        best_epoch: 0,
        best_val_c_index: f64::NAN,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let diverged = |epoch: usize, detail: String| Error::TrainingDiverged { epoch, detail };

    for epoch in 1..=run.max_epochs {
        order.shuffle(&mut rng);
        let batches = if matches!(run.loss.kind, LossKind::Cox(_)) && run.cox_full_batch {
            vec![order.clone()]
        } else {
            minibatches(&order, run.batch_size)
        };
        let mut loss_sum = 0.0;
        let mut loss_batches = 0usize;
        for batch in &batches {
            let x = features.select(Axis(0), batch);
            let tape = network.forward(x.view(), Mode::Train, &mut rng)?;
            let Some((value, grad)) = objective.batch(tape.outputs().view(), batch, train)? else {
                network.update_running_stats(&tape);
                continue;
            };
            let value = value + network.l2_penalty();
            if !value.is_finite() {
                return Err(diverged(epoch, format!("loss became {value}")));
            }
            loss_sum += value;
            loss_batches += 1;
            let grads = network.backward(&tape, grad.view())?;
            network.update_running_stats(&tape);
            adam.step(network.params_mut(), &grads.slices()).map_err(|e| match e {
                Error::TrainingDiverged { detail, .. } => diverged(epoch, detail),
                other => other,
            })?;
        }
        history.train_loss.push(if loss_batches > 0 { loss_sum / loss_batches as f64 } else { f64::NAN });

        let outputs = network.predict(val_features.view())?;
        let scores = score_outputs(&outputs, &run.loss, run.wm_score)
            .map_err(|e| diverged(epoch, e.to_string()))?;
        let c = c_index(val, &scores)?;
        history.val_c_index.push(c);
        match stopper.observe(epoch, c) {
            StopDecision::Improved => best_network = network.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }

    let (best_epoch, best_c) = stopper.best().expect("at least one epoch ran");
    history.best_epoch = best_epoch;
    history.best_val_c_index = best_c;
    Ok(TrainedModel { network: best_network, loss: run.loss, wm_score: run.wm_score, history })
}

fn has_acceptable_pair(ds: &Dataset) -> bool {
    let last = ds.records().iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max);
    ds.records().iter().any(|r| r.observed && r.time < last)
}

/// Consecutive chunks of `order`; a trailing chunk of one record joins the previous one.
pub fn minibatches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let tail = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(tail);
    }
    out
}
