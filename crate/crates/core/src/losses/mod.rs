//! Training objectives: Cox partial likelihood, pairwise ranking surrogates
//! and the distribution-matching (Wasserstein) loss.

pub mod cox;
pub mod ranking;
pub mod wasserstein;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use cox::{cox_nll, cox_nll_with_grad, TieMethod};
pub use ranking::{ranking_loss, ranking_loss_with_grad, Phi, RankSign};
pub use wasserstein::{
    bin_weights, softmax, weights_from_counts, wm_distance, wm_loss, wm_loss_grad_pmf,
    GroundWeights, PredictedDistribution,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{kaplan_meier, target_for_bin, ImputeMode, KaplanMeierCurve};
use crate::metrics::AcceptablePairSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Cox(TieMethod),
    Rank(Phi),
    Wm,
}

impl LossKind {
    /// The seven configurations selectable by name.
    pub fn all() -> [LossKind; 7] {
        [
            LossKind::Cox(TieMethod::Breslow),
            LossKind::Cox(TieMethod::Efron),
            LossKind::Rank(Phi::Sigmoid),
            LossKind::Rank(Phi::LogSigmoid),
            LossKind::Rank(Phi::Hinge),
            LossKind::Rank(Phi::Exponential),
            LossKind::Wm,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Cox(TieMethod::Breslow) => "cox",
            LossKind::Cox(TieMethod::Efron) => "cox-efron",
            LossKind::Rank(Phi::Sigmoid) => "rank-sigmoid",
            LossKind::Rank(Phi::LogSigmoid) => "rank-logsigmoid",
            LossKind::Rank(Phi::Hinge) | LossKind::Rank(Phi::ShiftedHinge { .. }) => "rank-hinge",
            LossKind::Rank(Phi::Exponential) => "rank-exp",
            LossKind::Wm => "wm",
        }
    }

    pub fn uses_softmax(&self) -> bool {
        matches!(self, LossKind::Wm)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cox" => LossKind::Cox(TieMethod::Breslow),
            "cox-efron" => LossKind::Cox(TieMethod::Efron),
            "rank-sigmoid" => LossKind::Rank(Phi::Sigmoid),
            "rank-logsigmoid" => LossKind::Rank(Phi::LogSigmoid),
            "rank-hinge" => LossKind::Rank(Phi::Hinge),
            "rank-exp" => LossKind::Rank(Phi::Exponential),
            "wm" => LossKind::Wm,
            other => return Err(Error::invalid(format!("unknown loss '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WmWeighting {
    /// Training event counts per bin plus the smoothing constant.
    #[default]
    Events,
    /// `1/T` per bin.
    Uniform,
}

impl FromStr for WmWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "events" => Ok(Self::Events),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::invalid(format!("unknown WM weighting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub wm_l: f64,
    pub wm_smoothing: f64,
    pub wm_weighting: WmWeighting,
    pub km_impute: ImputeMode,
    pub rank_sign: RankSign,
}

impl LossConfig {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            wm_l: 1.5,
            wm_smoothing: 1.0,
            wm_weighting: WmWeighting::Events,
            km_impute: ImputeMode::Conditional,
            rank_sign: RankSign::Concordant,
        }
    }

    /// Whether a higher raw output means an earlier event.
    pub fn output_is_risk(&self) -> bool {
        match self.kind {
            LossKind::Cox(_) => true,
            LossKind::Rank(_) => self.rank_sign == RankSign::Literal,
            LossKind::Wm => false,
        }
    }
}

/// A loss bound to one training set, evaluated batch by batch.
#[derive(Debug, Clone)]
pub struct Objective {
    config: LossConfig,
    km: Option<KaplanMeierCurve>,
    weights: Option<GroundWeights>,
}

impl Objective {
    pub fn new(config: LossConfig, train: &Dataset) -> Result<Self> {
        let (km, weights) = if config.kind.uses_softmax() {
            let km = kaplan_meier(train)?;
            let weights = match config.wm_weighting {
                WmWeighting::Events => bin_weights(train, config.wm_smoothing)?,
                WmWeighting::Uniform => GroundWeights::uniform(train.grid().num_bins()),
            };
            (Some(km), Some(weights))
        } else {
            (None, None)
        };
        Ok(Self { config, km, weights })
    }

    pub fn config(&self) -> &LossConfig {
        &self.config
    }

    /// Loss and gradient at the network outputs for the records `indices`
    /// of `train`. `None` when the batch carries no training signal (no
    /// events for Cox, no acceptable pairs for ranking).
    pub fn batch(
        &self,
        outputs: ArrayView2<'_, f64>,
        indices: &[usize],
        train: &Dataset,
    ) -> Result<Option<(f64, Array2<f64>)>> {
        if outputs.nrows() != indices.len() {
            return Err(Error::invalid(format!(
                "{} output rows for {} records",
                outputs.nrows(),
                indices.len()
            )));
        }
        let records = train.records();
        match self.config.kind {
            LossKind::Cox(ties) => {
                let observed: Vec<bool> = indices.iter().map(|&i| records[i].observed).collect();
                let events = observed.iter().filter(|&&o| o).count();
                if events == 0 {
                    return Ok(None);
                }
                let bins: Vec<usize> = indices.iter().map(|&i| train.bins()[i]).collect();
                let scores = outputs.column(0).to_vec();
                let (v, g) = cox_nll_with_grad(&scores, &bins, &observed, ties)?;
                let scale = 1.0 / events as f64;
                Ok(Some((v * scale, column(g.into_iter().map(|x| x * scale)))))
            }
            LossKind::Rank(phi) => {
                let mut pairs = Vec::new();
                for (a, &i) in indices.iter().enumerate() {
                    if !records[i].observed {
                        continue;
                    }
                    for (b, &j) in indices.iter().enumerate() {
                        if records[j].time > records[i].time {
                            pairs.push((a, b));
                        }
                    }
                }
                if pairs.is_empty() {
                    return Ok(None);
                }
                let scores = outputs.column(0).to_vec();
                let (v, g) = ranking_loss_with_grad(
                    &scores,
                    &AcceptablePairSet { pairs },
                    phi,
                    self.config.rank_sign,
                )?;
                Ok(Some((v, column(g.into_iter()))))
            }
            LossKind::Wm => {
                let km = self.km.as_ref().expect("WM objective carries a KM curve");
                let weights = self.weights.as_ref().expect("WM objective carries weights");
                if outputs.ncols() != km.num_bins() {
                    return Err(Error::invalid(format!(
                        "{} output bins, grid has {}",
                        outputs.ncols(),
                        km.num_bins()
                    )));
                }
                let scale = 1.0 / indices.len() as f64;
                let mut total = 0.0;
                let mut grad = Array2::zeros(outputs.raw_dim());
                for (row, &i) in indices.iter().enumerate() {
                    let target = target_for_bin(
                        train.bins()[i],
                        records[i].observed,
                        km,
                        self.config.km_impute,
                    );
                    let pmf = outputs.row(row).to_vec();
                    let (v, g) = wm_loss_grad_pmf(&pmf, &target.cdf, weights, self.config.wm_l)?;
                    total += v;
                    for (dst, src) in grad.row_mut(row).iter_mut().zip(g) {
                        *dst = src * scale;
                    }
                }
                Ok(Some((total * scale, grad)))
            }
        }
    }
}

fn column(values: impl Iterator<Item = f64>) -> Array2<f64> {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    Array2::from_shape_vec((n, 1), v).expect("column shape")
}
