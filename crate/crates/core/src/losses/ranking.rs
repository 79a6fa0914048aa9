//! Pairwise ranking objectives over acceptable pairs.
//!
//! The loss is `-(1/|A|) * sum phi(z)` with `z = s_j - s_i` for the default
//! orientation, so maximising `phi` pushes the earlier-event record `i`
//! towards the lower (earlier) score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AcceptablePairSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    /// `sigma(z)`
    Sigmoid,
    /// `log sigma(z)`
    LogSigmoid,
    /// Ranking-SVM margin: `-(1 - z)+`.
    Hinge,
    /// `(z - 1)+`, optionally capped at `clip`.
    ShiftedHinge { clip: Option<f64> },
    /// `1 - exp(-z)`
    Exponential,
}

impl Phi {
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Phi::Sigmoid => sigmoid(z),
            Phi::LogSigmoid => -softplus(-z),
            Phi::Hinge => -(1.0 - z).max(0.0),
            Phi::ShiftedHinge { clip } => {
                let v = (z - 1.0).max(0.0);
                clip.map_or(v, |c| v.min(c))
            }
            Phi::Exponential => 1.0 - (-z).exp(),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Phi::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Phi::LogSigmoid => sigmoid(-z),
            Phi::Hinge => {
                if z < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Phi::ShiftedHinge { clip } => {
                let above = z > 1.0;
                let below_cap = clip.is_none_or(|c| z - 1.0 < c);
                if above && below_cap {
                    1.0
                } else {
                    0.0
                }
            }
            Phi::Exponential => (-z).exp(),
        }
    }

    /// Points where the derivative jumps.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Phi::Hinge => vec![1.0],
            Phi::ShiftedHinge { clip } => {
                let mut k = vec![1.0];
                if let Some(c) = clip {
                    k.push(1.0 + c);
                }
                k
            }
            _ => Vec::new(),
        }
    }
}

/// Which score difference is fed to `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSign {
    /// `phi(s_j - s_i)`: scores read as "higher = later".
    #[default]
    Concordant,
    /// `phi(s_i - s_j)`: scores read as risks.
    Literal,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn ranking_loss(scores: &[f64], pairs: &AcceptablePairSet, phi: Phi) -> Result<f64> {
    ranking_loss_with_grad(scores, pairs, phi, RankSign::Concordant).map(|(v, _)| v)
}

pub fn ranking_loss_with_grad(
    scores: &[f64],
    pairs: &AcceptablePairSet,
    phi: Phi,
    sign: RankSign,
) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::invalid("ranking loss needs at least one acceptable pair"));
    }
    let inv = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; scores.len()];
    for &(i, j) in &pairs.pairs {
        if i >= scores.len() || j >= scores.len() {
            return Err(Error::invalid(format!("pair ({i}, {j}) out of range")));
        }
        let (hi, lo) = match sign {
            RankSign::Concordant => (j, i),
            RankSign::Literal => (i, j),
        };
        let z = scores[hi] - scores[lo];
        total += phi.value(z);
        let d = phi.derivative(z) * inv;
        grad[hi] -= d;
        grad[lo] += d;
    }
    Ok((-total * inv, grad))
}
