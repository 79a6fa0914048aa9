use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// One linear output unit.
    ScalarLinear,
    /// Softmax over `bins` time bins.
    Softmax { bins: usize },
}

impl Head {
    pub fn width(&self) -> usize {
        match *self {
            Head::ScalarLinear => 1,
            Head::Softmax { bins } => bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub head: Head,
    pub dropout_rate: f64,
    pub l2_coefficient: f64,
    pub batch_norm: bool,
    pub seed: u64,
}

impl NetworkConfig {
    /// Three hidden layers of 100 units, dropout 0.5, batch norm on.
    pub fn new(input_dim: usize, head: Head) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![100, 100, 100],
            head,
            dropout_rate: 0.5,
            l2_coefficient: 0.0,
            batch_norm: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden layers must be non-empty and non-zero"));
        }
        if self.input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if self.head.width() == 0 {
            return Err(Error::invalid("softmax head needs at least one bin"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        if !(self.l2_coefficient >= 0.0 && self.l2_coefficient.is_finite()) {
            return Err(Error::invalid("L2 coefficient must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Affine map, batch norm, ReLU, dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameters and batch-norm statistics of the MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub hidden: Vec<HiddenLayer>,
    pub output: OutputLayer,
}

/// Intermediate values of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    mode: Mode,
    layers: Vec<LayerTape>,
    last_hidden: Array2<f64>,
    outputs: Array2<f64>,
}

#[derive(Debug, Clone)]
struct LayerTape {
    input: Array2<f64>,
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
    pre_activation: Array2<f64>,
    dropout_mask: Option<Array2<f64>>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
}

impl Tape {
    pub fn outputs(&self) -> &Array2<f64> {
        &self.outputs
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// ReLU on/off pattern of every hidden unit; used by gradient checks.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| l.pre_activation.iter().map(|&v| v > 0.0).collect::<Vec<_>>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<LayerGrads>,
    pub output_weight: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl Gradients {
    /// Flat views in the same order as [`Network::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for g in &self.hidden {
            out.push(g.weight.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("standard layout"));
            out.push(g.gamma.as_slice().expect("standard layout"));
            out.push(g.beta.as_slice().expect("standard layout"));
        }
        out.push(self.output_weight.as_slice().expect("standard layout"));
        out.push(self.output_bias.as_slice().expect("standard layout"));
        out
    }
}

impl Network {
    /// He-uniform weights, zero biases, identity batch norm.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut fan_in = config.input_dim;
        let mut hidden = Vec::with_capacity(config.hidden_dims.len());
        for &width in &config.hidden_dims {
            hidden.push(HiddenLayer {
                weight: he_uniform(&mut rng, fan_in, width),
                bias: Array1::zeros(width),
                gamma: Array1::ones(width),
                beta: Array1::zeros(width),
                running_mean: Array1::zeros(width),
                running_var: Array1::ones(width),
            });
            fan_in = width;
        }
        let out_width = config.head.width();
        let output = OutputLayer {
            weight: he_uniform(&mut rng, fan_in, out_width),
            bias: Array1::zeros(out_width),
        };
        Ok(Self { config, hidden, output })
    }

    pub fn head(&self) -> Head {
        self.config.head
    }

    /// Eval-mode forward: running batch-norm statistics, no dropout.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(batch, Mode::Eval)?;
        let mut h = batch.to_owned();
        for layer in &self.hidden {
            let mut z = h.dot(&layer.weight) + &layer.bias;
            if self.config.batch_norm {
                let inv_std = layer.running_var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
                z = (z - &layer.running_mean) * &inv_std * &layer.gamma + &layer.beta;
            }
            z.mapv_inplace(|v| v.max(0.0));
            h = z;
        }
        Ok(self.apply_head(h.dot(&self.output.weight) + &self.output.bias))
    }

    /// Forward pass recording a tape. In train mode the batch statistics are
    /// used and dropout masks are drawn from `rng`; running statistics are
    /// not touched (see [`Network::update_running_stats`]).
    pub fn forward<R: Rng>(&self, batch: ArrayView2<'_, f64>, mode: Mode, rng: &mut R) -> Result<Tape> {
        self.check_input(batch, mode)?;
        let keep = 1.0 - self.config.dropout_rate;
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut h = batch.to_owned();
        for layer in &self.hidden {
            let z = h.dot(&layer.weight) + &layer.bias;
            let width = z.ncols();
            let (normalized, inv_std, batch_mean, batch_var) = if !self.config.batch_norm {
                (z, Array1::ones(width), Array1::zeros(width), Array1::ones(width))
            } else if mode == Mode::Train {
                let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                let centered = &z - &mean;
                let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
                (centered * &inv_std, inv_std, mean, var)
            } else {
                let inv_std = layer.running_var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
                let normalized = (z - &layer.running_mean) * &inv_std;
                (normalized, inv_std, Array1::zeros(width), Array1::ones(width))
            };
            let pre_activation = if self.config.batch_norm {
                &normalized * &layer.gamma + &layer.beta
            } else {
                normalized.clone()
            };
            let mut out = pre_activation.mapv(|v| v.max(0.0));
            let dropout_mask = if mode == Mode::Train && self.config.dropout_rate > 0.0 {
                let mask = Array2::from_shape_fn(out.raw_dim(), |_| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                out *= &mask;
                Some(mask)
            } else {
                None
            };
            layers.push(LayerTape {
                input: h,
                normalized,
                inv_std,
                pre_activation,
                dropout_mask,
                batch_mean,
                batch_var,
            });
            h = out;
        }
        let outputs = self.apply_head(h.dot(&self.output.weight) + &self.output.bias);
        Ok(Tape { mode, layers, last_hidden: h, outputs })
    }

    /// Exponential moving average of the batch statistics held in a train-mode tape.
    pub fn update_running_stats(&mut self, tape: &Tape) {
        if tape.mode != Mode::Train || !self.config.batch_norm {
            return;
        }
        for (layer, t) in self.hidden.iter_mut().zip(&tape.layers) {
            layer.running_mean = &layer.running_mean * (1.0 - BN_MOMENTUM) + &t.batch_mean * BN_MOMENTUM;
            layer.running_var = &layer.running_var * (1.0 - BN_MOMENTUM) + &t.batch_var * BN_MOMENTUM;
        }
    }

    /// Gradients of `loss + l2 * sum ||W||^2` given `dloss/doutputs`, where
    /// outputs are the head's outputs (probabilities for a softmax head).
    pub fn backward(&self, tape: &Tape, grad_outputs: ArrayView2<'_, f64>) -> Result<Gradients> {
        if grad_outputs.dim() != tape.outputs.dim() {
            return Err(Error::invalid(format!(
                "output gradient has shape {:?}, forward produced {:?}",
                grad_outputs.dim(),
                tape.outputs.dim()
            )));
        }
        if tape.layers.len() != self.hidden.len() {
            return Err(Error::State("tape does not belong to this network".into()));
        }
        let l2 = 2.0 * self.config.l2_coefficient;

        let delta = match self.config.head {
            Head::ScalarLinear => grad_outputs.to_owned(),
            Head::Softmax { .. } => {
                let p = &tape.outputs;
                let dot = (&grad_outputs * p).sum_axis(Axis(1)).insert_axis(Axis(1));
                p * &(&grad_outputs - &dot)
            }
        };
        let output_weight = standard(tape.last_hidden.t().dot(&delta)) + &self.output.weight * l2;
        let output_bias = delta.sum_axis(Axis(0));
        let mut upstream = delta.dot(&self.output.weight.t());

        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (layer, t) in self.hidden.iter().zip(&tape.layers).rev() {
            if let Some(mask) = &t.dropout_mask {
                upstream *= mask;
            }
            Zip::from(&mut upstream)
                .and(&t.pre_activation)
                .for_each(|g, &a| if a <= 0.0 { *g = 0.0 });
            let (dz, gamma, beta) = if !self.config.batch_norm {
                let w = upstream.ncols();
                (upstream, Array1::zeros(w), Array1::zeros(w))
            } else {
                let dgamma = (&upstream * &t.normalized).sum_axis(Axis(0));
                let dbeta = upstream.sum_axis(Axis(0));
                let dnorm = upstream * &layer.gamma;
                let dz = match tape.mode {
                    Mode::Train => {
                        let n = dnorm.nrows() as f64;
                        let sum = dnorm.sum_axis(Axis(0));
                        let sum_scaled = (&dnorm * &t.normalized).sum_axis(Axis(0));
                        ((dnorm * n - &sum) - &t.normalized * &sum_scaled) * &(&t.inv_std / n)
                    }
                    Mode::Eval => dnorm * &t.inv_std,
                };
                (dz, dgamma, dbeta)
            };
            let weight = standard(t.input.t().dot(&dz)) + &layer.weight * l2;
            let bias = dz.sum_axis(Axis(0));
            upstream = dz.dot(&layer.weight.t());
            hidden.push(LayerGrads { weight, bias, gamma, beta });
        }
        hidden.reverse();
        Ok(Gradients { hidden, output_weight, output_bias })
    }

    /// `l2 * sum ||W||^2` over weight matrices (biases and batch norm excluded).
    pub fn l2_penalty(&self) -> f64 {
        let sq: f64 = self
            .hidden
            .iter()
            .map(|l| l.weight.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
            + self.output.weight.iter().map(|w| w * w).sum::<f64>();
        self.config.l2_coefficient * sq
    }

    /// Trainable tensors, flattened, in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for l in &mut self.hidden {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            out.push(l.gamma.as_slice_mut().expect("standard layout"));
            out.push(l.beta.as_slice_mut().expect("standard layout"));
        }
        out.push(self.output.weight.as_slice_mut().expect("standard layout"));
        out.push(self.output.bias.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn num_params(&self) -> usize {
        self.hidden
            .iter()
            .map(|l| l.weight.len() + 3 * l.bias.len())
            .sum::<usize>()
            + self.output.weight.len()
            + self.output.bias.len()
    }

    fn apply_head(&self, mut logits: Array2<f64>) -> Array2<f64> {
        if let Head::Softmax { .. } = self.config.head {
            for mut row in logits.rows_mut() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|v| (v - max).exp());
                let total = row.sum();
                row /= total;
            }
        }
        logits
    }

    fn check_input(&self, batch: ArrayView2<'_, f64>, mode: Mode) -> Result<()> {
        if batch.ncols() != self.config.input_dim {
            return Err(Error::invalid(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.config.input_dim
            )));
        }
        if batch.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if mode == Mode::Train && batch.nrows() < 2 {
            return Err(Error::invalid("train-mode batches need at least two rows"));
        }
        Ok(())
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn he_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound))
}
