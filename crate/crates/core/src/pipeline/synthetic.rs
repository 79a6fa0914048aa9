//! Synthetic right-censored data with a known risk function.
//!
//! Features are standard normal. The risk is linear in the first (up to)
//! three features, `eta = signal * (x0 - 0.5 x1 + 0.75 x2) / norm`, so that
//! `eta` has standard deviation `signal`. On an exponential clock the event
//! time has hazard `exp(eta)` and independent exponential censoring has a
//! rate chosen to hit the requested censored fraction in expectation. Times
//! are reported as `scale * u^(1/shape)`; `shape = 1` keeps the hazard
//! exponential in days, larger shapes concentrate each subject's time
//! distribution without changing any pairwise ordering probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SurvivalRecord};
use crate::error::{Error, Result};

const COEFFICIENTS: [f64; 3] = [1.0, -0.5, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub num_features: usize,
    pub censor_fraction: f64,
    /// In `[0, 1]`: times are rounded up to multiples of `tie_density * scale`.
    pub tie_density: f64,
    pub seed: u64,
    pub signal: f64,
    pub shape: f64,
    /// Median-ish time scale in days.
    pub scale: f64,
    pub bin_width: f64,
}

impl SyntheticConfig {
    pub fn new(n: usize, num_features: usize, censor_fraction: f64, tie_density: f64, seed: u64) -> Self {
        Self {
            n,
            num_features,
            censor_fraction,
            tie_density,
            seed,
            signal: 2.0,
            shape: 1.0,
            scale: 365.0,
            bin_width: 1.0,
        }
    }

    pub fn with_signal(mut self, signal: f64) -> Self {
        self.signal = signal;
        self
    }

    pub fn with_shape(mut self, shape: f64) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_bin_width(mut self, bin_width: f64) -> Self {
        self.bin_width = bin_width;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.num_features == 0 {
            return Err(Error::invalid("synthetic data needs n >= 1 and at least one feature"));
        }
        if !(0.0..1.0).contains(&self.censor_fraction) {
            return Err(Error::invalid(format!(
                "censor fraction {} not in [0, 1)",
                self.censor_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.tie_density) {
            return Err(Error::invalid(format!("tie density {} not in [0, 1]", self.tie_density)));
        }
        for (name, v) in [("shape", self.shape), ("scale", self.scale), ("bin width", self.bin_width)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.signal.is_finite() && self.signal >= 0.0) {
            return Err(Error::invalid("signal must be non-negative"));
        }
        Ok(())
    }

    /// The generating risk score of a feature vector (higher = earlier event).
    pub fn risk(&self, features: &[f64]) -> f64 {
        let m = features.len().min(COEFFICIENTS.len());
        let norm = COEFFICIENTS[..m].iter().map(|c| c * c).sum::<f64>().sqrt();
        let lin: f64 = COEFFICIENTS[..m].iter().zip(features).map(|(c, x)| c * x).sum();
        self.signal * lin / norm
    }
}

pub fn generate_records(config: &SyntheticConfig) -> Result<Vec<SurvivalRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let features: Vec<Vec<f64>> = (0..config.n)
        .map(|_| {
            (0..config.num_features)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let hazards: Vec<f64> = features.iter().map(|x| config.risk(x).exp()).collect();
    let censor_rate = calibrate_censoring(&hazards, config.censor_fraction);
    let quantum = config.tie_density * config.scale;

    features
        .into_iter()
        .zip(&hazards)
        .map(|(x, &h)| {
            let e: f64 = Exp1.sample(&mut rng);
            let event_clock = e / h;
            let c: f64 = Exp1.sample(&mut rng);
            let censor_clock = if censor_rate > 0.0 {
                c / censor_rate
            } else {
                f64::INFINITY
            };
            let observed = event_clock <= censor_clock;
            let clock = event_clock.min(censor_clock);
            let mut time = config.scale * clock.powf(1.0 / config.shape);
            if quantum > 0.0 {
                time = ((time / quantum).ceil() * quantum).max(quantum);
            }
            let time = if time.is_finite() { time } else { f64::MAX / 4.0 };
            SurvivalRecord::new(x, time, observed)
        })
        .collect()
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    Dataset::from_records(generate_records(config)?, config.bin_width)
}

/// Rate `mu` with `mean_i mu / (mu + h_i) = fraction`.
fn calibrate_censoring(hazards: &[f64], fraction: f64) -> f64 {
    if fraction <= 0.0 {
        return 0.0;
    }
    let expected = |mu: f64| hazards.iter().map(|h| mu / (mu + h)).sum::<f64>() / hazards.len() as f64;
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid.exp()) < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}
