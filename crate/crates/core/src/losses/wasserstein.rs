//! Distribution-matching loss on the time grid: a weighted `l`-power norm of
//! the CDF difference between predicted and target distributions.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::TargetDistribution;

/// Per-bin ground weights, proportional to training events plus a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundWeights {
    pub weights: Vec<f64>,
    pub smoothing: f64,
}

impl GroundWeights {
    /// `1/T` everywhere; the infinite-smoothing limit.
    pub fn uniform(num_bins: usize) -> Self {
        Self {
            weights: vec![1.0 / num_bins as f64; num_bins],
            smoothing: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn bin_weights(train: &Dataset, smoothing: f64) -> Result<GroundWeights> {
    let num_bins = train.grid().num_bins();
    let mut counts = vec![0usize; num_bins];
    for (r, &b) in train.records().iter().zip(train.bins()) {
        if r.observed {
            counts[b] += 1;
        }
    }
    weights_from_counts(&counts, smoothing)
}

pub fn weights_from_counts(counts: &[usize], smoothing: f64) -> Result<GroundWeights> {
    if !(smoothing.is_finite() && smoothing > 0.0) {
        return Err(Error::invalid(format!("smoothing must be positive, got {smoothing}")));
    }
    if counts.is_empty() {
        return Err(Error::invalid("ground weights need at least one bin"));
    }
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64 + smoothing).collect();
    let total: f64 = raw.iter().sum();
    Ok(GroundWeights {
        weights: raw.into_iter().map(|w| w / total).collect(),
        smoothing,
    })
}

/// Softmax output and its running sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedDistribution {
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl PredictedDistribution {
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid("pmf entries must be finite and non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("pmf sums to {total}, expected 1")));
        }
        let cdf = running_sum(&pmf);
        Ok(Self { pmf, cdf })
    }

    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        Self::from_pmf(softmax(logits))
    }

    pub fn dirac(bin: usize, num_bins: usize) -> Self {
        let mut pmf = vec![0.0; num_bins];
        pmf[bin] = 1.0;
        let cdf = running_sum(&pmf);
        Self { pmf, cdf }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn running_sum(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// `sum_t w[t] * |a[t] - b[t]|^l` for two CDFs on the same grid.
pub fn wm_distance(cdf_a: &[f64], cdf_b: &[f64], weights: &GroundWeights, l: f64) -> Result<f64> {
    check_lengths(cdf_a.len(), cdf_b.len(), weights.len())?;
    check_exponent(l)?;
    Ok(cdf_a
        .iter()
        .zip(cdf_b)
        .zip(&weights.weights)
        .map(|((a, b), w)| w * (a - b).abs().powf(l))
        .sum())
}

pub fn wm_loss(
    pred: &PredictedDistribution,
    target: &TargetDistribution,
    weights: &GroundWeights,
    l: f64,
) -> Result<f64> {
    wm_distance(&pred.cdf, &target.cdf, weights, l)
}

/// Loss and gradient with respect to the predicted pmf for one record.
pub fn wm_loss_grad_pmf(
    pmf: &[f64],
    target_cdf: &[f64],
    weights: &GroundWeights,
    l: f64,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(pmf.len(), target_cdf.len(), weights.len())?;
    check_exponent(l)?;
    let n = pmf.len();
    let mut cdf = 0.0;
    let mut value = 0.0;
    let mut per_bin = vec![0.0; n];
    for t in 0..n {
        cdf += pmf[t];
        let diff = cdf - target_cdf[t];
        let mag = diff.abs();
        if mag > 0.0 {
            let p = if l == 1.5 { mag.sqrt() } else { mag.powf(l - 1.0) };
            value += weights.weights[t] * mag * p;
            per_bin[t] = weights.weights[t] * l * p * diff.signum();
        }
    }
    // d cdf[t] / d pmf[s] = 1 for s <= t
    let mut grad = vec![0.0; n];
    let mut acc = 0.0;
    for s in (0..n).rev() {
        acc += per_bin[s];
        grad[s] = acc;
    }
    Ok((value, grad))
}

fn check_lengths(a: usize, b: usize, w: usize) -> Result<()> {
    if a != b || a != w {
        return Err(Error::invalid(format!(
            "length mismatch: prediction {a}, target {b}, weights {w}"
        )));
    }
    Ok(())
}

fn check_exponent(l: f64) -> Result<()> {
    if !(l.is_finite() && l >= 1.0) {
        return Err(Error::invalid(format!("exponent l must be >= 1, got {l}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn target(bin: usize, n: usize) -> TargetDistribution {
        TargetDistribution::dirac(bin, n)
    }

    #[test]
    fn weight_examples() {
        let w = weights_from_counts(&[2, 1, 0], 1.0).unwrap();
        assert_abs_diff_eq!(w.weights[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[2], 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(weights_from_counts(&[0, 0], 1.0).unwrap().weights, vec![0.5, 0.5]);
        let w = weights_from_counts(&[0, 1], 10.0).unwrap();
        assert_abs_diff_eq!(w.weights[0], 10.0 / 21.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[1], 11.0 / 21.0, epsilon = 1e-15);
        assert!(weights_from_counts(&[1], 0.0).is_err());
    }

    #[test]
    fn weights_from_a_training_set() {
        let records = [(0.2, true), (0.7, true), (1.5, true), (2.5, false)]
            .iter()
            .map(|&(t, o)| SurvivalRecord::new(vec![], t, o).unwrap())
            .collect();
        let ds = Dataset::from_records(records, 1.0).unwrap();
        let w = bin_weights(&ds, 1.0).unwrap();
        assert_abs_diff_eq!(w.weights[0], 3.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[2], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_distributions_cost_nothing() {
        let pred = PredictedDistribution::from_pmf(vec![0.2, 0.5, 0.3]).unwrap();
        let t = TargetDistribution { cdf: pred.cdf.clone(), is_imputed: true };
        assert_eq!(wm_loss(&pred, &t, &GroundWeights::uniform(3), 1.5).unwrap(), 0.0);
    }

    #[test]
    fn dirac_examples() {
        let pred = PredictedDistribution::dirac(0, 3);
        for l in [1.0, 1.5, 2.0, 3.7] {
            let v = wm_loss(&pred, &target(2, 3), &GroundWeights::uniform(3), l).unwrap();
            assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-12);
        }
        let w = weights_from_counts(&[2, 1, 0], 1.0).unwrap();
        let v = wm_loss(&pred, &target(2, 3), &w, 1.5).unwrap();
        assert_abs_diff_eq!(v, 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch_rejected() {
        let pred = PredictedDistribution::dirac(0, 3);
        assert!(matches!(
            wm_loss(&pred, &target(1, 4), &GroundWeights::uniform(3), 1.5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let p = PredictedDistribution::from_logits(&[1000.0, 0.0, -1000.0]).unwrap();
        assert_abs_diff_eq!(*p.cdf.last().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pmf_gradient_matches_finite_differences() {
        let pmf = [0.1, 0.3, 0.25, 0.35];
        let tgt = [0.0, 0.4, 0.4, 1.0];
        let w = weights_from_counts(&[3, 0, 1, 2], 1.0).unwrap();
        let (_, g) = wm_loss_grad_pmf(&pmf, &tgt, &w, 1.5).unwrap();
        for s in 0..4 {
            let h = 1e-7;
            let mut p = pmf;
            p[s] += h;
            let mut m = pmf;
            m[s] -= h;
            let fd = (wm_loss_grad_pmf(&p, &tgt, &w, 1.5).unwrap().0
                - wm_loss_grad_pmf(&m, &tgt, &w, 1.5).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[s]).abs() < 1e-6, "bin {s}: {fd} vs {}", g[s]);
        }
    }

    fn arb_cdf(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let total: f64 = v.iter().sum::<f64>() + 1e-9;
            running_sum(&v.iter().map(|x| x / total).collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn non_negative_and_symmetric(a in arb_cdf(6), b in arb_cdf(6), counts in prop::collection::vec(0usize..5, 6), l in 1.0f64..3.0) {
            let w = weights_from_counts(&counts, 1.0).unwrap();
            let ab = wm_distance(&a, &b, &w, l).unwrap();
            let ba = wm_distance(&b, &a, &w, l).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn zero_only_when_equal(a in arb_cdf(5), b in arb_cdf(5)) {
            let w = GroundWeights::uniform(5);
            let d = wm_distance(&a, &b, &w, 1.5).unwrap();
            prop_assert_eq!(d == 0.0, a == b);
            prop_assert_eq!(wm_distance(&a, &a, &w, 1.5).unwrap(), 0.0);
        }
    }
}
