//! Negative Cox partial log-likelihood with `f = exp(o)`.
//!
//! Risk sets are taken on grid bins: records sharing a bin are tied.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMethod {
    #[default]
    Breslow,
    Efron,
}

/// `-l(theta)`, summed over observed records (not averaged).
pub fn cox_nll(outputs: &[f64], dataset: &Dataset, ties: TieMethod) -> Result<f64> {
    if outputs.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "{} outputs for {} records",
            outputs.len(),
            dataset.len()
        )));
    }
    cox_nll_with_grad(outputs, dataset.bins(), &dataset.observed(), ties).map(|(v, _)| v)
}

/// Loss and its gradient with respect to each output.
pub fn cox_nll_with_grad(
    outputs: &[f64],
    bins: &[usize],
    observed: &[bool],
    ties: TieMethod,
) -> Result<(f64, Vec<f64>)> {
    let n = outputs.len();
    if bins.len() != n || observed.len() != n {
        return Err(Error::invalid("outputs, bins and event flags differ in length"));
    }
    if !observed.iter().any(|&o| o) {
        return Err(Error::invalid("Cox partial likelihood needs at least one observed event"));
    }
    if let Some(i) = outputs.iter().position(|o| !o.is_finite()) {
        return Err(Error::invalid(format!("output {i} is not finite")));
    }

    let num_bins = bins.iter().copied().max().unwrap_or(0) + 1;

    // All sums are kept as logs so one dominant output cannot underflow the rest.
    let mut log_bin = vec![f64::NEG_INFINITY; num_bins];
    let mut log_tied = vec![f64::NEG_INFINITY; num_bins];
    let mut tied_out = vec![0.0; num_bins];
    let mut tied_count = vec![0usize; num_bins];
    for i in 0..n {
        log_bin[bins[i]] = log_add(log_bin[bins[i]], outputs[i]);
        if observed[i] {
            log_tied[bins[i]] = log_add(log_tied[bins[i]], outputs[i]);
            tied_out[bins[i]] += outputs[i];
            tied_count[bins[i]] += 1;
        }
    }

    // log_risk[b] = log sum of exp(o) over records with bin >= b
    let mut log_risk = vec![f64::NEG_INFINITY; num_bins];
    let mut acc = f64::NEG_INFINITY;
    for b in (0..num_bins).rev() {
        acc = log_add(acc, log_bin[b]);
        log_risk[b] = acc;
    }

    let mut nll = 0.0;
    // Per event bin: a = sum_r 1/den_r, c = sum_r (r/m)/den_r, both as logs.
    let mut log_a = vec![f64::NEG_INFINITY; num_bins];
    let mut log_c = vec![f64::NEG_INFINITY; num_bins];
    for b in 0..num_bins {
        let m = tied_count[b];
        if m == 0 {
            continue;
        }
        match ties {
            TieMethod::Breslow => {
                nll += m as f64 * log_risk[b];
                log_a[b] = (m as f64).ln() - log_risk[b];
            }
            TieMethod::Efron => {
                let ratio = (log_tied[b] - log_risk[b]).exp().min(1.0);
                for r in 0..m {
                    let frac = r as f64 / m as f64;
                    let log_den = log_risk[b] + (-frac * ratio).ln_1p();
                    nll += log_den;
                    log_a[b] = log_add(log_a[b], -log_den);
                    if r > 0 {
                        log_c[b] = log_add(log_c[b], frac.ln() - log_den);
                    }
                }
            }
        }
        nll -= tied_out[b];
    }

    let mut log_cum_a = vec![f64::NEG_INFINITY; num_bins];
    let mut acc = f64::NEG_INFINITY;
    for b in 0..num_bins {
        acc = log_add(acc, log_a[b]);
        log_cum_a[b] = acc;
    }
    let grad = (0..n)
        .map(|k| {
            let b = bins[k];
            let mut g = (outputs[k] + log_cum_a[b]).exp();
            if observed[k] {
                g -= (outputs[k] + log_c[b]).exp() + 1.0;
            }
            g
        })
        .collect();
    Ok((nll, grad))
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}
