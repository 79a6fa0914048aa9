#![allow(dead_code)]

use std::path::PathBuf;

use censrank::data::{Dataset, SurvivalRecord};
use censrank::losses::{LossConfig, LossKind, Objective};
use censrank::neural::{Mode, Network};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Directory holding the prepared datasets.
pub fn data_dir() -> PathBuf {
    std::env::var_os("CENSRANK_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn records(times: &[f64], observed: &[bool]) -> Vec<SurvivalRecord> {
    times
        .iter()
        .zip(observed)
        .map(|(&t, &o)| SurvivalRecord::new(vec![0.0], t, o).unwrap())
        .collect()
}

/// Double loop over all ordered pairs.
pub fn brute_c_index(times: &[f64], observed: &[bool], scores: &[f64]) -> Option<f64> {
    let (mut pairs, mut credit) = (0u64, 0u64);
    for i in 0..times.len() {
        if !observed[i] {
            continue;
        }
        for j in 0..times.len() {
            if times[j] > times[i] {
                pairs += 1;
                if scores[j] > scores[i] {
                    credit += 2;
                } else if scores[j] == scores[i] {
                    credit += 1;
                }
            }
        }
    }
    (pairs > 0).then(|| credit as f64 / (2 * pairs) as f64)
}

/// Product-limit estimate on grid bins, one factor per bin.
pub fn km_direct(bins: &[usize], observed: &[bool], num_bins: usize) -> Vec<f64> {
    let mut s = 1.0;
    (0..num_bins)
        .map(|k| {
            let n = bins.iter().filter(|&&b| b >= k).count();
            let d = bins.iter().zip(observed).filter(|(&b, &o)| b == k && o).count();
            if n > 0 {
                s *= 1.0 - d as f64 / n as f64;
            }
            s
        })
        .collect()
}

fn params(net: &Network) -> Vec<f64> {
    let mut copy = net.clone();
    copy.params_mut().into_iter().flat_map(|p| p.to_vec()).collect()
}

fn set_param(net: &mut Network, index: usize, value: f64) {
    let mut offset = index;
    for p in net.params_mut() {
        if offset < p.len() {
            p[offset] = value;
            return;
        }
        offset -= p.len();
    }
    panic!("parameter index out of range");
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps round-off in the
/// differences of near-zero components from dominating.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Floor for [`rel_error`]: `1e-4` times the largest analytic component.
pub const FLOOR_FRACTION: f64 = 1e-4;

/// Total objective (loss plus L2) of `net` on the full batch and the state
/// needed to detect non-smooth points.
fn evaluate(net: &Network, obj: &Objective, x: &Array2<f64>, data: &Dataset, mode: Mode) -> (f64, Vec<bool>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tape = net.forward(x.view(), mode, &mut rng).unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let (v, _) = obj.batch(tape.outputs().view(), &idx, data).unwrap().unwrap();
    let kinks = kink_sides(obj.config(), tape.outputs(), data);
    (v + net.l2_penalty(), tape.activation_pattern(), kinks)
}

/// For hinge-type losses, the side of each kink every pair margin is on.
fn kink_sides(config: &LossConfig, outputs: &Array2<f64>, data: &Dataset) -> Vec<bool> {
    let LossKind::Rank(phi) = config.kind else { return Vec::new() };
    let kinks = phi.kinks();
    if kinks.is_empty() {
        return Vec::new();
    }
    let r = data.records();
    let mut sides = Vec::new();
    for i in 0..r.len() {
        if !r[i].observed {
            continue;
        }
        for j in 0..r.len() {
            if r[j].time > r[i].time {
                let z = outputs[[j, 0]] - outputs[[i, 0]];
                sides.extend(kinks.iter().map(|&k| z > k));
            }
        }
    }
    sides
}

/// Central differences against backprop for every parameter. Coordinates
/// where the perturbation changes a ReLU pattern or crosses a kink of phi are
/// skipped.
pub fn gradient_check(net: &Network, kind: LossKind, data: &Dataset, mode: Mode, h: f64) -> GradCheck {
    let obj = Objective::new(LossConfig::new(kind), data).unwrap();
    let x = data.feature_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tape = net.forward(x.view(), mode, &mut rng).unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, g) = obj.batch(tape.outputs().view(), &idx, data).unwrap().unwrap();
    let grads = net.backward(&tape, g.view()).unwrap();
    let analytic: Vec<f64> = grads.slices().into_iter().flat_map(|s| s.to_vec()).collect();
    let (_, base_pattern, base_kinks) = evaluate(net, &obj, &x, data, mode);

    let floor = FLOOR_FRACTION * analytic.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-12);
    let theta = params(net);
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for (i, (&p, &a)) in theta.iter().zip(&analytic).enumerate() {
        let mut plus = net.clone();
        set_param(&mut plus, i, p + h);
        let mut minus = net.clone();
        set_param(&mut minus, i, p - h);
        let (fp, pp, kp) = evaluate(&plus, &obj, &x, data, mode);
        let (fm, pm, km) = evaluate(&minus, &obj, &x, data, mode);
        if pp != base_pattern || pm != base_pattern || kp != base_kinks || km != base_kinks {
            out.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        out.max_rel_error = out.max_rel_error.max(rel_error(a, numeric, floor));
        out.checked += 1;
    }
    out
}

/// One line per acceptance criterion.
pub fn report(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

pub fn skip(name: &str, reason: &str) {
    println!("[SKIP] {name}: {reason}");
}
