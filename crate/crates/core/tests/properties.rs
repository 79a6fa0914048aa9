mod common;

use censrank::data::{Dataset, SurvivalRecord};
use censrank::harness::{
    build_folds, inject_censoring, mean_and_std_error, CensoringMode, EarlyStopping, ExperimentConfig, StopDecision,
    TrainRun,
};
use censrank::losses::{cox_nll, ranking_loss, LossConfig, LossKind, Phi, TieMethod};
use censrank::metrics::{acceptable_pairs, c_index, ScoreVector};
use censrank::neural::{Head, Mode, Network, NetworkConfig};
use censrank::pipeline::{generate_records, kfold_split, SyntheticConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::records;

fn arb_survival(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((1u32..12, any::<bool>()), 2..max).prop_map(|rows| {
        let times = rows.iter().map(|r| f64::from(r.0)).collect();
        let mut observed: Vec<bool> = rows.iter().map(|r| r.1).collect();
        observed[0] = true;
        (times, observed)
    })
}

fn synth(n: usize, censor: f64, seed: u64) -> Vec<SurvivalRecord> {
    generate_records(&SyntheticConfig::new(n, 3, censor, 0.0, seed).with_scale(40.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cox_is_shift_invariant((times, observed) in arb_survival(30), shift in -50.0f64..50.0, seed in any::<u64>()) {
        let ds = Dataset::from_records(records(&times, &observed), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outputs: Vec<f64> = (0..times.len()).map(|_| rand::Rng::random_range(&mut rng, -4.0..4.0)).collect();
        let shifted: Vec<f64> = outputs.iter().map(|o| o + shift).collect();
        for ties in [TieMethod::Breslow, TieMethod::Efron] {
            let a = cox_nll(&outputs, &ds, ties).unwrap();
            let b = cox_nll(&shifted, &ds, ties).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn ranking_surrogates_bound_the_c_index(times in prop::collection::vec(1u32..30, 2..25), seed in any::<u64>()) {
        let times: Vec<f64> = times.into_iter().map(f64::from).collect();
        prop_assume!(times.iter().any(|&t| t != times[0]));
        let observed = vec![true; times.len()];
        let ds = Dataset::from_records(records(&times, &observed), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..times.len()).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let c = c_index(&ds, &ScoreVector::new(scores.clone()).unwrap()).unwrap();
        let pairs = acceptable_pairs(&ds);
        for phi in [Phi::LogSigmoid, Phi::Hinge, Phi::Exponential, Phi::ShiftedHinge { clip: Some(1.0) }] {
            prop_assert!(-ranking_loss(&scores, &pairs, phi).unwrap() <= c + 1e-12);
        }
    }

    #[test]
    fn test_folds_partition_and_sets_are_disjoint(n in 5usize..200, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let folds = kfold_split(n, k, 0.2, seed).unwrap();
        let mut seen = vec![0usize; n];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            let mut all: Vec<usize> = f.train.iter().chain(&f.val).chain(&f.test).copied().collect();
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn standard_error_definition(values in prop::collection::vec(0.0f64..1.0, 2..10)) {
        let (mean, se) = mean_and_std_error(&values);
        let k = values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        prop_assert!((se - (var / k).sqrt()).abs() <= 1e-12);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= mean && mean <= hi);
    }

    #[test]
    fn early_stopping_never_passes_the_best_epoch(values in prop::collection::vec(0.0f64..1.0, 1..40), patience in 1usize..5) {
        let mut es = EarlyStopping::new(patience);
        let mut last = 0;
        for (epoch, &v) in values.iter().enumerate() {
            last = epoch;
            if es.observe(epoch, v) == StopDecision::Stop {
                break;
            }
        }
        let (best, value) = es.best().unwrap();
        prop_assert!(best <= last);
        prop_assert!(values[..=last].iter().all(|&v| v <= value));
        prop_assert_eq!(values[..=last].iter().position(|&v| v == value), Some(best));
    }
}

#[test]
fn validation_and_test_sets_are_shared_by_every_setting() {
    let recs = synth(120, 0.3, 4);
    let config = ExperimentConfig::new(TrainRun::new(LossConfig::new(LossKind::Wm)));
    let native = recs.iter().filter(|r| !r.observed).count() as f64 / recs.len() as f64;
    let baseline = build_folds(recs.as_slice(), &config, |_, t| Ok(t)).unwrap();
    let mut settings = Vec::new();
    for mode in CensoringMode::all() {
        settings.push(build_folds(recs.as_slice(), &config, |_, t| Ok(mode.apply(t))).unwrap());
    }
    for fraction in [native, 0.6, 0.9] {
        settings.push(build_folds(recs.as_slice(), &config, |f, t| inject_censoring(t, fraction, native, f as u64)).unwrap());
    }
    for folds in &settings {
        for (a, b) in folds.iter().zip(&baseline) {
            assert_eq!(a.val.records(), b.val.records());
            assert_eq!(a.test.records(), b.test.records());
        }
    }
}

#[test]
fn eval_forward_is_pure() {
    let mut net = Network::new(NetworkConfig { hidden_dims: vec![5, 4], ..NetworkConfig::new(3, Head::Softmax { bins: 6 }) }).unwrap();
    let x = Array2::from_shape_fn((7, 3), |(i, j)| (i as f64 - 3.0) * 0.3 + j as f64 * 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tape = net.forward(x.view(), Mode::Train, &mut rng).unwrap();
    net.update_running_stats(&tape);
    let before = net.clone();
    let a = net.predict(x.view()).unwrap();
    let t = net.forward(x.view(), Mode::Eval, &mut rng).unwrap();
    assert_eq!(net, before);
    assert_eq!(&a, t.outputs());
}

#[test]
fn train_and_eval_agree_after_running_stats_converge() {
    let mut net = Network::new(NetworkConfig {
        hidden_dims: vec![6, 6],
        dropout_rate: 0.0,
        ..NetworkConfig::new(2, Head::ScalarLinear)
    })
    .unwrap();
    let x = Array2::from_shape_fn((8, 2), |(i, j)| ((i * 3 + j * 5) % 7) as f64 - 2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let tape = net.forward(x.view(), Mode::Train, &mut rng).unwrap();
        net.update_running_stats(&tape);
    }
    let train = net.forward(x.view(), Mode::Train, &mut rng).unwrap();
    let eval = net.predict(x.view()).unwrap();
    let diff = (train.outputs() - &eval).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
    assert!(diff < 1e-4, "max difference {diff}");
}
