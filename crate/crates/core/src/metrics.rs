//! Acceptable pairs and the concordance index.
//!
//! Scores are oriented so that a higher score means a later predicted event.
//! Times are compared on their raw values, not on grid bins.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Ordered pairs `(i, j)` where `i` is observed and `time(j) > time(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AcceptablePairSet {
    pub pairs: Vec<(usize, usize)>,
}

impl AcceptablePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Per-record scores, higher = later event. Entries must be finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("score {i} is not finite ({})", scores[i])));
        }
        Ok(Self(scores))
    }

    /// Risk scores (higher = earlier event) flipped into this orientation.
    pub fn from_risk(risk: &[f64]) -> Result<Self> {
        Self::new(risk.iter().map(|r| -r).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn acceptable_pairs(dataset: &Dataset) -> AcceptablePairSet {
    let records = dataset.records();
    let mut pairs = Vec::new();
    for (i, a) in records.iter().enumerate() {
        if !a.observed {
            continue;
        }
        for (j, b) in records.iter().enumerate() {
            if b.time > a.time {
                pairs.push((i, j));
            }
        }
    }
    AcceptablePairSet { pairs }
}

/// Concordant and tied counts over the acceptable pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConcordanceCounts {
    pub concordant: u64,
    pub tied: u64,
    pub pairs: u64,
}

impl ConcordanceCounts {
    pub fn merge(self, other: Self) -> Self {
        Self {
            concordant: self.concordant + other.concordant,
            tied: self.tied + other.tied,
            pairs: self.pairs + other.pairs,
        }
    }

    pub fn c_index(&self) -> Result<f64> {
        if self.pairs == 0 {
            return Err(Error::UndefinedMetric("C-index needs at least one acceptable pair".into()));
        }
        Ok((self.concordant as f64 + 0.5 * self.tied as f64) / self.pairs as f64)
    }
}

/// Integer counts for pairs whose first element lies in `rows`.
pub fn concordance_counts(
    times: &[f64],
    observed: &[bool],
    scores: &[f64],
    rows: std::ops::Range<usize>,
) -> ConcordanceCounts {
    let mut c = ConcordanceCounts::default();
    for i in rows {
        if !observed[i] {
            continue;
        }
        let (ti, si) = (times[i], scores[i]);
        for j in 0..times.len() {
            if times[j] > ti {
                c.pairs += 1;
                if si < scores[j] {
                    c.concordant += 1;
                } else if si == scores[j] {
                    c.tied += 1;
                }
            }
        }
    }
    c
}

/// Harrell's C with ½ credit for exactly equal scores.
pub fn c_index(dataset: &Dataset, scores: &ScoreVector) -> Result<f64> {
    if scores.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} records",
            scores.len(),
            dataset.len()
        )));
    }
    let times = dataset.times();
    let observed = dataset.observed();
    concordance_counts(&times, &observed, scores.as_slice(), 0..times.len()).c_index()
}

/// C-index over at most `max_pairs` acceptable pairs drawn uniformly without
/// replacement. Falls back to the exact value when there are fewer pairs.
pub fn c_index_subsampled(
    dataset: &Dataset,
    scores: &ScoreVector,
    max_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let all = acceptable_pairs(dataset);
    if all.len() <= max_pairs {
        return c_index(dataset, scores);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = scores.as_slice();
    let mut c = ConcordanceCounts::default();
    for k in sample(&mut rng, all.len(), max_pairs).iter() {
        let (i, j) = all.pairs[k];
        c.pairs += 1;
        if s[i] < s[j] {
            c.concordant += 1;
        } else if s[i] == s[j] {
            c.tied += 1;
        }
    }
    c.c_index()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;
    use proptest::prelude::*;

    fn dataset(rows: &[(f64, bool)]) -> Dataset {
        let records = rows
            .iter()
            .map(|&(t, o)| SurvivalRecord::new(vec![], t, o).unwrap())
            .collect();
        Dataset::from_records(records, 1.0).unwrap()
    }

    fn scores(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    /// Every ordered pair checked against the definition.
    fn brute_force(rows: &[(f64, bool)], s: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                if rows[i].1 && rows[j].0 > rows[i].0 {
                    n += 1;
                    if s[i] < s[j] {
                        total += 1.0;
                    } else if s[i] == s[j] {
                        total += 0.5;
                    }
                }
            }
        }
        (n > 0).then(|| total / n as f64)
    }

    #[test]
    fn pair_examples() {
        assert_eq!(acceptable_pairs(&dataset(&[(1.0, true), (2.0, true)])).pairs, vec![(0, 1)]);
        assert_eq!(
            acceptable_pairs(&dataset(&[(1.0, true), (2.0, false), (3.0, true)])).pairs,
            vec![(0, 1), (0, 2)]
        );
        assert!(acceptable_pairs(&dataset(&[(1.0, false), (2.0, false)])).is_empty());
    }

    #[test]
    fn equal_times_are_not_acceptable() {
        assert!(acceptable_pairs(&dataset(&[(2.0, true), (2.0, true)])).is_empty());
    }

    #[test]
    fn c_index_examples() {
        let ds = dataset(&[(1.0, true), (2.0, true), (3.0, true), (4.0, true)]);
        assert_eq!(c_index(&ds, &scores(&[1.0, 2.0, 3.0, 4.0])).unwrap(), 1.0);
        assert_eq!(c_index(&ds, &scores(&[7.0; 4])).unwrap(), 0.5);

        let ds = dataset(&[(1.0, true), (2.0, false), (3.0, true)]);
        assert_eq!(c_index(&ds, &scores(&[0.5, 0.2, 0.9])).unwrap(), 0.5);
    }

    #[test]
    fn no_pairs_is_undefined() {
        let ds = dataset(&[(1.0, false), (2.0, false)]);
        assert!(matches!(
            c_index(&ds, &scores(&[0.0, 1.0])),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn score_vector_rejects_nan() {
        assert!(ScoreVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(ScoreVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        let ds = dataset(&[(1.0, true), (2.0, true)]);
        assert!(matches!(c_index(&ds, &scores(&[1.0])), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn subsampling_without_cap_is_exact() {
        let rows = [(1.0, true), (2.0, false), (3.0, true), (5.0, true)];
        let s = scores(&[0.3, 0.1, 0.9, 0.2]);
        let ds = dataset(&rows);
        assert_eq!(
            c_index_subsampled(&ds, &s, 1000, 3).unwrap(),
            c_index(&ds, &s).unwrap()
        );
        let sub = c_index_subsampled(&ds, &s, 2, 3).unwrap();
        assert!((0.0..=1.0).contains(&sub));
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<(f64, bool)>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(((0u32..15).prop_map(f64::from), any::<bool>()), n),
                prop::collection::vec((0i32..6).prop_map(f64::from), n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((rows, s) in arb_instance()) {
            let ds = dataset(&rows);
            match brute_force(&rows, &s) {
                Some(expected) => prop_assert_eq!(c_index(&ds, &scores(&s)).unwrap(), expected),
                None => prop_assert!(c_index(&ds, &scores(&s)).is_err()),
            }
        }

        #[test]
        fn invariant_under_increasing_maps((rows, s) in arb_instance()) {
            let ds = dataset(&rows);
            prop_assume!(!acceptable_pairs(&ds).is_empty());
            let mapped: Vec<f64> = s.iter().map(|x| (x * 0.5).exp() + 3.0).collect();
            prop_assert_eq!(
                c_index(&ds, &scores(&s)).unwrap(),
                c_index(&ds, &scores(&mapped)).unwrap()
            );
        }

        #[test]
        fn negation_complements(rows in prop::collection::vec(((0u32..15).prop_map(f64::from), any::<bool>()), 2..40), seed in any::<u64>()) {
            let ds = dataset(&rows);
            prop_assume!(!acceptable_pairs(&ds).is_empty());
            // distinct scores
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
            use rand::seq::SliceRandom;
            s.shuffle(&mut rng);
            let neg: Vec<f64> = s.iter().map(|x| -x).collect();
            let a = c_index(&ds, &scores(&s)).unwrap();
            let b = c_index(&ds, &scores(&neg)).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
