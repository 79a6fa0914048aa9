use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row indices (sorted) of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// `k` folds over `n` rows. Test folds partition the rows (sizes differ by at
/// most one); a `val_fraction` share of each fold's remaining rows, rounded,
/// is held out for validation.
pub fn kfold_split(n: usize, k: usize, val_fraction: f64, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction {val_fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut test: Vec<usize> = order[start..start + size].to_vec();
        let mut rest: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        start += size;

        rest.shuffle(&mut rng);
        let n_val = ((rest.len() as f64) * val_fraction).round() as usize;
        let n_val = n_val.clamp(1, rest.len().saturating_sub(1).max(1));
        let mut val = rest[..n_val].to_vec();
        let mut train = rest[n_val..].to_vec();
        test.sort_unstable();
        val.sort_unstable();
        train.sort_unstable();
        folds.push(FoldSplit { train, val, test });
    }
    Ok(folds)
}

/// A single shuffled holdout: `(train, val)` with `val_fraction` of the rows, rounded.
pub fn train_val_split(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid("need at least two rows to hold out a validation set"));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction {val_fraction} not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ten_rows_five_folds() {
        let folds = kfold_split(10, 5, 0.2, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all_test: Vec<usize> = Vec::new();
        for f in &folds {
            assert_eq!(f.test.len(), 2);
            assert!(f.val.len() == 1 || f.val.len() == 2);
            assert_eq!(f.train.len() + f.val.len(), 8);
            all_test.extend(&f.test);
        }
        all_test.sort_unstable();
        assert_eq!(all_test, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_split() {
        assert_eq!(kfold_split(37, 5, 0.2, 11).unwrap(), kfold_split(37, 5, 0.2, 11).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        for s in 0..10u64 {
            assert_ne!(kfold_split(100, 5, 0.2, s).unwrap(), kfold_split(100, 5, 0.2, s + 1000).unwrap());
        }
    }

    #[test]
    fn sets_are_disjoint() {
        for f in kfold_split(53, 5, 0.2, 3).unwrap() {
            let a: HashSet<_> = f.train.iter().collect();
            let b: HashSet<_> = f.val.iter().collect();
            let c: HashSet<_> = f.test.iter().collect();
            assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
            assert_eq!(a.len() + b.len() + c.len(), 53);
        }
    }

    #[test]
    fn holdout_split() {
        let (train, val) = train_val_split(10, 0.2, 1).unwrap();
        assert_eq!((train.len(), val.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_arguments() {
        assert!(matches!(kfold_split(3, 5, 0.2, 0), Err(Error::InvalidArgument(_))));
        assert!(kfold_split(10, 1, 0.2, 0).is_err());
        assert!(kfold_split(10, 5, 0.0, 0).is_err());
        assert!(kfold_split(10, 5, 1.0, 0).is_err());
    }
}
