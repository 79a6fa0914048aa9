//! Seed derivation.
//!
//! Every random stream in an experiment is seeded with
//! `derive_seed(master, stream, index)`: the three values are mixed through
//! SplitMix64 in that order. Stream tags are the constants below; `index` is
//! the fold number (or 0 when a stream is experiment-wide).

/// Fold assignment (`index` = 0).
pub const STREAM_SPLIT: u64 = 1;
/// Network initialization for one fold.
pub const STREAM_INIT: u64 = 2;
/// Minibatch order and dropout masks for one fold.
pub const STREAM_SHUFFLE: u64 = 3;
/// Censoring injection in the sweep for one fold.
pub const STREAM_INJECT: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn streams_and_indices_separate() {
        let mut seen = HashSet::new();
        for stream in 1..=4 {
            for index in 0..100 {
                assert!(seen.insert(derive_seed(42, stream, index)));
            }
        }
        assert_ne!(derive_seed(1, 2, 3), derive_seed(2, 1, 3));
    }

    #[test]
    fn reference_value() {
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
