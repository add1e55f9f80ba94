use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded permutation of `0..n` (Fisher-Yates over ChaCha8).
pub fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Number of training samples: `floor(n * (1 - val_ratio))`.
pub fn train_count(n: usize, val_ratio: f64) -> usize {
    // The epsilon absorbs representation error such as 10 * (1 - 0.3) < 7.
    let raw = (n as f64 * (1.0 - val_ratio) + 1e-9).floor() as usize;
    raw.min(n.saturating_sub(1))
}

/// Shuffles `0..n` and cuts it into a training prefix and validation rest.
pub fn split_dataset(n: usize, val_ratio: f64, seed: u64) -> Result<Split> {
    if !(val_ratio > 0.0 && val_ratio < 1.0) {
        return Err(Error::argument(format!("validation ratio {val_ratio} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::argument(format!("cannot split {n} samples")));
    }
    let n_train = train_count(n, val_ratio);
    if n_train == 0 {
        return Err(Error::argument(format!(
            "ratio {val_ratio} leaves no training samples out of {n}"
        )));
    }
    let mut order = permutation(n, &mut ChaCha8Rng::seed_from_u64(seed));
    let val = order.split_off(n_train);
    Ok(Split { train: order, val })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn reported_split_sizes() {
        let s = split_dataset(1592, 0.2, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (1273, 319));
        let s = split_dataset(2892, 0.3, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (2024, 868));
    }

    #[test]
    fn even_split() {
        let s = split_dataset(10, 0.5, 9).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (5, 5));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn bad_ratios() {
        for r in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split_dataset(10, r, 0), Err(Error::Argument(_))));
        }
        assert!(split_dataset(1, 0.5, 0).is_err());
        assert!(split_dataset(3, 0.9, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_seeded_partition(n in 2usize..400, r in 0.01f64..0.99, seed in any::<u64>()) {
            prop_assume!(train_count(n, r) > 0);
            let s = split_dataset(n, r, seed).unwrap();
            prop_assert_eq!(s.train.len(), train_count(n, r));
            prop_assert_eq!(s.train.len() + s.val.len(), n);
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_dataset(n, r, seed).unwrap(), s);
        }

        #[test]
        fn train_count_is_the_floor(n in 1usize..5000, r in 0.01f64..0.99) {
            let exact = n as f64 * (1.0 - r);
            let c = train_count(n, r);
            prop_assert!((c as f64) <= exact + 1e-6 && exact < c as f64 + 1.0 + 1e-6);
        }
    }
}
