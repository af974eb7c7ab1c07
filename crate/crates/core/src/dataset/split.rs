use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("nothing to split")]
    EmptyInput,
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.2, 0.0];
pub const DEFAULT_SPLIT_SEED: u64 = 42;

fn check_ratios(ratios: [f64; 3]) -> Result<(), SplitError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| r.is_nan() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::InvalidRatios(ratios));
    }
    Ok(())
}

fn partition<T>(mut items: Vec<T>, ratios: [f64; 3], rng: &mut ChaCha8Rng, out: &mut SplitResult<T>) {
    items.shuffle(rng);
    let n = items.len();
    let n_train = ((n as f64 * ratios[0]).round() as usize).min(n);
    let n_val = ((n as f64 * ratios[1]).round() as usize).min(n - n_train);
    let n_test = if ratios[2] > 0.0 { n - n_train - n_val } else { 0 };
    // Any rounding remainder lands in whichever of val/train is non-empty by ratio.
    let leftover = n - n_train - n_val - n_test;
    let (n_train, n_val) = if ratios[1] > 0.0 {
        (n_train, n_val + leftover)
    } else {
        (n_train + leftover, n_val)
    };
    let mut it = items.into_iter();
    out.train.extend(it.by_ref().take(n_train));
    out.val.extend(it.by_ref().take(n_val));
    out.test.extend(it);
}

/// Seeded shuffle followed by a contiguous train/val/test partition.
///
/// When `class_of` is given, items are grouped by its key and each group is
/// partitioned separately (stratification); groups are visited in key order.
pub fn split_dataset<T, K, F>(
    items: Vec<T>,
    ratios: [f64; 3],
    seed: u64,
    class_of: Option<F>,
) -> Result<SplitResult<T>, SplitError>
where
    K: Ord,
    F: Fn(&T) -> K,
{
    check_ratios(ratios)?;
    if items.is_empty() {
        return Err(SplitError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitResult {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    match class_of {
        None => partition(items, ratios, &mut rng, &mut out),
        Some(key) => {
            let mut groups: BTreeMap<K, Vec<T>> = BTreeMap::new();
            for item in items {
                groups.entry(key(&item)).or_default().push(item);
            }
            for (_, group) in groups {
                partition(group, ratios, &mut rng, &mut out);
            }
        }
    }
    Ok(out)
}
