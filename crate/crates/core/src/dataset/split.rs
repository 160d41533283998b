use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CleanDataset, DataError};

/// Train/test partition of a dataset, with the row indices each side came
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: CleanDataset,
    pub test: CleanDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl SplitPair {
    /// Hash of the test partition (indices and contents). Equal fingerprints
    /// mean two evaluations used the same held-out rows.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for &i in &self.test_indices {
            h.update((i as u64).to_le_bytes());
        }
        h.update(self.test.content_hash().as_bytes());
        crate::seed::hex(&h.finalize())[..16].to_string()
    }
}

fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor() as usize
}

/// Number of test rows for a class of `count` samples.
///
/// A rounded allocation of zero test rows is bumped to one. An allocation
/// that would leave no training rows is rejected: the fraction swallows the
/// whole class.
fn test_allocation(class: u8, count: usize, test_fraction: f64) -> Result<usize, DataError> {
    if count < 2 {
        return Err(DataError::InfeasibleStratum { class, count });
    }
    let n_test = round_half_up(count as f64 * test_fraction);
    if n_test >= count {
        return Err(DataError::InfeasibleStratum { class, count });
    }
    Ok(n_test.max(1))
}

/// Per-class seeded shuffle, allocating `round(count * test_fraction)` rows
/// of each class to the test side. Both sides keep the input row order.
pub fn stratified_split(
    data: &CleanDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPair, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; data.n_samples()];
    for class in [0u8, 1] {
        let mut rows = data.rows_of_class(class);
        let n_test = test_allocation(class, rows.len(), test_fraction)?;
        rows.shuffle(&mut rng);
        for &i in &rows[..n_test] {
            is_test[i] = true;
        }
    }
    let (test_indices, train_indices): (Vec<usize>, Vec<usize>) =
        (0..data.n_samples()).partition(|&i| is_test[i]);
    Ok(SplitPair {
        train: data.subset_rows(&train_indices),
        test: data.subset_rows(&test_indices),
        train_indices,
        test_indices,
        seed,
        test_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(n0: usize, n1: usize) -> CleanDataset {
        let x = (0..n0 + n1).map(|i| vec![i as f64]).collect();
        let y = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
        CleanDataset::new(vec!["f".into()], x, y).unwrap()
    }

    #[test]
    fn proportional_allocation() {
        let s = stratified_split(&dataset(80, 20), 0.2, 1).unwrap();
        assert_eq!(s.test.n_samples(), 20);
        assert_eq!(s.test.class_counts(), [16, 4]);
        assert_eq!(s.train.class_counts(), [64, 16]);
    }

    #[test]
    fn deterministic() {
        let d = dataset(37, 11);
        assert_eq!(
            stratified_split(&d, 0.2, 5).unwrap(),
            stratified_split(&d, 0.2, 5).unwrap()
        );
        assert_ne!(
            stratified_split(&d, 0.2, 5).unwrap().test_indices,
            stratified_split(&d, 0.2, 6).unwrap().test_indices
        );
    }

    #[test]
    fn infeasible_stratum() {
        assert!(matches!(
            stratified_split(&dataset(8, 2), 0.999, 1),
            Err(DataError::InfeasibleStratum { .. })
        ));
        assert!(matches!(
            stratified_split(&dataset(8, 1), 0.2, 1),
            Err(DataError::InfeasibleStratum { class: 1, count: 1 })
        ));
    }

    #[test]
    fn small_class_gets_one_test_row() {
        let s = stratified_split(&dataset(40, 2), 0.2, 3).unwrap();
        assert_eq!(s.test.class_counts(), [8, 1]);
    }

    #[test]
    fn rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                stratified_split(&dataset(5, 5), f, 0),
                Err(DataError::BadFraction(_))
            ));
        }
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(
            n0 in 2usize..60, n1 in 2usize..60, frac in 0.05f64..0.6, seed in any::<u64>()
        ) {
            let d = dataset(n0, n1);
            let s = stratified_split(&d, frac, seed).unwrap();
            let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n0 + n1).collect::<Vec<_>>());
            for (c, n) in [(0usize, n0), (1, n1)] {
                let ideal = n as f64 * frac;
                prop_assert!((s.test.class_counts()[c] as f64 - ideal).abs() <= 1.0);
                prop_assert!(s.train.class_counts()[c] >= 1);
                prop_assert!(s.test.class_counts()[c] >= 1);
            }
            prop_assert_eq!(s.train.feature_names(), s.test.feature_names());
        }
    }
}
