//! Seeded datasets with planted structure: informative features, exact
//! duplicates of informative features, and pure noise.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{CleanDataset, DataError};

pub const LABEL_NAME: &str = "defective";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub informative: usize,
    /// Each duplicate copies one informative feature exactly, cycling
    /// through them in order.
    pub duplicates: usize,
    pub noise: usize,
    pub samples: usize,
    /// Majority-to-minority ratio; the minority class is labelled 1.
    pub imbalance: f64,
    /// Shift of the class-1 mean, in standard deviations, for informative
    /// features.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            informative: 10,
            duplicates: 5,
            noise: 5,
            samples: 1000,
            imbalance: 4.0,
            separation: 0.3,
            seed: 0,
        }
    }
}

/// Where each kind of feature landed. Columns are ordered informative,
/// duplicates, noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLayout {
    pub informative: Vec<usize>,
    /// `(original, copy)` column pairs.
    pub duplicate_pairs: Vec<(usize, usize)>,
    pub noise: Vec<usize>,
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.informative + self.duplicates + self.noise
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_features() == 0 {
            return Err(DataError::TooSmall {
                what: "features",
                needed: 1,
                got: 0,
            });
        }
        if self.duplicates > 0 && self.informative == 0 {
            return Err(DataError::Inconsistent(
                "duplicates need at least one informative feature".into(),
            ));
        }
        if !(self.imbalance >= 1.0 && self.imbalance.is_finite()) {
            return Err(DataError::Inconsistent(format!(
                "imbalance {} must be a finite ratio >= 1",
                self.imbalance
            )));
        }
        if !self.separation.is_finite() {
            return Err(DataError::Inconsistent("separation must be finite".into()));
        }
        let [_, minority] = self.class_sizes();
        if minority < 2 || self.samples - minority < 2 {
            return Err(DataError::TooSmall {
                what: "samples per class",
                needed: 2,
                got: minority.min(self.samples - minority),
            });
        }
        Ok(())
    }

    fn class_sizes(&self) -> [usize; 2] {
        let minority = (self.samples as f64 / (1.0 + self.imbalance)).round() as usize;
        [self.samples.saturating_sub(minority), minority]
    }

    pub fn layout(&self) -> SyntheticLayout {
        let k = self.informative;
        SyntheticLayout {
            informative: (0..k).collect(),
            duplicate_pairs: (0..self.duplicates)
                .map(|d| (d % k.max(1), k + d))
                .collect(),
            noise: (k + self.duplicates..self.n_features()).collect(),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.informative).map(|i| format!("inf_{i}")).collect();
        names.extend(
            self.layout()
                .duplicate_pairs
                .iter()
                .map(|(o, _)| format!("dup_of_inf_{o}")),
        );
        names.extend((0..self.noise).map(|i| format!("noise_{i}")));
        // names must stay unique when several duplicates copy one feature
        let mut seen = std::collections::HashMap::new();
        for n in names.iter_mut() {
            let c = seen.entry(n.clone()).or_insert(0usize);
            if *c > 0 {
                n.push_str(&format!("_{c}"));
            }
            *c += 1;
        }
        names
    }

    /// Draws the dataset. Rows are shuffled so the classes interleave.
    pub fn generate(&self) -> Result<(CleanDataset, SyntheticLayout), DataError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let [c0, c1] = self.class_sizes();
        let mut y: Vec<u8> = std::iter::repeat_n(0, c0)
            .chain(std::iter::repeat_n(1, c1))
            .collect();
        y.shuffle(&mut rng);
        let layout = self.layout();
        let x: Vec<Vec<f64>> = y
            .iter()
            .map(|&label| {
                let mut row = Vec::with_capacity(self.n_features());
                for _ in 0..self.informative {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    row.push(z + self.separation * f64::from(label));
                }
                for &(orig, _) in &layout.duplicate_pairs {
                    row.push(row[orig]);
                }
                for _ in 0..self.noise {
                    row.push(StandardNormal.sample(&mut rng));
                }
                row
            })
            .collect();
        Ok((CleanDataset::new(self.feature_names(), x, y)?, layout))
    }
}
