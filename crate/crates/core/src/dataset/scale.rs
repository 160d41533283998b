use serde::{Deserialize, Serialize};

use super::{CleanDataset, DataError};

/// Per-feature min and max from the data the scaler was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    fn check(&self, data: &CleanDataset) -> Result<(), DataError> {
        if data.n_features() != self.n_features() {
            return Err(DataError::FeatureMismatch {
                expected: self.n_features(),
                got: data.n_features(),
            });
        }
        Ok(())
    }
}

pub fn fit_scaler(train: &CleanDataset) -> ScalerParams {
    let n = train.n_features();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for row in train.x() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    if train.n_samples() == 0 {
        min.fill(0.0);
        max.fill(0.0);
    }
    ScalerParams { min, max }
}

/// Maps each value to `(v - min) / (max - min)` clamped to `[0, 1]`. A
/// feature with `max == min` in the fitted data maps to 0.
pub fn apply_scaler(params: &ScalerParams, data: &CleanDataset) -> Result<CleanDataset, DataError> {
    params.check(data)?;
    let x = data
        .x()
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let range = params.max[j] - params.min[j];
                    if range > 0.0 {
                        ((v - params.min[j]) / range).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    CleanDataset::new(data.feature_names().to_vec(), x, data.y().to_vec())
}

/// Inverse of [`apply_scaler`] for values inside the fitted range.
pub fn invert_scaler(
    params: &ScalerParams,
    data: &CleanDataset,
) -> Result<CleanDataset, DataError> {
    params.check(data)?;
    let x = data
        .x()
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| params.min[j] + v * (params.max[j] - params.min[j]))
                .collect()
        })
        .collect();
    CleanDataset::new(data.feature_names().to_vec(), x, data.y().to_vec())
}
