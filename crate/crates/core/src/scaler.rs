//! Min-max feature scaling fitted on training data only.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{feature_vector, CurrentVector, Position, NUM_FEATURES};

/// Per-feature min/max over the 11 inputs (x, y, z, i_1..i_8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

impl ScalerParams {
    pub fn fit(train: &Dataset) -> Result<ScalerParams> {
        if train.is_empty() {
            return Err(Error::EmptyDataset("cannot fit scaler".into()));
        }
        let mut min = [f64::INFINITY; NUM_FEATURES];
        let mut max = [f64::NEG_INFINITY; NUM_FEATURES];
        for s in &train.samples {
            for (j, v) in s.features().iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        Ok(ScalerParams { min, max })
    }

    /// Scale an 11-vector into [0,1], clamping out-of-range test values.
    /// Degenerate features (max == min) map to 0.
    pub fn transform(&self, p: &Position, i: &CurrentVector) -> [f64; NUM_FEATURES] {
        self.transform_features(&feature_vector(p, i))
    }

    pub fn transform_features(&self, f: &[f64; NUM_FEATURES]) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            let span = self.max[j] - self.min[j];
            out[j] = if span > 0.0 {
                ((f[j] - self.min[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }

    /// Map scaled values back to feature space. Degenerate features recover
    /// their single fitted value.
    pub fn inverse_transform(&self, scaled: &[f64; NUM_FEATURES]) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            out[j] = self.min[j] + scaled[j] * (self.max[j] - self.min[j]);
        }
        out
    }
}
