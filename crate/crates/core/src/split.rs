//! Train/test splitting at current-vector granularity: all samples sharing a
//! current vector travel together, so no applied current leaks across the
//! boundary.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub test_fraction: f64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            seed,
            test_fraction: 0.1,
        }
    }
}

/// Partition the dataset's current vectors into train and test halves.
/// Deterministic under the seed; test size is floor(n * test_fraction).
pub fn split_by_current_vector(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must lie in (0,1), got {}",
            spec.test_fraction
        )));
    }
    let mut ids = d.current_vector_ids();
    if ids.len() < 10 {
        return Err(Error::TooFewCurrentVectors {
            have: ids.len(),
            need: 10,
        });
    }
    let n_test = ((ids.len() as f64) * spec.test_fraction).floor() as usize;
    if n_test == 0 || n_test == ids.len() {
        return Err(Error::Config(format!(
            "degenerate split: {n_test} of {} current vectors in test",
            ids.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);
    let test_ids: BTreeSet<u32> = ids[..n_test].iter().copied().collect();

    let test = d.filter_current_vectors(|id| test_ids.contains(&id));
    let train = d.filter_current_vectors(|id| !test_ids.contains(&id));
    Ok((train, test))
}
