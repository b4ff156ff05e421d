//! Five-fold cross-validated hyperparameter grid search for the forest.
//!
//! Folds are drawn at current-vector granularity so no current vector
//! contributes samples to both the fit and the validation side of a fold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

use super::{fit_forest, ForestHyperparams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub max_features: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for GridSearchSpec {
    /// The reference study's search grid.
    fn default() -> Self {
        GridSearchSpec {
            n_trees: vec![10, 50, 100],
            max_depth: vec![10, 20, 25, 30],
            min_samples_split: vec![2, 10, 20],
            max_features: vec![3, 4, 5],
            min_samples_leaf: vec![1, 5, 15],
            n_folds: 5,
            seed: 0,
        }
    }
}

impl GridSearchSpec {
    pub fn n_cells(&self) -> usize {
        self.n_trees.len()
            * self.max_depth.len()
            * self.min_samples_split.len()
            * self.max_features.len()
            * self.min_samples_leaf.len()
    }

    /// Enumerate all hyperparameter combinations, in a fixed nesting order.
    pub fn cells(&self) -> Vec<ForestHyperparams> {
        let mut out = Vec::with_capacity(self.n_cells());
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_samples_split in &self.min_samples_split {
                    for &max_features in &self.max_features {
                        for &min_samples_leaf in &self.min_samples_leaf {
                            out.push(ForestHyperparams {
                                n_trees,
                                max_depth,
                                min_samples_split,
                                max_features,
                                min_samples_leaf,
                                bootstrap: true,
                                seed: self.seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One grid cell's cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub hyperparams: ForestHyperparams,
    /// Validation MSE per fold (pooled over samples and components).
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

/// Exhaustive grid search; returns the argmin-by-mean-validation-MSE cell
/// and the full CV table. Ties break toward the earlier cell in grid order.
pub fn grid_search(
    train: &Dataset,
    spec: &GridSearchSpec,
) -> Result<(ForestHyperparams, Vec<CvRecord>)> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if spec.n_folds < 2 {
        return Err(Error::Config("n_folds must be >= 2".into()));
    }
    let cv_ids = train.current_vector_ids();
    if cv_ids.len() < spec.n_folds {
        return Err(Error::TooFewCurrentVectors {
            have: cv_ids.len(),
            need: spec.n_folds,
        });
    }

    // Shuffle current-vector ids once, then deal them round-robin into folds.
    let mut ids: Vec<u32> = cv_ids;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);
    let folds: Vec<BTreeSet<u32>> = (0..spec.n_folds)
        .map(|f| {
            ids.iter()
                .skip(f)
                .step_by(spec.n_folds)
                .copied()
                .collect()
        })
        .collect();

    let mut table = Vec::with_capacity(cells.len());
    for hp in &cells {
        let mut fold_mse = Vec::with_capacity(spec.n_folds);
        for held_out in &folds {
            let fit_part = train.filter_current_vectors(|id| !held_out.contains(&id));
            let val_part = train.filter_current_vectors(|id| held_out.contains(&id));
            let model = fit_forest(&fit_part, hp)?;
            let mut sq = 0.0;
            for s in &val_part.samples {
                let pred = model.predict(&s.position, &s.currents);
                for (a, b) in pred.to_array().iter().zip(s.field.to_array()) {
                    let d = a - b;
                    sq += d * d;
                }
            }
            fold_mse.push(sq / (3 * val_part.samples.len()) as f64);
        }
        let mean_mse = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
        table.push(CvRecord {
            hyperparams: *hp,
            fold_mse,
            mean_mse,
        });
    }

    let best = table
        .iter()
        .min_by(|a, b| a.mean_mse.total_cmp(&b.mean_mse))
        .expect("non-empty table")
        .hyperparams;
    Ok((best, table))
}
