//! From-scratch multi-output random forest regressor: bootstrap bagging,
//! per-node feature subsampling, impurity-based feature importances and a
//! cross-validated grid search.

pub mod grid;
pub mod oracle;
pub mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scaler::ScalerParams;
use crate::types::{CurrentVector, FieldVector, Position, NUM_FEATURES};

pub use grid::{grid_search, CvRecord, GridSearchSpec};
pub use tree::{Node, TrainData, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    /// The winning configuration of the reference study's grid search.
    fn default() -> Self {
        ForestHyperparams {
            n_trees: 100,
            max_depth: 25,
            min_samples_split: 2,
            max_features: 5,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if !(1..=NUM_FEATURES).contains(&self.max_features) {
            return Err(Error::Config(format!(
                "max_features must lie in 1..={NUM_FEATURES}"
            )));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be >= 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub hyperparams: ForestHyperparams,
    pub trees: Vec<Tree>,
    /// Normalized mean-decrease-in-impurity per input feature; sums to 1.
    pub importances: [f64; NUM_FEATURES],
    /// Scaler fitted on the training data; inputs are scaled before
    /// traversal so persisted models are self-contained.
    pub scaler: ScalerParams,
}

/// Train a forest on the (scaled) dataset. Trees grow in parallel with
/// per-tree RNG streams keyed by (seed, tree index), so the result is
/// independent of thread scheduling.
pub fn fit_forest(train: &Dataset, hp: &ForestHyperparams) -> Result<ForestModel> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("cannot fit forest".into()));
    }
    let scaler = ScalerParams::fit(train)?;
    let rows: Vec<[f64; NUM_FEATURES]> = train
        .samples
        .iter()
        .map(|s| scaler.transform_features(&s.features()))
        .collect();
    let targets: Vec<[f64; 3]> = train.samples.iter().map(|s| s.field.to_array()).collect();
    let data = TrainData::new(&rows, targets);
    let n = data.len();

    let grown: Vec<(Tree, [f64; NUM_FEATURES])> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
            rng.set_stream(t as u64);
            let mut indices: Vec<u32> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            let mut importance = [0.0; NUM_FEATURES];
            let tree = tree::grow_tree(&data, &mut indices, hp, &mut rng, &mut importance);
            (tree, importance)
        })
        .collect();

    let mut trees = Vec::with_capacity(hp.n_trees);
    let mut importances = [0.0; NUM_FEATURES];
    for (tree, imp) in grown {
        trees.push(tree);
        for (a, b) in importances.iter_mut().zip(imp.iter()) {
            *a += b;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in importances.iter_mut() {
            *v /= total;
        }
    }

    Ok(ForestModel {
        hyperparams: *hp,
        trees,
        importances,
        scaler,
    })
}

impl ForestModel {
    /// Arithmetic mean of the per-tree leaf outputs.
    pub fn predict(&self, p: &Position, i: &CurrentVector) -> FieldVector {
        let x = self.scaler.transform(p, i);
        self.predict_scaled(&x)
    }

    pub fn predict_scaled(&self, x: &[f64; NUM_FEATURES]) -> FieldVector {
        let mut acc = [0.0; 3];
        for t in &self.trees {
            let v = t.predict(x);
            for c in 0..3 {
                acc[c] += v[c];
            }
        }
        let n = self.trees.len() as f64;
        FieldVector::new(acc[0] / n, acc[1] / n, acc[2] / n)
    }

    /// Feature importances with their names, ranked descending.
    pub fn ranked_importances(&self) -> Vec<(&'static str, f64)> {
        let mut v: Vec<(&'static str, f64)> = crate::types::FEATURE_NAMES
            .iter()
            .copied()
            .zip(self.importances)
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Sample;

    fn dataset_from_rows(rows: &[([f64; NUM_FEATURES], [f64; 3])]) -> Dataset {
        let samples = rows
            .iter()
            .enumerate()
            .map(|(j, (f, t))| {
                let mut currents = [0.0; 8];
                currents.copy_from_slice(&f[3..]);
                Sample {
                    position: Position::new(f[0], f[1], f[2]),
                    currents: CurrentVector(currents),
                    field: FieldVector::new(t[0], t[1], t[2]),
                    sensor_id: 0,
                    current_vector_id: j as u32,
                }
            })
            .collect();
        Dataset::from_samples(samples, "test")
    }

    fn random_rows(n: usize, seed: u64) -> Vec<([f64; NUM_FEATURES], [f64; 3])> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let f: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
                let t: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                (f, t)
            })
            .collect()
    }

    #[test]
    fn forest_prediction_is_mean_of_trees() {
        let d = dataset_from_rows(&random_rows(60, 1));
        let hp = ForestHyperparams {
            n_trees: 7,
            max_depth: 6,
            ..ForestHyperparams::default()
        };
        let model = fit_forest(&d, &hp).unwrap();
        let x = [0.4; NUM_FEATURES];
        let mut acc = [0.0; 3];
        for t in &model.trees {
            let v = t.predict(&x);
            for c in 0..3 {
                acc[c] += v[c];
            }
        }
        let mean = FieldVector::new(acc[0] / 7.0, acc[1] / 7.0, acc[2] / 7.0);
        assert_eq!(model.predict_scaled(&x), mean);
    }

    #[test]
    fn single_tree_without_bootstrap_equals_tree_prediction() {
        let d = dataset_from_rows(&random_rows(50, 2));
        let hp = ForestHyperparams {
            n_trees: 1,
            bootstrap: false,
            max_features: NUM_FEATURES,
            ..ForestHyperparams::default()
        };
        let model = fit_forest(&d, &hp).unwrap();
        let x = [0.2; NUM_FEATURES];
        assert_eq!(
            model.predict_scaled(&x).to_array(),
            model.trees[0].predict(&x)
        );
    }

    #[test]
    fn memorizing_forest_replays_training_targets() {
        let rows = random_rows(50, 3);
        let d = dataset_from_rows(&rows);
        let hp = ForestHyperparams {
            n_trees: 1,
            bootstrap: false,
            max_features: NUM_FEATURES,
            max_depth: usize::MAX,
            ..ForestHyperparams::default()
        };
        let model = fit_forest(&d, &hp).unwrap();
        for s in &d.samples {
            let pred = model.predict(&s.position, &s.currents);
            for (a, b) in pred.to_array().iter().zip(s.field.to_array()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn predictions_stay_within_training_target_range() {
        let rows = random_rows(80, 4);
        let d = dataset_from_rows(&rows);
        let model = fit_forest(
            &d,
            &ForestHyperparams {
                n_trees: 10,
                max_depth: 8,
                ..ForestHyperparams::default()
            },
        )
        .unwrap();
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for (_, t) in &rows {
            for c in 0..3 {
                lo[c] = lo[c].min(t[c]);
                hi[c] = hi[c].max(t[c]);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(-0.5..1.5));
            let p = model.predict_scaled(&x).to_array();
            for c in 0..3 {
                assert!(p[c] >= lo[c] - 1e-12 && p[c] <= hi[c] + 1e-12);
            }
        }
    }

    #[test]
    fn importances_concentrate_on_the_driving_feature() {
        // Output depends only on feature 3.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<([f64; NUM_FEATURES], [f64; 3])> = (0..300)
            .map(|_| {
                let f: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
                let y = (6.0 * f[3]).sin();
                (f, [y, 2.0 * y, -y])
            })
            .collect();
        let d = dataset_from_rows(&rows);
        let model = fit_forest(
            &d,
            &ForestHyperparams {
                n_trees: 20,
                max_depth: 8,
                max_features: NUM_FEATURES,
                ..ForestHyperparams::default()
            },
        )
        .unwrap();
        let sum: f64 = model.importances.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(
            model.importances[3] > 0.9,
            "importances: {:?}",
            model.importances
        );
        assert_eq!(model.ranked_importances()[0].0, "i_1");
    }

    #[test]
    fn fit_is_deterministic() {
        let d = dataset_from_rows(&random_rows(60, 6));
        let hp = ForestHyperparams {
            n_trees: 8,
            max_depth: 6,
            seed: 42,
            ..ForestHyperparams::default()
        };
        let a = fit_forest(&d, &hp).unwrap();
        let b = fit_forest(&d, &hp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn paper_winning_hyperparams_are_accepted() {
        let hp = ForestHyperparams::default();
        assert_eq!(
            (hp.n_trees, hp.max_depth, hp.max_features),
            (100, 25, 5)
        );
        assert_eq!((hp.min_samples_split, hp.min_samples_leaf), (2, 1));
        hp.validate().unwrap();
    }

    #[test]
    fn invalid_hyperparams_are_rejected() {
        let mut hp = ForestHyperparams::default();
        hp.max_features = 12;
        assert!(hp.validate().is_err());
        hp.max_features = 5;
        hp.min_samples_split = 1;
        assert!(hp.validate().is_err());
    }
}
