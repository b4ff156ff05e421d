//! Property-based invariants for the scaler, the current-vector split,
//! the forest predictor and the evaluation metrics.

use proptest::prelude::*;
use std::collections::BTreeSet;

use emns_core::dataset::Dataset;
use emns_core::eval::{bin_of, default_bin_edges, r2_component, rmse_component};
use emns_core::forest::{fit_forest, ForestHyperparams};
use emns_core::scaler::ScalerParams;
use emns_core::split::{split_by_current_vector, SplitSpec};
use emns_core::types::{CurrentVector, FieldVector, Position, Sample, NUM_FEATURES};

fn sample_from_features(f: &[f64; NUM_FEATURES], target: FieldVector, cv: u32) -> Sample {
    let mut currents = [0.0; 8];
    currents.copy_from_slice(&f[3..]);
    Sample {
        position: Position::new(f[0], f[1], f[2]),
        currents: CurrentVector(currents),
        field: target,
        sensor_id: 0,
        current_vector_id: cv,
    }
}

fn dataset_from_rows(rows: &[([f64; NUM_FEATURES], [f64; 3])]) -> Dataset {
    let samples = rows
        .iter()
        .enumerate()
        .map(|(j, (f, b))| {
            sample_from_features(f, FieldVector::new(b[0], b[1], b[2]), j as u32)
        })
        .collect();
    Dataset::from_samples(samples, "property-test")
}

fn feature_row() -> impl Strategy<Value = [f64; NUM_FEATURES]> {
    prop::array::uniform11(-40.0f64..40.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaler_outputs_lie_in_unit_interval(
        rows in prop::collection::vec((feature_row(), prop::array::uniform3(-0.1f64..0.1)), 2..40),
        probe in feature_row(),
    ) {
        let d = dataset_from_rows(&rows);
        let s = ScalerParams::fit(&d).unwrap();
        for v in s.transform_features(&probe) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn scaler_round_trips_in_range_features(
        rows in prop::collection::vec((feature_row(), prop::array::uniform3(-0.1f64..0.1)), 2..40),
        pick in any::<prop::sample::Index>(),
    ) {
        let d = dataset_from_rows(&rows);
        let s = ScalerParams::fit(&d).unwrap();
        // A fitted training row is in range by construction.
        let f = rows[pick.index(rows.len())].0;
        let back = s.inverse_transform(&s.transform_features(&f));
        for j in 0..NUM_FEATURES {
            let span = s.max[j] - s.min[j];
            if span > 0.0 {
                prop_assert!((back[j] - f[j]).abs() <= 1e-9 * span.max(1.0));
            } else {
                prop_assert_eq!(back[j], s.min[j]);
            }
        }
    }

    #[test]
    fn scaler_is_monotone_per_feature(
        rows in prop::collection::vec((feature_row(), prop::array::uniform3(-0.1f64..0.1)), 2..40),
        a in feature_row(),
        b in feature_row(),
    ) {
        let d = dataset_from_rows(&rows);
        let s = ScalerParams::fit(&d).unwrap();
        let sa = s.transform_features(&a);
        let sb = s.transform_features(&b);
        for j in 0..NUM_FEATURES {
            if a[j] <= b[j] {
                prop_assert!(sa[j] <= sb[j]);
            }
        }
    }

    #[test]
    fn split_partitions_current_vectors(
        n_cv in 10u32..120,
        n_sensors in 1u32..5,
        seed in any::<u64>(),
    ) {
        let mut samples = Vec::new();
        for cv in 0..n_cv {
            for sensor in 0..n_sensors {
                let f = [sensor as f64, 0.0, 0.0, cv as f64, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
                samples.push(sample_from_features(&f, FieldVector::zeros(), cv));
            }
        }
        let d = Dataset::from_samples(samples, "property-test");
        let (train, test) = split_by_current_vector(&d, &SplitSpec::new(seed)).unwrap();
        let train_ids: BTreeSet<u32> = train.current_vector_ids().into_iter().collect();
        let test_ids: BTreeSet<u32> = test.current_vector_ids().into_iter().collect();
        prop_assert!(train_ids.is_disjoint(&test_ids));
        prop_assert_eq!(train_ids.len() + test_ids.len(), n_cv as usize);
        prop_assert_eq!(train.len() + test.len(), d.len());
        prop_assert_eq!(test_ids.len(), (n_cv as f64 * 0.1).floor() as usize);
    }

    #[test]
    fn forest_predictions_stay_within_target_range(
        rows in prop::collection::vec((feature_row(), prop::array::uniform3(-0.1f64..0.1)), 12..40),
        probe in feature_row(),
        seed in any::<u64>(),
    ) {
        let d = dataset_from_rows(&rows);
        let hp = ForestHyperparams {
            n_trees: 5,
            max_depth: 6,
            seed,
            ..ForestHyperparams::default()
        };
        let model = fit_forest(&d, &hp).unwrap();
        let mut currents = [0.0; 8];
        currents.copy_from_slice(&probe[3..]);
        let pred = model.predict(
            &Position::new(probe[0], probe[1], probe[2]),
            &CurrentVector(currents),
        );
        for (k, v) in [pred.bx, pred.by, pred.bz].into_iter().enumerate() {
            let lo = rows.iter().map(|(_, b)| b[k]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|(_, b)| b[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn rmse_is_nonnegative_and_r2_at_most_one(
        pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..60),
    ) {
        let measured: Vec<f64> = pairs.iter().map(|(m, _)| *m).collect();
        let predicted: Vec<f64> = pairs.iter().map(|(_, p)| *p).collect();
        let rmse = rmse_component(&measured, &predicted).unwrap();
        prop_assert!(rmse >= 0.0);
        if let Ok(r2) = r2_component(&measured, &predicted) {
            prop_assert!(r2 <= 1.0 + 1e-12);
        }
        // A perfect prediction is the fixed point of both metrics.
        prop_assert_eq!(rmse_component(&measured, &measured).unwrap(), 0.0);
        if let Ok(r2) = r2_component(&measured, &measured) {
            prop_assert!((r2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_reachable_current_falls_in_exactly_one_bin(i_max in 0.0f64..35.0) {
        let edges = default_bin_edges();
        let b = bin_of(i_max, &edges);
        prop_assert!(b < edges.len() - 1);
        // Right-closed bins: (lo, hi], with the first including 0.
        prop_assert!(i_max <= edges[b + 1]);
        prop_assert!(i_max > edges[b] || b == 0);
    }
}
