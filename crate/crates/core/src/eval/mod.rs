//! Evaluation metrics and experiment runners: overall model comparison,
//! current-level stratification, per-location MAPE mapping, and the
//! training-size ablation.

pub mod report;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestHyperparams, ForestModel};
use crate::lmem::LmemModel;
use crate::net::{train_mlp, MlpArchitecture, MlpModel, TrainSpec};
use crate::types::{CurrentVector, FieldVector, Position, MAX_COIL_CURRENT_A};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Magnitudes below this floor are excluded from MAPE to avoid division
/// blow-up near zero field.
pub const MAPE_MAGNITUDE_FLOOR_T: f64 = 0.5e-3;

/// Minimum per-bin sample count before a stratum is flagged low-confidence.
pub const LOW_CONFIDENCE_BIN_SIZE: usize = 30;

/// Anything that maps (position, currents) to a field prediction.
pub trait FieldPredictor {
    fn predict_field(&self, p: &Position, i: &CurrentVector) -> Result<FieldVector>;
}

impl FieldPredictor for LmemModel {
    fn predict_field(&self, p: &Position, i: &CurrentVector) -> Result<FieldVector> {
        self.predict(*p, i)
    }
}

impl FieldPredictor for ForestModel {
    fn predict_field(&self, p: &Position, i: &CurrentVector) -> Result<FieldVector> {
        Ok(self.predict(p, i))
    }
}

impl FieldPredictor for MlpModel {
    fn predict_field(&self, p: &Position, i: &CurrentVector) -> Result<FieldVector> {
        self.predict(p, i)
    }
}

/// Per-component and magnitude metrics over one evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMetrics {
    pub r2_x: f64,
    pub r2_y: f64,
    pub r2_z: f64,
    pub r2_norm: f64,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_z: f64,
    pub rmse_norm: f64,
}

/// Coefficient of determination: 1 - SS_res / SS_tot.
pub fn r2_component(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.len() < 2 || measured.len() != predicted.len() {
        return Err(Error::UndefinedMetric(
            "r2 needs at least 2 paired samples".into(),
        ));
    }
    let n = measured.len() as f64;
    let mean = measured.iter().sum::<f64>() / n;
    let ss_tot: f64 = measured.iter().map(|m| (m - mean) * (m - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric(
            "r2 undefined for zero target variance".into(),
        ));
    }
    let ss_res: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(m, p)| (m - p) * (m - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Root mean squared residual.
pub fn rmse_component(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.is_empty() || measured.len() != predicted.len() {
        return Err(Error::UndefinedMetric(
            "rmse needs at least 1 paired sample".into(),
        ));
    }
    let ss: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(m, p)| (m - p) * (m - p))
        .sum();
    Ok((ss / measured.len() as f64).sqrt())
}

/// R² and RMSE applied to the field magnitudes ‖b‖ (not to the magnitude of
/// the component RMSEs).
pub fn norm_metrics(measured: &[FieldVector], predicted: &[FieldVector]) -> Result<(f64, f64)> {
    let m: Vec<f64> = measured.iter().map(|b| b.norm()).collect();
    let p: Vec<f64> = predicted.iter().map(|b| b.norm()).collect();
    Ok((r2_component(&m, &p)?, rmse_component(&m, &p)?))
}

/// All eight metrics for one (measured, predicted) pairing.
pub fn component_metrics(
    measured: &[FieldVector],
    predicted: &[FieldVector],
) -> Result<ComponentMetrics> {
    let col = |f: fn(FieldVector) -> f64, v: &[FieldVector]| -> Vec<f64> {
        v.iter().map(|b| f(*b)).collect()
    };
    let (mx, px) = (col(|b| b.bx, measured), col(|b| b.bx, predicted));
    let (my, py) = (col(|b| b.by, measured), col(|b| b.by, predicted));
    let (mz, pz) = (col(|b| b.bz, measured), col(|b| b.bz, predicted));
    let (r2_norm, rmse_norm) = norm_metrics(measured, predicted)?;
    Ok(ComponentMetrics {
        r2_x: r2_component(&mx, &px)?,
        r2_y: r2_component(&my, &py)?,
        r2_z: r2_component(&mz, &pz)?,
        r2_norm,
        rmse_x: rmse_component(&mx, &px)?,
        rmse_y: rmse_component(&my, &py)?,
        rmse_z: rmse_component(&mz, &pz)?,
        rmse_norm,
    })
}

/// Predict every sample of a dataset; returns (measured, predicted).
pub fn predict_all(
    test: &Dataset,
    model: &dyn FieldPredictor,
) -> Result<(Vec<FieldVector>, Vec<FieldVector>)> {
    let mut measured = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    for s in &test.samples {
        measured.push(s.field);
        predicted.push(model.predict_field(&s.position, &s.currents)?);
    }
    Ok((measured, predicted))
}

/// Overall metrics of one model over one test set.
pub fn evaluate_model(test: &Dataset, model: &dyn FieldPredictor) -> Result<ComponentMetrics> {
    let (measured, predicted) = predict_all(test, model)?;
    component_metrics(&measured, &predicted)
}

/// One i_max stratum and its per-model metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRecord {
    pub lo_a: f64,
    pub hi_a: f64,
    pub n_samples: usize,
    pub low_confidence: bool,
    pub metrics: BTreeMap<String, ComponentMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub edges_a: Vec<f64>,
    pub strata: Vec<StratumRecord>,
}

/// Default stratification edges: 5 A steps over [0, 35].
pub fn default_bin_edges() -> Vec<f64> {
    (0..=7).map(|k| 5.0 * k as f64).collect()
}

/// Index of the right-closed bin (e_k, e_{k+1}] containing `i_max`; the
/// first bin additionally includes its left edge.
pub fn bin_of(i_max: f64, edges: &[f64]) -> usize {
    for k in 0..edges.len() - 2 {
        if i_max <= edges[k + 1] {
            return k;
        }
    }
    edges.len() - 2
}

/// Group test samples by maximum coil current and evaluate every model per
/// group. Bins with fewer than [`LOW_CONFIDENCE_BIN_SIZE`] samples are
/// flagged.
pub fn stratify_by_current(
    test: &Dataset,
    models: &[(&str, &dyn FieldPredictor)],
    edges: &[f64],
) -> Result<StratifiedReport> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("bin edges must be sorted and distinct".into()));
    }
    if edges[0] != 0.0 || *edges.last().unwrap() < MAX_COIL_CURRENT_A {
        return Err(Error::Config(format!(
            "bin edges must cover [0, {MAX_COIL_CURRENT_A}]"
        )));
    }
    let n_bins = edges.len() - 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (j, s) in test.samples.iter().enumerate() {
        members[bin_of(s.currents.i_max(), edges)].push(j);
    }

    let mut strata = Vec::with_capacity(n_bins);
    for (k, idx) in members.iter().enumerate() {
        let mut metrics = BTreeMap::new();
        for (name, model) in models {
            if idx.len() < 2 {
                continue; // too small for any metric; bin is flagged below
            }
            let mut measured = Vec::with_capacity(idx.len());
            let mut predicted = Vec::with_capacity(idx.len());
            for &j in idx {
                let s = &test.samples[j];
                measured.push(s.field);
                predicted.push(model.predict_field(&s.position, &s.currents)?);
            }
            metrics.insert(name.to_string(), component_metrics(&measured, &predicted)?);
        }
        strata.push(StratumRecord {
            lo_a: edges[k],
            hi_a: edges[k + 1],
            n_samples: idx.len(),
            low_confidence: idx.len() < LOW_CONFIDENCE_BIN_SIZE,
            metrics,
        });
    }
    Ok(StratifiedReport {
        edges_a: edges.to_vec(),
        strata,
    })
}

/// Per-location MAPE of the field magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationMape {
    /// Mean absolute percentage error of ‖b‖ over usable samples, in %.
    pub mape_percent: f64,
    /// Number of usable samples (K in the defining sum).
    pub k: usize,
    /// Samples skipped for falling below the magnitude floor.
    pub skipped: usize,
    /// False when no sample at this location was usable.
    pub defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialReport {
    pub per_sensor: BTreeMap<u32, LocationMape>,
    /// Maximum defined per-location MAPE, in %.
    pub max_mape_percent: f64,
}

/// Mean absolute percentage error of ‖b‖ per sensor location, skipping
/// samples with measured magnitude below [`MAPE_MAGNITUDE_FLOOR_T`].
pub fn mape_per_location(test: &Dataset, model: &dyn FieldPredictor) -> Result<SpatialReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("mape_per_location".into()));
    }
    let mut acc: BTreeMap<u32, (f64, usize, usize)> = BTreeMap::new();
    for s in &test.samples {
        let entry = acc.entry(s.sensor_id).or_insert((0.0, 0, 0));
        let m = s.field.norm();
        if m < MAPE_MAGNITUDE_FLOOR_T {
            entry.2 += 1;
            continue;
        }
        let p = model.predict_field(&s.position, &s.currents)?.norm();
        entry.0 += ((m - p) / m).abs();
        entry.1 += 1;
    }
    let mut per_sensor = BTreeMap::new();
    let mut max_mape = 0.0_f64;
    for (sensor, (sum, k, skipped)) in acc {
        let defined = k > 0;
        let mape = if defined { 100.0 * sum / k as f64 } else { f64::NAN };
        if defined {
            max_mape = max_mape.max(mape);
        }
        per_sensor.insert(
            sensor,
            LocationMape {
                mape_percent: mape,
                k,
                skipped,
                defined,
            },
        );
    }
    Ok(SpatialReport {
        per_sensor,
        max_mape_percent: max_mape,
    })
}

/// One (fraction, model) row of the training-size ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub fraction: f64,
    pub model: String,
    pub n_train_samples: usize,
    pub metrics: ComponentMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub rows: Vec<AblationRecord>,
}

/// Retrain the forest and the network on random training subsets and score
/// them on the fixed test set. Subsets are drawn independently per fraction
/// at current-vector granularity; fraction 1.0 uses the full training set.
pub fn run_ablation(
    train: &Dataset,
    test: &Dataset,
    fractions: &[f64],
    rf_hp: &ForestHyperparams,
    ann_arch: &MlpArchitecture,
    ann_spec: &TrainSpec,
    seed: u64,
) -> Result<AblationReport> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::Config("fractions must lie in (0, 1]".into()));
    }
    let ids = train.current_vector_ids();
    let mut rows = Vec::new();
    for (fi, &fraction) in fractions.iter().enumerate() {
        let subset = if fraction >= 1.0 {
            train.filter_current_vectors(|_| true)
        } else {
            let mut shuffled = ids.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(fi as u64 + 1);
            shuffled.shuffle(&mut rng);
            let n_keep = ((ids.len() as f64) * fraction).round().max(1.0) as usize;
            let keep: std::collections::BTreeSet<u32> =
                shuffled.into_iter().take(n_keep).collect();
            train.filter_current_vectors(|id| keep.contains(&id))
        };

        let rf = fit_forest(&subset, rf_hp)?;
        rows.push(AblationRecord {
            fraction,
            model: "rf".into(),
            n_train_samples: subset.len(),
            metrics: evaluate_model(test, &rf)?,
        });
        let (ann, _history) = train_mlp(&subset, ann_arch, ann_spec)?;
        rows.push(AblationRecord {
            fraction,
            model: "ann".into(),
            n_train_samples: subset.len(),
            metrics: evaluate_model(test, &ann)?,
        });
    }
    Ok(AblationReport { seed, rows })
}
