//! Versioned JSON persistence for fitted models.
//!
//! Every model file carries a format marker, a format version, a kind tag
//! and the training provenance (dataset hash and seeds), so evaluation can
//! refuse mismatched model/dataset pairings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::lmem::LmemModel;
use crate::net::MlpModel;

pub const MODEL_FORMAT: &str = "emns-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// SHA-256 of a file's bytes, hex-encoded. Used to pin models to the
/// dataset they were trained on.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(hex, "{b:02x}").expect("string write");
    }
    Ok(hex)
}

/// Training provenance embedded in every model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    /// SHA-256 of the training dataset CSV.
    pub dataset_sha256: String,
    /// Seed of the train/test split the model was fitted under.
    pub split_seed: u64,
    /// Model-specific seed (forest bootstrap / network init; 0 for LMEM).
    pub model_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Lmem(LmemModel),
    Rf(ForestModel),
    Ann(MlpModel),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Lmem(_) => "lmem",
            SavedModel::Rf(_) => "rf",
            SavedModel::Ann(_) => "ann",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub train_meta: TrainMeta,
    #[serde(flatten)]
    pub model: SavedModel,
}

/// Write a model as versioned JSON.
pub fn save_model(path: &Path, model: &SavedModel, meta: &TrainMeta) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_FORMAT_VERSION,
        train_meta: meta.clone(),
        model: model.clone(),
    };
    let mut text = serde_json::to_string(&file)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read a model file, checking the format marker and version.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelMismatch(format!(
            "{}: format marker '{}' is not '{MODEL_FORMAT}'",
            path.display(),
            file.format
        )));
    }
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelMismatch(format!(
            "{}: unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
            path.display(),
            file.version
        )));
    }
    Ok(file)
}

/// Read a model file and require a specific kind.
pub fn load_model_of_kind(path: &Path, kind: &str) -> Result<ModelFile> {
    let file = load_model(path)?;
    if file.model.kind() != kind {
        return Err(Error::ModelMismatch(format!(
            "{}: model kind '{}' where '{kind}' was required",
            path.display(),
            file.model.kind()
        )));
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::forest::{fit_forest, ForestHyperparams};
    use crate::types::{CurrentVector, FieldVector, Position, Sample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = (0..40)
            .map(|j| {
                let i: [f64; 8] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                Sample {
                    position: Position::new(
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.1..0.1),
                    ),
                    currents: CurrentVector(i),
                    field: FieldVector::new(i[0] * 1e-3, i[1] * 1e-3, -i[0] * 1e-3),
                    sensor_id: 0,
                    current_vector_id: j,
                }
            })
            .collect();
        Dataset::from_samples(samples, "test")
    }

    fn meta() -> TrainMeta {
        TrainMeta {
            dataset_sha256: "abc".into(),
            split_seed: 1,
            model_seed: 2,
        }
    }

    #[test]
    fn forest_round_trips_to_identical_predictions() {
        let d = toy_dataset();
        let model = fit_forest(
            &d,
            &ForestHyperparams {
                n_trees: 3,
                max_depth: 4,
                ..ForestHyperparams::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.json");
        save_model(&path, &SavedModel::Rf(model.clone()), &meta()).unwrap();
        let loaded = load_model_of_kind(&path, "rf").unwrap();
        let SavedModel::Rf(restored) = loaded.model else {
            panic!("kind changed in round trip");
        };
        assert_eq!(restored, model);
        assert_eq!(loaded.train_meta, meta());
    }

    #[test]
    fn kind_mismatch_is_refused() {
        let d = toy_dataset();
        let model = fit_forest(
            &d,
            &ForestHyperparams {
                n_trees: 1,
                max_depth: 2,
                ..ForestHyperparams::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.json");
        save_model(&path, &SavedModel::Rf(model), &meta()).unwrap();
        assert!(matches!(
            load_model_of_kind(&path, "ann"),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn wrong_format_marker_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.json");
        std::fs::write(
            &path,
            r#"{"format":"other","version":1,"train_meta":{"dataset_sha256":"","split_seed":0,"model_seed":0},"kind":"lmem"}"#,
        )
        .unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn file_hash_is_stable_and_content_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "hello\n").unwrap();
        let h1 = file_sha256(&path).unwrap();
        let h2 = file_sha256(&path).unwrap();
        assert_eq!(h1, h2);
        std::fs::write(&path, "hello!\n").unwrap();
        assert_ne!(file_sha256(&path).unwrap(), h1);
    }
}
