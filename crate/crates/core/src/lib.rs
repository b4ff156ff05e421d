//! Magnetic field modeling for an electromagnetic navigation system.
//!
//! The crate covers the full study pipeline: a physics-grounded synthetic
//! data generator with core saturation ([`synth`]), a linear multipole
//! baseline ([`lmem`]), from-scratch random forest ([`forest`]) and MLP
//! ([`net`]) field regressors, and the evaluation harness ([`eval`]) with
//! the metrics and experiment designs used to compare them.

pub use sha2;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod lmem;
pub mod model_io;
pub mod net;
pub mod numeric;
pub mod scaler;
pub mod split;
pub mod synth;
pub mod types;

pub use dataset::{validate_dataset, Dataset, DatasetMeta, ValidationReport};
pub use error::{Error, Result};
pub use eval::{evaluate_model, ComponentMetrics, FieldPredictor};
pub use forest::{fit_forest, grid_search, ForestHyperparams, ForestModel, GridSearchSpec};
pub use net::{train_mlp, MlpArchitecture, MlpModel, TrainSpec};
pub use scaler::ScalerParams;
pub use split::{split_by_current_vector, SplitSpec};
pub use types::{
    feature_vector, CurrentVector, FieldVector, Position, Sample, MAX_COIL_CURRENT_A, NUM_COILS,
    NUM_FEATURES, POWER_LIMIT_W,
};
