//! From-scratch multilayer perceptron (11→100→50→25→3, tanh hidden layers,
//! linear output) trained with Adam on mean squared error, with early
//! stopping and best-weights restoration.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scaler::ScalerParams;
use crate::split::{split_by_current_vector, SplitSpec};
use crate::types::{CurrentVector, FieldVector, Position, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    /// Layer widths, input first and output last.
    pub layers: Vec<usize>,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        MlpArchitecture {
            layers: vec![NUM_FEATURES, 100, 50, 25, 3],
        }
    }
}

impl MlpArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 3 {
            return Err(Error::Config("need at least one hidden layer".into()));
        }
        if self.layers[0] != NUM_FEATURES {
            return Err(Error::Config(format!("input width must be {NUM_FEATURES}")));
        }
        if *self.layers.last().unwrap() != 3 {
            return Err(Error::Config("output width must be 3".into()));
        }
        if self.layers.iter().any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn n_weight_layers(&self) -> usize {
        self.layers.len() - 1
    }
}

/// Per-layer weight matrices (out × in) and bias vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl MlpParams {
    pub fn zeros(arch: &MlpArchitecture) -> MlpParams {
        let weights = (0..arch.n_weight_layers())
            .map(|l| DMatrix::zeros(arch.layers[l + 1], arch.layers[l]))
            .collect();
        let biases = (0..arch.n_weight_layers())
            .map(|l| DVector::zeros(arch.layers[l + 1]))
            .collect();
        MlpParams { weights, biases }
    }

    /// Glorot-uniform initialization: weights in ±sqrt(6/(fan_in+fan_out)),
    /// biases zero.
    pub fn init(arch: &MlpArchitecture, seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = MlpParams::zeros(arch);
        for w in p.weights.iter_mut() {
            let bound = (6.0 / (w.ncols() + w.nrows()) as f64).sqrt();
            // Fill in a fixed (column-major) order for determinism.
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Forward pass for a batch in column-major layout (features × batch).
    /// Returns the activations of every layer, input included.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let n_layers = self.weights.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.clone());
        for l in 0..n_layers {
            let mut z = &self.weights[l] * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &self.biases[l];
            }
            if l + 1 < n_layers {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Single-sample forward pass on an already-scaled feature vector.
    pub fn forward(&self, x: &[f64; NUM_FEATURES]) -> Result<FieldVector> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let xm = DMatrix::from_column_slice(NUM_FEATURES, 1, x);
        let acts = self.forward_batch(&xm);
        let out = acts.last().unwrap();
        Ok(FieldVector::new(out[(0, 0)], out[(1, 0)], out[(2, 0)]))
    }

    /// Exact gradient of the batch-mean MSE (mean over batch and the 3
    /// output components) with respect to all weights and biases.
    pub fn backward(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (MlpGrads, f64) {
        let acts = self.forward_batch(x);
        let n_layers = self.weights.len();
        let batch = x.ncols() as f64;
        let n_out = y.nrows() as f64;

        let residual = acts.last().unwrap() - y;
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / (batch * n_out);

        // dL/dZ at the linear output layer.
        let mut delta = residual * (2.0 / (batch * n_out));
        let mut d_weights = vec![DMatrix::zeros(0, 0); n_layers];
        let mut d_biases = vec![DVector::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            d_weights[l] = &delta * acts[l].transpose();
            d_biases[l] = DVector::from_iterator(
                delta.nrows(),
                delta.row_iter().map(|r| r.iter().sum::<f64>()),
            );
            if l > 0 {
                // tanh'(z) = 1 - a^2, with a the layer's activation.
                let mut back = self.weights[l].transpose() * delta;
                back.zip_apply(&acts[l], |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
        (
            MlpGrads {
                weights: d_weights,
                biases: d_biases,
            },
            loss,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second-moment accumulators for Adam, same shapes as the params.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub t: u64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(arch: &MlpArchitecture, learning_rate: f64) -> AdamState {
        AdamState {
            m: MlpParams::zeros(arch),
            v: MlpParams::zeros(arch),
            t: 0,
            learning_rate,
        }
    }
}

fn adam_update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, t: f64, alpha: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    let m_hat = *m / (1.0 - ADAM_BETA1.powf(t));
    let v_hat = *v / (1.0 - ADAM_BETA2.powf(t));
    *theta -= alpha * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
}

/// One bias-corrected Adam step over every parameter coordinate.
pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState) {
    state.t += 1;
    let t = state.t as f64;
    let alpha = state.learning_rate;
    for l in 0..params.weights.len() {
        for (((theta, &g), m), v) in params.weights[l]
            .iter_mut()
            .zip(grads.weights[l].iter())
            .zip(state.m.weights[l].iter_mut())
            .zip(state.v.weights[l].iter_mut())
        {
            adam_update(theta, g, m, v, t, alpha);
        }
        for (((theta, &g), m), v) in params.biases[l]
            .iter_mut()
            .zip(grads.biases[l].iter())
            .zip(state.m.biases[l].iter_mut())
            .zip(state.v.biases[l].iter_mut())
        {
            adam_update(theta, g, m, v, t, alpha);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            batch_size: 128,
            max_epochs: 50,
            validation_fraction: 0.1,
            patience: 5,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared error in squared training-target units (millitesla²).
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Training targets are expressed in millitesla: optimal weight magnitudes
/// then sit well above Adam's fixed step size (learning rate 1e-3), whereas
/// raw-tesla targets leave the output weights at the same scale as the
/// updates and the optimizer oscillates instead of converging.
pub const TARGET_SCALE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub architecture: MlpArchitecture,
    pub params: MlpParams,
    /// Scaler fitted on the training data; inputs are scaled before the
    /// forward pass so persisted models are self-contained.
    pub scaler: ScalerParams,
    /// Network outputs are in units of `1 / target_scale` tesla.
    pub target_scale: f64,
}

impl MlpModel {
    pub fn predict(&self, p: &Position, i: &CurrentVector) -> Result<FieldVector> {
        let out = self.params.forward(&self.scaler.transform(p, i))?;
        Ok(FieldVector::new(
            out.bx / self.target_scale,
            out.by / self.target_scale,
            out.bz / self.target_scale,
        ))
    }
}

/// Early-stopping decision over a prefix of per-epoch validation losses:
/// returns (index of the best epoch so far, whether to stop now).
/// "No improvement" is a strictly-not-less comparison against the running
/// best; training stops after `patience` consecutive such epochs.
pub fn early_stop(val_losses: &[f64], patience: usize) -> (usize, bool) {
    debug_assert!(!val_losses.is_empty());
    let mut best = 0;
    let mut since_best = 0;
    for (e, &v) in val_losses.iter().enumerate().skip(1) {
        if v < val_losses[best] {
            best = e;
            since_best = 0;
        } else {
            since_best += 1;
        }
    }
    (best, since_best >= patience)
}

/// Train an MLP on the dataset. A validation split is carved out at
/// current-vector granularity; the scaler is fitted on the fit portion
/// only. Returns the weights of the best-validation epoch together with the
/// full per-epoch history.
pub fn train_mlp(
    train: &Dataset,
    arch: &MlpArchitecture,
    spec: &TrainSpec,
) -> Result<(MlpModel, Vec<EpochRecord>)> {
    arch.validate()?;
    spec.validate()?;

    let (fit_part, val_part) = split_by_current_vector(
        train,
        &SplitSpec {
            seed: spec.seed,
            test_fraction: spec.validation_fraction,
        },
    )?;
    let scaler = ScalerParams::fit(&fit_part)?;

    let to_matrices = |d: &Dataset| {
        let n = d.len();
        let mut x = DMatrix::zeros(NUM_FEATURES, n);
        let mut y = DMatrix::zeros(3, n);
        for (j, s) in d.samples.iter().enumerate() {
            let f = scaler.transform_features(&s.features());
            for (r, v) in f.iter().enumerate() {
                x[(r, j)] = *v;
            }
            let t = s.field.to_array();
            for r in 0..3 {
                y[(r, j)] = t[r] * TARGET_SCALE;
            }
        }
        (x, y)
    };
    let (x_fit, y_fit) = to_matrices(&fit_part);
    let (x_val, y_val) = to_matrices(&val_part);
    let n_fit = x_fit.ncols();

    let mut params = MlpParams::init(arch, spec.seed);
    let mut state = AdamState::new(arch, spec.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1); // independent of the init stream
    let mut order: Vec<usize> = (0..n_fit).collect();

    let mut history: Vec<EpochRecord> = Vec::new();
    let mut val_losses: Vec<f64> = Vec::new();
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;

    for epoch in 0..spec.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss_sum = 0.0;
        let mut train_loss_n = 0.0;
        for chunk in order.chunks(spec.batch_size) {
            let xb = x_fit.select_columns(chunk);
            let yb = y_fit.select_columns(chunk);
            let (grads, loss) = params.backward(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("non-finite training loss on a batch of {}", chunk.len()),
                });
            }
            adam_step(&mut params, &grads, &mut state);
            train_loss_sum += loss * chunk.len() as f64;
            train_loss_n += chunk.len() as f64;
        }
        let val_acts = params.forward_batch(&x_val);
        let val_res = val_acts.last().unwrap() - &y_val;
        let val_mse = val_res.iter().map(|r| r * r).sum::<f64>() / (3.0 * x_val.ncols() as f64);
        if !val_mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite validation loss".into(),
            });
        }
        history.push(EpochRecord {
            epoch,
            train_mse: train_loss_sum / train_loss_n,
            val_mse,
        });
        val_losses.push(val_mse);

        let (best, stop) = early_stop(&val_losses, spec.patience);
        if best == epoch {
            best_params = params.clone();
            best_epoch = best;
        }
        if stop {
            break;
        }
    }
    debug_assert_eq!(
        val_losses[best_epoch],
        val_losses.iter().copied().fold(f64::INFINITY, f64::min)
    );

    Ok((
        MlpModel {
            architecture: arch.clone(),
            params: best_params,
            scaler,
            target_scale: TARGET_SCALE,
        },
        history,
    ))
}
