//! Sequence-to-point disaggregators with a shared Adam training loop.
//!
//! Three desk-scale architectures: a linear probe, an MLP, and a stack of
//! dilated causal convolutions with global average pooling (so every input
//! sample influences the output even when the receptive field is shorter
//! than the window). Training is deterministic per `(spec, seed, data)`.

mod checkpoint;
mod net;

pub use checkpoint::{load_model, save_model};
pub use net::{layout, macs_per_window, param_count, Dtype};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::WindowedDataset;
use net::DropoutMasks;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty dataset for {0}")]
    EmptyDataset(&'static str),
    #[error("window length {got} does not match the model input length {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training options: {0}")]
    BadOpts(String),
    #[error("gradient check expects at most {max} windows, got {got}")]
    BatchTooLarge { max: usize, got: usize },
    #[error("corrupt checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Linear,
    Mlp,
    DilatedConv,
}

impl Arch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Linear => "linear",
            Arch::Mlp => "mlp",
            Arch::DilatedConv => "dilated-conv",
        }
    }

    pub fn from_str_loose(s: &str) -> Option<Arch> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Some(Arch::Linear),
            "mlp" => Some(Arch::Mlp),
            "dilated-conv" | "dilatedconv" | "conv" => Some(Arch::DilatedConv),
            _ => None,
        }
    }
}

/// Convolution stack shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    pub dropout: f64,
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self {
            channels: 16,
            kernel: 3,
            dilations: vec![1, 2, 4, 8, 16, 32],
            dropout: 0.33,
        }
    }
}

/// Shape of one seq2point model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input_len: usize,
    /// Hidden layer widths (MLP only).
    pub hidden_sizes: Vec<usize>,
    /// Convolution stack (dilated-conv only).
    pub conv: ConvSpec,
}

impl ModelSpec {
    pub fn new(arch: Arch, input_len: usize) -> Self {
        Self {
            arch,
            input_len,
            hidden_sizes: vec![64, 64],
            conv: ConvSpec::default(),
        }
    }

    pub fn linear(input_len: usize) -> Self {
        Self::new(Arch::Linear, input_len)
    }

    pub fn mlp(input_len: usize) -> Self {
        Self::new(Arch::Mlp, input_len)
    }

    pub fn dilated_conv(input_len: usize) -> Self {
        Self::new(Arch::DilatedConv, input_len)
    }

    pub fn param_count(&self) -> usize {
        net::param_count(self)
    }

    pub fn macs_per_window(&self) -> u64 {
        net::macs_per_window(self)
    }
}

/// Shared training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOpts {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainOpts {
    fn validate(&self) -> Result<(), ModelError> {
        if self.learning_rate <= 0.0 {
            return Err(ModelError::BadOpts("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::BadOpts("batch_size must be ≥ 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(ModelError::BadOpts("max_epochs must be ≥ 1".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(ModelError::BadOpts(format!(
                "patience {} must be < max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Per-epoch loss record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub train_loss: f64,
    pub val_loss: f64,
}

/// A trained model: spec, flat parameters from the best epoch, and the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: Vec<f32>,
    pub training_log: Vec<EpochLog>,
    /// Index into `training_log` of the restored parameters.
    pub best_epoch: usize,
}

const SALT_INIT: u64 = 0x4d4f_4445_4c01;
const SALT_SHUFFLE: u64 = 0x4d4f_4445_4c02;
const SALT_DROPOUT: u64 = 0x4d4f_4445_4c03;

/// Seeded uniform initialization with a 1/√fan_in bound for weights and
/// biases alike, so pre-activations are almost surely away from the ReLU
/// kink (finite differences need that).
fn init_params<T: Dtype>(spec: &ModelSpec, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::sim::mix_seed(seed, SALT_INIT));
    let segs = net::layout(spec);
    let total: usize = segs.iter().map(|s| s.len).sum();
    let mut params = vec![T::zero(); total];
    for seg in &segs {
        let bound = 1.0 / (seg.fan_in as f64).sqrt();
        for p in &mut params[seg.offset..seg.offset + seg.len] {
            *p = T::from_f64(rng.gen_range(-bound..bound));
        }
    }
    params
}

fn mse_loss(spec: &ModelSpec, params: &[f32], ds: &WindowedDataset) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..ds.len() {
        let pred = net::predict_one::<f32>(spec, params, ds.window(i));
        let d = f64::from(pred) - f64::from(ds.targets[i]);
        acc += d * d;
    }
    acc / ds.len() as f64
}

fn draw_dropout_masks(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> DropoutMasks<f32> {
    if spec.arch != Arch::DilatedConv || spec.conv.dropout <= 0.0 {
        return DropoutMasks::disabled();
    }
    let p = spec.conv.dropout;
    let keep_scale = (1.0 / (1.0 - p)) as f32;
    let len = spec.conv.channels * spec.input_len;
    let masks = spec
        .conv
        .dilations
        .iter()
        .map(|_| {
            (0..len)
                .map(|_| {
                    if rng.gen::<f64>() < p {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect()
        })
        .collect();
    DropoutMasks { masks }
}

/// Train with Adam, mini-batches and early stopping; returns the parameters
/// of the epoch with the lowest validation loss.
pub fn train(
    spec: &ModelSpec,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    opts: &TrainOpts,
) -> Result<TrainedModel, ModelError> {
    opts.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset("training set"));
    }
    if val_set.is_empty() {
        return Err(ModelError::EmptyDataset("validation set"));
    }
    for ds in [train_set, val_set] {
        if ds.spec.window_len != spec.input_len {
            return Err(ModelError::ShapeMismatch {
                expected: spec.input_len,
                got: ds.spec.window_len,
            });
        }
    }

    let mut params = init_params::<f32>(spec, opts.seed);
    let n_params = params.len();
    let mut grads = vec![0.0f32; n_params];
    let mut adam_m = vec![0.0f32; n_params];
    let mut adam_v = vec![0.0f32; n_params];
    let (beta1, beta2, eps) = (0.9f32, 0.999f32, 1e-8f32);
    let lr = opts.learning_rate as f32;
    let mut adam_t = 0i32;

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(crate::sim::mix_seed(opts.seed, SALT_DROPOUT));

    let n = train_set.len();
    let mut log: Vec<EpochLog> = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut stale = 0usize;

    for epoch in 0..opts.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(crate::sim::mix_seed(
            opts.seed,
            SALT_SHUFFLE ^ (epoch as u64),
        ));
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);

        let mut epoch_sq = 0.0f64;
        for (batch_idx, batch) in order.chunks(opts.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let inv_b = 1.0f32 / batch.len() as f32;
            let mut batch_sq = 0.0f64;
            for &i in batch {
                let x = train_set.window(i);
                let masks = draw_dropout_masks(spec, &mut dropout_rng);
                let (pred, cache) = net::forward::<f32>(spec, &params, x, &masks);
                let err = pred - train_set.targets[i];
                batch_sq += f64::from(err) * f64::from(err);
                let dy = 2.0 * err * inv_b;
                net::backward::<f32>(spec, &params, x, &cache, dy, &mut grads, &masks);
            }
            if !batch_sq.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_sq += batch_sq;

            adam_t += 1;
            let bc1 = 1.0 - beta1.powi(adam_t);
            let bc2 = 1.0 - beta2.powi(adam_t);
            for j in 0..n_params {
                let g = grads[j];
                adam_m[j] = beta1 * adam_m[j] + (1.0 - beta1) * g;
                adam_v[j] = beta2 * adam_v[j] + (1.0 - beta2) * g * g;
                let m_hat = adam_m[j] / bc1;
                let v_hat = adam_v[j] / bc2;
                params[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }

        let train_loss = epoch_sq / n as f64;
        let val_loss = mse_loss(spec, &params, val_set);
        if !val_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch, batch: 0 });
        }
        log.push(EpochLog {
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
    }

    Ok(TrainedModel {
        spec: spec.clone(),
        params: best_params,
        training_log: log,
        best_epoch,
    })
}

/// One normalized prediction per window; pure function of `(θ, inputs)`.
pub fn predict(model: &TrainedModel, windows: &WindowedDataset) -> Result<Vec<f32>, ModelError> {
    if windows.spec.window_len != model.spec.input_len {
        return Err(ModelError::ShapeMismatch {
            expected: model.spec.input_len,
            got: windows.spec.window_len,
        });
    }
    Ok((0..windows.len())
        .map(|i| net::predict_one::<f32>(&model.spec, &model.params, windows.window(i)))
        .collect())
}

impl TrainedModel {
    pub fn predict(&self, windows: &WindowedDataset) -> Result<Vec<f32>, ModelError> {
        predict(self, windows)
    }
}

/// Maximum windows accepted by [`gradient_check`].
pub const GRADIENT_CHECK_MAX_BATCH: usize = 8;

/// Compare analytic gradients of the batch MSE loss against central finite
/// differences in f64. Returns the maximum relative error over parameters.
pub fn gradient_check(spec: &ModelSpec, batch: &WindowedDataset) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset("gradient-check batch"));
    }
    if batch.len() > GRADIENT_CHECK_MAX_BATCH {
        return Err(ModelError::BatchTooLarge {
            max: GRADIENT_CHECK_MAX_BATCH,
            got: batch.len(),
        });
    }
    if batch.spec.window_len != spec.input_len {
        return Err(ModelError::ShapeMismatch {
            expected: spec.input_len,
            got: batch.spec.window_len,
        });
    }

    let params = init_params::<f64>(spec, 0x6772_6164);
    let xs: Vec<Vec<f64>> = (0..batch.len())
        .map(|i| batch.window(i).iter().map(|&v| f64::from(v)).collect())
        .collect();
    let ys: Vec<f64> = batch.targets.iter().map(|&v| f64::from(v)).collect();
    let b = batch.len() as f64;
    let masks = DropoutMasks::<f64>::disabled();

    let loss = |p: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let (pred, _) = net::forward::<f64>(spec, p, x, &masks);
            acc += (pred - y) * (pred - y);
        }
        acc / b
    };

    let mut analytic = vec![0.0f64; params.len()];
    for (x, &y) in xs.iter().zip(&ys) {
        let (pred, cache) = net::forward::<f64>(spec, &params, x, &masks);
        let dy = 2.0 * (pred - y) / b;
        net::backward::<f64>(spec, &params, x, &cache, dy, &mut analytic, &masks);
    }

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for j in 0..probe.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let up = loss(&probe);
        probe[j] = orig - h;
        let down = loss(&probe);
        probe[j] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[j].abs().max(numeric.abs());
        if denom < 1e-10 {
            continue; // both effectively zero
        }
        worst = worst.max((analytic[j] - numeric).abs() / denom);
    }
    Ok(worst)
}
