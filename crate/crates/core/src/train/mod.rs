//! Weighted softmax training for linear and one-hidden-layer models.
//!
//! The objective on a batch of size `B` is
//! `(1/B) Σ wᵢ · ce(lᵢ, yᵢ) + λ · ½ Σ ‖W‖²_F` with `ce(l, y) = −log softmax(l)_y`.
//! Optimization is momentum batch gradient descent:
//! `v ← γ v + η ∇C`, `θ ← θ − v`.

mod model;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, WeightVector};
use crate::error::{Error, Result};
use crate::risk::{classification_metrics, cross_entropy, softmax};
use crate::seed;

pub use model::{hidden_width, ModelKind, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub init_std: f64,
    /// `k` of the top-k error in the training log.
    pub top_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 0.001,
            batch_size: 1000,
            epochs: 10,
            seed: 0,
            init_std: 0.01,
            top_k: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::validation(format!("lr = {} must be >= 0", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation(format!("momentum = {} must lie in [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::validation("weight_decay must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(Error::validation("top_k must be at least 1"));
        }
        Ok(())
    }
}

pub fn init_params(kind: ModelKind, d: usize, n_classes: usize, cfg: &TrainConfig) -> Result<ModelParams> {
    ModelParams::init(kind, d, n_classes, cfg.init_std, seed::derive_seed(cfg.seed, 0))
}

/// Features as a dense `n × d` matrix.
pub fn feature_matrix(data: &Dataset) -> Array2<f64> {
    let d = data.dim();
    let flat: Vec<f64> = data.records().iter().flat_map(|r| r.features.iter().copied()).collect();
    Array2::from_shape_vec((data.len(), d), flat).expect("dataset rows share width d")
}

struct Batch<'a> {
    x: ArrayView2<'a, f64>,
    labels: &'a [usize],
    weights: &'a [f64],
}

fn check_batch(params: &ModelParams, data: &Dataset, w: &WeightVector) -> Result<Vec<usize>> {
    if w.len() != data.len() {
        return Err(Error::schema(format!("{} records but {} weights", data.len(), w.len())));
    }
    if data.dim() != params.input_dim() {
        return Err(Error::schema(format!("data has d = {}, model expects {}", data.dim(), params.input_dim())));
    }
    let labels = data.labels()?;
    if let Some(&y) = labels.iter().find(|&&y| y >= params.n_classes()) {
        return Err(Error::schema(format!("label {y} outside the model's {} classes", params.n_classes())));
    }
    Ok(labels)
}

fn objective_on(params: &ModelParams, batch: &Batch<'_>, weight_decay: f64) -> Result<f64> {
    let logits = params.forward_batch(batch.x).logits;
    let mut total = 0.0;
    for ((row, &y), &w) in logits.axis_iter(Axis(0)).zip(batch.labels).zip(batch.weights) {
        let row = row.to_vec();
        total += w * cross_entropy(&row, y)?;
    }
    Ok(total / batch.labels.len() as f64 + weight_decay * params.penalty())
}

fn gradient_on(params: &ModelParams, batch: &Batch<'_>, weight_decay: f64) -> Result<ModelParams> {
    let cache = params.forward_batch(batch.x);
    if cache.logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let b = batch.labels.len() as f64;
    // dC/dlogits = wᵢ/B · (softmax − onehot).
    let mut delta = cache.logits.clone();
    for ((mut row, &y), &w) in delta.axis_iter_mut(Axis(0)).zip(batch.labels).zip(batch.weights) {
        let p = softmax(row.as_slice().expect("contiguous row"));
        for (c, v) in row.iter_mut().enumerate() {
            let target = if c == y { 1.0 } else { 0.0 };
            *v = w / b * (p[c] - target);
        }
    }
    let mut grad = params.zeros_like();
    for layer in (0..params.weights.len()).rev() {
        let input = &cache.inputs[layer];
        grad.weights[layer] = input.t().dot(&delta) + &(weight_decay * &params.weights[layer]);
        grad.biases[layer] = model::sum_rows(&delta);
        if layer > 0 {
            let mut back = delta.dot(&params.weights[layer].t());
            back.zip_mut_with(&cache.pre[layer - 1], |g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = back;
        }
    }
    Ok(grad)
}

/// Weighted softmax cross-entropy averaged over the batch, plus `λ · ½‖W‖²`.
pub fn weighted_objective(params: &ModelParams, batch: &Dataset, w: &WeightVector, cfg: &TrainConfig) -> Result<f64> {
    let labels = check_batch(params, batch, w)?;
    let x = feature_matrix(batch);
    objective_on(params, &Batch { x: x.view(), labels: &labels, weights: w.as_slice() }, cfg.weight_decay)
}

/// Exact gradient of [`weighted_objective`] by backpropagation.
pub fn gradient(params: &ModelParams, batch: &Dataset, w: &WeightVector, cfg: &TrainConfig) -> Result<ModelParams> {
    let labels = check_batch(params, batch, w)?;
    let x = feature_matrix(batch);
    gradient_on(params, &Batch { x: x.view(), labels: &labels, weights: w.as_slice() }, cfg.weight_decay)
}

/// `v' = γ v + η g`, `θ' = θ − v'`.
pub fn momentum_step(
    params: &ModelParams,
    velocity: &ModelParams,
    grad: &ModelParams,
    cfg: &TrainConfig,
) -> Result<(ModelParams, ModelParams)> {
    if !params.same_shape(velocity) || !params.same_shape(grad) {
        return Err(Error::schema("params, velocity and gradient shapes differ"));
    }
    let mut v = velocity.clone();
    v.scale_add(cfg.momentum, cfg.lr, grad);
    let mut next = params.clone();
    next.scale_add(1.0, -1.0, &v);
    Ok((next, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Weighted objective on the full training set, penalty included.
    pub objective: f64,
    pub miss_rate: f64,
    pub top_k_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Entry 0 is the initial model; entry `e` follows epoch `e`.
    pub epochs: Vec<EpochLog>,
}

fn log_epoch(
    epoch: usize,
    params: &ModelParams,
    data: &Dataset,
    full: &Batch<'_>,
    cfg: &TrainConfig,
) -> Result<EpochLog> {
    let objective = objective_on(params, full, cfg.weight_decay)?;
    let logits = params.forward_batch(full.x).logits;
    let rows: Vec<Vec<f64>> = logits.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let k = cfg.top_k.min(params.n_classes());
    let m = classification_metrics(data, &rows, k)?;
    Ok(EpochLog { epoch, objective, miss_rate: m.miss_rate, top_k_error: m.top_k_error })
}

/// Momentum mini-batch descent over seeded shuffles.
///
/// Each epoch shuffles the records, walks them in batches of
/// `cfg.batch_size` (the last batch may be shorter) and applies one
/// momentum step per batch. The class count is taken from the dataset.
pub fn fit(data: &Dataset, w: &WeightVector, kind: ModelKind, cfg: &TrainConfig) -> Result<(ModelParams, TrainingLog)> {
    cfg.validate()?;
    let n_classes = data.n_classes().ok_or_else(|| Error::schema("training requires labels"))?;
    let params = init_params(kind, data.dim(), n_classes, cfg)?;
    fit_from(data, w, params, cfg)
}

/// [`fit`] starting from given parameters.
pub fn fit_from(
    data: &Dataset,
    w: &WeightVector,
    mut params: ModelParams,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainingLog)> {
    cfg.validate()?;
    let labels = check_batch(&params, data, w)?;
    let x = feature_matrix(data);
    let full = Batch { x: x.view(), labels: &labels, weights: w.as_slice() };
    let mut log = TrainingLog::default();
    log.epochs.push(log_epoch(0, &params, data, &full, cfg)?);

    let mut velocity = params.zeros_like();
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bx = x.select(Axis(0), chunk);
            let by: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let bw: Vec<f64> = chunk.iter().map(|&i| w.as_slice()[i]).collect();
            let batch = Batch { x: bx.view(), labels: &by, weights: &bw };
            let grad = gradient_on(&params, &batch, cfg.weight_decay)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, batch {b}: {e}")))?;
            let (next, v) = momentum_step(&params, &velocity, &grad, cfg)?;
            if !next.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch}, batch {b}: parameters diverged")));
            }
            params = next;
            velocity = v;
        }
        log.epochs.push(log_epoch(epoch, &params, data, &full, cfg)?);
    }
    Ok((params, log))
}

/// Logits of every record.
pub fn predict(params: &ModelParams, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let logits = params.logits(feature_matrix(data).view())?;
    Ok(logits.axis_iter(Axis(0)).map(|r| r.to_vec()).collect())
}
