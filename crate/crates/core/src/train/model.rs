use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `l = Wᵀx + b`.
    Linear,
    /// `l = W₂ᵀ relu(W₁ᵀx + b₁) + b₂` with hidden width `⌊(d+J)/2⌋`.
    Mlp,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::validation(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Dense layers applied in order with ReLU between them.
///
/// Layer `i` maps `weights[i].nrows()` inputs to `weights[i].ncols()`
/// outputs. Gradients and momentum velocities share this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations kept for the backward pass.
pub(crate) struct ForwardCache {
    /// Input of each layer (post-ReLU for hidden layers).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pub pre: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

pub fn hidden_width(d: usize, n_classes: usize) -> usize {
    ((d + n_classes) / 2).max(1)
}

impl ModelParams {
    /// Gaussian `N(0, σ₀²)` weights and zero biases, deterministic per seed.
    pub fn init(kind: ModelKind, d: usize, n_classes: usize, init_std: f64, seed: u64) -> Result<Self> {
        if d == 0 || n_classes == 0 {
            return Err(Error::validation("model dimensions must be at least 1"));
        }
        if !(init_std >= 0.0 && init_std.is_finite()) {
            return Err(Error::validation(format!("init_std = {init_std} must be >= 0")));
        }
        let shapes = match kind {
            ModelKind::Linear => vec![(d, n_classes)],
            ModelKind::Mlp => {
                let h = hidden_width(d, n_classes);
                vec![(d, h), (h, n_classes)]
            }
        };
        let mut rng = seed::rng(seed);
        let normal = Normal::new(0.0, init_std).map_err(|e| Error::validation(e.to_string()))?;
        let weights = shapes
            .iter()
            .map(|&(r, c)| {
                if init_std == 0.0 {
                    Array2::zeros((r, c))
                } else {
                    Array2::from_shape_simple_fn((r, c), || normal.sample(&mut rng))
                }
            })
            .collect();
        let biases = shapes.iter().map(|&(_, c)| Array1::zeros(c)).collect();
        Ok(ModelParams { kind, weights, biases })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.last().map_or(0, |w| w.ncols())
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            kind: self.kind,
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Logits for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::schema(format!("input has {} features, model expects {}", x.len(), self.input_dim())));
        }
        let row = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(row).logits.row(0).to_vec())
    }

    /// Logits for every row of `x`.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::schema(format!("input has {} features, model expects {}", x.ncols(), self.input_dim())));
        }
        Ok(self.forward_batch(x).logits)
    }

    pub(crate) fn forward_batch(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::new();
        let mut current = x.to_owned();
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = current.dot(w) + b;
            inputs.push(current);
            if i == last {
                return ForwardCache { inputs, pre, logits: z };
            }
            current = z.mapv(|v| v.max(0.0));
            pre.push(z);
        }
        unreachable!("model has at least one layer")
    }

    /// `½ Σ ‖W‖²_F` over weight matrices; biases are not penalized.
    pub fn penalty(&self) -> f64 {
        0.5 * self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&other.biases).all(|(a, b)| a.dim() == b.dim())
    }

    /// All entries, weights first, in layer order.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.biases.iter().flat_map(|b| b.iter().copied()))
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten) for a model of the same shape.
    pub fn with_flat(&self, values: &[f64]) -> ModelParams {
        let mut out = self.clone();
        let mut it = values.iter().copied();
        for w in &mut out.weights {
            w.iter_mut().for_each(|v| *v = it.next().expect("flat length"));
        }
        for b in &mut out.biases {
            b.iter_mut().for_each(|v| *v = it.next().expect("flat length"));
        }
        out
    }

    /// `self ← a·self + c·other`, elementwise over all tensors.
    pub(crate) fn scale_add(&mut self, a: f64, c: f64, other: &ModelParams) {
        for (x, y) in self.weights.iter_mut().zip(&other.weights) {
            Zip::from(x).and(y).for_each(|x, &y| *x = a * *x + c * y);
        }
        for (x, y) in self.biases.iter_mut().zip(&other.biases) {
            Zip::from(x).and(y).for_each(|x, &y| *x = a * *x + c * y);
        }
    }
}

pub(crate) fn sum_rows(m: &Array2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_std_gives_zero_weights() {
        let m = ModelParams::init(ModelKind::Mlp, 3, 2, 0.0, 1).unwrap();
        assert!(m.flatten().iter().all(|&v| v == 0.0));
        assert_eq!(m.weights[0].dim(), (3, 2));
        assert_eq!(m.weights[1].dim(), (2, 2));
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(ModelKind::Linear, 4, 3, 0.01, 5).unwrap();
        let b = ModelParams::init(ModelKind::Linear, 4, 3, 0.01, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.biases[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_mean_clt() {
        let m = ModelParams::init(ModelKind::Linear, 1000, 1000, 0.01, 11).unwrap();
        let w = &m.weights[0];
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() <= 4.0 * 0.01 / 1e3, "mean = {mean}");
    }

    #[test]
    fn linear_forward() {
        let mut m = ModelParams::init(ModelKind::Linear, 2, 2, 0.0, 0).unwrap();
        m.biases[0] = array![0.5, -2.0];
        assert_eq!(m.forward(&[3.0, -1.0]).unwrap(), vec![0.5, -2.0]);
        m.weights[0] = array![[1.0, 0.0], [0.0, 1.0]];
        m.biases[0] = array![0.0, 0.0];
        assert_eq!(m.forward(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert!(matches!(m.forward(&[1.0]), Err(Error::Schema(_))));
    }

    #[test]
    fn mlp_dead_hidden_layer_returns_output_bias() {
        let mut m = ModelParams::init(ModelKind::Mlp, 2, 3, 0.5, 3).unwrap();
        m.weights[0].fill(1.0);
        m.biases[0].fill(-100.0);
        m.biases[1] = array![0.1, 0.2, 0.3];
        assert_eq!(m.forward(&[1.0, 2.0]).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn penalty_excludes_biases() {
        let mut m = ModelParams::init(ModelKind::Linear, 1, 2, 0.0, 0).unwrap();
        m.weights[0] = array![[3.0, 4.0]];
        m.biases[0] = array![10.0, 10.0];
        assert_eq!(m.penalty(), 12.5);
    }

    #[test]
    fn flatten_round_trip() {
        let m = ModelParams::init(ModelKind::Mlp, 3, 4, 1.0, 2).unwrap();
        assert_eq!(m.with_flat(&m.flatten()), m);
    }
}
