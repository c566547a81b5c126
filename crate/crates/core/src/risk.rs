//! Loss functions and (weighted) empirical risks.
//!
//! Every risk divides by the sample size `n`, weighted or not. Weight
//! estimators fold any normalization into the weights themselves, so
//! `(1/n) Σ ŵᵢ ℓᵢ` is the single evaluation path for all bias settings.

use serde::{Deserialize, Serialize};

use crate::analytic::{threshold_loss, Orientation};
use crate::data::{Dataset, Record, WeightVector};
use crate::error::{Error, Result};
use crate::train::ModelParams;

/// Which per-record loss to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// Top-`k` classification error; `k = 1` is the plain 0-1 loss.
    ZeroOne {
        k: usize,
    },
    SoftmaxCrossEntropy,
    /// The threshold loss of the closed-form binary problem on `[0, 1]`.
    ThresholdSign {
        orientation: Orientation,
    },
}

impl LossSpec {
    pub const ZERO_ONE: LossSpec = LossSpec::ZeroOne { k: 1 };
    pub const THRESHOLD: LossSpec = LossSpec::ThresholdSign { orientation: Orientation::RiskConsistent };

    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::ZeroOne { k: 0 } => Err(Error::validation("top-k loss needs k >= 1")),
            _ => Ok(()),
        }
    }

    /// Loss of `hypothesis` on a single record.
    pub fn eval(&self, hypothesis: &Hypothesis<'_>, record: &Record) -> Result<f64> {
        match (self, hypothesis) {
            (LossSpec::ThresholdSign { orientation }, Hypothesis::Threshold(theta)) => {
                threshold_loss(*theta, record, *orientation)
            }
            (LossSpec::ZeroOne { k: 1 }, Hypothesis::Threshold(theta)) => {
                threshold_loss(*theta, record, Orientation::RiskConsistent)
            }
            (LossSpec::ZeroOne { k }, Hypothesis::Model(params)) => {
                let label = require_label(record)?;
                let logits = params.forward(&record.features)?;
                if *k > logits.len() {
                    return Err(Error::validation(format!("k = {k} exceeds the class count {}", logits.len())));
                }
                Ok(if rank_of(&logits, label)? < *k { 0.0 } else { 1.0 })
            }
            (LossSpec::SoftmaxCrossEntropy, Hypothesis::Model(params)) => {
                let label = require_label(record)?;
                let logits = params.forward(&record.features)?;
                cross_entropy(&logits, label)
            }
            (loss, h) => {
                Err(Error::schema(format!("loss {loss:?} cannot be evaluated for hypothesis {}", h.describe())))
            }
        }
    }
}

/// Parameters the loss is evaluated at.
#[derive(Debug, Clone, Copy)]
pub enum Hypothesis<'a> {
    /// Scalar threshold classifier on one-dimensional features.
    Threshold(f64),
    Model(&'a ModelParams),
}

impl Hypothesis<'_> {
    fn describe(&self) -> &'static str {
        match self {
            Hypothesis::Threshold(_) => "threshold",
            Hypothesis::Model(_) => "model",
        }
    }
}

fn require_label(record: &Record) -> Result<usize> {
    record.label.ok_or_else(|| Error::schema("loss requires labeled records"))
}

/// Per-record losses `ℓ(θ, Zᵢ)` in record order.
pub fn losses(data: &Dataset, loss: &LossSpec, hypothesis: &Hypothesis<'_>) -> Result<Vec<f64>> {
    loss.validate()?;
    data.records().iter().map(|r| loss.eval(hypothesis, r)).collect()
}

pub fn mean_loss(losses: &[f64]) -> f64 {
    losses.iter().sum::<f64>() / losses.len() as f64
}

/// `(1/n) Σ wᵢ ℓᵢ`.
pub fn weighted_mean_loss(losses: &[f64], weights: &WeightVector) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::schema(format!("{} losses but {} weights", losses.len(), weights.len())));
    }
    let total: f64 = losses.iter().zip(weights.as_slice()).map(|(l, w)| w * l).sum();
    Ok(total / losses.len() as f64)
}

pub fn empirical_risk(data: &Dataset, loss: &LossSpec, hypothesis: &Hypothesis<'_>) -> Result<f64> {
    Ok(mean_loss(&losses(data, loss, hypothesis)?))
}

pub fn weighted_empirical_risk(
    data: &Dataset,
    weights: &WeightVector,
    loss: &LossSpec,
    hypothesis: &Hypothesis<'_>,
) -> Result<f64> {
    if weights.len() != data.len() {
        return Err(Error::schema(format!("{} records but {} weights", data.len(), weights.len())));
    }
    weighted_mean_loss(&losses(data, loss, hypothesis)?, weights)
}

/// Numerically stable softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::schema(format!("label {label} out of range for {} logits", logits.len())));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(log_total - (logits[label] - max))
}

/// Number of classes ranked strictly ahead of `label`; ties go to the
/// lower class id.
pub fn rank_of(logits: &[f64], label: usize) -> Result<usize> {
    let target = *logits.get(label).ok_or_else(|| Error::schema(format!("label {label} out of range")))?;
    Ok(logits.iter().enumerate().filter(|&(c, &l)| l > target || (l == target && c < label)).count())
}

/// Index of the largest logit, lowest id on ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (c, &l) in logits.iter().enumerate().skip(1) {
        if l > logits[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub miss_rate: f64,
    pub top_k_error: f64,
    pub mean_sce: f64,
}

/// Miss rate, top-`k` error and mean softmax cross-entropy of per-record
/// logits against the dataset labels. Never weighted.
pub fn classification_metrics(data: &Dataset, logits: &[Vec<f64>], k: usize) -> Result<ClassificationMetrics> {
    if logits.len() != data.len() {
        return Err(Error::schema(format!("{} logit rows for {} records", logits.len(), data.len())));
    }
    let j = data.n_classes().ok_or_else(|| Error::schema("metrics require labels"))?;
    if k == 0 || k > j {
        return Err(Error::validation(format!("k = {k} must lie in 1..={j}")));
    }
    let (mut miss, mut topk, mut sce) = (0.0, 0.0, 0.0);
    for (row, y) in logits.iter().zip(data.labels()?) {
        if row.len() != j {
            return Err(Error::schema(format!("expected {j} logits, got {}", row.len())));
        }
        let rank = rank_of(row, y)?;
        if rank >= 1 {
            miss += 1.0;
        }
        if rank >= k {
            topk += 1.0;
        }
        sce += cross_entropy(row, y)?;
    }
    let n = data.len() as f64;
    Ok(ClassificationMetrics { miss_rate: miss / n, top_k_error: topk / n, mean_sce: sce / n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Three scalar records whose threshold losses at θ = 0.5 are [1, 0, 1].
    fn fixture() -> Dataset {
        Dataset::new(vec![Record::labeled(vec![0.2], 1), Record::labeled(vec![0.9], 1), Record::labeled(vec![0.7], 0)])
            .unwrap()
    }

    #[test]
    fn empirical_risk_hand_sum() {
        let ds = fixture();
        let h = Hypothesis::Threshold(0.5);
        assert_eq!(losses(&ds, &LossSpec::ZERO_ONE, &h).unwrap(), vec![1.0, 0.0, 1.0]);
        let r = empirical_risk(&ds, &LossSpec::ZERO_ONE, &h).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_when_all_correct_and_single_record_mean() {
        let ds = Dataset::new(vec![Record::labeled(vec![0.9], 1), Record::labeled(vec![0.1], 0)]).unwrap();
        assert_eq!(empirical_risk(&ds, &LossSpec::ZERO_ONE, &Hypothesis::Threshold(0.5)).unwrap(), 0.0);
        assert_eq!(mean_loss(&[0.37]), 0.37);
    }

    #[test]
    fn weighted_hand_sum_and_null_weights() {
        let ds = fixture();
        let h = Hypothesis::Threshold(0.5);
        let w = WeightVector::new(vec![2.0, 1.0, 1.0]).unwrap();
        let r = weighted_empirical_risk(&ds, &w, &LossSpec::ZERO_ONE, &h).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let zero = WeightVector::new(vec![0.0; 3]).unwrap();
        assert_eq!(weighted_empirical_risk(&ds, &zero, &LossSpec::ZERO_ONE, &h).unwrap(), 0.0);
    }

    #[test]
    fn weight_length_mismatch_is_schema_error() {
        let ds = fixture();
        let w = WeightVector::ones(2);
        let err = weighted_empirical_risk(&ds, &w, &LossSpec::ZERO_ONE, &Hypothesis::Threshold(0.5));
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn threshold_loss_needs_scalar_features() {
        let ds = Dataset::new(vec![Record::labeled(vec![0.1, 0.2], 1)]).unwrap();
        let err = empirical_risk(&ds, &LossSpec::ZERO_ONE, &Hypothesis::Threshold(0.5));
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn sce_of_two_logits() {
        assert!((cross_entropy(&[1.0, 0.0], 0).unwrap() - 0.313_261_687_518_222_8).abs() < 1e-12);
        assert!((cross_entropy(&[0.0, 0.0], 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn metrics_top_k_and_ties() {
        let ds =
            Dataset::with_counts(vec![Record::labeled(vec![0.0], 0), Record::labeled(vec![0.0], 6)], Some(7), None)
                .unwrap();
        // Record 1: the true class ranks sixth, beyond top-5.
        let logits = vec![vec![9.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], vec![7.0, 6.0, 5.0, 4.0, 3.0, 1.0, 2.0]];
        let m = classification_metrics(&ds, &logits, 5).unwrap();
        assert_eq!(m.miss_rate, 0.5);
        assert_eq!(m.top_k_error, 0.5);
        // Ties resolve to the lowest class id.
        assert_eq!(rank_of(&[1.0, 1.0], 0).unwrap(), 0);
        assert_eq!(rank_of(&[1.0, 1.0], 1).unwrap(), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    #[test]
    fn metrics_perfect_and_k_out_of_range() {
        let ds = Dataset::new(vec![Record::labeled(vec![0.0], 1), Record::labeled(vec![0.0], 0)]).unwrap();
        let logits = vec![vec![0.0, 3.0], vec![2.0, -1.0]];
        let m = classification_metrics(&ds, &logits, 1).unwrap();
        assert_eq!((m.miss_rate, m.top_k_error), (0.0, 0.0));
        assert!(matches!(classification_metrics(&ds, &logits, 3), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn unit_weights_are_bitwise_identical(xs in prop::collection::vec((0.0f64..1.0, 0usize..2), 1..40), theta in 0.0f64..1.0) {
            let ds = Dataset::with_counts(
                xs.iter().map(|&(x, y)| Record::labeled(vec![x], y)).collect(), Some(2), None).unwrap();
            let h = Hypothesis::Threshold(theta);
            let plain = empirical_risk(&ds, &LossSpec::ZERO_ONE, &h).unwrap();
            let weighted = weighted_empirical_risk(&ds, &WeightVector::ones(ds.len()), &LossSpec::ZERO_ONE, &h).unwrap();
            prop_assert_eq!(plain.to_bits(), weighted.to_bits());
            prop_assert!((0.0..=1.0).contains(&plain));
        }

        #[test]
        fn linear_in_weights(ls in prop::collection::vec(0.0f64..3.0, 1..30), seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed);
            let w1: Vec<f64> = ls.iter().map(|_| rng.random_range(0.0..5.0)).collect();
            let w2: Vec<f64> = ls.iter().map(|_| rng.random_range(0.0..5.0)).collect();
            let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
            let r1 = weighted_mean_loss(&ls, &WeightVector::new(w1).unwrap()).unwrap();
            let r2 = weighted_mean_loss(&ls, &WeightVector::new(w2).unwrap()).unwrap();
            let r12 = weighted_mean_loss(&ls, &WeightVector::new(sum).unwrap()).unwrap();
            prop_assert!((r12 - (r1 + r2)).abs() <= 1e-12 * r12.abs().max(1e-300));
        }

        #[test]
        fn miss_rate_equals_top1(rows in prop::collection::vec((prop::collection::vec(-3i32..3, 4), 0usize..4), 1..20)) {
            let ds = Dataset::with_counts(
                rows.iter().map(|(_, y)| Record::labeled(vec![0.0], *y)).collect(), Some(4), None).unwrap();
            let logits: Vec<Vec<f64>> = rows.iter().map(|(l, _)| l.iter().map(|&v| v as f64).collect()).collect();
            let m = classification_metrics(&ds, &logits, 1).unwrap();
            prop_assert_eq!(m.miss_rate, m.top_k_error);
        }

        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(l in prop::collection::vec(-30.0f64..30.0, 1..8), c in -100.0f64..100.0) {
            let p = softmax(&l);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let shifted: Vec<f64> = l.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
