//! Plug-in importance weights `ŵᵢ ≈ Φ(Z'ᵢ)` for each selection-bias setting.
//!
//! Weights carry the factor `n` (for instance `ŵᵢ = n p / n'_+`), so that
//! `risk::weighted_mean_loss` (which divides by `n`) reproduces each
//! weighted empirical risk exactly. Groups that a weight formula divides by
//! must be populated; an empty group is an error, never an infinite weight.

mod km;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, WeightVector};
use crate::error::{Error, Result};

pub use km::{censoring_survival, km_fit, KmCurve};

const PK_SUM_TOL: f64 = 1e-12;

/// Known information about the test distribution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetPrior {
    /// Test positive rate `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Test strata probabilities `p_k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pk: Option<Vec<f64>>,
    /// Budget `ζ` on the error of the stated prior.
    #[serde(default)]
    pub zeta: f64,
}

impl TargetPrior {
    pub fn rate(p: f64) -> Result<Self> {
        let prior = TargetPrior { p: Some(p), ..Default::default() };
        prior.validate()?;
        Ok(prior)
    }

    pub fn strata(pk: Vec<f64>) -> Result<Self> {
        let prior = TargetPrior { pk: Some(pk), ..Default::default() };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.p {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::validation(format!("p = {p} must lie in (0, 1)")));
            }
        }
        if let Some(pk) = &self.pk {
            validate_distribution(pk)?;
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::validation(format!("zeta = {} must be >= 0", self.zeta)));
        }
        Ok(())
    }

    fn require_p(&self) -> Result<f64> {
        self.validate()?;
        self.p.ok_or_else(|| Error::validation("target prior needs the positive rate p"))
    }

    fn require_pk(&self) -> Result<&[f64]> {
        self.validate()?;
        self.pk.as_deref().ok_or_else(|| Error::validation("target prior needs strata probabilities pk"))
    }
}

/// Checks that `probs` is a probability vector (entries in `[0, 1]`,
/// summing to one within `1e-12`).
pub fn validate_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::validation("probability vector is empty"));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
        return Err(Error::validation(format!("probability {p} outside [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PK_SUM_TOL {
        return Err(Error::validation(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn binary_counts_nonempty(data: &Dataset, pos: &'static str, neg: &'static str) -> Result<(usize, usize)> {
    let (n_pos, n_neg) = data.binary_counts()?;
    if n_pos == 0 {
        return Err(Error::DegenerateClass { class: pos });
    }
    if n_neg == 0 {
        return Err(Error::DegenerateClass { class: neg });
    }
    Ok((n_pos, n_neg))
}

fn per_label(data: &Dataset, w_pos: f64, w_neg: f64) -> Result<WeightVector> {
    WeightVector::new(data.labels()?.into_iter().map(|y| if y == 1 { w_pos } else { w_neg }).collect())
}

/// Class-probability shift: `ŵ = n p / n'_+` for positives and
/// `n (1-p) / n'_-` for negatives.
pub fn class_shift_weights(data: &Dataset, prior: &TargetPrior) -> Result<WeightVector> {
    let p = prior.require_p()?;
    let (n_pos, n_neg) = binary_counts_nonempty(data, "label +1", "label -1")?;
    let n = data.len() as f64;
    per_label(data, n * p / n_pos as f64, n * (1.0 - p) / n_neg as f64)
}

/// Ideal class-shift weights `φ(y) = p/p'` or `(1-p)/(1-p')` when the
/// training rate `p'` is known.
pub fn class_shift_ideal_weights(data: &Dataset, p: f64, p_train: f64) -> Result<WeightVector> {
    for (name, v) in [("p", p), ("p_train", p_train)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::validation(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    data.binary_counts()?;
    per_label(data, p / p_train, (1.0 - p) / (1.0 - p_train))
}

/// Stratum shift: `ŵ = n p_k / n'_k` for a record in stratum `k`.
pub fn stratum_shift_weights(data: &Dataset, prior: &TargetPrior) -> Result<WeightVector> {
    let pk = prior.require_pk()?;
    let strata = data.strata()?;
    let k = data.n_strata().unwrap_or(0);
    if pk.len() != k {
        return Err(Error::schema(format!("prior has {} strata, dataset has K = {k}", pk.len())));
    }
    group_shift_weights(&strata, pk)
}

/// Shift weights `n p_g / n'_g` over an arbitrary grouping of the records.
///
/// Stratum shift uses the strata; multiclass label shift uses the labels;
/// class-stratum shift uses "meta-strata" `j·K + k`.
pub fn group_shift_weights(groups: &[usize], target: &[f64]) -> Result<WeightVector> {
    validate_distribution(target)?;
    let mut counts = vec![0usize; target.len()];
    for &g in groups {
        *counts.get_mut(g).ok_or_else(|| Error::schema(format!("group {g} outside 0..{}", target.len())))? += 1;
    }
    if let Some(k) = (0..target.len()).find(|&k| target[k] > 0.0 && counts[k] == 0) {
        return Err(Error::EmptyStratum { stratum: k });
    }
    let n = groups.len() as f64;
    WeightVector::new(groups.iter().map(|&g| n * target[g] / counts[g] as f64).collect())
}

/// Ideal stratum weights `p_k / p'_k`.
pub fn stratum_shift_ideal_weights(data: &Dataset, pk: &[f64], pk_train: &[f64]) -> Result<WeightVector> {
    validate_distribution(pk)?;
    validate_distribution(pk_train)?;
    if pk.len() != pk_train.len() {
        return Err(Error::schema("test and training strata distributions differ in length"));
    }
    let strata = data.strata()?;
    strata
        .iter()
        .map(|&s| {
            let (a, b) = (pk[s], pk_train[s]);
            if b == 0.0 {
                Err(Error::EmptyStratum { stratum: s })
            } else {
                Ok(a / b)
            }
        })
        .collect::<Result<Vec<_>>>()
        .and_then(WeightVector::new)
}

/// Positive-unlabeled weights: `2 p n / n'_+` for labeled positives and
/// `n / n'_-` for unlabeled records. With the 0-1 loss (unlabeled records
/// scored as negatives) `(1/n) Σ ŵᵢ ℓᵢ` equals
/// `(2p/n'_+) Σ_{+} 𝕀{g=-1} + (1/n'_-) Σ_{unlabeled} 𝕀{g=+1}`.
pub fn pu_weights(data: &Dataset, prior: &TargetPrior) -> Result<WeightVector> {
    let p = prior.require_p()?;
    let (n_pos, n_unl) = binary_counts_nonempty(data, "labeled positives", "unlabeled records")?;
    let n = data.len() as f64;
    per_label(data, 2.0 * p * n / n_pos as f64, n / n_unl as f64)
}

/// Ideal PU weights `2p/q` and `1/(1-q)` for the true labeled fraction `q`.
pub fn pu_ideal_weights(data: &Dataset, p: f64, q: f64) -> Result<WeightVector> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::validation(format!("q = {q} must lie in (0, 1)")));
    }
    data.binary_counts()?;
    per_label(data, 2.0 * p / q, 1.0 / (1.0 - q))
}

/// Constant to add to the PU weighted risk to estimate `R_P`: `-p`.
pub fn pu_risk_offset(p: f64) -> f64 {
    -p
}

/// Posterior estimate `η̂(x)`, clamped to `[0, 1]`.
///
/// The wrapped function must return equal outputs for equal inputs.
#[derive(Clone)]
pub struct EtaEstimate(Arc<EtaFn>);

type EtaFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

impl EtaEstimate {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        EtaEstimate(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        EtaEstimate::new(move |_| c)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = (self.0)(x);
        if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, 1.0)
        }
    }
}

impl fmt::Debug for EtaEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EtaEstimate(..)")
    }
}

/// PU weights from a posterior estimate: `n p / n'_+` for labeled positives
/// and `(1 − η̂(x)) / (1 − n'_+/n)` for unlabeled records.
pub fn pu_weights_eta(data: &Dataset, prior: &TargetPrior, eta: &EtaEstimate) -> Result<WeightVector> {
    let p = prior.require_p()?;
    let (n_pos, _) = binary_counts_nonempty(data, "labeled positives", "unlabeled records")?;
    let n = data.len() as f64;
    let w_pos = n * p / n_pos as f64;
    let unl_share = 1.0 - n_pos as f64 / n;
    WeightVector::new(
        data.records()
            .iter()
            .map(|r| if r.label == Some(1) { w_pos } else { (1.0 - eta.eval(&r.features)) / unl_share })
            .collect(),
    )
}

/// Inverse-probability-of-censoring weights `eᵢ / Ŝ_C'(tᵢ⁻)`.
///
/// `censoring` must be the Kaplan-Meier curve of the censoring times (see
/// [`censoring_survival`]). Censored records get weight 0.
pub fn ipcw_weights(data: &Dataset, censoring: &KmCurve) -> Result<WeightVector> {
    let (times, events) = km::survival_columns(data)?;
    times
        .iter()
        .zip(&events)
        .enumerate()
        .map(|(i, (&t, &e))| {
            if !e {
                return Ok(0.0);
            }
            let s = censoring.left_limit(t);
            if s <= 0.0 {
                Err(Error::Positivity { record: i })
            } else {
                Ok(1.0 / s)
            }
        })
        .collect::<Result<Vec<_>>>()
        .and_then(WeightVector::new)
}
