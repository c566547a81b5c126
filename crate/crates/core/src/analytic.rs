//! Closed-form binary problem on `[0, 1]`.
//!
//! `X | Y=+1` has density `(1+α) x^α` and `X | Y=-1` has density
//! `(1+β)(1-x)^β`; the test positive rate is `p`. A threshold classifier
//! predicts `+1` above `θ`, which gives the exact risk
//! `R_P(θ) = p θ^{1+α} + (1-p)(1-θ)^{1+β}`.
//!
//! The model is the ground truth for the statistical tests of the crate:
//! risks, optimal thresholds and the importance function are all exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Record};
use crate::error::{Error, Result};
use crate::seed;

/// The `(α, β)` pairs whose optimal thresholds have closed forms.
pub const FIGURE_SHAPES: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (2.0, 2.0)];

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;

/// Orientation of the threshold loss.
///
/// The printed indicator `𝕀{(x-θ)y ≥ 0}` charges positives *above* the
/// threshold, which is the complement of the classifier whose risk is
/// `p θ^{1+α} + (1-p)(1-θ)^{1+β}`. `RiskConsistent` charges positives at or
/// below `θ` and negatives strictly above it, and is what every risk in the
/// crate uses. `Literal` evaluates the printed indicator verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    RiskConsistent,
    Literal,
}

/// 0-1 loss of the threshold classifier `θ` on a scalar binary record.
pub fn threshold_loss(theta: f64, record: &Record, orientation: Orientation) -> Result<f64> {
    if record.features.len() != 1 {
        return Err(Error::schema(format!("threshold loss needs scalar features, got d = {}", record.features.len())));
    }
    let y = record.sign().ok_or_else(|| Error::schema("threshold loss needs a binary label"))?;
    let x = record.features[0];
    let err = match orientation {
        Orientation::Literal => (x - theta) * y >= 0.0,
        Orientation::RiskConsistent => {
            if y > 0.0 {
                x <= theta
            } else {
                x > theta
            }
        }
    };
    Ok(if err { 1.0 } else { 0.0 })
}

/// Minimizer of the true risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptimum {
    pub theta: f64,
    /// `false` when every threshold is optimal (uniform classes, `p = 1/2`).
    pub unique: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

impl AnalyticModel {
    pub fn new(alpha: f64, beta: f64, p: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite() && beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("alpha and beta must be finite and nonnegative, got ({alpha}, {beta})")));
        }
        check_rate("p", p)?;
        Ok(AnalyticModel { alpha, beta, p })
    }

    /// Same class-conditional laws, different positive rate.
    pub fn with_rate(&self, p: f64) -> Result<Self> {
        AnalyticModel::new(self.alpha, self.beta, p)
    }

    pub fn density_pos(&self, x: f64) -> f64 {
        (1.0 + self.alpha) * x.powf(self.alpha)
    }

    pub fn density_neg(&self, x: f64) -> f64 {
        (1.0 + self.beta) * (1.0 - x).powf(self.beta)
    }

    pub fn cdf_pos(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0).powf(1.0 + self.alpha)
    }

    pub fn cdf_neg(&self, x: f64) -> f64 {
        1.0 - (1.0 - x.clamp(0.0, 1.0)).powf(1.0 + self.beta)
    }

    /// Posterior `η(x) = P{Y=+1 | X=x}` under this model's rate.
    pub fn eta(&self, x: f64) -> f64 {
        let pos = self.p * self.density_pos(x);
        let neg = (1.0 - self.p) * self.density_neg(x);
        if pos + neg == 0.0 {
            self.p
        } else {
            pos / (pos + neg)
        }
    }

    pub fn true_risk(&self, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain(format!("theta = {theta} outside [0, 1]")));
        }
        Ok(self.p * theta.powf(1.0 + self.alpha) + (1.0 - self.p) * (1.0 - theta).powf(1.0 + self.beta))
    }

    /// `p(1+α)θ^α − (1−p)(1+β)(1−θ)^β`, the derivative of the risk.
    /// Nondecreasing on `[0, 1]` for `α, β ≥ 0`.
    pub fn risk_slope(&self, theta: f64) -> f64 {
        self.p * (1.0 + self.alpha) * theta.powf(self.alpha)
            - (1.0 - self.p) * (1.0 + self.beta) * (1.0 - theta).powf(self.beta)
    }

    pub fn optimal_threshold(&self) -> ThresholdOptimum {
        if self.alpha == 0.0 && self.beta == 0.0 {
            // Linear risk: slope 2p - 1.
            return match self.p.partial_cmp(&0.5) {
                Some(std::cmp::Ordering::Less) => ThresholdOptimum { theta: 1.0, unique: true },
                Some(std::cmp::Ordering::Greater) => ThresholdOptimum { theta: 0.0, unique: true },
                _ => ThresholdOptimum { theta: 0.5, unique: false },
            };
        }
        if self.risk_slope(0.0) >= 0.0 {
            return ThresholdOptimum { theta: 0.0, unique: true };
        }
        if self.risk_slope(1.0) <= 0.0 {
            return ThresholdOptimum { theta: 1.0, unique: true };
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..BISECTION_MAX_ITER {
            if hi - lo <= BISECTION_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.risk_slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ThresholdOptimum { theta: 0.5 * (lo + hi), unique: true }
    }

    /// `E(p', p) = R_P(θ*_{p'}) − R_P(θ*_p)`: the price of fitting the
    /// threshold to the training rate `p'` instead of the test rate.
    pub fn excess_error(&self, p_train: f64) -> Result<f64> {
        let trained = self.with_rate(p_train)?.optimal_threshold().theta;
        let best = self.optimal_threshold().theta;
        Ok((self.true_risk(trained)? - self.true_risk(best)?).max(0.0))
    }

    /// Draws `n` labeled scalar records with positive rate `class_rate`,
    /// using inverse-CDF sampling for both class-conditional laws.
    pub fn sample(&self, n: usize, class_rate: f64, seed: u64) -> Result<Dataset> {
        let mut rng = seed::rng(seed);
        self.sample_with(n, class_rate, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, class_rate: f64, rng: &mut R) -> Result<Dataset> {
        check_rate("class_rate", class_rate)?;
        if n == 0 {
            return Err(Error::validation("sample size must be at least 1"));
        }
        let records = (0..n)
            .map(|_| {
                let positive = rng.random::<f64>() < class_rate;
                Record::labeled(vec![self.draw_x(positive, rng)], usize::from(positive))
            })
            .collect();
        Dataset::with_counts(records, Some(2), None)
    }

    /// One draw of `X` from `F_+` (`positive`) or `F_-`.
    pub fn draw_x<R: Rng + ?Sized>(&self, positive: bool, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if positive {
            u.powf(1.0 / (1.0 + self.alpha))
        } else {
            1.0 - u.powf(1.0 / (1.0 + self.beta))
        }
    }

    /// `(θ, R_P(θ))` on a uniform grid of `points` thresholds.
    pub fn risk_curve(&self, points: usize) -> Result<Vec<(f64, f64)>> {
        unit_grid(points).into_iter().map(|t| Ok((t, self.true_risk(t)?))).collect()
    }

    /// `(p', E(p', p))` on the open grid `1/(points+1), …, points/(points+1)`.
    pub fn excess_curve(&self, points: usize) -> Result<Vec<(f64, f64)>> {
        (1..=points)
            .map(|i| {
                let pt = i as f64 / (points + 1) as f64;
                Ok((pt, self.excess_error(pt)?))
            })
            .collect()
    }
}

/// `points` evenly spaced values covering `[0, 1]` inclusive.
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

fn check_rate(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {p} must lie in (0, 1)")))
    }
}
