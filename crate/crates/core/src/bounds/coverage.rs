use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{deviation_bound, BoundInputs, BoundResult, DeviationKind};
use crate::analytic::{unit_grid, AnalyticModel};
use crate::data::{Dataset, Record, WeightVector};
use crate::error::{Error, Result};
use crate::risk::{losses, Hypothesis, LossSpec};
use crate::seed;
use crate::weights::{
    class_shift_ideal_weights, class_shift_weights, pu_ideal_weights, pu_weights, stratum_shift_ideal_weights,
    stratum_shift_weights, validate_distribution, TargetPrior,
};

/// A stratified population whose stratum `k` follows `components[k]`
/// (class rate `components[k].p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedAnalytic {
    pub components: Vec<AnalyticModel>,
    /// Test strata probabilities.
    pub pk: Vec<f64>,
    /// Training strata probabilities.
    pub pk_train: Vec<f64>,
}

impl StratifiedAnalytic {
    pub fn validate(&self) -> Result<()> {
        validate_distribution(&self.pk)?;
        validate_distribution(&self.pk_train)?;
        if self.components.len() != self.pk.len() || self.pk.len() != self.pk_train.len() {
            return Err(Error::validation("components, pk and pk_train must have equal length"));
        }
        Ok(())
    }

    /// Training sample: stratum from `pk_train`, then `(X, Y)` from that
    /// stratum's component.
    pub fn sample_train<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::validation("sample size must be at least 1"));
        }
        let k = self.pk.len();
        let records = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let s = self
                    .pk_train
                    .iter()
                    .position(|&p| {
                        acc += p;
                        u < acc
                    })
                    .unwrap_or(k - 1);
                let m = &self.components[s];
                let positive = rng.random::<f64>() < m.p;
                Record::labeled(vec![m.draw_x(positive, rng)], usize::from(positive)).with_stratum(s)
            })
            .collect();
        Dataset::with_counts(records, Some(2), Some(k))
    }
}

/// Draws a positive-unlabeled training sample: with probability `q` a
/// labeled positive from `F_+` (class 1), otherwise an unlabeled record
/// from the marginal `F = p F_+ + (1−p) F_-` (class 0).
pub fn sample_pu<R: Rng + ?Sized>(model: &AnalyticModel, n: usize, q: f64, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::validation("sample size must be at least 1"));
    }
    let records = (0..n)
        .map(|_| {
            let labeled = rng.random::<f64>() < q;
            let positive = labeled || rng.random::<f64>() < model.p;
            Record::labeled(vec![model.draw_x(positive, rng)], usize::from(labeled))
        })
        .collect();
    Dataset::with_counts(records, Some(2), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "snake_case")]
pub enum CoverageSetting {
    /// `model.p` is the test rate; training data use `p_train`.
    ClassShift {
        model: AnalyticModel,
        p_train: f64,
    },
    StratumShift {
        population: StratifiedAnalytic,
    },
    /// `model.p` is the test rate; `q` is the labeled-positive fraction.
    Pu {
        model: AnalyticModel,
        q: f64,
    },
}

impl CoverageSetting {
    fn deviation_kind(&self) -> DeviationKind {
        match self {
            CoverageSetting::ClassShift { .. } => DeviationKind::Approx1,
            CoverageSetting::StratumShift { .. } => DeviationKind::Approx2,
            CoverageSetting::Pu { .. } => DeviationKind::Approx3,
        }
    }

    /// Training probabilities that must be ε-separated.
    fn separated_probs(&self) -> Vec<f64> {
        match self {
            CoverageSetting::ClassShift { p_train, .. } => vec![*p_train],
            CoverageSetting::StratumShift { population } => population.pk_train.clone(),
            CoverageSetting::Pu { q, .. } => vec![*q],
        }
    }

    fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        match self {
            CoverageSetting::ClassShift { model, p_train } => model.sample_with(n, *p_train, rng),
            CoverageSetting::StratumShift { population } => population.sample_train(n, rng),
            CoverageSetting::Pu { model, q } => sample_pu(model, n, *q, rng),
        }
    }

    /// `(plug-in ŵ*, ideal w*)` for a training sample.
    fn weights(&self, data: &Dataset) -> Result<(WeightVector, WeightVector)> {
        match self {
            CoverageSetting::ClassShift { model, p_train } => Ok((
                class_shift_weights(data, &TargetPrior::rate(model.p)?)?,
                class_shift_ideal_weights(data, model.p, *p_train)?,
            )),
            CoverageSetting::StratumShift { population } => Ok((
                stratum_shift_weights(data, &TargetPrior::strata(population.pk.clone())?)?,
                stratum_shift_ideal_weights(data, &population.pk, &population.pk_train)?,
            )),
            CoverageSetting::Pu { model, q } => {
                Ok((pu_weights(data, &TargetPrior::rate(model.p)?)?, pu_ideal_weights(data, model.p, *q)?))
            }
        }
    }

    fn bound_inputs(&self, cfg: &CoverageConfig) -> BoundInputs {
        let mut inputs = BoundInputs { epsilon: Some(cfg.epsilon), ..BoundInputs::new(cfg.n, cfg.delta) };
        match self {
            CoverageSetting::ClassShift { .. } => {}
            CoverageSetting::StratumShift { population } => inputs.k = Some(population.pk.len()),
            CoverageSetting::Pu { model, .. } => inputs.p = Some(model.p),
        }
        inputs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub n: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub reps: usize,
    pub seed: u64,
    /// Thresholds `0, 1/(m-1), …, 1` over which the supremum is taken.
    pub grid_points: usize,
    /// Use the ideal weights in place of the plug-in ones (deviation 0).
    pub exact_weights: bool,
}

impl CoverageConfig {
    pub fn new(n: usize, delta: f64, epsilon: f64, reps: usize, seed: u64) -> Self {
        CoverageConfig { n, delta, epsilon, reps, seed, grid_points: 101, exact_weights: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// Fraction of replicates whose deviation is within the bound.
    pub coverage: f64,
    pub bound: BoundResult,
    /// `false` when `n` is below the bound's sample-size condition.
    pub valid: bool,
    pub reps: usize,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// Replicates where a weight group was empty (counted as not covered).
    pub degenerate: usize,
}

/// Empirical coverage of the plug-in deviation bound: over independent
/// training draws, how often `sup_θ |R̃_{ŵ*,n}(θ) − R̃_{w*,n}(θ)|` stays below
/// the matching deviation bound.
pub fn coverage_check(setting: &CoverageSetting, cfg: &CoverageConfig) -> Result<CoverageResult> {
    if cfg.reps == 0 {
        return Err(Error::validation("reps must be at least 1"));
    }
    if cfg.grid_points == 0 {
        return Err(Error::validation("grid_points must be at least 1"));
    }
    if let CoverageSetting::StratumShift { population } = setting {
        population.validate()?;
    }
    for p in setting.separated_probs() {
        if !(p > cfg.epsilon && p < 1.0 - cfg.epsilon) {
            return Err(Error::validation(format!(
                "training probability {p} is not in (ε, 1−ε) for ε = {}",
                cfg.epsilon
            )));
        }
    }
    let bound = deviation_bound(setting.deviation_kind(), &setting.bound_inputs(cfg))?;
    let grid = unit_grid(cfg.grid_points);

    let deviations: Vec<Option<f64>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::replicate_rng(cfg.seed, r);
            let data = setting.draw(cfg.n, &mut rng)?;
            let (plug_in, ideal) = match setting.weights(&data) {
                Ok(w) => w,
                Err(Error::DegenerateClass { .. } | Error::EmptyStratum { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let plug_in = if cfg.exact_weights { &ideal } else { &plug_in };
            let diff: Vec<f64> = plug_in.as_slice().iter().zip(ideal.as_slice()).map(|(a, b)| a - b).collect();
            let mut sup = 0.0f64;
            for &theta in &grid {
                let ls = losses(&data, &LossSpec::THRESHOLD, &Hypothesis::Threshold(theta))?;
                let gap: f64 = ls.iter().zip(&diff).map(|(l, d)| l * d).sum::<f64>() / cfg.n as f64;
                sup = sup.max(gap.abs());
            }
            Ok(Some(sup))
        })
        .collect::<Result<_>>()?;

    let mut covered = 0usize;
    let mut degenerate = 0usize;
    let (mut max_dev, mut sum_dev) = (0.0f64, 0.0f64);
    for d in &deviations {
        match d {
            Some(v) => {
                if *v <= bound.value {
                    covered += 1;
                }
                max_dev = max_dev.max(*v);
                sum_dev += v;
            }
            None => degenerate += 1,
        }
    }
    let observed = cfg.reps - degenerate;
    Ok(CoverageResult {
        coverage: covered as f64 / cfg.reps as f64,
        valid: bound.valid,
        bound,
        reps: cfg.reps,
        max_deviation: max_dev,
        mean_deviation: if observed > 0 { sum_dev / observed as f64 } else { 0.0 },
        degenerate,
    })
}
