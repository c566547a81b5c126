//! Seeded experiment runner: generate or ingest data, inject bias, weight,
//! fit, evaluate, and write a reproducible result bundle.
//!
//! An [`ExperimentSpec`] is a single JSON document. [`run_experiment`] runs
//! every replicate (in parallel, one derived seed per replicate) and every
//! reweighting mode inside it; [`emit_results`] writes the bundle from a
//! single thread once all replicates are done.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticModel, FIGURE_SHAPES};
use crate::biasgen::{power_law_distribution, subsample_to_distribution, BiasSpec, SubsampleMethod};
use crate::data::{Dataset, Record, WeightVector};
use crate::error::{Error, Result};
use crate::io;
use crate::risk::{classification_metrics, ClassificationMetrics};
use crate::seed;
use crate::train::{fit, predict, EpochLog, ModelKind, TrainConfig};
use crate::weights::{
    censoring_survival, group_shift_weights, ipcw_weights, pu_ideal_weights, pu_weights, stratum_shift_weights,
    validate_distribution, TargetPrior,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AnalyticExcess,
    ClassShift,
    StrataShift,
    Pu,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reweighting {
    Uniform,
    Strata,
    Class,
    Pu,
    Ipcw,
    /// Exact importance function of the known generator.
    Oracle,
}

impl Reweighting {
    fn name(self) -> &'static str {
        match self {
            Reweighting::Uniform => "uniform",
            Reweighting::Strata => "strata",
            Reweighting::Class => "class",
            Reweighting::Pu => "pu",
            Reweighting::Ipcw => "ipcw",
            Reweighting::Oracle => "oracle",
        }
    }
}

/// Gaussian mixture with strata and classes.
///
/// Stratum `k` draws class `k mod J` with probability `dominant` and the
/// other classes uniformly. Given `(k, j)`, the features are Gaussian with
/// standard deviation `noise` around `class_sep · u_j + stratum_offset · v_k`,
/// where `u_j` and `v_k` are unit vectors evenly spread on the first two
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianMixture {
    pub n_strata: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub class_sep: f64,
    pub stratum_offset: f64,
    pub noise: f64,
    pub dominant: f64,
}

impl Default for GaussianMixture {
    fn default() -> Self {
        GaussianMixture {
            n_strata: 5,
            n_classes: 3,
            dim: 2,
            class_sep: 1.0,
            stratum_offset: 0.3,
            noise: 1.0,
            dominant: 0.7,
        }
    }
}

impl GaussianMixture {
    pub fn validate(&self) -> Result<()> {
        if self.n_strata == 0 || self.n_classes < 2 || self.dim < 2 {
            return Err(Error::validation("mixture needs K >= 1, J >= 2 and dim >= 2"));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::validation("noise must be positive"));
        }
        if !(self.dominant > 0.0 && self.dominant < 1.0) {
            return Err(Error::validation("dominant must lie in (0, 1)"));
        }
        if !(self.class_sep.is_finite() && self.stratum_offset.is_finite()) {
            return Err(Error::validation("class_sep and stratum_offset must be finite"));
        }
        Ok(())
    }

    /// `P(Y = j | S = k)`.
    pub fn class_probs(&self, stratum: usize) -> Vec<f64> {
        let j = self.n_classes;
        let rest = (1.0 - self.dominant) / (j - 1) as f64;
        (0..j).map(|c| if c == stratum % j { self.dominant } else { rest }).collect()
    }

    /// Class distribution `Σ_k p_k P(Y = j | S = k)`.
    pub fn class_marginal(&self, pk: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for (k, &p) in pk.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.class_probs(k)) {
                *o += p * c;
            }
        }
        out
    }

    fn mean(&self, stratum: usize, class: usize) -> Vec<f64> {
        let a = TAU * class as f64 / self.n_classes as f64;
        let b = TAU * (stratum as f64 + 0.5) / self.n_strata as f64;
        let mut m = vec![0.0; self.dim];
        m[0] = self.class_sep * a.cos() + self.stratum_offset * b.cos();
        m[1] = self.class_sep * a.sin() + self.stratum_offset * b.sin();
        m
    }

    pub fn draw<R: Rng + ?Sized>(&self, stratum: usize, class: usize, rng: &mut R) -> Record {
        let x = self
            .mean(stratum, class)
            .into_iter()
            .map(|m| m + self.noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Record::labeled(x, class).with_stratum(stratum)
    }

    fn draw_in_stratum<R: Rng + ?Sized>(&self, stratum: usize, rng: &mut R) -> Record {
        let dist = WeightedIndex::new(self.class_probs(stratum)).expect("class probabilities are positive");
        let class = dist.sample(rng);
        self.draw(stratum, class, rng)
    }

    /// `n` records with strata drawn from `pk`.
    pub fn sample<R: Rng + ?Sized>(&self, pk: &[f64], n: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        if pk.len() != self.n_strata {
            return Err(Error::validation(format!("pk has {} entries, K = {}", pk.len(), self.n_strata)));
        }
        validate_distribution(pk)?;
        if n == 0 {
            return Err(Error::validation("sample size must be at least 1"));
        }
        let strata = WeightedIndex::new(pk).map_err(|e| Error::validation(e.to_string()))?;
        let records = (0..n)
            .map(|_| {
                let s = strata.sample(rng);
                self.draw_in_stratum(s, rng)
            })
            .collect();
        Dataset::with_counts(records, Some(self.n_classes), Some(self.n_strata))
    }

    /// `per_stratum` records from every stratum.
    pub fn balanced_pool<R: Rng + ?Sized>(&self, per_stratum: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        if per_stratum == 0 {
            return Err(Error::validation("pool needs at least one record per stratum"));
        }
        let records = (0..self.n_strata)
            .flat_map(|s| (0..per_stratum).map(move |_| s))
            .map(|s| self.draw_in_stratum(s, rng))
            .collect();
        Dataset::with_counts(records, Some(self.n_classes), Some(self.n_strata))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Training and test files in the dataset CSV schema.
    Csv { train: PathBuf, test: PathBuf },
    Synthetic {
        #[serde(default)]
        mixture: GaussianMixture,
        /// Balanced pool size per stratum before bias injection.
        #[serde(default = "default_pool")]
        pool_per_stratum: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
    },
}

fn default_pool() -> usize {
    4000
}

fn default_n_test() -> usize {
    5000
}

/// Curves for the closed-form model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSpec {
    pub p: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<(f64, f64)>,
}

fn default_points() -> usize {
    99
}

fn default_shapes() -> Vec<(f64, f64)> {
    FIGURE_SHAPES.to_vec()
}

/// Survival layer of the censored scenario: event times
/// `Exp(event_rates[y])`, independent censoring times `Exp(censor_rate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringSpec {
    pub event_rates: Vec<f64>,
    pub censor_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<DataSource>,
    /// Power-law bias over strata (strata_shift) or classes (class_shift).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSpec>,
    #[serde(default)]
    pub subsample: SubsampleMethod,
    /// Test-side information used by the plug-in weights.
    #[serde(default)]
    pub prior: TargetPrior,
    /// Test class distribution for `class` weighting; derived from the
    /// generator when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_prior: Option<Vec<f64>>,
    /// Training size: truncates a subsample, or sets the sample size of the
    /// pu and censored scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    /// Labeled-positive fraction of the pu scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pu_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censoring: Option<CensoringSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_modes")]
    pub modes: Vec<Reweighting>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_model() -> ModelKind {
    ModelKind::Linear
}

fn default_modes() -> Vec<Reweighting> {
    vec![Reweighting::Uniform]
}

fn default_replicates() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::validation("replicates must be at least 1"));
        }
        self.prior.validate()?;
        if self.scenario == Scenario::AnalyticExcess {
            let a = self
                .analytic
                .as_ref()
                .ok_or_else(|| Error::validation("analytic_excess needs an `analytic` section"))?;
            AnalyticModel::new(0.0, 0.0, a.p)?;
            if a.points == 0 || a.shapes.is_empty() {
                return Err(Error::validation("analytic curves need points >= 1 and at least one shape"));
            }
            return Ok(());
        }
        self.train.validate()?;
        if self.modes.is_empty() {
            return Err(Error::validation("at least one reweighting mode is required"));
        }
        if self.source.is_none() {
            return Err(Error::validation("scenario needs a data `source`"));
        }
        if let Some(DataSource::Synthetic { mixture, n_test, .. }) = &self.source {
            mixture.validate()?;
            if *n_test == 0 {
                return Err(Error::validation("n_test must be at least 1"));
            }
        }
        for &mode in &self.modes {
            let ok = matches!(
                (self.scenario, mode),
                (_, Reweighting::Uniform | Reweighting::Oracle)
                    | (Scenario::ClassShift | Scenario::StrataShift, Reweighting::Strata | Reweighting::Class)
                    | (Scenario::Pu, Reweighting::Pu)
                    | (Scenario::Censored, Reweighting::Ipcw)
            );
            if !ok {
                return Err(Error::validation(format!(
                    "mode {} does not apply to scenario {:?}",
                    mode.name(),
                    self.scenario
                )));
            }
        }
        match self.scenario {
            Scenario::ClassShift | Scenario::StrataShift => {
                if self.bias.is_none() && matches!(self.source, Some(DataSource::Synthetic { .. })) {
                    return Err(Error::validation("synthetic shift scenarios need a `bias` section"));
                }
            }
            Scenario::Pu => {
                if self.prior.p.is_none() {
                    return Err(Error::validation("pu needs prior.p"));
                }
                if matches!(self.source, Some(DataSource::Synthetic { .. })) {
                    let q = self.pu_q.ok_or_else(|| Error::validation("synthetic pu needs pu_q"))?;
                    if !(q > 0.0 && q < 1.0) {
                        return Err(Error::validation("pu_q must lie in (0, 1)"));
                    }
                    self.n_train.ok_or_else(|| Error::validation("synthetic pu needs n_train"))?;
                }
            }
            Scenario::Censored => {
                if matches!(self.source, Some(DataSource::Synthetic { .. })) {
                    let c = self
                        .censoring
                        .as_ref()
                        .ok_or_else(|| Error::validation("synthetic censored needs a `censoring` section"))?;
                    if !std::iter::once(&c.censor_rate).chain(&c.event_rates).all(|&r| r > 0.0) {
                        return Err(Error::validation("censoring rates must be positive"));
                    }
                    self.n_train.ok_or_else(|| Error::validation("synthetic censored needs n_train"))?;
                }
            }
            Scenario::AnalyticExcess => unreachable!(),
        }
        Ok(())
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        seed::derive_seed(self.seed, r as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: Reweighting,
    pub miss_rate: f64,
    pub top_k_error: f64,
    pub sce: f64,
    #[serde(skip)]
    pub curve: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    /// `None` when the replicate aborted; see `error`.
    pub n_train: Option<usize>,
    /// Training group distribution the bias generator aimed for.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_prime: Option<Vec<f64>>,
    /// Group frequencies actually realized in the training sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realized_p_prime: Option<Vec<f64>>,
    pub modes: Vec<ModeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Reweighting,
    pub completed: usize,
    pub miss_rate: Stat,
    pub top_k_error: Stat,
    pub sce: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub name: String,
    pub header: [String; 2],
    pub points: Vec<(f64, f64)>,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub spec: ExperimentSpec,
    pub replicate_seeds: Vec<u64>,
    /// `true` when every replicate finished.
    pub complete: bool,
    pub failed_replicates: usize,
    pub summary: Vec<ModeSummary>,
    pub replicates: Vec<ReplicateResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<NamedCurve>,
}

impl ResultBundle {
    pub fn summary_for(&self, mode: Reweighting) -> Option<&ModeSummary> {
        self.summary.iter().find(|s| s.mode == mode)
    }

    /// Per-replicate value of `metric` for `mode` (`None` for failed ones).
    pub fn per_replicate(&self, mode: Reweighting, metric: impl Fn(&ModeResult) -> f64) -> Vec<Option<f64>> {
        self.replicates.iter().map(|r| r.modes.iter().find(|m| m.mode == mode).map(&metric)).collect()
    }

    fn is_empty(&self) -> bool {
        self.curves.is_empty() && self.replicates.iter().all(|r| r.modes.is_empty())
    }
}

/// Training data of one replicate plus what the weighting modes need.
struct Prepared {
    train: Dataset,
    test: Dataset,
    /// Weighting groups (strata or labels) and their test distribution.
    groups: Option<(Vec<usize>, Vec<f64>)>,
    /// Exact per-group importance `p_g / p'_g`.
    oracle_groups: Option<Vec<f64>>,
    p_prime: Option<Vec<f64>>,
    oracle: Option<WeightVector>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultBundle> {
    spec.validate()?;
    let replicate_seeds: Vec<u64> = (0..spec.replicates).map(|r| spec.replicate_seed(r)).collect();
    if spec.scenario == Scenario::AnalyticExcess {
        return Ok(ResultBundle {
            spec: spec.clone(),
            replicate_seeds,
            complete: true,
            failed_replicates: 0,
            summary: Vec::new(),
            replicates: Vec::new(),
            curves: analytic_curves(spec.analytic.as_ref().expect("validated"))?,
        });
    }
    // CSV inputs are read once and shared by every replicate.
    let files = match &spec.source {
        Some(DataSource::Csv { train, test }) => Some((io::read_dataset(train)?.0, io::read_dataset(test)?.0)),
        _ => None,
    };
    let replicates: Vec<ReplicateResult> =
        replicate_seeds.par_iter().enumerate().map(|(r, &s)| run_replicate(spec, files.as_ref(), r, s)).collect();

    let summary = spec
        .modes
        .iter()
        .filter_map(|&mode| {
            let rows: Vec<&ModeResult> =
                replicates.iter().filter_map(|r| r.modes.iter().find(|m| m.mode == mode)).collect();
            let col = |f: fn(&ModeResult) -> f64| Stat::of(&rows.iter().map(|m| f(m)).collect::<Vec<_>>());
            Some(ModeSummary {
                mode,
                completed: rows.len(),
                miss_rate: col(|m| m.miss_rate)?,
                top_k_error: col(|m| m.top_k_error)?,
                sce: col(|m| m.sce)?,
            })
        })
        .collect();
    let failed = replicates.iter().filter(|r| r.error.is_some()).count();
    Ok(ResultBundle {
        spec: spec.clone(),
        replicate_seeds,
        complete: failed == 0,
        failed_replicates: failed,
        summary,
        replicates,
        curves: Vec::new(),
    })
}

fn analytic_curves(a: &AnalyticSpec) -> Result<Vec<NamedCurve>> {
    let mut curves = Vec::new();
    for &(alpha, beta) in &a.shapes {
        let m = AnalyticModel::new(alpha, beta, a.p)?;
        let tag = format!("a{alpha}_b{beta}");
        curves.push(NamedCurve {
            name: format!("excess_{tag}"),
            header: ["p_train".into(), "excess".into()],
            points: m.excess_curve(a.points)?,
        });
        curves.push(NamedCurve {
            name: format!("risk_{tag}"),
            header: ["theta".into(), "risk".into()],
            points: m.risk_curve(a.points + 2)?,
        });
    }
    Ok(curves)
}

fn run_replicate(spec: &ExperimentSpec, files: Option<&(Dataset, Dataset)>, r: usize, s: u64) -> ReplicateResult {
    let mut out = ReplicateResult {
        replicate: r,
        seed: s,
        n_train: None,
        p_prime: None,
        realized_p_prime: None,
        modes: Vec::new(),
        error: None,
    };
    let prepared = match prepare(spec, files, s) {
        Ok(p) => p,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.n_train = Some(prepared.train.len());
    out.p_prime = prepared.p_prime.clone();
    if let Some((groups, target)) = &prepared.groups {
        let mut counts = vec![0usize; target.len()];
        for &g in groups {
            counts[g] += 1;
        }
        out.realized_p_prime = Some(counts.iter().map(|&c| c as f64 / groups.len() as f64).collect());
    }
    let cfg = TrainConfig { seed: seed::derive_seed(s, 3), ..spec.train.clone() };
    for &mode in &spec.modes {
        match run_mode(spec, &prepared, mode, &cfg) {
            Ok(m) => out.modes.push(m),
            Err(e) => {
                out.error = Some(format!("mode {}: {e}", mode.name()));
                out.modes.clear();
                return out;
            }
        }
    }
    out
}

fn run_mode(spec: &ExperimentSpec, prep: &Prepared, mode: Reweighting, cfg: &TrainConfig) -> Result<ModeResult> {
    let w = weights_for(spec, prep, mode)?;
    let (params, log) = fit(&prep.train, &w, spec.model, cfg)?;
    let logits = predict(&params, &prep.test)?;
    let j = prep.test.n_classes().ok_or_else(|| Error::schema("test set needs labels"))?;
    let ClassificationMetrics { miss_rate, top_k_error, mean_sce } =
        classification_metrics(&prep.test, &logits, cfg.top_k.min(j))?;
    Ok(ModeResult { mode, miss_rate, top_k_error, sce: mean_sce, curve: log.epochs })
}

fn weights_for(spec: &ExperimentSpec, prep: &Prepared, mode: Reweighting) -> Result<WeightVector> {
    let data = &prep.train;
    match mode {
        Reweighting::Uniform => match spec.scenario {
            // Censored records carry no label information.
            Scenario::Censored => WeightVector::new(
                data.records().iter().map(|r| if r.event == Some(true) { 1.0 } else { 0.0 }).collect(),
            ),
            _ => Ok(WeightVector::ones(data.len())),
        },
        Reweighting::Strata => {
            let pk = spec
                .prior
                .pk
                .clone()
                .or_else(|| spec.bias.as_ref().map(|b| b.target_pk.clone()))
                .ok_or_else(|| Error::validation("strata weighting needs prior.pk or bias.target_pk"))?;
            stratum_shift_weights(data, &TargetPrior::strata(pk)?)
        }
        Reweighting::Class => {
            let target = class_target(spec)?;
            group_shift_weights(&data.labels()?, &target)
        }
        Reweighting::Pu => pu_weights(data, &spec.prior),
        Reweighting::Ipcw => ipcw_weights(data, &censoring_survival(data)?),
        Reweighting::Oracle => {
            if let Some(w) = &prep.oracle {
                return Ok(w.clone());
            }
            let (groups, _) = prep
                .groups
                .as_ref()
                .ok_or_else(|| Error::validation("oracle weights are unavailable for this source"))?;
            let phi =
                prep.oracle_groups.as_ref().ok_or_else(|| Error::validation("oracle weights need a bias spec"))?;
            WeightVector::new(groups.iter().map(|&g| phi[g]).collect())
        }
    }
}

fn class_target(spec: &ExperimentSpec) -> Result<Vec<f64>> {
    if let Some(c) = &spec.class_prior {
        validate_distribution(c)?;
        return Ok(c.clone());
    }
    match &spec.source {
        Some(DataSource::Synthetic { mixture, .. }) => {
            let pk = test_pk(spec, mixture);
            Ok(mixture.class_marginal(&pk))
        }
        _ => match spec.prior.p {
            Some(p) => Ok(vec![1.0 - p, p]),
            None => Err(Error::validation("class weighting needs class_prior or prior.p")),
        },
    }
}

fn test_pk(spec: &ExperimentSpec, mixture: &GaussianMixture) -> Vec<f64> {
    match (spec.scenario, &spec.bias, &spec.prior.pk) {
        (Scenario::StrataShift, Some(b), _) => b.target_pk.clone(),
        (_, _, Some(pk)) => pk.clone(),
        _ => vec![1.0 / mixture.n_strata as f64; mixture.n_strata],
    }
}

fn prepare(spec: &ExperimentSpec, files: Option<&(Dataset, Dataset)>, s: u64) -> Result<Prepared> {
    let mut gen_rng = seed::rng(seed::derive_seed(s, 0));
    let (pool, test, mixture) = match (&spec.source, files) {
        (Some(DataSource::Csv { .. }), Some((train, test))) => (Some(train.clone()), test.clone(), None),
        (Some(DataSource::Synthetic { mixture, pool_per_stratum, n_test }), _) => {
            let pk = test_pk(spec, mixture);
            let test = mixture.sample(&pk, *n_test, &mut seed::rng(seed::derive_seed(s, 1)))?;
            let pool = match spec.scenario {
                Scenario::ClassShift | Scenario::StrataShift => {
                    Some(mixture.balanced_pool(*pool_per_stratum, &mut gen_rng)?)
                }
                _ => None,
            };
            (pool, test, Some(mixture))
        }
        _ => return Err(Error::validation("scenario needs a data source")),
    };
    match spec.scenario {
        Scenario::ClassShift | Scenario::StrataShift => {
            prepare_shift(spec, pool.expect("shift scenarios build a pool"), test, s)
        }
        Scenario::Pu => prepare_pu(spec, test, mixture, pool, &mut gen_rng),
        Scenario::Censored => prepare_censored(spec, test, mixture, pool, &mut gen_rng),
        Scenario::AnalyticExcess => unreachable!(),
    }
}

fn prepare_shift(spec: &ExperimentSpec, pool: Dataset, test: Dataset, s: u64) -> Result<Prepared> {
    let by_class = spec.scenario == Scenario::ClassShift;
    let group_of = |d: &Dataset| if by_class { d.labels() } else { d.strata() };
    let n_groups = if by_class { pool.n_classes() } else { pool.n_strata() }
        .ok_or_else(|| Error::schema("shift scenarios need labels (class_shift) or strata (strata_shift)"))?;
    let (train, p_prime, oracle_groups) = match &spec.bias {
        Some(bias) => {
            let p_prime = power_law_distribution(bias, n_groups)?;
            // Subsampling runs on the strata field; class shift groups by label.
            let keyed = if by_class {
                let recs = pool
                    .records()
                    .iter()
                    .map(|r| {
                        let mut r = r.clone();
                        r.stratum = r.label;
                        r
                    })
                    .collect();
                Dataset::with_counts(recs, pool.n_classes(), Some(n_groups))?
            } else {
                pool
            };
            let mut sub = subsample_to_distribution(&keyed, &p_prime, seed::derive_seed(s, 2), spec.subsample)?;
            if let Some(n) = spec.n_train {
                if n < sub.len() {
                    sub = sub.subset(&(0..n).collect::<Vec<_>>())?;
                }
            }
            let phi = bias.target_pk.iter().zip(&p_prime).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
            (sub, Some(p_prime), Some(phi))
        }
        None => (pool, None, None),
    };
    let target = match &spec.bias {
        Some(b) => b.target_pk.clone(),
        None if by_class => class_target(spec)?,
        None => spec.prior.pk.clone().ok_or_else(|| Error::validation("strata_shift without bias needs prior.pk"))?,
    };
    let groups = group_of(&train)?;
    Ok(Prepared { train, test, groups: Some((groups, target)), oracle_groups, p_prime, oracle: None })
}

fn prepare_pu<R: Rng + ?Sized>(
    spec: &ExperimentSpec,
    test: Dataset,
    mixture: Option<&GaussianMixture>,
    pool: Option<Dataset>,
    rng: &mut R,
) -> Result<Prepared> {
    let p = spec.prior.p.expect("validated");
    let Some(mixture) = mixture else {
        // CSV: the training labels already mark labeled positives.
        return Ok(Prepared {
            train: pool.expect("csv source"),
            test,
            groups: None,
            oracle_groups: None,
            p_prime: None,
            oracle: None,
        });
    };
    if mixture.n_classes != 2 {
        return Err(Error::validation("pu needs a two-class mixture"));
    }
    let q = spec.pu_q.expect("validated");
    let n = spec.n_train.expect("validated");
    let pk = test_pk(spec, mixture);
    // Strata given the positive class: P(S=k | Y=1) ∝ p_k P(Y=1 | S=k).
    let pos_strata: Vec<f64> = (0..mixture.n_strata).map(|k| pk[k] * mixture.class_probs(k)[1]).collect();
    let pos_strata = WeightedIndex::new(&pos_strata).map_err(|e| Error::validation(e.to_string()))?;
    let strata = WeightedIndex::new(&pk).map_err(|e| Error::validation(e.to_string()))?;
    let records: Vec<Record> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < q {
                mixture.draw(pos_strata.sample(rng), 1, rng)
            } else {
                mixture.draw_in_stratum(strata.sample(rng), rng).with_label(0)
            }
        })
        .collect();
    let train = Dataset::with_counts(records, Some(2), Some(mixture.n_strata))?;
    let oracle = pu_ideal_weights(&train, p, q)?;
    Ok(Prepared { train, test, groups: None, oracle_groups: None, p_prime: None, oracle: Some(oracle) })
}

fn prepare_censored<R: Rng + ?Sized>(
    spec: &ExperimentSpec,
    test: Dataset,
    mixture: Option<&GaussianMixture>,
    pool: Option<Dataset>,
    rng: &mut R,
) -> Result<Prepared> {
    let Some(mixture) = mixture else {
        return Ok(Prepared {
            train: pool.expect("csv source"),
            test,
            groups: None,
            oracle_groups: None,
            p_prime: None,
            oracle: None,
        });
    };
    let c = spec.censoring.as_ref().expect("validated");
    if c.event_rates.len() != mixture.n_classes {
        return Err(Error::validation("censoring.event_rates needs one rate per class"));
    }
    let n = spec.n_train.expect("validated");
    let pk = test_pk(spec, mixture);
    let censor = Exp::new(c.censor_rate).map_err(|e| Error::validation(e.to_string()))?;
    let mut oracle = Vec::with_capacity(n);
    let records: Vec<Record> = mixture
        .sample(&pk, n, rng)?
        .into_records()
        .into_iter()
        .map(|r| {
            let y = r.label.expect("mixture records are labeled");
            let event_time: f64 = Exp::new(c.event_rates[y]).expect("validated").sample(rng);
            let censor_time: f64 = censor.sample(rng);
            let event = event_time <= censor_time;
            let t = event_time.min(censor_time);
            oracle.push(if event { (c.censor_rate * t).exp() } else { 0.0 });
            r.with_survival(t, event)
        })
        .collect();
    let train = Dataset::with_counts(records, Some(mixture.n_classes), Some(mixture.n_strata))?;
    Ok(Prepared {
        train,
        test,
        groups: None,
        oracle_groups: None,
        p_prime: None,
        oracle: Some(WeightVector::new(oracle)?),
    })
}

/// Writes `results.json`, `spec.json` and `curves/*.csv` under `dir`.
///
/// Learning curves are named `{mode}_rep{r}.csv`; analytic curves keep
/// their bundle names. Nothing is written for an empty bundle.
pub fn emit_results(bundle: &ResultBundle, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if bundle.is_empty() {
        return Err(Error::validation("result bundle is empty: no replicate finished and no curves were produced"));
    }
    let dir = dir.as_ref();
    let curves_dir = dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
    let mut written = Vec::new();

    let results = dir.join("results.json");
    io::write_json(&results, bundle)?;
    written.push(results);
    let spec_path = dir.join("spec.json");
    io::write_json(&spec_path, &SpecEcho { spec: &bundle.spec, replicate_seeds: &bundle.replicate_seeds })?;
    written.push(spec_path);

    for rep in &bundle.replicates {
        for m in &rep.modes {
            let path = curves_dir.join(format!("{}_rep{}.csv", m.mode.name(), rep.replicate));
            io::write_learning_curve(&path, &m.curve)?;
            written.push(path);
        }
    }
    for c in &bundle.curves {
        let path = curves_dir.join(format!("{}.csv", c.name));
        io::write_xy(&path, [c.header[0].as_str(), c.header[1].as_str()], &c.points)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct SpecEcho<'a> {
    spec: &'a ExperimentSpec,
    replicate_seeds: &'a [u64],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_shift(modes: Vec<Reweighting>, gamma: f64) -> ExperimentSpec {
        ExperimentSpec {
            scenario: Scenario::StrataShift,
            source: Some(DataSource::Synthetic {
                mixture: GaussianMixture { n_strata: 3, ..Default::default() },
                pool_per_stratum: 300,
                n_test: 400,
            }),
            bias: Some(BiasSpec::new(gamma, vec![1.0 / 3.0; 3])),
            subsample: SubsampleMethod::Sequential,
            prior: TargetPrior::default(),
            class_prior: None,
            n_train: None,
            pu_q: None,
            censoring: None,
            analytic: None,
            train: TrainConfig { lr: 0.05, epochs: 3, batch_size: 100, top_k: 2, ..Default::default() },
            model: ModelKind::Linear,
            modes,
            replicates: 3,
            seed: 11,
            out_dir: PathBuf::from("out"),
        }
    }

    #[test]
    fn mixture_marginal_sums_to_one() {
        let m = GaussianMixture::default();
        let c = m.class_marginal(&[0.2; 5]);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_replicates_rejected() {
        let mut spec = small_shift(vec![Reweighting::Uniform], 0.5);
        spec.replicates = 0;
        assert!(matches!(run_experiment(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn mode_must_fit_scenario() {
        let spec = small_shift(vec![Reweighting::Ipcw], 0.5);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn oracle_equals_uniform_without_bias() {
        let b = run_experiment(&small_shift(vec![Reweighting::Uniform, Reweighting::Oracle], 1.0)).unwrap();
        assert!(b.complete);
        assert_eq!(
            b.per_replicate(Reweighting::Uniform, |m| m.miss_rate),
            b.per_replicate(Reweighting::Oracle, |m| m.miss_rate)
        );
    }

    #[test]
    fn deterministic() {
        let spec = small_shift(vec![Reweighting::Uniform, Reweighting::Strata], 0.3);
        let a = serde_json::to_string(&run_experiment(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&run_experiment(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let spec = small_shift(vec![Reweighting::Uniform], 0.3);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn empty_bundle_is_not_written() {
        let mut b = run_experiment(&small_shift(vec![Reweighting::Uniform], 0.5)).unwrap();
        for r in &mut b.replicates {
            r.modes.clear();
        }
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_results(&b, dir.path()).is_err());
        assert!(!dir.path().join("results.json").exists());
    }
}
