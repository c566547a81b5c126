//! Power-law strata bias injection for balanced datasets.
//!
//! The training strata distribution is tilted to
//! `p'_k ∝ γ^{−⌊K/2⌋/σ(k)} p_k` for a permutation `σ` of `{1..K}`, and the
//! training set is subsampled to follow it. `γ = 1` leaves the distribution
//! unchanged; `γ → 0` concentrates mass on the strata with small `σ(k)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::weights::validate_distribution;

/// How `σ` is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permutation {
    #[default]
    Identity,
    /// `σ(k)` for `k = 1..K`, 1-based.
    Explicit(Vec<usize>),
    /// Uniformly random permutation drawn from the seed.
    Random(u64),
}

impl Permutation {
    /// `σ` as a 1-based vector of length `k`.
    pub fn resolve(&self, k: usize) -> Result<Vec<usize>> {
        let sigma = match self {
            Permutation::Identity => (1..=k).collect(),
            Permutation::Explicit(v) => v.clone(),
            Permutation::Random(s) => {
                let mut v: Vec<usize> = (1..=k).collect();
                v.shuffle(&mut seed::rng(*s));
                v
            }
        };
        let mut seen = vec![false; k];
        if sigma.len() != k {
            return Err(Error::validation(format!("permutation has {} entries, K = {k}", sigma.len())));
        }
        for &s in &sigma {
            if s == 0 || s > k || std::mem::replace(&mut seen[s - 1], true) {
                return Err(Error::validation(format!("{sigma:?} is not a permutation of 1..={k}")));
            }
        }
        Ok(sigma)
    }
}

/// Exponent of the tilt. Both forms give the same distribution after
/// normalization; `MainText` multiplies every stratum by an extra `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentStyle {
    /// `γ^{−⌊K/2⌋/σ(k)}`.
    #[default]
    Appendix,
    /// `γ^{1−⌊K/2⌋/σ(k)}`.
    MainText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub gamma: f64,
    #[serde(default)]
    pub permutation: Permutation,
    /// The unbiased strata distribution `p_k`.
    pub target_pk: Vec<f64>,
    #[serde(default)]
    pub exponent_style: ExponentStyle,
}

impl BiasSpec {
    pub fn new(gamma: f64, target_pk: Vec<f64>) -> Self {
        BiasSpec { gamma, permutation: Permutation::Identity, target_pk, exponent_style: ExponentStyle::Appendix }
    }
}

/// The tilted strata distribution `{p'_k}`.
pub fn power_law_distribution(spec: &BiasSpec, k: usize) -> Result<Vec<f64>> {
    if !(spec.gamma > 0.0 && spec.gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma = {} must lie in (0, 1]", spec.gamma)));
    }
    if k == 0 {
        return Err(Error::validation("K must be at least 1"));
    }
    if spec.target_pk.len() != k {
        return Err(Error::validation(format!("target_pk has {} entries, K = {k}", spec.target_pk.len())));
    }
    validate_distribution(&spec.target_pk)?;
    let sigma = spec.permutation.resolve(k)?;
    if spec.gamma == 1.0 {
        return Ok(spec.target_pk.clone());
    }
    let half = (k / 2) as f64;
    let tilted: Vec<f64> = sigma
        .iter()
        .zip(&spec.target_pk)
        .map(|(&s, &p)| {
            let exponent = match spec.exponent_style {
                ExponentStyle::Appendix => -half / s as f64,
                ExponentStyle::MainText => 1.0 - half / s as f64,
            };
            spec.gamma.powf(exponent) * p
        })
        .collect();
    let total: f64 = tilted.iter().sum();
    Ok(tilted.into_iter().map(|v| v / total).collect())
}

/// Total-variation distance `½ Σ |p_k − q_k|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleMethod {
    /// Draw a stratum from `p'`, move one random candidate of that stratum to
    /// the output, and stop the first time the drawn stratum is already empty.
    #[default]
    Sequential,
    /// Take the largest sample whose strata sizes are `⌊m p'_k⌋`, choosing
    /// members uniformly within each stratum.
    ProportionalSizing,
}

/// Subsamples `data` so its strata follow `p_prime`. Records are never
/// duplicated; output order is the draw order.
pub fn subsample_to_distribution(
    data: &Dataset,
    p_prime: &[f64],
    seed: u64,
    method: SubsampleMethod,
) -> Result<Dataset> {
    let strata = data.strata()?;
    let k = data.n_strata().unwrap_or(0);
    if p_prime.len() != k {
        return Err(Error::validation(format!("p' has {} entries, dataset has K = {k}", p_prime.len())));
    }
    validate_distribution(p_prime)?;
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &s) in strata.iter().enumerate() {
        candidates[s].push(i);
    }
    if let Some(s) = (0..k).find(|&s| p_prime[s] > 0.0 && candidates[s].is_empty()) {
        return Err(Error::EmptyStratum { stratum: s });
    }
    let mut rng = seed::rng(seed);
    let picked = match method {
        SubsampleMethod::Sequential => sequential(&mut candidates, p_prime, &mut rng)?,
        SubsampleMethod::ProportionalSizing => proportional(&mut candidates, p_prime, &mut rng),
    };
    if picked.is_empty() {
        return Err(Error::validation("subsampling produced no records"));
    }
    data.subset(&picked)
}

fn sequential<R: Rng>(candidates: &mut [Vec<usize>], p_prime: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(p_prime).map_err(|e| Error::validation(e.to_string()))?;
    let mut out = Vec::new();
    loop {
        let set = &mut candidates[dist.sample(rng)];
        if set.is_empty() {
            return Ok(out);
        }
        let j = rng.random_range(0..set.len());
        out.push(set.swap_remove(j));
    }
}

fn proportional<R: Rng>(candidates: &mut [Vec<usize>], p_prime: &[f64], rng: &mut R) -> Vec<usize> {
    let m = candidates
        .iter()
        .zip(p_prime)
        .filter(|(_, &p)| p > 0.0)
        .map(|(c, &p)| c.len() as f64 / p)
        .fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    for (set, &p) in candidates.iter_mut().zip(p_prime) {
        let take = ((m * p).floor() as usize).min(set.len());
        set.shuffle(rng);
        out.extend_from_slice(&set[..take]);
    }
    out.shuffle(rng);
    out
}
