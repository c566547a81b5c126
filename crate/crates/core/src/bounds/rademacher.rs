use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::risk::{losses, Hypothesis, LossSpec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    /// Monte-Carlo standard error of `mean`.
    pub std_err: f64,
    pub reps: usize,
}

/// Monte-Carlo estimate of `E_σ[ max_θ (1/n) |Σᵢ σᵢ ℓ(θ, Zᵢ)| ]` over a
/// finite hypothesis grid.
///
/// Replicate `r` draws its signs from a generator seeded by `(seed, r)`, and
/// the average is reduced in replicate order, so the result does not depend
/// on the thread count.
pub fn rademacher_mc(
    data: &Dataset,
    grid: &[Hypothesis<'_>],
    loss: &LossSpec,
    reps: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    if grid.is_empty() {
        return Err(Error::validation("hypothesis grid is empty"));
    }
    if reps == 0 {
        return Err(Error::validation("reps must be at least 1"));
    }
    let table: Vec<Vec<f64>> = grid.iter().map(|h| losses(data, loss, h)).collect::<Result<_>>()?;
    let n = data.len();
    let draws: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::replicate_rng(seed, r);
            let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            table.iter().map(|row| row.iter().zip(&signs).map(|(l, s)| l * s).sum::<f64>().abs()).fold(0.0, f64::max)
                / n as f64
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / reps as f64;
    let var = if reps > 1 { draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps - 1) as f64 } else { 0.0 };
    Ok(RademacherEstimate { mean, std_err: (var / reps as f64).sqrt(), reps })
}
