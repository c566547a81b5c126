//! Softmax regression on a class-imbalanced training set, with and without
//! class-shift weights, evaluated on a balanced test set.

use rand::Rng;
use rand_distr::StandardNormal;

use werm::data::{Dataset, Record};
use werm::risk::classification_metrics;
use werm::seed;
use werm::train::{fit, predict, ModelKind, TrainConfig};
use werm::weights::group_shift_weights;

fn draw(n: usize, class_probs: &[f64], s: u64) -> werm::Result<Dataset> {
    let mut rng = seed::rng(s);
    let centers = [(-1.0, 0.0), (1.0, 0.0), (0.0, 1.5)];
    let records = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let y = class_probs
                .iter()
                .scan(0.0, |c, p| {
                    *c += p;
                    Some(*c)
                })
                .position(|c| u < c)
                .unwrap_or(2);
            let x = vec![
                centers[y].0 + rng.sample::<f64, _>(StandardNormal),
                centers[y].1 + rng.sample::<f64, _>(StandardNormal),
            ];
            Record::labeled(x, y)
        })
        .collect();
    Dataset::new(records)
}

fn main() -> werm::Result<()> {
    let train = draw(6000, &[0.8, 0.15, 0.05], 1)?;
    let test = draw(6000, &[1.0 / 3.0; 3], 2)?;
    let cfg = TrainConfig { lr: 0.05, epochs: 15, batch_size: 200, top_k: 2, ..Default::default() };

    let weighted = group_shift_weights(&train.labels()?, &[1.0 / 3.0; 3])?;
    let uniform = werm::data::WeightVector::ones(train.len());
    for (name, w) in [("uniform", &uniform), ("class", &weighted)] {
        for kind in [ModelKind::Linear, ModelKind::Mlp] {
            let (params, log) = fit(&train, w, kind, &cfg)?;
            let m = classification_metrics(&test, &predict(&params, &test)?, 2)?;
            println!(
                "{name:<8} {:<7} train objective {:.4} -> {:.4}  test miss {:.4}  top-2 {:.4}  sce {:.4}",
                format!("{kind:?}"),
                log.epochs[0].objective,
                log.epochs.last().unwrap().objective,
                m.miss_rate,
                m.top_k_error,
                m.mean_sce
            );
        }
    }
    Ok(())
}
