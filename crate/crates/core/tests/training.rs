//! End-to-end behavior of weighted softmax training.

use rand::Rng;
use rand_distr::StandardNormal;

use werm::data::{Dataset, Record, WeightVector};
use werm::seed;
use werm::train::{fit, init_params, weighted_objective, ModelKind, ModelParams, TrainConfig};
use werm::Error;

/// Gaussian blobs centred at `sep · e_j` in `d = classes` dimensions.
fn blobs(n: usize, classes: usize, sep: f64, s: u64) -> Dataset {
    let mut rng = seed::rng(s);
    let records = (0..n)
        .map(|i| {
            let y = i % classes;
            let x =
                (0..classes).map(|j| if j == y { sep } else { 0.0 } + rng.sample::<f64, _>(StandardNormal)).collect();
            Record::labeled(x, y)
        })
        .collect();
    Dataset::new(records).unwrap()
}

fn full_batch(n: usize) -> TrainConfig {
    TrainConfig { lr: 0.1, momentum: 0.9, weight_decay: 1e-3, batch_size: n, epochs: 30, seed: 5, ..Default::default() }
}

fn max_abs_diff(a: &ModelParams, b: &ModelParams) -> f64 {
    a.flatten().iter().zip(b.flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn integer_weights_match_replication() {
    let data = blobs(120, 3, 1.0, 1);
    // Counts in {0, 1, 2} with mean exactly 1.
    let counts: Vec<usize> = (0..120).map(|i| [0, 1, 2][i % 3]).collect();
    let w = WeightVector::new(counts.iter().map(|&c| c as f64).collect()).unwrap();
    let copies = data.replicate(&counts).unwrap();
    assert_eq!(copies.len(), data.len());
    for kind in [ModelKind::Linear, ModelKind::Mlp] {
        let cfg = full_batch(data.len());
        let (a, la) = fit(&data, &w, kind, &cfg).unwrap();
        let (b, lb) = fit(&copies, &WeightVector::ones(copies.len()), kind, &cfg).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-10, "{kind:?}");
        for (x, y) in la.epochs.iter().zip(&lb.epochs) {
            assert!((x.objective - y.objective).abs() < 1e-10);
        }
    }
}

#[test]
fn small_steps_never_increase_the_objective() {
    let data = blobs(300, 4, 0.5, 2);
    let cfg = TrainConfig { lr: 1e-2, momentum: 0.0, epochs: 50, ..full_batch(300) };
    let w = WeightVector::new((0..300).map(|i| 0.5 + (i % 4) as f64 * 0.5).collect()).unwrap();
    let (_, log) = fit(&data, &w, ModelKind::Linear, &cfg).unwrap();
    for pair in log.epochs.windows(2) {
        assert!(pair[1].objective <= pair[0].objective + 1e-12, "{pair:?}");
    }
    assert!(log.epochs.last().unwrap().objective < log.epochs[0].objective);
}

#[test]
fn separable_blobs_are_learned() {
    let data = blobs(600, 3, 6.0, 3);
    let cfg = TrainConfig { batch_size: 50, epochs: 10, top_k: 2, ..full_batch(600) };
    for kind in [ModelKind::Linear, ModelKind::Mlp] {
        let (_, log) = fit(&data, &WeightVector::ones(600), kind, &cfg).unwrap();
        let last = log.epochs.last().unwrap();
        assert!(last.miss_rate < 0.02, "{kind:?}: {}", last.miss_rate);
        assert!(last.top_k_error <= last.miss_rate);
        assert!(last.objective < 0.5 * log.epochs[0].objective);
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = blobs(200, 3, 1.0, 4);
    let w = WeightVector::ones(200);
    let cfg = TrainConfig { batch_size: 32, epochs: 3, ..full_batch(200) };
    let a = fit(&data, &w, ModelKind::Mlp, &cfg).unwrap();
    let b = fit(&data, &w, ModelKind::Mlp, &cfg).unwrap();
    assert_eq!(a, b);
    let c = fit(&data, &w, ModelKind::Mlp, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn zero_weights_remove_records() {
    let data = blobs(90, 3, 1.0, 7);
    let keep: Vec<usize> = (0..90).filter(|i| i % 3 != 0).collect();
    let w = WeightVector::new((0..90).map(|i| if i % 3 == 0 { 0.0 } else { 1.5 }).collect()).unwrap();
    let params = init_params(ModelKind::Linear, 3, 3, &TrainConfig { init_std: 0.5, ..Default::default() }).unwrap();
    let cfg = TrainConfig { weight_decay: 0.0, ..Default::default() };
    let full = weighted_objective(&params, &data, &w, &cfg).unwrap();
    let sub = data.subset(&keep).unwrap();
    let part = weighted_objective(&params, &sub, &WeightVector::ones(60), &cfg).unwrap();
    // (1/90) Σ 1.5 ℓ over 60 kept records equals their plain mean.
    assert!((full - part).abs() < 1e-12);
}

#[test]
fn divergence_is_a_numeric_error() {
    let data = blobs(100, 2, 50.0, 8);
    let cfg = TrainConfig { lr: 1e300, momentum: 0.0, weight_decay: 1.0, epochs: 5, ..full_batch(100) };
    assert!(matches!(fit(&data, &WeightVector::ones(100), ModelKind::Linear, &cfg), Err(Error::Numeric(_))));
    let bad = TrainConfig { momentum: 1.0, ..cfg };
    assert!(matches!(fit(&data, &WeightVector::ones(100), ModelKind::Linear, &bad), Err(Error::Validation(_))));
}

#[test]
fn labels_are_required() {
    let unlabeled = Dataset::new(vec![Record::new(vec![0.0, 1.0])]).unwrap();
    assert!(fit(&unlabeled, &WeightVector::ones(1), ModelKind::Linear, &TrainConfig::default()).is_err());
}
