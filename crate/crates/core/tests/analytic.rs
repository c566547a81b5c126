//! Properties of the closed-form model checked against independent oracles.

use rand::Rng;

use werm::analytic::{AnalyticModel, FIGURE_SHAPES};
use werm::experiment::{emit_results, run_experiment, ExperimentSpec};
use werm::seed;
use werm::weights::class_shift_ideal_weights;

#[test]
fn optimal_threshold_is_a_minimum() {
    let mut rng = seed::rng(1);
    for _ in 0..1000 {
        let m =
            AnalyticModel::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.01..0.99))
                .unwrap();
        let t = m.optimal_threshold().theta;
        let best = m.true_risk(t).unwrap();
        for s in [t - 1e-4, t + 1e-4] {
            if (0.0..=1.0).contains(&s) {
                assert!(m.true_risk(s).unwrap() >= best - 1e-12, "{m:?}");
            }
        }
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampler_matches_class_conditional_cdfs() {
    let n = 100_000;
    for (i, (a, b)) in [(0.0, 0.0), (0.5, 2.0), (1.0, 1.0), (3.0, 0.5)].into_iter().enumerate() {
        let m = AnalyticModel::new(a, b, 0.5).unwrap();
        let data = m.sample(2 * n, 0.5, 10 + i as u64).unwrap();
        let (pos, neg): (Vec<_>, Vec<_>) = data.records().iter().partition(|r| r.label == Some(1));
        let pos: Vec<f64> = pos.iter().map(|r| r.features[0]).collect();
        let neg: Vec<f64> = neg.iter().map(|r| r.features[0]).collect();
        let (np, nn) = (pos.len() as f64, neg.len() as f64);
        let dp = ks(pos, |x| x.powf(1.0 + a));
        let dn = ks(neg, |x| 1.0 - (1.0 - x).powf(1.0 + b));
        assert!(dp <= 1.63 / np.sqrt(), "F+ ({a},{b}): {dp}");
        assert!(dn <= 1.63 / nn.sqrt(), "F- ({a},{b}): {dn}");
    }
}

/// Minimizer over `0, 0.001, …, 1` of the `w`-weighted threshold risk, by
/// sorting and prefix sums.
fn grid_minimizer(xs: &[(f64, bool, f64)]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Risk at θ: weight of positives with x ≤ θ plus negatives with x > θ.
    let mut neg_above: f64 = sorted.iter().filter(|r| !r.1).map(|r| r.2).sum();
    let mut pos_below = 0.0;
    let mut j = 0;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1000 {
        let theta = i as f64 / 1000.0;
        while j < sorted.len() && sorted[j].0 <= theta {
            if sorted[j].1 {
                pos_below += sorted[j].2;
            } else {
                neg_above -= sorted[j].2;
            }
            j += 1;
        }
        let risk = pos_below + neg_above;
        if risk < best.0 {
            best = (risk, theta);
        }
    }
    best.1
}

#[test]
fn weighted_erm_finds_the_test_optimum() {
    let m = AnalyticModel::new(2.0, 2.0, 0.3).unwrap();
    let p_train = 0.7;
    let target = m.optimal_threshold().theta;
    let trained = m.with_rate(p_train).unwrap().optimal_threshold().theta;
    assert!((target - trained).abs() > 0.1);
    let hits = (0..20)
        .filter(|&r| {
            let data = m.sample_with(100_000, p_train, &mut seed::replicate_rng(20, r)).unwrap();
            let w = class_shift_ideal_weights(&data, m.p, p_train).unwrap();
            let rows: Vec<(f64, bool, f64)> =
                data.records().iter().zip(w.as_slice()).map(|(r, &w)| (r.features[0], r.label == Some(1), w)).collect();
            (grid_minimizer(&rows) - target).abs() <= 0.02
        })
        .count();
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn excess_grows_with_prior_mismatch() {
    for (a, b) in FIGURE_SHAPES.into_iter().skip(1) {
        for p in [0.2, 0.5, 0.8] {
            let m = AnalyticModel::new(a, b, p).unwrap();
            let up: Vec<f64> =
                (0..=20).map(|i| p + (0.99 - p) * i as f64 / 20.0).map(|pt| m.excess_error(pt).unwrap()).collect();
            let down: Vec<f64> =
                (0..=20).map(|i| p - (p - 0.01) * i as f64 / 20.0).map(|pt| m.excess_error(pt).unwrap()).collect();
            for side in [up, down] {
                assert_eq!(side[0], 0.0);
                assert!(side.windows(2).all(|w| w[1] >= w[0] - 1e-15), "({a},{b}) p={p}");
            }
        }
    }
}

#[test]
fn prior_shift_gap_has_closed_form() {
    let m = AnalyticModel::new(1.5, 0.5, 0.4).unwrap();
    let shifted = m.with_rate(0.46).unwrap();
    for i in 0..=1000 {
        let t = i as f64 / 1000.0;
        let gap = shifted.true_risk(t).unwrap() - m.true_risk(t).unwrap();
        let closed = 0.06 * (t.powf(2.5) - (1.0 - t).powf(1.5));
        assert!((gap - closed).abs() < 1e-14);
    }
}

#[test]
fn analytic_scenario_writes_all_four_excess_curves() {
    let spec = ExperimentSpec::from_json(
        r#"{"scenario": "analytic_excess", "analytic": {"p": 0.3, "points": 49}, "seed": 1}"#,
    )
    .unwrap();
    let bundle = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&bundle, dir.path()).unwrap();
    for (a, b) in FIGURE_SHAPES {
        let path = dir.path().join(format!("curves/excess_a{a}_b{b}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("p_train,excess"));
        let rows: Vec<(f64, f64)> = lines
            .map(|l| {
                let (x, y) = l.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 49);
        let m = AnalyticModel::new(a, b, 0.3).unwrap();
        for (pt, e) in rows {
            assert_eq!(e, m.excess_error(pt).unwrap());
        }
    }
    assert!(matches!(
        ExperimentSpec::from_json(r#"{"scenario": "analytic_excess"}"#).unwrap().validate(),
        Err(werm::Error::Validation(_))
    ));
}
