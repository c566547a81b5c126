//! Evaluates every bound at a few sample sizes, then checks the class-shift
//! deviation bound empirically.

use werm::analytic::AnalyticModel;
use werm::bounds::{
    coverage_check, deviation_bound, evaluate_bound, BoundInputs, BoundKind, CoverageConfig, CoverageSetting,
    DeviationKind,
};

fn main() -> werm::Result<()> {
    for n in [1_000, 10_000, 100_000] {
        let inputs = BoundInputs {
            epsilon: Some(0.1),
            p: Some(0.3),
            k: Some(5),
            max_pk: Some(0.4),
            phi_sup: Some(2.0),
            rademacher: 1.0 / (n as f64).sqrt(),
            ..BoundInputs::new(n, 0.05)
        };
        println!("n = {n}");
        for kind in [BoundKind::Lemma1, BoundKind::Corollary1, BoundKind::Theorem1, BoundKind::Theorem2] {
            let b = evaluate_bound(kind, &inputs)?;
            let terms: Vec<String> = b.terms.iter().map(|t| format!("{}={:.4}", t.name, t.value)).collect();
            println!("  {:<10} {:>9.4} valid={:<5} {}", format!("{kind:?}"), b.value, b.valid, terms.join(" "));
        }
        for kind in [DeviationKind::Approx1, DeviationKind::Approx2, DeviationKind::Approx3] {
            let b = deviation_bound(kind, &inputs)?;
            println!("  {:<10} {:>9.4} valid={}", format!("{kind:?}"), b.value, b.valid);
        }
    }

    let setting = CoverageSetting::ClassShift { model: AnalyticModel::new(1.0, 1.0, 0.3)?, p_train: 0.6 };
    let r = coverage_check(&setting, &CoverageConfig::new(2000, 0.05, 0.3, 500, 1))?;
    println!(
        "coverage {:.3} over {} draws: bound {:.4}, worst deviation {:.4}, mean {:.4}",
        r.coverage, r.reps, r.bound.value, r.max_deviation, r.mean_deviation
    );
    Ok(())
}
