//! Training sample drawn at positive rate 0.7 while the test rate is 0.3.
//! Plug-in class weights recover the test risk of each threshold; the
//! unweighted empirical risk does not.

use werm::analytic::AnalyticModel;
use werm::risk::{empirical_risk, weighted_empirical_risk, Hypothesis, LossSpec};
use werm::weights::{class_shift_weights, TargetPrior};

fn main() -> werm::Result<()> {
    let m = AnalyticModel::new(1.0, 2.0, 0.3)?;
    let train = m.sample(20_000, 0.7, 1)?;
    let w = class_shift_weights(&train, &TargetPrior::rate(0.3)?)?;
    let (pos, neg) = train.binary_counts()?;
    println!(
        "n'_+ = {pos}, n'_- = {neg}, weights {:.4} / {:.4}",
        0.3 * 20_000.0 / pos as f64,
        0.7 * 20_000.0 / neg as f64
    );

    println!("{:>6} {:>9} {:>9} {:>9}", "theta", "true", "weighted", "naive");
    for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let h = Hypothesis::Threshold(theta);
        println!(
            "{theta:>6} {:>9.5} {:>9.5} {:>9.5}",
            m.true_risk(theta)?,
            weighted_empirical_risk(&train, &w, &LossSpec::THRESHOLD, &h)?,
            empirical_risk(&train, &LossSpec::THRESHOLD, &h)?
        );
    }
    Ok(())
}
