//! Positive-unlabeled data: a fraction q of the sample is labeled positive,
//! the rest is an unlabeled draw from the test mixture. The unbiased PU risk
//! (weights plus the constant offset) tracks the true risk.

use werm::analytic::AnalyticModel;
use werm::bounds::sample_pu;
use werm::risk::{weighted_empirical_risk, Hypothesis, LossSpec};
use werm::seed;
use werm::weights::{pu_risk_offset, pu_weights, pu_weights_eta, EtaEstimate, TargetPrior};

fn main() -> werm::Result<()> {
    let (p, q) = (0.4, 0.3);
    let m = AnalyticModel::new(2.0, 0.5, p)?;
    let data = sample_pu(&m, 50_000, q, &mut seed::rng(3))?;
    let prior = TargetPrior::rate(p)?;
    let w = pu_weights(&data, &prior)?;
    // With the true class posterior the unlabeled part needs no offset.
    let model = m;
    let w_eta = pu_weights_eta(&data, &prior, &EtaEstimate::new(move |x| model.eta(x[0])))?;

    println!("{:>6} {:>9} {:>9} {:>9}", "theta", "true", "pu", "pu+eta");
    for theta in [0.2, 0.4, 0.6, 0.8] {
        let h = Hypothesis::Threshold(theta);
        let r = weighted_empirical_risk(&data, &w, &LossSpec::THRESHOLD, &h)? + pu_risk_offset(p);
        let r_eta = weighted_empirical_risk(&data, &w_eta, &LossSpec::THRESHOLD, &h)?;
        println!("{theta:>6} {:>9.5} {r:>9.5} {r_eta:>9.5}", m.true_risk(theta)?);
    }
    Ok(())
}
