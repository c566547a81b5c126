//! Power-law strata bias: how p' moves away from uniform as γ shrinks, and
//! what a sequential subsample of a balanced pool looks like.

use werm::biasgen::{
    power_law_distribution, subsample_to_distribution, total_variation, BiasSpec, Permutation, SubsampleMethod,
};
use werm::data::{Dataset, Record};

fn main() -> werm::Result<()> {
    let k = 10;
    let uniform = vec![0.1; k];
    for gamma in [1.0, 0.8, 0.5, 0.2, 0.05] {
        let pp = power_law_distribution(&BiasSpec::new(gamma, uniform.clone()), k)?;
        let shown: Vec<String> = pp.iter().map(|v| format!("{v:.3}")).collect();
        println!("γ={gamma:<4} TV={:.3}  [{}]", total_variation(&pp, &uniform), shown.join(" "));
    }

    let pool = Dataset::new((0..k * 1000).map(|i| Record::new(vec![i as f64]).with_stratum(i % k)).collect())?;
    let spec = BiasSpec { permutation: Permutation::Random(7), ..BiasSpec::new(0.2, uniform) };
    let pp = power_law_distribution(&spec, k)?;
    let sample = subsample_to_distribution(&pool, &pp, 1, SubsampleMethod::Sequential)?;
    println!("σ = {:?}", spec.permutation.resolve(k)?);
    println!("subsample of {} records, strata counts {:?}", sample.len(), sample.stratum_counts()?);
    Ok(())
}
