//! Closed-form threshold problem: optimal thresholds and the excess error of
//! training at the wrong positive rate, for the four standard shape pairs.
//!
//! cargo run --example analytic_excess [p] [out_dir]

use werm::analytic::{AnalyticModel, FIGURE_SHAPES};
use werm::io;

fn main() -> werm::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: f64 = args.next().map(|s| s.parse().expect("p must be a number")).unwrap_or(0.3);
    let out = args.next().unwrap_or_else(|| "out/analytic".into());
    std::fs::create_dir_all(&out).map_err(|e| werm::Error::Io { path: out.clone().into(), source: e })?;

    println!("p = {p}");
    println!("{:>5} {:>5} {:>9} {:>9}  excess at p' = 0.1 / 0.5 / 0.9", "alpha", "beta", "theta*", "R(theta*)");
    for (a, b) in FIGURE_SHAPES {
        let m = AnalyticModel::new(a, b, p)?;
        let t = m.optimal_threshold();
        let ex: Vec<String> = [0.1, 0.5, 0.9]
            .iter()
            .map(|&pt| m.excess_error(pt).map(|e| format!("{e:.5}")))
            .collect::<werm::Result<_>>()?;
        println!("{a:>5} {b:>5} {:>9.5} {:>9.5}  {}", t.theta, m.true_risk(t.theta)?, ex.join(" / "));
        io::write_xy(format!("{out}/excess_a{a}_b{b}.csv"), ["p_train", "excess"], &m.excess_curve(99)?)?;
    }
    println!("curves in {out}");
    Ok(())
}
