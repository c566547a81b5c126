//! Right-censored labels: fit the censoring Kaplan-Meier curve, weight each
//! observed event by 1/Ŝ_C(t⁻) and compare the weighted class shares with
//! the true ones.
//!
//! cargo run --example censored_ipcw [km.csv]

use rand::Rng;
use rand_distr::{Distribution, Exp};

use werm::data::{Dataset, Record};
use werm::io;
use werm::seed;
use werm::weights::{censoring_survival, ipcw_weights};

fn main() -> werm::Result<()> {
    let mut rng = seed::rng(5);
    let rates = [3.0, 0.5];
    let censor = Exp::new(1.0).unwrap();
    let records: Vec<Record> = (0..20_000)
        .map(|_| {
            let y = usize::from(rng.random::<f64>() < 0.5);
            let e: f64 = Exp::new(rates[y]).unwrap().sample(&mut rng);
            let c: f64 = censor.sample(&mut rng);
            Record::labeled(vec![y as f64], y).with_survival(e.min(c), e <= c)
        })
        .collect();
    let data = Dataset::new(records)?;

    let km = censoring_survival(&data)?;
    let w = ipcw_weights(&data, &km)?;
    for t in [0.25, 0.5, 1.0, 2.0] {
        println!("S_C({t}) = {:.4}  (exact {:.4})", km.at(t), (-t).exp());
    }
    let mut naive = [0.0; 2];
    let mut weighted = [0.0; 2];
    for (r, &wi) in data.records().iter().zip(w.as_slice()) {
        let y = r.label.unwrap();
        if r.event == Some(true) {
            naive[y] += 1.0;
        }
        weighted[y] += wi;
    }
    let share = |v: [f64; 2]| v[1] / (v[0] + v[1]);
    println!("positive share among events: {:.4}", share(naive));
    println!("ipcw-weighted share:         {:.4}  (true 0.5)", share(weighted));
    println!("mean weight {:.4}", w.mean());

    if let Some(path) = std::env::args().nth(1) {
        io::write_km(&path, &km)?;
        println!("wrote {path}");
    }
    Ok(())
}
