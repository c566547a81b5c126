//! Kaplan-Meier product-limit estimation.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Right-continuous survival step function.
///
/// `times` holds every distinct observed time (events and censorings alike),
/// sorted; `survival[j]` is `S(times[j])`. Before the first time `S = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub n_at_entry: usize,
}

impl KmCurve {
    /// `S(t)`.
    pub fn at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// Left limit `S(t⁻)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s < t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }
}

/// Product-limit estimator `S(t) = Π_{tⱼ ≤ t} (1 − dⱼ/rⱼ)`.
///
/// At tied times events are processed before censorings: a record censored
/// at `tⱼ` still counts in the risk set `rⱼ`.
pub fn km_fit(times: &[f64], events: &[bool]) -> Result<KmCurve> {
    if times.is_empty() {
        return Err(Error::validation("Kaplan-Meier fit needs at least one observation"));
    }
    if times.len() != events.len() {
        return Err(Error::schema(format!("{} times but {} event flags", times.len(), events.len())));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::validation(format!("time {t} must be finite and nonnegative")));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut curve = KmCurve { times: Vec::new(), survival: Vec::new(), n_at_entry: times.len() };
    let mut at_risk = times.len();
    let mut s = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0;
        let mut leaving = 0;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                deaths += 1;
            }
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
        }
        curve.times.push(t);
        curve.survival.push(s);
        at_risk -= leaving;
    }
    Ok(curve)
}

/// Kaplan-Meier estimate of the censoring survival `S_C'`: the event flags
/// are flipped so that a censored record is the "event".
pub fn censoring_survival(data: &Dataset) -> Result<KmCurve> {
    let (times, events) = survival_columns(data)?;
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    km_fit(&times, &flipped)
}

pub(crate) fn survival_columns(data: &Dataset) -> Result<(Vec<f64>, Vec<bool>)> {
    data.records()
        .iter()
        .map(|r| r.time.zip(r.event))
        .collect::<Option<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
        .ok_or_else(|| Error::schema("dataset has no survival columns (t, e)"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_product_limit() {
        let km = km_fit(&[2.0, 3.0, 5.0, 7.0], &[true, true, false, true]).unwrap();
        let s: Vec<f64> = [2.0, 3.0, 5.0, 7.0].iter().map(|&t| km.at(t)).collect();
        assert_eq!(s, vec![0.75, 0.5, 0.5, 0.0]);
        assert_eq!(km.at(1.0), 1.0);
        assert_eq!(km.left_limit(3.0), 0.75);
        assert_eq!(km.left_limit(2.0), 1.0);
        assert_eq!(km.n_at_entry, 4);
    }

    #[test]
    fn no_events_means_flat_curve() {
        let km = km_fit(&[1.0, 4.0, 2.0], &[false, false, false]).unwrap();
        assert!(km.survival.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn single_event_drops_to_zero() {
        let km = km_fit(&[3.5], &[true]).unwrap();
        assert_eq!(km.at(3.5), 0.0);
        assert_eq!(km.left_limit(3.5), 1.0);
    }

    #[test]
    fn ties_process_events_first() {
        // Event and censoring at t = 2: the censored record stays at risk.
        let km = km_fit(&[2.0, 2.0, 5.0], &[true, false, true]).unwrap();
        assert!((km.at(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.at(5.0), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(km_fit(&[], &[]), Err(Error::Validation(_))));
        assert!(km_fit(&[1.0], &[true, false]).is_err());
        assert!(km_fit(&[-1.0], &[true]).is_err());
    }

    #[test]
    fn all_events_match_empirical_survival() {
        let times = [0.3, 1.2, 1.2, 2.5, 4.0, 4.0, 4.0, 7.5];
        let km = km_fit(&times, &[true; 8]).unwrap();
        for t in [0.0, 0.3, 1.0, 1.2, 3.0, 4.0, 7.5, 9.0] {
            let ecdf = times.iter().filter(|&&s| s <= t).count() as f64 / times.len() as f64;
            assert!((km.at(t) - (1.0 - ecdf)).abs() < 1e-12, "t = {t}");
        }
    }
}
