//! Generalization and deviation bounds as explicit formulas, Monte-Carlo
//! Rademacher averages over finite hypothesis grids, and empirical coverage
//! checks of the plug-in deviation bounds.
//!
//! Every bound is returned with its constituent addends and the sample-size
//! condition under which it holds.

mod coverage;
mod rademacher;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coverage::{coverage_check, sample_pu, CoverageConfig, CoverageResult, CoverageSetting, StratifiedAnalytic};
pub use rademacher::{rademacher_mc, RademacherEstimate};

/// Excess-risk bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Ideal weights known.
    Lemma1,
    /// Class shift with plug-in weights.
    Corollary1,
    /// Stratum shift with plug-in weights.
    Theorem1,
    /// Positive-unlabeled weights.
    Theorem2,
}

/// Uniform deviation between plug-in and ideal weighted risks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// Class shift.
    Approx1,
    /// Stratum shift.
    Approx2,
    /// Positive-unlabeled.
    Approx3,
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::validation(format!("unknown bound kind {s:?}")))
    }
}

impl std::str::FromStr for DeviationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::validation(format!("unknown deviation kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub delta: f64,
    /// Separation `ε`: the relevant training probabilities lie in `(ε, 1−ε)`.
    pub epsilon: Option<f64>,
    /// `L = sup ℓ`.
    pub l: f64,
    /// `‖Φ‖∞`.
    pub phi_sup: Option<f64>,
    pub p: Option<f64>,
    pub max_pk: Option<f64>,
    pub k: Option<usize>,
    /// Estimate of `E[R'_n]`.
    pub rademacher: f64,
    pub zeta: Option<f64>,
}

impl BoundInputs {
    pub fn new(n: usize, delta: f64) -> Self {
        BoundInputs {
            n,
            delta,
            epsilon: None,
            l: 1.0,
            phi_sup: None,
            p: None,
            max_pk: None,
            k: None,
            rademacher: 0.0,
            zeta: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::validation(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 0.5) {
                return Err(Error::validation(format!("epsilon = {e} must lie in (0, 1/2)")));
            }
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(Error::validation("L must be finite and >= 0"));
        }
        if !(self.rademacher >= 0.0 && self.rademacher.is_finite()) {
            return Err(Error::validation("rademacher must be finite and >= 0"));
        }
        Ok(())
    }

    fn need<T: Copy>(v: Option<T>, name: &str, kind: &str) -> Result<T> {
        v.ok_or_else(|| Error::validation(format!("{kind} needs {name}")))
    }

    fn epsilon_for(&self, kind: &str) -> Result<f64> {
        Self::need(self.epsilon, "epsilon", kind)
    }

    fn p_for(&self, kind: &str) -> Result<f64> {
        let p = Self::need(self.p, "p", kind)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::validation(format!("p = {p} must lie in (0, 1)")));
        }
        Ok(p)
    }

    fn k_for(&self, kind: &str) -> Result<f64> {
        let k = Self::need(self.k, "K", kind)?;
        if k == 0 {
            return Err(Error::validation("K must be at least 1"));
        }
        Ok(k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    /// `n ≥ required_n`.
    pub valid: bool,
    pub required_n: f64,
    pub terms: Vec<Term>,
}

impl BoundResult {
    fn from_terms(n: usize, required_n: f64, terms: &[(&str, f64)]) -> Self {
        BoundResult {
            value: terms.iter().map(|(_, v)| v).sum(),
            valid: n as f64 >= required_n.ceil(),
            required_n,
            terms: terms.iter().map(|&(name, value)| Term { name: name.to_string(), value }).collect(),
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// `√(log(2/δ) / (2n))`, the two-sided Hoeffding radius for a mean of
/// `[0, 1]` variables.
pub fn hoeffding_radius(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

pub fn evaluate_bound(kind: BoundKind, inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let delta = inputs.delta;
    let rad = inputs.rademacher;
    let l = inputs.l;
    let name = format!("{kind:?}");
    Ok(match kind {
        BoundKind::Lemma1 => {
            let phi = BoundInputs::need(inputs.phi_sup, "phi_sup", &name)?;
            BoundResult::from_terms(
                inputs.n,
                1.0,
                &[
                    ("complexity", 4.0 * phi * rad),
                    ("concentration", 2.0 * phi * l * (2.0 * (1.0 / delta).ln() / n).sqrt()),
                ],
            )
        }
        BoundKind::Corollary1 => {
            let eps = inputs.epsilon_for(&name)?;
            let p = inputs.p_for(&name)?;
            let c = 2.0 * p.max(1.0 - p) / eps;
            BoundResult::from_terms(
                inputs.n,
                2.0 * (4.0 / delta).ln() / (eps * eps),
                &[
                    ("complexity", c * 2.0 * rad),
                    ("concentration", c * (2.0 * (2.0 / delta).ln() / n).sqrt()),
                    ("plug_in", 4.0 / (eps * eps) * ((4.0 / delta).ln() / (2.0 * n)).sqrt()),
                ],
            )
        }
        BoundKind::Theorem1 => {
            let eps = inputs.epsilon_for(&name)?;
            let max_pk = BoundInputs::need(inputs.max_pk, "max_pk", &name)?;
            let k = inputs.k_for(&name)?;
            let c = 2.0 * max_pk / eps;
            BoundResult::from_terms(
                inputs.n,
                2.0 * (4.0 * k / delta).ln() / (eps * eps),
                &[
                    ("complexity", c * 2.0 * rad),
                    ("concentration", c * l * (2.0 * (2.0 / delta).ln() / n).sqrt()),
                    ("plug_in", 4.0 * l / (eps * eps) * ((4.0 * k / delta).ln() / (2.0 * n)).sqrt()),
                ],
            )
        }
        BoundKind::Theorem2 => {
            let eps = inputs.epsilon_for(&name)?;
            let p = inputs.p_for(&name)?;
            let c = 2.0 * (2.0 * p).max(1.0) / eps;
            BoundResult::from_terms(
                inputs.n,
                2.0 * (4.0 / delta).ln() / (eps * eps),
                &[
                    ("complexity", c * 2.0 * rad),
                    ("concentration", c * (2.0 * (2.0 / delta).ln() / n).sqrt()),
                    ("plug_in", 4.0 * (2.0 * p + 1.0) / (eps * eps) * ((4.0 / delta).ln() / (2.0 * n)).sqrt()),
                ],
            )
        }
    })
}

pub fn deviation_bound(kind: DeviationKind, inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let name = format!("{kind:?}");
    let eps = inputs.epsilon_for(&name)?;
    let n = inputs.n as f64;
    let delta = inputs.delta;
    let (log_term, scale) = match kind {
        DeviationKind::Approx1 => ((2.0 / delta).ln(), 2.0),
        DeviationKind::Approx2 => ((2.0 * inputs.k_for(&name)? / delta).ln(), 2.0 * inputs.l),
        DeviationKind::Approx3 => ((2.0 / delta).ln(), 2.0 * (2.0 * inputs.p_for(&name)? + 1.0)),
    };
    Ok(BoundResult::from_terms(
        inputs.n,
        2.0 * log_term / (eps * eps),
        &[("plug_in", scale / (eps * eps) * (log_term / (2.0 * n)).sqrt())],
    ))
}

/// `2ζ`: the change in any classifier's risk when the test positive rate is
/// only known up to `ζ`.
pub fn prior_sensitivity_bound(zeta: f64) -> Result<f64> {
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::validation(format!("zeta = {zeta} must be >= 0")));
    }
    Ok(2.0 * zeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(n: usize, delta: f64, eps: f64) -> BoundInputs {
        BoundInputs {
            epsilon: Some(eps),
            p: Some(0.5),
            max_pk: Some(0.4),
            k: Some(4),
            phi_sup: Some(2.0),
            rademacher: 0.02,
            ..BoundInputs::new(n, delta)
        }
    }

    const BOUNDS: [BoundKind; 4] = [BoundKind::Lemma1, BoundKind::Corollary1, BoundKind::Theorem1, BoundKind::Theorem2];
    const DEVIATIONS: [DeviationKind; 3] = [DeviationKind::Approx1, DeviationKind::Approx2, DeviationKind::Approx3];

    #[test]
    fn lemma1_spot_value() {
        let inp = BoundInputs { phi_sup: Some(1.0), ..BoundInputs::new(2, (-1.0f64).exp()) };
        let r = evaluate_bound(BoundKind::Lemma1, &inp).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.valid);
    }

    #[test]
    fn corollary1_spot_value() {
        // 5 (0.04 + √(2 log 40 / 1000)) + 100 √(log 80 / 2000)
        let r = evaluate_bound(BoundKind::Corollary1, &inputs(1000, 0.05, 0.2)).unwrap();
        assert!((r.value - 5.310_295_529_168_723).abs() < 1e-9, "{}", r.value);
        assert!((r.term("plug_in").unwrap() - 4.680_826_120_821_986).abs() < 1e-9);
        let sum: f64 = r.terms.iter().map(|t| t.value).sum();
        assert_eq!(sum, r.value);
    }

    #[test]
    fn approx1_spot_value() {
        let r = deviation_bound(DeviationKind::Approx1, &inputs(1000, 0.05, 0.2)).unwrap();
        assert!((r.value - 2.1473).abs() < 1e-3);
        assert!((r.required_n - 184.44).abs() < 0.01);
        assert!(r.valid);
        let small = deviation_bound(DeviationKind::Approx1, &inputs(184, 0.05, 0.2)).unwrap();
        assert!(!small.valid);
    }

    #[test]
    fn approx2_with_one_stratum_scales_approx1() {
        let mut inp = inputs(500, 0.1, 0.25);
        inp.k = Some(1);
        inp.l = 3.0;
        let a1 = deviation_bound(DeviationKind::Approx1, &inp).unwrap().value;
        let a2 = deviation_bound(DeviationKind::Approx2, &inp).unwrap().value;
        assert!((a2 - 3.0 * a1).abs() < 1e-12);
    }

    #[test]
    fn missing_fields_are_validation_errors() {
        let bare = BoundInputs::new(100, 0.1);
        for kind in BOUNDS {
            assert!(matches!(evaluate_bound(kind, &bare), Err(Error::Validation(_))), "{kind:?}");
        }
        for kind in DEVIATIONS {
            assert!(deviation_bound(kind, &bare).is_err());
        }
        assert!(deviation_bound(DeviationKind::Approx1, &BoundInputs { epsilon: Some(0.6), ..bare.clone() }).is_err());
    }

    #[test]
    fn bounds_vanish_with_n() {
        for kind in BOUNDS {
            let mut inp = inputs(1_000_000_000_000, 0.05, 0.2);
            inp.rademacher = 0.0;
            assert!(evaluate_bound(kind, &inp).unwrap().value < 1e-3, "{kind:?}");
        }
    }

    #[test]
    fn monotone_in_n_and_delta() {
        for kind in BOUNDS {
            let mut prev = f64::INFINITY;
            for n in [100, 400, 1600, 6400, 25600] {
                let v = evaluate_bound(kind, &inputs(n, 0.05, 0.2)).unwrap().value;
                assert!(v < prev, "{kind:?} n = {n}");
                prev = v;
            }
            let mut prev = 0.0;
            for delta in [0.5, 0.1, 0.01, 1e-4] {
                let v = evaluate_bound(kind, &inputs(1000, delta, 0.2)).unwrap().value;
                assert!(v > prev, "{kind:?} delta = {delta}");
                prev = v;
            }
        }
        for kind in DEVIATIONS {
            let mut prev = f64::INFINITY;
            for n in [100, 400, 1600] {
                let v = deviation_bound(kind, &inputs(n, 0.05, 0.2)).unwrap().value;
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn diverges_as_epsilon_vanishes() {
        for kind in [BoundKind::Corollary1, BoundKind::Theorem1, BoundKind::Theorem2] {
            let tight = evaluate_bound(kind, &inputs(1000, 0.05, 1e-3)).unwrap().value;
            let loose = evaluate_bound(kind, &inputs(1000, 0.05, 0.1)).unwrap().value;
            assert!(tight >= 10.0 * loose, "{kind:?}");
        }
        for kind in DEVIATIONS {
            let tight = deviation_bound(kind, &inputs(1000, 0.05, 1e-3)).unwrap().value;
            let loose = deviation_bound(kind, &inputs(1000, 0.05, 0.1)).unwrap().value;
            assert!(tight >= 10.0 * loose, "{kind:?}");
        }
    }

    #[test]
    fn quadrupling_n_halves_sqrt_terms() {
        for kind in DEVIATIONS {
            let a = deviation_bound(kind, &inputs(1000, 0.05, 0.2)).unwrap().value;
            let b = deviation_bound(kind, &inputs(4000, 0.05, 0.2)).unwrap().value;
            assert!((a / b - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_sensitivity() {
        assert_eq!(prior_sensitivity_bound(0.0).unwrap(), 0.0);
        assert!((prior_sensitivity_bound(0.05).unwrap() - 0.1).abs() < 1e-15);
        assert!(prior_sensitivity_bound(-1.0).is_err());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("theorem2".parse::<BoundKind>().unwrap(), BoundKind::Theorem2);
        assert_eq!("approx3".parse::<DeviationKind>().unwrap(), DeviationKind::Approx3);
        assert!("lemma9".parse::<BoundKind>().is_err());
    }
}
