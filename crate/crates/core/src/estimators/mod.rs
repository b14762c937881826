//! Transport estimators of potential outcome means ψ(a) = E[Y^a | R = 0]
//! and of their contrasts in the target population.
//!
//! All estimators take a validated [`ObservationTable`] and a fitted
//! [`NuisanceBundle`]. Only covariates are read from target rows
//! (trial id 0); treatment and outcome are read from trial rows.
//!
//! The weighting estimator is the non-normalized form: weights are not
//! rescaled to sum to the target sample size. With that choice the augmented
//! estimator reduces exactly to the weighting estimator when ĝ_a ≡ 0 and to
//! the g-formula when p̂ ≡ 1.

mod bundle;
pub(crate) mod report;

use serde::{Deserialize, Serialize};

pub use bundle::{
    fit_bundle, ModelSpec, NuisanceBundle, OutcomeSource, ParticipationSource, PerTrialSpec, TreatmentSource,
    TreatmentSpec,
};
pub use report::{estimate, ArmReport, BootstrapInfo, ContrastReport, EstimateReport, Interval};

use crate::data::{ObservationTable, TreatmentLevel};
use crate::error::{Error, Result};

/// Probabilities within this distance of 0 or 1 are positivity violations.
pub const POSITIVITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Augmented,
    #[serde(rename = "gformula")]
    GFormula,
    Weighting,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Augmented, EstimatorKind::GFormula, EstimatorKind::Weighting];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Augmented => "augmented",
            EstimatorKind::GFormula => "gformula",
            EstimatorKind::Weighting => "weighting",
        }
    }

    /// Short column label used in simulation tables.
    pub fn short(self) -> &'static str {
        match self {
            EstimatorKind::Augmented => "aug",
            EstimatorKind::GFormula => "g",
            EstimatorKind::Weighting => "w",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "augmented" | "aug" => Ok(EstimatorKind::Augmented),
            "gformula" | "g" => Ok(EstimatorKind::GFormula),
            "weighting" | "w" => Ok(EstimatorKind::Weighting),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected augmented, gformula or weighting)"
            ))),
        }
    }
}

fn check_probability(row: usize, quantity: &'static str, value: f64, upper_exempt: bool) -> Result<()> {
    let bad_low = !(value > POSITIVITY_EPS);
    let bad_high = !upper_exempt && !(value < 1.0 - POSITIVITY_EPS);
    if bad_low || bad_high {
        return Err(Error::Positivity { row, quantity, value });
    }
    Ok(())
}

/// Inverse-odds-of-participation times inverse treatment probability,
/// `(1 - p̂) / (p̂ ê_a)`, for a trial row in arm `a`.
fn transport_weight(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel, i: usize) -> Result<f64> {
    let x = table.x(i);
    let p = bundle.participation.predict(x);
    check_probability(i, "participation probability", p, bundle.participation.is_constant())?;
    let e = bundle
        .treatment
        .probability(a, x)
        .ok_or_else(|| Error::MissingModel(format!("no treatment probability for level {a}")))?;
    check_probability(i, "treatment probability", e, false)?;
    Ok((1.0 - p) / (p * e))
}

/// g-formula: average of ĝ_a over the target rows.
pub fn psi_g(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel) -> Result<f64> {
    let g = bundle.outcome_for(a)?;
    let mut sum = 0.0;
    let mut n0 = 0usize;
    for i in 0..table.len() {
        if !table.participates(i) {
            sum += g.predict(table.x(i));
            n0 += 1;
        }
    }
    if n0 == 0 {
        return Err(Error::Validation("no target rows".into()));
    }
    Ok(sum / n0 as f64)
}

/// Weighting estimator: `n0⁻¹ Σ I(R=1, A=a) (1-p̂)/(p̂ ê_a) Y`.
pub fn psi_w(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel) -> Result<f64> {
    bundle.check_treatment(a)?;
    let mut sum = 0.0;
    for i in 0..table.len() {
        if table.participates(i) && table.treatment(i) == Some(a) {
            let w = transport_weight(table, bundle, a, i)?;
            sum += w * table.outcome(i).unwrap();
        }
    }
    Ok(sum / table.n_target() as f64)
}

/// Augmented (doubly robust) estimator.
pub fn psi_aug(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel) -> Result<f64> {
    let g = bundle.outcome_for(a)?;
    bundle.check_treatment(a)?;
    let mut sum = 0.0;
    for i in 0..table.len() {
        if table.participates(i) {
            if table.treatment(i) == Some(a) {
                let w = transport_weight(table, bundle, a, i)?;
                sum += w * (table.outcome(i).unwrap() - g.predict(table.x(i)));
            }
        } else {
            sum += g.predict(table.x(i));
        }
    }
    // (n π̂)⁻¹ with π̂ = n0 / n
    Ok(sum / table.n_target() as f64)
}

pub fn psi(kind: EstimatorKind, table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel) -> Result<f64> {
    match kind {
        EstimatorKind::Augmented => psi_aug(table, bundle, a),
        EstimatorKind::GFormula => psi_g(table, bundle, a),
        EstimatorKind::Weighting => psi_w(table, bundle, a),
    }
}

/// An arm-level estimate tagged with the estimator that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmEstimate {
    pub kind: EstimatorKind,
    pub level: TreatmentLevel,
    pub value: f64,
}

/// δ̂(a, a′) = ψ̂(a) − ψ̂(a′); both arms must come from the same estimator.
pub fn contrast(arm: &ArmEstimate, reference: &ArmEstimate) -> Result<f64> {
    if arm.kind != reference.kind {
        return Err(Error::EstimatorMismatch(format!(
            "cannot contrast a {} estimate with a {} estimate",
            arm.kind, reference.kind
        )));
    }
    Ok(arm.value - reference.value)
}

/// Trial-stratified weighting estimator of the average treatment effect,
/// valid when only conditional treatment effects transport:
/// `n0⁻¹ Σ [I(R=1,A=a)/P̂(a|X,S) − I(R=1,A=a′)/P̂(a′|X,S)] (1-p̂)/p̂ Y`.
pub fn rho_w(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel, a_prime: TreatmentLevel) -> Result<f64> {
    if a == a_prime {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..table.len() {
        if !table.participates(i) {
            continue;
        }
        let arm = table.treatment(i).unwrap();
        if arm != a && arm != a_prime {
            continue;
        }
        let s = table.trial(i);
        let source = bundle
            .per_trial_treatment
            .get(&s)
            .ok_or_else(|| Error::MissingModel(format!("no per-trial treatment model for trial {s}")))?;
        let x = table.x(i);
        let prob = source
            .probability(arm, x)
            .ok_or_else(|| Error::MissingModel(format!("trial {s} has no probability for level {arm}")))?;
        check_probability(i, "per-trial treatment probability", prob, false)?;
        let p = bundle.participation.predict(x);
        check_probability(i, "participation probability", p, bundle.participation.is_constant())?;
        let sign = if arm == a { 1.0 } else { -1.0 };
        sum += sign / prob * (1.0 - p) / p * table.outcome(i).unwrap();
    }
    // Pr̂[R = 0]⁻¹ n⁻¹ = n0⁻¹
    Ok(sum / table.n_target() as f64)
}

/// Plug-in values of the nonparametric influence function of ψ(a), one per
/// row, evaluated at the augmented estimate.
pub fn influence_values(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel) -> Result<Vec<f64>> {
    let psi_hat = psi_aug(table, bundle, a)?;
    let g = bundle.outcome_for(a)?;
    let pi_hat = table.n_target() as f64 / table.len() as f64;
    (0..table.len())
        .map(|i| {
            let x = table.x(i);
            let v = if table.participates(i) {
                if table.treatment(i) == Some(a) {
                    transport_weight(table, bundle, a, i)? * (table.outcome(i).unwrap() - g.predict(x))
                } else {
                    0.0
                }
            } else {
                g.predict(x) - psi_hat
            };
            Ok(v / pi_hat)
        })
        .collect()
}

/// Variance estimate for ψ̂_aug(a): sample variance of the influence values over n.
pub fn if_variance(table: &ObservationTable, bundle: &NuisanceBundle, a: TreatmentLevel) -> Result<f64> {
    let values = influence_values(table, bundle, a)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(ss / (n - 1.0) / n)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::data::Observation;
    use crate::nuisance::{Design, LinearModel};

    fn constant_bundle(g: f64, p: f64, e: f64) -> NuisanceBundle {
        NuisanceBundle {
            outcome: [(0, OutcomeSource::Constant { value: g }), (1, OutcomeSource::Constant { value: g })].into(),
            participation: ParticipationSource::Constant { value: p },
            treatment: TreatmentSource::Known {
                probabilities: [(0, e), (1, 1.0 - e)].into(),
            },
            per_trial_treatment: BTreeMap::new(),
        }
    }

    fn small_table() -> ObservationTable {
        ObservationTable::from_rows(vec![
            Observation::trial_row(1, 1, 3.0, vec![0.0]),
            Observation::trial_row(1, 0, 1.0, vec![1.0]),
            Observation::trial_row(2, 1, 5.0, vec![1.0]),
            Observation::target_row(vec![0.0]),
            Observation::target_row(vec![0.0]),
            Observation::target_row(vec![1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn g_formula_of_constant_model() {
        let b = constant_bundle(4.5, 0.5, 0.5);
        assert_eq!(psi_g(&small_table(), &b, 1).unwrap(), 4.5);
    }

    #[test]
    fn g_formula_saturated_binary_covariate() {
        // ĝ(x=0) = 1, ĝ(x=1) = 3; target x = (0, 0, 1) -> 5/3
        let g = LinearModel {
            design: Design::main_effects(1),
            coefficients: vec![1.0, 2.0],
        };
        let b = constant_bundle(0.0, 0.5, 0.5).with_outcome(1, OutcomeSource::Linear { model: g });
        let v = psi_g(&small_table(), &b, 1).unwrap();
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weighting_is_not_self_normalized() {
        // p̂ = ê = 1/2, Y ≡ c, as many arm-a trial rows as target rows -> 2c
        let c = 1.75;
        let mut rows: Vec<Observation> = (0..4).map(|_| Observation::trial_row(1, 1, c, vec![0.0])).collect();
        rows.extend((0..4).map(|_| Observation::trial_row(1, 0, 9.0, vec![0.0])));
        rows.extend((0..4).map(|_| Observation::target_row(vec![0.0])));
        let t = ObservationTable::from_rows(rows).unwrap();
        let v = psi_w(&t, &constant_bundle(0.0, 0.5, 0.5), 1).unwrap();
        assert!((v - 2.0 * c).abs() < 1e-15);
    }

    #[test]
    fn weighting_with_empty_arm_is_zero() {
        let t = small_table();
        let mut b = constant_bundle(0.0, 0.5, 0.5);
        b.treatment = TreatmentSource::Known {
            probabilities: [(0, 0.5), (1, 0.5), (7, 0.5)].into(),
        };
        assert_eq!(psi_w(&t, &b, 7).unwrap(), 0.0);
    }

    #[test]
    fn augmented_three_row_hand_example() {
        // row1: R=1, A=a, Y=2, p̂=0.5, ê=0.5, ĝ=1; row2: R=0, ĝ=1.5; row3: R=0, ĝ=0.5
        let t = ObservationTable::from_rows(vec![
            Observation::trial_row(1, 1, 2.0, vec![1.0]),
            Observation::trial_row(1, 0, 0.0, vec![1.0]),
            Observation::target_row(vec![1.5]),
            Observation::target_row(vec![0.5]),
        ])
        .unwrap();
        // ĝ(x) = x reproduces 1, 1.5, 0.5
        let g = LinearModel {
            design: Design::main_effects(1),
            coefficients: vec![0.0, 1.0],
        };
        let b = constant_bundle(0.0, 0.5, 0.5).with_outcome(1, OutcomeSource::Linear { model: g });
        let v = psi_aug(&t, &b, 1).unwrap();
        assert!((v - 2.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn augmented_collapses() {
        let t = small_table();
        let b = constant_bundle(0.0, 0.3, 0.4);
        assert_eq!(psi_aug(&t, &b, 1).unwrap(), psi_w(&t, &b, 1).unwrap());
        let b = constant_bundle(2.5, 1.0, 0.4);
        assert_eq!(psi_aug(&t, &b, 1).unwrap(), psi_g(&t, &b, 1).unwrap());
    }

    #[test]
    fn positivity_violation_reports_row() {
        let t = small_table();
        let b = constant_bundle(0.0, 0.5, 1.0);
        match psi_w(&t, &b, 0) {
            Err(Error::Positivity { row, quantity, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(quantity, "treatment probability");
            }
            other => panic!("unexpected {other:?}"),
        }
        let b = constant_bundle(0.0, 0.0, 0.5);
        assert!(matches!(psi_aug(&t, &b, 1), Err(Error::Positivity { row: 0, .. })));
    }

    #[test]
    fn missing_outcome_model() {
        let t = small_table();
        let mut b = constant_bundle(0.0, 0.5, 0.5);
        b.outcome.remove(&1);
        assert!(matches!(psi_g(&t, &b, 1), Err(Error::MissingModel(_))));
    }

    #[test]
    fn contrast_rules() {
        let one = ArmEstimate { kind: EstimatorKind::Augmented, level: 1, value: 2.0 };
        let zero = ArmEstimate { kind: EstimatorKind::Augmented, level: 0, value: 5.0 };
        assert_eq!(contrast(&one, &zero).unwrap(), -3.0);
        assert_eq!(contrast(&one, &one).unwrap(), 0.0);
        let other = ArmEstimate { kind: EstimatorKind::Weighting, ..zero };
        assert!(matches!(contrast(&one, &other), Err(Error::EstimatorMismatch(_))));
    }

    #[test]
    fn rho_w_zero_outcomes() {
        let t = small_table().map_outcomes(|_| 0.0);
        let mut b = constant_bundle(0.0, 0.5, 0.5);
        for s in [1, 2] {
            b.per_trial_treatment.insert(s, TreatmentSource::Known { probabilities: [(0, 0.5), (1, 0.5)].into() });
        }
        assert_eq!(rho_w(&t, &b, 1, 0).unwrap(), 0.0);
        b.per_trial_treatment.remove(&2);
        assert!(matches!(rho_w(&small_table(), &b, 1, 0), Err(Error::MissingModel(_))));
    }

    #[test]
    fn identical_influence_values_have_zero_variance() {
        // every row contributes the same influence value when ĝ equals ψ̂ on
        // target rows and trial residuals are zero
        let t = ObservationTable::from_rows(vec![
            Observation::trial_row(1, 1, 2.0, vec![0.0]),
            Observation::trial_row(1, 0, 2.0, vec![0.0]),
            Observation::target_row(vec![0.0]),
        ])
        .unwrap();
        let b = constant_bundle(2.0, 0.5, 0.5);
        assert_eq!(if_variance(&t, &b, 1).unwrap(), 0.0);
    }
}
