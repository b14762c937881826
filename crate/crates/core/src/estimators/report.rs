use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{contrast, fit_bundle, if_variance, psi, ArmEstimate, EstimatorKind, ModelSpec};
use crate::data::{ObservationTable, TreatmentLevel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub level: TreatmentLevel,
    pub estimate: f64,
    /// Influence-function variance (augmented estimator only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub level: TreatmentLevel,
    pub reference: TreatmentLevel,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Interval>,
}

/// Resampling metadata embedded in a report when intervals were computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInfo {
    pub method: String,
    pub scheme: String,
    pub level: f64,
    pub replicates: usize,
    pub failures: usize,
    pub master_seed: u64,
}

/// Point estimates, contrasts and optional intervals from one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tool_version: String,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub n_target: usize,
    pub n_trial_rows: usize,
    /// π̂ = n0 / n
    pub pi_hat: f64,
    pub arms: Vec<ArmReport>,
    pub contrasts: Vec<ContrastReport>,
    pub nuisance_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapInfo>,
    /// Echo of the invocation that produced the report.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

impl EstimateReport {
    pub fn arm(&self, level: TreatmentLevel) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.level == level)
    }

    pub fn contrast(&self, level: TreatmentLevel, reference: TreatmentLevel) -> Option<&ContrastReport> {
        self.contrasts
            .iter()
            .find(|c| c.level == level && c.reference == reference)
    }

    /// Arm estimates followed by contrast estimates, the layout used for
    /// bootstrap replicates.
    pub fn statistics(&self) -> Vec<f64> {
        self.arms
            .iter()
            .map(|a| a.estimate)
            .chain(self.contrasts.iter().map(|c| c.estimate))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Fits the working models on `table` and computes the requested arms and
/// contrasts with one estimator. Contrast arms are estimated even when not
/// listed in `arms`.
pub fn estimate(
    table: &ObservationTable,
    spec: &ModelSpec,
    kind: EstimatorKind,
    arms: &[TreatmentLevel],
    contrasts: &[(TreatmentLevel, TreatmentLevel)],
) -> Result<EstimateReport> {
    estimate_inner(table, spec, kind, arms, contrasts, true)
}

/// Arm estimates then contrasts, without variances or digest; the bootstrap
/// statistic.
pub(crate) fn point_statistics(
    table: &ObservationTable,
    spec: &ModelSpec,
    kind: EstimatorKind,
    arms: &[TreatmentLevel],
    contrasts: &[(TreatmentLevel, TreatmentLevel)],
) -> Result<Vec<f64>> {
    Ok(estimate_inner(table, spec, kind, arms, contrasts, false)?.statistics())
}

fn estimate_inner(
    table: &ObservationTable,
    spec: &ModelSpec,
    kind: EstimatorKind,
    arms: &[TreatmentLevel],
    contrasts: &[(TreatmentLevel, TreatmentLevel)],
    full: bool,
) -> Result<EstimateReport> {
    for &a in arms.iter().chain(contrasts.iter().flat_map(|(a, b)| [a, b])) {
        if !table.treatment_levels().contains(&a) {
            return Err(Error::Validation(format!(
                "treatment level {a} does not occur among trial participants"
            )));
        }
    }
    let bundle = fit_bundle(table, spec)?;
    let mut cache: BTreeMap<TreatmentLevel, f64> = BTreeMap::new();
    let mut arm_value = |a: TreatmentLevel| -> Result<f64> {
        if let Some(&v) = cache.get(&a) {
            return Ok(v);
        }
        let v = psi(kind, table, &bundle, a)?;
        cache.insert(a, v);
        Ok(v)
    };

    let mut arm_reports = Vec::with_capacity(arms.len());
    for &a in arms {
        let estimate = arm_value(a)?;
        let variance = match kind {
            EstimatorKind::Augmented if full => Some(if_variance(table, &bundle, a)?),
            _ => None,
        };
        arm_reports.push(ArmReport {
            level: a,
            estimate,
            variance,
            ci: None,
        });
    }
    let mut contrast_reports = Vec::with_capacity(contrasts.len());
    for &(a, b) in contrasts {
        let ea = ArmEstimate { kind, level: a, value: arm_value(a)? };
        let eb = ArmEstimate { kind, level: b, value: arm_value(b)? };
        contrast_reports.push(ContrastReport {
            level: a,
            reference: b,
            estimate: contrast(&ea, &eb)?,
            ci: None,
        });
    }

    Ok(EstimateReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        estimator: kind,
        n: table.len(),
        n_target: table.n_target(),
        n_trial_rows: table.n_trial_rows(),
        pi_hat: table.n_target() as f64 / table.len() as f64,
        arms: arm_reports,
        contrasts: contrast_reports,
        nuisance_digest: if full { bundle.digest() } else { String::new() },
        bootstrap: None,
        provenance: BTreeMap::new(),
    })
}
