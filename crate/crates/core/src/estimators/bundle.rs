//! Fitted nuisance functions consumed by the estimators, and the model
//! specification used to fit them from a table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ObservationTable, TreatmentLevel, TrialId};
use crate::error::{Error, Result};
use crate::nuisance::{
    fit_logistic, fit_multinomial_with_categories, fit_ols, Design, IrlsOptions, LinearModel, LogisticModel,
    MultinomialLogisticModel,
};

/// Source of the outcome regression ĝ_a(X) = E[Y | X, R = 1, A = a].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum OutcomeSource {
    Linear { model: LinearModel },
    Constant { value: f64 },
}

impl OutcomeSource {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            OutcomeSource::Linear { model } => model.predict_unchecked(x),
            OutcomeSource::Constant { value } => *value,
        }
    }
}

/// Source of the participation probability p̂(X) = Pr[R = 1 | X].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ParticipationSource {
    Logistic { model: LogisticModel },
    /// A fixed probability. `1.0` turns the augmented estimator into the
    /// g-formula and is exempt from the upper positivity bound.
    Constant { value: f64 },
}

impl ParticipationSource {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            ParticipationSource::Logistic { model } => model.predict_unchecked(x),
            ParticipationSource::Constant { value } => *value,
        }
    }

    pub(crate) fn is_constant(&self) -> bool {
        matches!(self, ParticipationSource::Constant { .. })
    }
}

/// Source of a treatment probability Pr[A = a | X, ...].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TreatmentSource {
    /// Two arms: `model` gives the probability of `levels[1]`.
    Logistic {
        model: LogisticModel,
        levels: [TreatmentLevel; 2],
    },
    Multinomial { model: MultinomialLogisticModel },
    /// Known randomization probabilities, free of X.
    Known { probabilities: BTreeMap<TreatmentLevel, f64> },
    /// Pooled probability as a mixture of known per-trial randomization
    /// probabilities over a fitted trial-allocation model Pr[S = s | X, R = 1].
    TrialMixture {
        allocation: MultinomialLogisticModel,
        per_trial: BTreeMap<TrialId, BTreeMap<TreatmentLevel, f64>>,
    },
}

impl TreatmentSource {
    pub fn probability(&self, a: TreatmentLevel, x: &[f64]) -> Option<f64> {
        match self {
            TreatmentSource::Logistic { model, levels } => {
                let p1 = model.predict_unchecked(x);
                if a == levels[1] {
                    Some(p1)
                } else if a == levels[0] {
                    Some(1.0 - p1)
                } else {
                    None
                }
            }
            TreatmentSource::Multinomial { model } => model.probability_of(x, a),
            TreatmentSource::Known { probabilities } => probabilities.get(&a).copied(),
            TreatmentSource::TrialMixture { allocation, per_trial } => {
                let shares = allocation.predict_unchecked(x);
                let mut total = 0.0;
                for (s, share) in allocation.categories.iter().zip(shares) {
                    total += share * per_trial.get(s)?.get(&a)?;
                }
                Some(total)
            }
        }
    }

    pub fn covers(&self, a: TreatmentLevel) -> bool {
        match self {
            TreatmentSource::Logistic { levels, .. } => levels.contains(&a),
            TreatmentSource::Multinomial { model } => model.categories.contains(&a),
            TreatmentSource::Known { probabilities } => probabilities.contains_key(&a),
            TreatmentSource::TrialMixture { allocation, per_trial } => allocation
                .categories
                .iter()
                .all(|s| per_trial.get(s).is_some_and(|m| m.contains_key(&a))),
        }
    }
}

/// Every fitted ingredient needed by the transport estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceBundle {
    pub outcome: BTreeMap<TreatmentLevel, OutcomeSource>,
    pub participation: ParticipationSource,
    pub treatment: TreatmentSource,
    /// Pr[A = a | X, S = s, R = 1] per trial; only the trial-stratified
    /// contrast estimator reads these.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_trial_treatment: BTreeMap<TrialId, TreatmentSource>,
}

impl NuisanceBundle {
    pub fn outcome_for(&self, a: TreatmentLevel) -> Result<&OutcomeSource> {
        self.outcome
            .get(&a)
            .ok_or_else(|| Error::MissingModel(format!("no outcome model for treatment level {a}")))
    }

    pub(crate) fn check_treatment(&self, a: TreatmentLevel) -> Result<()> {
        if self.treatment.covers(a) {
            Ok(())
        } else {
            Err(Error::MissingModel(format!(
                "no treatment probability source for level {a}"
            )))
        }
    }

    /// Short hex digest of the serialized bundle.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("bundle serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_outcome(mut self, a: TreatmentLevel, source: OutcomeSource) -> Self {
        self.outcome.insert(a, source);
        self
    }

    pub fn with_participation(mut self, source: ParticipationSource) -> Self {
        self.participation = source;
        self
    }
}

/// How the pooled treatment probability ê_a(X) is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreatmentSpec {
    /// Logistic (two arms) or multinomial (more) fit among trial rows.
    Fitted { design: Design },
    Known { probabilities: BTreeMap<TreatmentLevel, f64> },
    TrialMixture {
        allocation_design: Design,
        per_trial: BTreeMap<TrialId, BTreeMap<TreatmentLevel, f64>>,
    },
}

/// How the per-trial treatment probabilities are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerTrialSpec {
    None,
    /// Separate fit within each trial.
    Fitted { design: Design },
    Known {
        per_trial: BTreeMap<TrialId, BTreeMap<TreatmentLevel, f64>>,
    },
}

/// Working-model specification used to fit a [`NuisanceBundle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome_design: Design,
    pub participation_design: Design,
    pub treatment: TreatmentSpec,
    pub per_trial_treatment: PerTrialSpec,
    pub irls: IrlsOptions,
}

impl ModelSpec {
    /// Main effects of all `p` covariates in every working model.
    pub fn main_effects(p: usize) -> Self {
        ModelSpec {
            outcome_design: Design::main_effects(p),
            participation_design: Design::main_effects(p),
            treatment: TreatmentSpec::Fitted {
                design: Design::main_effects(p),
            },
            per_trial_treatment: PerTrialSpec::None,
            irls: IrlsOptions::default(),
        }
    }

    pub fn with_known_treatment(mut self, probabilities: BTreeMap<TreatmentLevel, f64>) -> Self {
        self.treatment = TreatmentSpec::Known { probabilities };
        self
    }
}

fn check_known(probabilities: &BTreeMap<TreatmentLevel, f64>) -> Result<()> {
    for (a, &p) in probabilities {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!(
                "known probability for level {a} must lie in (0, 1), got {p}"
            )));
        }
    }
    Ok(())
}

fn fit_treatment_source<'a>(
    design: &Design,
    xs: impl IntoIterator<Item = &'a [f64]>,
    labels: &[TreatmentLevel],
    levels: &[TreatmentLevel],
    irls: &IrlsOptions,
) -> Result<TreatmentSource> {
    if levels.len() == 2 {
        let y: Vec<bool> = labels.iter().map(|&a| a == levels[1]).collect();
        let model = fit_logistic(design, xs, &y, irls)?;
        Ok(TreatmentSource::Logistic {
            model,
            levels: [levels[0], levels[1]],
        })
    } else {
        let model = fit_multinomial_with_categories(design, xs, labels, levels, irls)?;
        Ok(TreatmentSource::Multinomial { model })
    }
}

/// Fits all working models: one outcome regression per treatment level among
/// trial rows of that arm, the participation model over all rows, and the
/// treatment model(s) among trial rows.
pub fn fit_bundle(table: &ObservationTable, spec: &ModelSpec) -> Result<NuisanceBundle> {
    let levels = table.treatment_levels();
    let trial_rows: Vec<usize> = (0..table.len()).filter(|&i| table.participates(i)).collect();

    let mut outcome = BTreeMap::new();
    for &a in levels {
        let rows: Vec<usize> = trial_rows
            .iter()
            .copied()
            .filter(|&i| table.treatment(i) == Some(a))
            .collect();
        let y: Vec<f64> = rows.iter().map(|&i| table.outcome(i).unwrap()).collect();
        let model = fit_ols(&spec.outcome_design, rows.iter().map(|&i| table.x(i)), &y)?;
        outcome.insert(a, OutcomeSource::Linear { model });
    }

    let r: Vec<bool> = (0..table.len()).map(|i| table.participates(i)).collect();
    let participation = ParticipationSource::Logistic {
        model: fit_logistic(
            &spec.participation_design,
            (0..table.len()).map(|i| table.x(i)),
            &r,
            &spec.irls,
        )?,
    };

    let trial_labels: Vec<TreatmentLevel> = trial_rows.iter().map(|&i| table.treatment(i).unwrap()).collect();
    let treatment = match &spec.treatment {
        TreatmentSpec::Fitted { design } => fit_treatment_source(
            design,
            trial_rows.iter().map(|&i| table.x(i)),
            &trial_labels,
            levels,
            &spec.irls,
        )?,
        TreatmentSpec::Known { probabilities } => {
            check_known(probabilities)?;
            TreatmentSource::Known {
                probabilities: probabilities.clone(),
            }
        }
        TreatmentSpec::TrialMixture {
            allocation_design,
            per_trial,
        } => {
            per_trial.values().try_for_each(check_known)?;
            let trials: Vec<TrialId> = trial_rows.iter().map(|&i| table.trial(i)).collect();
            let allocation = fit_multinomial_with_categories(
                allocation_design,
                trial_rows.iter().map(|&i| table.x(i)),
                &trials,
                table.trial_ids(),
                &spec.irls,
            )?;
            TreatmentSource::TrialMixture {
                allocation,
                per_trial: per_trial.clone(),
            }
        }
    };

    let mut per_trial_treatment = BTreeMap::new();
    match &spec.per_trial_treatment {
        PerTrialSpec::None => {}
        PerTrialSpec::Fitted { design } => {
            for &s in table.trial_ids() {
                let rows: Vec<usize> = trial_rows.iter().copied().filter(|&i| table.trial(i) == s).collect();
                let labels: Vec<TreatmentLevel> = rows.iter().map(|&i| table.treatment(i).unwrap()).collect();
                let mut present = labels.clone();
                present.sort_unstable();
                present.dedup();
                let source = fit_treatment_source(design, rows.iter().map(|&i| table.x(i)), &labels, &present, &spec.irls)
                    .map_err(|e| match e {
                        Error::DegenerateOutcome(m) => Error::DegenerateOutcome(format!("trial {s}: {m}")),
                        other => other,
                    })?;
                per_trial_treatment.insert(s, source);
            }
        }
        PerTrialSpec::Known { per_trial } => {
            for (&s, probabilities) in per_trial {
                check_known(probabilities)?;
                per_trial_treatment.insert(
                    s,
                    TreatmentSource::Known {
                        probabilities: probabilities.clone(),
                    },
                );
            }
        }
    }

    Ok(NuisanceBundle {
        outcome,
        participation,
        treatment,
        per_trial_treatment,
    })
}
