//! Nuisance regressions: outcome means, participation and treatment
//! probabilities.

mod design;
mod logistic;
mod multinomial;
mod newton;
mod ols;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use design::{Design, DesignMatrix};
pub use logistic::{fit_logistic, LogisticModel};
pub use multinomial::{fit_multinomial, fit_multinomial_with_categories, MultinomialLogisticModel};
pub use newton::{expit, logit, IrlsOptions};
pub use ols::{fit_ols, fit_ols_matrix, residual_sum_of_squares, LinearModel};


use crate::error::{Error, Result};

/// Version tag written into serialized model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Any fitted nuisance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Logistic(LogisticModel),
    Multinomial(MultinomialLogisticModel),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Value(f64),
    Probability(f64),
    Probabilities(Vec<f64>),
}

impl FittedModel {
    /// Linear predictor, expit of it, or softmax over categories.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        Ok(match self {
            FittedModel::Linear(m) => Prediction::Value(m.predict(x)?),
            FittedModel::Logistic(m) => Prediction::Probability(m.predict(x)?),
            FittedModel::Multinomial(m) => Prediction::Probabilities(m.predict(x)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            format_version: u32,
            model: &'a FittedModel,
        }
        serde_json::to_string_pretty(&Envelope {
            format_version: MODEL_FORMAT_VERSION,
            model: self,
        })
        .map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            format_version: u32,
            model: FittedModel,
        }
        let env: Envelope = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if env.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                env.format_version
            )));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_round_trip() {
        let m = FittedModel::Linear(LinearModel {
            design: Design::main_effects(1),
            coefficients: vec![1.0, 1.0],
        });
        let text = m.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert!(text.contains("\"kind\": \"linear\""));
        assert_eq!(FittedModel::from_json(&text).unwrap(), m);
        assert_eq!(m.predict(&[2.0]).unwrap(), Prediction::Value(3.0));
    }

    #[test]
    fn rejects_unknown_format_version() {
        let text = r#"{"format_version": 9, "model": {"kind": "linear", "design": {"n_covariates": 0, "terms": []}, "coefficients": [1.0]}}"#;
        assert!(FittedModel::from_json(text).is_err());
    }
}
