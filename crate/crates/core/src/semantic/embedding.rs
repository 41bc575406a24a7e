use serde::{Deserialize, Serialize};

use super::SemanticError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl Embedding {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Self {
        Embedding { values, model_id: model_id.into() }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Embedding {
        Embedding { values: self.values.iter().map(|v| v * factor).collect(), model_id: self.model_id.clone() }
    }
}

/// `(a·b) / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, SemanticError> {
    if a.values.len() != b.values.len() {
        return Err(SemanticError::DimensionMismatch { left: a.values.len(), right: b.values.len() });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(SemanticError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
