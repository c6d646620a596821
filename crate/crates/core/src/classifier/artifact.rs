use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::baseline::{CentroidModel, CentroidParams};
use super::{ClassifierError, Model, Result, INPUT_CHANNELS, INPUT_SIZE};
use crate::types::Category;

pub const BASELINE_KIND: &str = "baseline-centroid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub train_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 0.001,
            train_fraction: 0.85,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Default for InputShape {
    fn default() -> Self {
        Self {
            h: INPUT_SIZE,
            w: INPUT_SIZE,
            c: INPUT_CHANNELS,
        }
    }
}

/// Self-describing JSON model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub kind: String,
    pub labels: Vec<String>,
    pub input: InputShape,
    pub params: Value,
    #[serde(default)]
    pub training_config: TrainingConfig,
}

impl ModelArtifact {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ClassifierError::CorruptArtifact(e.to_string()))
    }

    pub fn into_model(self) -> Result<Arc<dyn Model>> {
        if self.labels.len() != Category::MODEL_CLASSES.len() {
            return Err(ClassifierError::UnsupportedModelKind(format!(
                "expected {} labels, artifact declares {}",
                Category::MODEL_CLASSES.len(),
                self.labels.len()
            )));
        }
        for (label, class) in self.labels.iter().zip(Category::MODEL_CLASSES) {
            if Category::from_label(label) != Some(class) {
                return Err(ClassifierError::UnsupportedModelKind(format!(
                    "label {label:?} where {class} was expected"
                )));
            }
        }
        if self.input != InputShape::default() {
            return Err(ClassifierError::UnsupportedModelKind(format!(
                "input shape {}x{}x{} is not 224x224x3",
                self.input.h, self.input.w, self.input.c
            )));
        }
        match self.kind.as_str() {
            BASELINE_KIND => {
                let params: CentroidParams = serde_json::from_value(self.params)
                    .map_err(|e| ClassifierError::CorruptArtifact(e.to_string()))?;
                if !params.beta.is_finite()
                    || params.centroids.iter().flatten().any(|v| !v.is_finite())
                {
                    return Err(ClassifierError::CorruptArtifact(
                        "non-finite model parameters".into(),
                    ));
                }
                Ok(Arc::new(CentroidModel::from_params(
                    params,
                    self.training_config,
                )))
            }
            other => Err(ClassifierError::UnsupportedModelKind(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }
}

pub fn load_model(artifact_path: &Path) -> Result<Arc<dyn Model>> {
    let bytes = std::fs::read(artifact_path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| ClassifierError::CorruptArtifact("artifact is not UTF-8".into()))?;
    ModelArtifact::parse(&text)?.into_model()
}
