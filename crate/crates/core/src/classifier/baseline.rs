use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifact::{InputShape, ModelArtifact, TrainingConfig, BASELINE_KIND};
use super::{ClassifierError, ImageTensor, Model, Result, NUM_CLASSES};
use crate::types::Category;

/// Softmax sharpness applied to negative squared distances.
pub const DEFAULT_BETA: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CentroidParams {
    pub beta: f64,
    pub centroids: [[f64; 3]; NUM_CLASSES],
    #[serde(default)]
    pub class_counts: [u64; NUM_CLASSES],
}

/// Nearest-centroid classifier over the mean RGB color of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    params: CentroidParams,
    config: TrainingConfig,
}

impl CentroidModel {
    pub fn new(centroids: [[f64; 3]; NUM_CLASSES], beta: f64, config: TrainingConfig) -> Self {
        Self {
            params: CentroidParams {
                beta,
                centroids,
                class_counts: [0; NUM_CLASSES],
            },
            config,
        }
    }

    pub(crate) fn from_params(params: CentroidParams, config: TrainingConfig) -> Self {
        Self { params, config }
    }

    pub fn centroids(&self) -> &[[f64; 3]; NUM_CLASSES] {
        &self.params.centroids
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn class_counts(&self) -> &[u64; NUM_CLASSES] {
        &self.params.class_counts
    }

    pub fn training_config(&self) -> &TrainingConfig {
        &self.config
    }

    /// Class probabilities for a mean color.
    pub fn probabilities_for(&self, mean_rgb: [f64; 3]) -> [f64; NUM_CLASSES] {
        let logits = self.params.centroids.map(|c| {
            let d2: f64 = c
                .iter()
                .zip(mean_rgb)
                .map(|(ci, mi)| (mi - ci) * (mi - ci))
                .sum();
            -self.params.beta * d2
        });
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps = logits.map(|l| (l - max).exp());
        let total: f64 = exps.iter().sum();
        exps.map(|e| e / total)
    }

    pub fn to_artifact(&self) -> ModelArtifact {
        ModelArtifact {
            kind: BASELINE_KIND.to_string(),
            labels: Category::MODEL_CLASSES
                .iter()
                .map(|c| c.as_str().to_string())
                .collect(),
            input: InputShape::default(),
            params: serde_json::to_value(&self.params).expect("centroid params serialize"),
            training_config: self.config.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_artifact())
            .map_err(|e| ClassifierError::CorruptArtifact(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

impl Model for CentroidModel {
    fn kind(&self) -> &str {
        BASELINE_KIND
    }

    fn labels(&self) -> &[Category] {
        &Category::MODEL_CLASSES
    }

    fn predict(&self, tensor: &ImageTensor) -> Result<Vec<f64>> {
        Ok(self.probabilities_for(tensor.mean_rgb()).to_vec())
    }
}

/// Streaming accumulator so training never needs every tensor in memory.
#[derive(Debug, Clone, Default)]
pub struct CentroidTrainer {
    sums: [[f64; 3]; NUM_CLASSES],
    counts: [u64; NUM_CLASSES],
}

impl CentroidTrainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: Category, tensor: &ImageTensor) -> Result<()> {
        let index = label.model_index().ok_or_else(|| {
            ClassifierError::LabelMismatch(format!("{label} is not a model class"))
        })?;
        for (s, m) in self.sums[index].iter_mut().zip(tensor.mean_rgb()) {
            *s += m;
        }
        self.counts[index] += 1;
        Ok(())
    }

    pub fn finish(self, config: TrainingConfig) -> Result<CentroidModel> {
        if let Some(empty) = self.counts.iter().position(|n| *n == 0) {
            return Err(ClassifierError::EmptyClass(Category::MODEL_CLASSES[empty]));
        }
        let mut centroids = [[0.0; 3]; NUM_CLASSES];
        for (k, centroid) in centroids.iter_mut().enumerate() {
            let n = self.counts[k] as f64;
            *centroid = self.sums[k].map(|s| s / n);
        }
        Ok(CentroidModel::from_params(
            CentroidParams {
                beta: DEFAULT_BETA,
                centroids,
                class_counts: self.counts,
            },
            config,
        ))
    }
}

/// Fits one mean-RGB centroid per class. Epochs, batch size and learning
/// rate are recorded in the artifact but not used by this model.
pub fn train_baseline<'a>(
    train_set: impl IntoIterator<Item = (Category, &'a ImageTensor)>,
    config: TrainingConfig,
) -> Result<CentroidModel> {
    let mut trainer = CentroidTrainer::new();
    for (label, tensor) in train_set {
        trainer.add(label, tensor)?;
    }
    trainer.finish(config)
}
