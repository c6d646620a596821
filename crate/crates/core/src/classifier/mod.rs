//! Image classification: preprocessing into fixed-size tensors, a pluggable
//! [`Model`] interface, the nearest-centroid baseline, dataset splitting and
//! the confusion-matrix evaluation harness.

mod artifact;
mod baseline;
mod dataset;
mod eval;
mod preprocess;
mod split;

use std::io;

use serde::{Deserialize, Serialize};

use crate::types::Category;

pub use artifact::{load_model, InputShape, ModelArtifact, TrainingConfig, BASELINE_KIND};
pub use baseline::{train_baseline, CentroidModel, CentroidTrainer, DEFAULT_BETA};
pub use dataset::{load_dataset_dir, media_type_of};
pub use eval::{evaluate_model, evaluate_predictions, EvaluationReport, PredictionFile};
pub use preprocess::{preprocess, preprocess_image};
pub use split::{split_dataset, test_count, LabeledItem, Split};

pub const INPUT_SIZE: usize = 224;
pub const INPUT_CHANNELS: usize = 3;
pub const NUM_CLASSES: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("class {0} has no items")]
    EmptyClass(Category),
    #[error("no prediction for item {0}")]
    MissingPrediction(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("malformed prediction file: {0}")]
    MalformedPredictionFile(String),
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("unsupported model: {0}")]
    UnsupportedModelKind(String),
    #[error("corrupt model artifact: {0}")]
    CorruptArtifact(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;

/// A 224x224 RGB image, row-major with interleaved channels, every value in [0, 1].
#[derive(Clone, PartialEq)]
pub struct ImageTensor {
    data: Vec<f32>,
}

impl std::fmt::Debug for ImageTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageTensor")
            .field("mean_rgb", &self.mean_rgb())
            .finish()
    }
}

impl ImageTensor {
    pub const LEN: usize = INPUT_SIZE * INPUT_SIZE * INPUT_CHANNELS;

    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.len() != Self::LEN {
            return Err(ClassifierError::InvalidTensor(format!(
                "expected {} values, got {}",
                Self::LEN,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ClassifierError::InvalidTensor(format!(
                "value {bad} outside [0, 1]"
            )));
        }
        Ok(Self { data })
    }

    /// Tensor where every pixel has the same color.
    pub fn filled(rgb: [f32; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(Self::LEN).collect();
        Self::new(data)
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * INPUT_SIZE + col) * INPUT_CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Per-channel mean, summed in f64 in storage order.
    pub fn mean_rgb(&self) -> [f64; 3] {
        let mut sums = [0.0f64; 3];
        for px in self.data.chunks_exact(INPUT_CHANNELS) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += f64::from(*v);
            }
        }
        let n = (INPUT_SIZE * INPUT_SIZE) as f64;
        sums.map(|s| s / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Category,
    pub probabilities: [f64; NUM_CLASSES],
}

impl Prediction {
    pub fn confidence(&self) -> f64 {
        self.probabilities[self.label.model_index().unwrap_or(0)]
    }
}

/// A loaded or trained classifier. Implementations must be deterministic
/// and immutable once constructed.
pub trait Model: Send + Sync {
    fn kind(&self) -> &str;

    /// Output classes in the order of `predict`'s vector.
    fn labels(&self) -> &[Category];

    fn predict(&self, tensor: &ImageTensor) -> Result<Vec<f64>>;
}

/// Index of the largest value; the lowest index wins exact ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn classify(model: &dyn Model, tensor: &ImageTensor) -> Result<Prediction> {
    if model.labels() != Category::MODEL_CLASSES {
        return Err(ClassifierError::ModelUnavailable(format!(
            "model labels {:?} do not match the platform classes",
            model.labels()
        )));
    }
    let output = model.predict(tensor)?;
    let probabilities: [f64; NUM_CLASSES] = output.as_slice().try_into().map_err(|_| {
        ClassifierError::ModelUnavailable(format!(
            "model returned {} outputs, expected {NUM_CLASSES}",
            output.len()
        ))
    })?;
    let sum: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(ClassifierError::ModelUnavailable(format!(
            "model output {probabilities:?} is not a probability vector"
        )));
    }
    let label = Category::MODEL_CLASSES[argmax(&probabilities)];
    Ok(Prediction {
        label,
        probabilities,
    })
}
