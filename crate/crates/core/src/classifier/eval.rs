use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::split::LabeledItem;
use super::{classify, ClassifierError, ImageTensor, Model, Result};
use crate::types::Category;

/// Confusion matrix (rows are true classes, columns predictions) and the
/// metrics derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub totals: Vec<u64>,
    pub total: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub f1: Vec<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvaluationReport {
    pub fn from_confusion(labels: Vec<String>, confusion: Vec<Vec<u64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 || confusion.len() != n || confusion.iter().any(|row| row.len() != n) {
            return Err(ClassifierError::LabelMismatch(format!(
                "confusion matrix must be {n}x{n}"
            )));
        }
        let totals: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
        let columns: Vec<u64> = (0..n)
            .map(|j| confusion.iter().map(|r| r[j]).sum())
            .collect();
        let total: u64 = totals.iter().sum();
        let correct: u64 = (0..n).map(|k| confusion[k][k]).sum();
        let recall: Vec<f64> = (0..n).map(|k| ratio(confusion[k][k], totals[k])).collect();
        let precision: Vec<f64> = (0..n).map(|k| ratio(confusion[k][k], columns[k])).collect();
        let f1 = recall
            .iter()
            .zip(&precision)
            .map(|(r, p)| {
                if r + p == 0.0 {
                    0.0
                } else {
                    2.0 * p * r / (p + r)
                }
            })
            .collect();
        Ok(Self {
            labels,
            accuracy: ratio(correct, total),
            confusion,
            totals,
            total,
            correct,
            recall,
            precision,
            f1,
        })
    }

    /// Builds the report from `(true_index, predicted_index)` pairs.
    pub fn from_pairs(
        labels: Vec<String>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut confusion = vec![vec![0u64; n]; n];
        for (truth, predicted) in pairs {
            if truth >= n || predicted >= n {
                return Err(ClassifierError::LabelMismatch(format!(
                    "class index ({truth}, {predicted}) outside {n} labels"
                )));
            }
            confusion[truth][predicted] += 1;
        }
        Self::from_confusion(labels, confusion)
    }

    pub fn from_categories(pairs: impl IntoIterator<Item = (Category, Category)>) -> Result<Self> {
        let indexed: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(t, p)| match (t.model_index(), p.model_index()) {
                (Some(t), Some(p)) => Ok((t, p)),
                _ => Err(ClassifierError::LabelMismatch(format!(
                    "{t}/{p} is not a model class pair"
                ))),
            })
            .collect::<Result<_>>()?;
        Self::from_pairs(model_labels(), indexed)
    }
}

fn model_labels() -> Vec<String> {
    Category::MODEL_CLASSES
        .iter()
        .map(|c| c.as_str().to_string())
        .collect()
}

pub fn evaluate_model<'a>(
    model: &dyn Model,
    test_set: impl IntoIterator<Item = (Category, &'a ImageTensor)>,
) -> Result<EvaluationReport> {
    let mut pairs = Vec::new();
    for (truth, tensor) in test_set {
        pairs.push((truth, classify(model, tensor)?.label));
    }
    EvaluationReport::from_categories(pairs)
}

/// Parsed `item_id<TAB>predicted_label` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionFile {
    entries: BTreeMap<String, Category>,
}

impl PredictionFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (id, label) = line.split_once('\t').ok_or_else(|| {
                ClassifierError::MalformedPredictionFile(format!("line {}: missing tab", n + 1))
            })?;
            let category = Category::from_label(label)
                .filter(|c| c.is_model_class())
                .ok_or_else(|| {
                    ClassifierError::LabelMismatch(format!(
                        "line {}: unknown label {label:?}",
                        n + 1
                    ))
                })?;
            if entries.insert(id.to_string(), category).is_some() {
                return Err(ClassifierError::MalformedPredictionFile(format!(
                    "line {}: duplicate item {id:?}",
                    n + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, id: impl Into<String>, label: Category) {
        self.entries.insert(id.into(), label);
    }

    pub fn get(&self, id: &str) -> Option<Category> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(id, c)| format!("{id}\t{c}\n"))
            .collect()
    }
}

pub fn evaluate_predictions<T>(
    predictions: &PredictionFile,
    test_set: &[LabeledItem<T>],
) -> Result<EvaluationReport> {
    let pairs = test_set
        .iter()
        .map(|item| {
            predictions
                .get(&item.id)
                .map(|p| (item.label, p))
                .ok_or_else(|| ClassifierError::MissingPrediction(item.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_categories(pairs)
}
