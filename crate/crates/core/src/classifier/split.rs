use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Result};
use crate::types::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledItem<T> {
    pub id: String,
    pub label: Category,
    pub data: T,
}

impl<T> LabeledItem<T> {
    pub fn new(id: impl Into<String>, label: Category, data: T) -> Self {
        Self {
            id: id.into(),
            label,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<LabeledItem<T>>,
    pub test: Vec<LabeledItem<T>>,
}

/// Number of held-out items for a class: `ceil((1 - train_fraction) * n)`.
pub fn test_count(class_size: usize, train_fraction: f64) -> usize {
    let raw = (1.0 - train_fraction) * class_size as f64;
    // absorbs representation error in fractions such as 0.85
    let count = (raw - 1e-9).ceil().max(0.0) as usize;
    count.min(class_size)
}

/// Per-class seeded shuffle, then the first `test_count` items of each
/// class go to the test set. Output keeps class order.
pub fn split_dataset<T>(
    items: Vec<LabeledItem<T>>,
    train_fraction: f64,
    seed: u64,
) -> Result<Split<T>> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(ClassifierError::InvalidConfig(format!(
            "train fraction {train_fraction} outside [0, 1]"
        )));
    }
    let mut by_class: Vec<Vec<LabeledItem<T>>> =
        Category::MODEL_CLASSES.iter().map(|_| Vec::new()).collect();
    for item in items {
        let index = item.label.model_index().ok_or_else(|| {
            ClassifierError::LabelMismatch(format!(
                "item {} carries non-model label {}",
                item.id, item.label
            ))
        })?;
        by_class[index].push(item);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(ClassifierError::EmptyClass(Category::MODEL_CLASSES[empty]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for mut class in by_class {
        class.shuffle(&mut rng);
        let held_out = test_count(class.len(), train_fraction);
        let train = class.split_off(held_out);
        split.test.extend(class);
        split.train.extend(train);
    }
    Ok(split)
}
