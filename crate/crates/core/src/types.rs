use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Complaint lifecycle status. Ordered `Pending < Processing < Solved`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Pending,
    Processing,
    Solved,
}

impl Status {
    pub const ALL: [Status; 3] = [Status::Pending, Status::Processing, Status::Solved];

    /// Forward-only transition table. Self transitions are rejected.
    pub fn can_transition_to(self, next: Status) -> bool {
        matches!(
            (self, next),
            (Status::Pending, Status::Processing)
                | (Status::Pending, Status::Solved)
                | (Status::Processing, Status::Solved)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pending => "Pending",
            Status::Processing => "Processing",
            Status::Solved => "Solved",
        }
    }

    pub fn label_key(self) -> &'static str {
        match self {
            Status::Pending => "status.pending",
            Status::Processing => "status.processing",
            Status::Solved => "status.solved",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Status::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

/// Complaint category. The first four variants are the classifier's output
/// classes, in model index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    DamagedRoad,
    Flood,
    Trash,
    HomelessPeople,
    FakeComplaint,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::DamagedRoad,
        Category::Flood,
        Category::Trash,
        Category::HomelessPeople,
        Category::FakeComplaint,
    ];

    pub const MODEL_CLASSES: [Category; 4] = [
        Category::DamagedRoad,
        Category::Flood,
        Category::Trash,
        Category::HomelessPeople,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::DamagedRoad => "DamagedRoad",
            Category::Flood => "Flood",
            Category::Trash => "Trash",
            Category::HomelessPeople => "HomelessPeople",
            Category::FakeComplaint => "FakeComplaint",
        }
    }

    pub fn label_key(self) -> &'static str {
        match self {
            Category::DamagedRoad => "category.damaged_road",
            Category::Flood => "category.flood",
            Category::Trash => "category.trash",
            Category::HomelessPeople => "category.homeless_people",
            Category::FakeComplaint => "category.fake_complaint",
        }
    }

    /// Index into the classifier output, `None` for `FakeComplaint`.
    pub fn model_index(self) -> Option<usize> {
        Category::MODEL_CLASSES.iter().position(|c| *c == self)
    }

    pub fn from_model_index(index: usize) -> Option<Category> {
        Category::MODEL_CLASSES.get(index).copied()
    }

    pub fn is_model_class(self) -> bool {
        self != Category::FakeComplaint
    }

    /// Lenient name matching for dataset directories and artifacts:
    /// "Damaged Road", "damaged_road" and "DamagedRoad" all match.
    pub fn from_label(label: &str) -> Option<Category> {
        let squash = |s: &str| {
            s.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        };
        let wanted = squash(label);
        Category::ALL
            .into_iter()
            .find(|c| squash(c.as_str()) == wanted)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::from_label(s).ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CategorySource {
    Model,
    Authority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Citizen,
    CityEmployee,
    CentralAdmin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Bn,
}

impl Language {
    pub fn tag(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Bn => "bn",
        }
    }

    /// Parses a bare tag or the first entry of an `Accept-Language` style list.
    pub fn parse_tag(value: &str) -> Option<Language> {
        value
            .split(',')
            .map(|part| part.split(';').next().unwrap_or("").trim())
            .filter_map(|tag| {
                let primary = tag.split(['-', '_']).next()?.to_ascii_lowercase();
                match primary.as_str() {
                    "en" => Some(Language::En),
                    "bn" => Some(Language::Bn),
                    _ => None,
                }
            })
            .next()
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Language::parse_tag(s).ok_or_else(|| format!("unsupported language {s:?}"))
    }
}
