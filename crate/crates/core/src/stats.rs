//! Complaint counts per city or nationwide, and chart series built from them.
//!
//! Fake complaints appear in category counts only: their status is frozen
//! once they are marked, so they would distort the status ratio.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::complaints::Complaint;
use crate::error::Result;
use crate::platform::Platform;
use crate::types::{Category, Status};

pub const NATIONWIDE: &str = "ALL";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusBreakdown {
    pub scope: String,
    pub pending: u64,
    pub processing: u64,
    pub solved: u64,
    pub total: u64,
}

impl StatusBreakdown {
    pub fn count(&self, status: Status) -> u64 {
        match status {
            Status::Pending => self.pending,
            Status::Processing => self.processing,
            Status::Solved => self.solved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub scope: String,
    /// Always holds all five categories.
    pub counts: BTreeMap<Category, u64>,
}

impl CategoryBreakdown {
    pub fn count(&self, category: Category) -> u64 {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Status,
    Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub label_key: String,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub scope: String,
    pub kind: SeriesKind,
    pub points: Vec<SeriesPoint>,
}

fn scope_name(city: Option<&str>) -> String {
    city.unwrap_or(NATIONWIDE).to_string()
}

fn in_scope(complaint: &Complaint, city: Option<&str>) -> bool {
    city.is_none_or(|c| c == complaint.city)
}

pub fn status_breakdown(complaints: &[Complaint], city: Option<&str>) -> StatusBreakdown {
    let mut b = StatusBreakdown {
        scope: scope_name(city),
        ..Default::default()
    };
    for c in complaints
        .iter()
        .filter(|c| in_scope(c, city) && !c.is_fake())
    {
        match c.status {
            Status::Pending => b.pending += 1,
            Status::Processing => b.processing += 1,
            Status::Solved => b.solved += 1,
        }
    }
    b.total = b.pending + b.processing + b.solved;
    b
}

pub fn category_breakdown(complaints: &[Complaint], city: Option<&str>) -> CategoryBreakdown {
    let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for c in complaints.iter().filter(|c| in_scope(c, city)) {
        *counts.entry(c.category).or_default() += 1;
    }
    CategoryBreakdown {
        scope: scope_name(city),
        counts,
    }
}

pub fn status_series(b: &StatusBreakdown) -> SeriesDocument {
    SeriesDocument {
        scope: b.scope.clone(),
        kind: SeriesKind::Status,
        points: Status::ALL
            .iter()
            .map(|&s| SeriesPoint {
                label_key: s.label_key().to_string(),
                value: b.count(s),
            })
            .collect(),
    }
}

pub fn category_series(b: &CategoryBreakdown) -> SeriesDocument {
    SeriesDocument {
        scope: b.scope.clone(),
        kind: SeriesKind::Category,
        points: Category::ALL
            .iter()
            .map(|&c| SeriesPoint {
                label_key: c.label_key().to_string(),
                value: b.count(c),
            })
            .collect(),
    }
}

impl Platform {
    /// Open to every caller; an unknown city yields zeros.
    pub fn status_breakdown(&self, city: Option<&str>) -> Result<StatusBreakdown> {
        Ok(status_breakdown(&self.all_complaints()?, city))
    }

    pub fn category_breakdown(&self, city: Option<&str>) -> Result<CategoryBreakdown> {
        Ok(category_breakdown(&self.all_complaints()?, city))
    }
}
