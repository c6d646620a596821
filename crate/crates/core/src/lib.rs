//! Core of the CitySolution civic complaint platform.
//!
//! Citizens submit geotagged photos of city problems. A classifier labels
//! each photo, city employees work the complaint through
//! `Pending -> Processing -> Solved`, and anyone can read aggregate
//! statistics. All operations hang off [`Platform`].

pub mod accounts;
pub mod classifier;
pub mod clock;
pub mod complaints;
pub mod error;
pub mod geo;
pub mod i18n;
pub mod mail;
pub mod notifications;
pub mod platform;
pub mod provisioning;
pub mod stats;
pub mod storage;
pub mod testkit;
pub mod types;

pub use error::{Error, Result};
pub use platform::{Platform, PlatformBuilder, Settings};
pub use types::{Category, CategorySource, Language, Role, Status};
