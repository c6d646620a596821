//! HTTP service and operator commands for CitySolution.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;

pub use api::{router, AppState};
pub use config::ApiConfig;
