//! Occlusion-based feature attribution and evaluation for text classifiers.

pub mod attribution;
pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod gateway;
pub mod ingestion;
pub mod persist;
pub mod report;
pub mod stacking;
pub mod synthetic;
pub mod tokenizer;
pub mod types;

pub use error::{Error, Result};
