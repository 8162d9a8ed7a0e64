use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::CorpusKind;

pub const DEFAULT_LEARNING_RATE: f64 = 5e-5;
pub const DEFAULT_WARMUP_PROPORTION: f64 = 0.1;

/// Finetuning hyperparameters handed to an external model host. Carried as
/// metadata only; nothing here trains a transformer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterProfile {
    pub max_sequence_length: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_proportion: f64,
}

impl HyperparameterProfile {
    pub fn new(
        max_sequence_length: usize,
        batch_size: usize,
        epochs: usize,
        learning_rate: f64,
        warmup_proportion: f64,
    ) -> Result<Self> {
        let p = Self {
            max_sequence_length,
            batch_size,
            epochs,
            learning_rate,
            warmup_proportion,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sequence_length == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "sequence length, batch size and epochs must be positive",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.warmup_proportion) {
            return Err(Error::invalid(format!(
                "warmup proportion must lie in [0, 1], got {}",
                self.warmup_proportion
            )));
        }
        Ok(())
    }

    /// Per-corpus settings.
    pub fn for_corpus(kind: CorpusKind) -> Self {
        let (max_sequence_length, batch_size, epochs) = match kind {
            CorpusKind::BbcNews | CorpusKind::BbcSport => (256, 16, 4),
            CorpusKind::Phrasebank => (64, 16, 4),
            CorpusKind::Yelp => (256, 16, 3),
            CorpusKind::Semeval => (64, 64, 5),
        };
        Self {
            max_sequence_length,
            batch_size,
            epochs,
            learning_rate: DEFAULT_LEARNING_RATE,
            warmup_proportion: DEFAULT_WARMUP_PROPORTION,
        }
    }
}
