//! The neural causation coefficient: a set-input network
//! `psi(mean_j phi(x_j, y_j))` trained on synthetic cause-effect pairs.

mod composite;
mod grid;
mod model;
mod train;

use thiserror::Error;

use crate::nn::{CheckpointError, NnError};
use crate::synthgen::SynthError;

pub use composite::{composite_loss, per_orientation_loss};
pub use grid::{grid_search, GridConfig, GridOutcome, GridPoint, GridRow};
pub use model::{logistic, symmetric_score, NccModel, TrainingBatch};
pub use train::{
    read_history, train, train_cached, validate, validation_set, write_history, TrainConfig,
    TrainOutcome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NccError {
    #[error("sample has no points")]
    EmptySample,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(String),
}

/// Layer sizes and dropout of an [`NccModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub hidden: usize,
    pub embedding_layers: usize,
    pub classifier_layers: usize,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: 100,
            embedding_layers: 2,
            classifier_layers: 2,
            dropout: 0.25,
        }
    }
}

impl Architecture {
    pub fn new(hidden: usize, layers: usize, dropout: f64) -> Self {
        Self {
            hidden,
            embedding_layers: layers,
            classifier_layers: layers,
            dropout,
        }
    }

    pub fn validate(&self) -> Result<(), NccError> {
        if self.hidden == 0 || self.embedding_layers == 0 {
            return Err(NccError::InvalidArchitecture(format!(
                "hidden width and embedding depth must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NccError::InvalidArchitecture(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// How a batch turns into a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Cross-entropy of the symmetric composite `(NCC(S) + 1 - NCC(swap S)) / 2`.
    #[default]
    Composite,
    /// Cross-entropy of `NCC(S)` alone for every sample.
    PerOrientation,
}

impl std::str::FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "composite" => Ok(Objective::Composite),
            "per-orientation" => Ok(Objective::PerOrientation),
            other => Err(format!(
                "unknown objective `{other}` (composite | per-orientation)"
            )),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Composite => "composite",
            Objective::PerOrientation => "per-orientation",
        })
    }
}
