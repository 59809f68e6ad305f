//! Multimodal command fusion: recognition windows over voice and gesture
//! tokens, and the classifier that turns a closed window into a command.

pub mod dataset;
pub mod mlp;
pub mod train;
pub mod vocab;
pub mod window;

use std::path::Path;

pub use dataset::{read_jsonl, synthetic_dataset, write_jsonl, LabeledTokens};
pub use mlp::{Mlp, MlpError, COMMAND_NET};
pub use train::{evaluate, train, Evaluation, Sample, TrainingConfig, TrainingHistory};
pub use vocab::{Channel, Command};
pub use window::{ChannelEvent, ClosedWindow, Fuser, FusionOutput, InputTensor};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(#[from] MlpError),
}

pub fn load_model(path: &Path) -> Result<Mlp, ModelFileError> {
    let mlp: Mlp = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    mlp.validate()?;
    Ok(mlp)
}

pub fn save_model(mlp: &Mlp, path: &Path) -> Result<(), ModelFileError> {
    std::fs::write(path, serde_json::to_string(mlp)?)?;
    Ok(())
}

/// Maps a closed window to a command.
#[derive(Debug, Clone, Default)]
pub enum Classifier {
    /// Exact phrase lookup; used when no trained model is supplied.
    #[default]
    Lookup,
    Network(Mlp),
}

impl Classifier {
    pub fn classify(&self, window: &ClosedWindow) -> Option<Command> {
        match self {
            Classifier::Lookup => vocab::lookup(&window.tokens),
            Classifier::Network(m) => m.classify(&window.tensor.values).ok().and_then(Command::from_id),
        }
    }
}
