//! CBOW word embeddings with negative sampling.
//!
//! Training runs either sequentially (reproducible bit for bit from the
//! seed) or with lock-free parallel updates. Vectors are persisted in the
//! plain word-vector text format; the hyperparameters go to a TOML file
//! beside it (see [`params_path`]).

mod kernel;
mod train;
mod vectors;
mod vocab;

pub use kernel::{cbow_update, example_loss, DenseWeights, Example, Scratch, SharedWeights, Weights};
pub use train::{
    init_weights, train_cbow, train_with_vocab, CbowHyperparams, EmbeddingModel, LogEntry, TrainMode,
    TrainingLog, LOG_EVERY,
};
pub use vectors::{
    cosine, load_vectors, lookup, params_path, read_vectors, save_vectors, write_vectors, Resolution,
    WordVectors,
};
pub use vocab::{build_vocab, CorpusForms, NoiseSampler, SentenceSource, Vocabulary, NOISE_POWER};

use std::path::Path;

use crate::error::{Error, Result};

/// Writes the input vectors to `path` and the hyperparameters beside it.
pub fn save_model(path: &Path, model: &EmbeddingModel) -> Result<()> {
    save_vectors(path, &model.vectors)?;
    let params = toml::to_string(&model.params).map_err(|e| Error::Training(e.to_string()))?;
    let side = params_path(path);
    std::fs::write(&side, params).map_err(|e| Error::file(&side, e))
}

/// Reads the hyperparameters recorded by [`save_model`].
pub fn load_params(vectors: &Path) -> Result<CbowHyperparams> {
    let side = params_path(vectors);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::file(&side, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", side.display())))
}
