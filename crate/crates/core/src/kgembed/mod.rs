//! Knowledge-graph embeddings.
//!
//! The graph is flattened into two corpora: structural documents from uniform
//! random walks (alternating entity and relation tokens) and lexical documents
//! (one three-token sentence per triple). Their merge feeds a skip-gram model
//! with negative sampling; element rows of the resulting table combine into
//! composition embeddings by atom-fraction weighting.

mod composition;
mod corpus;
mod skipgram;
mod walks;

pub use composition::{composition_embedding, CompositionEmbedding};
pub use corpus::{merge_corpora, read_corpus, write_corpus, Corpus};
pub use skipgram::{
    cosine, read_embeddings, skipgram_loss_grad, train_skipgram, write_embeddings, EmbeddingTable,
    PairGradients, SkipGramConfig, SkipGramOutcome, SkipGramParams, Vocabulary,
};
pub use walks::{lexical_document, structural_document, WalkConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vocabulary is empty after min_count filtering")]
    EmptyVocabulary,
    #[error("no element vector for {0} in the embedding table")]
    UnknownElement(String),
    #[error("composition is empty or has zero total count")]
    EmptyComposition,
    #[error("embedding for {token} has dimension {found}, table dimension is {expected}")]
    DimensionMismatch {
        token: String,
        found: usize,
        expected: usize,
    },
    #[error("{0}")]
    Invalid(String),
}
