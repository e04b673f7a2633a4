//! SVD embeddings of PPMI and log-count co-occurrence signals.
//!
//! `corpus -> counts -> signal -> truncated SVD -> E = U_d S_d^{1/2}`.

pub mod corpus;
pub mod signal;
pub mod sparse;
pub mod svd;

pub use corpus::{
    count_cooccurrences, CooccurrenceCounts, CountOptions, Corpus, TokenizerOptions,
    WindowWeighting,
};
pub use signal::{log_count_matrix, pmi_matrix, signal_matrix, SignalKind, SignalMatrix};
pub use sparse::SparseMatrix;
pub use svd::{svd_embedding, truncated_svd, SvdConfig, SvdEmbedding, TruncatedSvd};

use crate::embedding::EmbeddingMatrix;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEmbedding {
    pub embedding: EmbeddingMatrix,
    pub signal: SignalKind,
    pub singular_values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Retained directions with a negative eigenvalue. When non-zero,
    /// `E E^T` is not the best rank-`d` approximation of the signal.
    pub negative_eigen_directions: usize,
    pub clamped: usize,
}

/// Factorizes the chosen signal of `counts` into a `dim`-dimensional embedding.
pub fn train_svd(
    counts: &CooccurrenceCounts,
    signal: SignalKind,
    dim: usize,
    config: &SvdConfig,
) -> Result<TrainedEmbedding> {
    let m = signal_matrix(counts, signal);
    let svd = truncated_svd(m.matrix(), dim, config)?;
    let emb = svd_embedding(m.vocab().to_vec(), &svd.u, &svd.singular_values, dim)?;
    Ok(TrainedEmbedding {
        embedding: emb.embedding,
        signal,
        negative_eigen_directions: svd.negative_eigen_directions(),
        singular_values: svd.singular_values,
        iterations: svd.iterations,
        converged: svd.converged,
        clamped: emb.clamped,
    })
}
