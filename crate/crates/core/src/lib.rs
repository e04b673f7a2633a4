//! Relative pairwise inner product distance (RPD) between embedding spaces.
//!
//! RPD compares two embedding matrices through their Gram matrices `E E^T`,
//! which makes it invariant to rotations of either space and comparable
//! across methods, dimensions and vocabularies. The crate also covers:
//!
//! - a Monte Carlo null model and z-test for dependence between spaces,
//! - SVD embeddings of PPMI and log-count co-occurrence signals,
//! - word similarity / analogy evaluation and an RPD-vs-performance study,
//! - a 2D layout of several spaces from their pairwise RPDs.
//!
//! ```
//! use rpd_core::{rpd, AlignedPair, EmbeddingMatrix};
//!
//! let a = EmbeddingMatrix::random_gaussian(500, 20, 1).unwrap();
//! let b = EmbeddingMatrix::random_gaussian(500, 20, 2).unwrap();
//! let report = rpd(&AlignedPair::new(a, b).unwrap(), true).unwrap();
//! assert!((report.rpd - (1.0 - 20.0 / 500.0)).abs() < 0.02);
//! ```

pub mod embedding;
pub mod error;
pub mod eval;
pub mod gram;
pub mod io;
pub mod layout;
pub mod null;
mod numeric;
pub mod pairwise;
pub mod rpd;
pub mod spectral;

pub use embedding::{align_vocabularies, common_vocabulary, AlignedPair, EmbeddingMatrix};
pub use error::{Error, Result};
pub use eval::{
    eval_analogy_3cosadd, eval_similarity, evaluate, perf_vs_rpd_study, spearman, AnalogyDataset,
    AnalogyQuestion, EvalResult, PerfStudy, SimilarityDataset, SimilarityPair, StudyEntry,
};
pub use gram::{cross_gram_inner, gram_frobenius_norm, naive_gram_oracle, per_word_gram_stats};
pub use io::{load_embeddings, save_embeddings, EmbeddingFormat};
pub use layout::{layout_from_distances, LayoutMap};
pub use null::{
    analytic_null_mean, monte_carlo_null, normality_diagnostics, z_test, NormalityDiagnostics,
    NullDistribution, Tail, ZTest,
};
pub use numeric::compensated_sum;
pub use pairwise::{rpd_pairwise_matrix, DistanceMatrix, VocabMode};
pub use spectral::{
    count_cooccurrences, log_count_matrix, pmi_matrix, svd_embedding, train_svd, truncated_svd,
    CooccurrenceCounts, CountOptions, Corpus, SignalKind, SignalMatrix, SvdConfig, TokenizerOptions,
    TrainedEmbedding, TruncatedSvd, WindowWeighting,
};
pub use rpd::{decompose_per_word, rpd, rpd_upper_bound_check, RpdReport, WordDivergence};
