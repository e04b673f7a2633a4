//! Signal matrices factorized by the SVD trainers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::corpus::CooccurrenceCounts;
use crate::spectral::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Positive PMI: `max(0, log(c_ij * total / (r_i * r_j)))`.
    Pmi,
    /// `log(1 + c_ij)`.
    LogCount,
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmi" | "ppmi" => Ok(SignalKind::Pmi),
            "logcount" | "log_count" | "lc" => Ok(SignalKind::LogCount),
            other => Err(Error::Precondition(format!("unknown signal {other:?}"))),
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalKind::Pmi => "pmi",
            SignalKind::LogCount => "logcount",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    kind: SignalKind,
    matrix: SparseMatrix,
    vocab: Vec<String>,
}

impl SignalMatrix {
    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn n(&self) -> usize {
        self.vocab.len()
    }
}

/// Positive PMI. Zero-count cells and cells with negative PMI are 0.
pub fn pmi_matrix(counts: &CooccurrenceCounts) -> SignalMatrix {
    let c = counts.counts();
    let rows = c.row_sums();
    let total = counts.total();
    let matrix = c.map_entries(|i, j, v| {
        let pmi = (v * total / (rows[i] * rows[j])).ln();
        pmi.max(0.0)
    });
    SignalMatrix {
        kind: SignalKind::Pmi,
        matrix,
        vocab: counts.vocab().to_vec(),
    }
}

pub fn log_count_matrix(counts: &CooccurrenceCounts) -> SignalMatrix {
    SignalMatrix {
        kind: SignalKind::LogCount,
        matrix: counts.counts().map_entries(|_, _, v| v.ln_1p()),
        vocab: counts.vocab().to_vec(),
    }
}

pub fn signal_matrix(counts: &CooccurrenceCounts, kind: SignalKind) -> SignalMatrix {
    match kind {
        SignalKind::Pmi => pmi_matrix(counts),
        SignalKind::LogCount => log_count_matrix(counts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::corpus::CountOptions;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts(vocab: &[&str], triplets: Vec<(usize, usize, f64)>) -> CooccurrenceCounts {
        let n = vocab.len();
        CooccurrenceCounts::new(
            vocab.iter().map(|w| w.to_string()).collect(),
            SparseMatrix::from_triplets(n, n, triplets).unwrap(),
            CountOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn two_word_pmi() {
        let c = counts(&["a", "b"], vec![(0, 1, 1.0), (1, 0, 1.0)]);
        let p = pmi_matrix(&c);
        assert_eq!(p.matrix().get(0, 1), 2f64.ln());
        assert_eq!(p.matrix().get(0, 0), 0.0);
        assert!(p.matrix().is_symmetric());
    }

    #[test]
    fn log_count_values() {
        let e1 = std::f64::consts::E - 1.0;
        let c = counts(&["a", "b"], vec![(0, 1, e1), (1, 0, e1)]);
        let l = log_count_matrix(&c);
        assert!((l.matrix().get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(l.matrix().get(1, 1), 0.0);
        assert_eq!(l.matrix().nnz(), 2);
    }

    fn random_counts(n: usize, seed: u64) -> CooccurrenceCounts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i..n {
                if rng.random_bool(0.6) {
                    let v = rng.random_range(1..20) as f64;
                    t.push((i, j, v));
                    if i != j {
                        t.push((j, i, v));
                    }
                }
            }
        }
        let vocab: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = vocab.iter().map(String::as_str).collect();
        counts(&refs, t)
    }

    #[test]
    fn pmi_matches_dense_formula() {
        let c = random_counts(12, 3);
        let dense = c.counts().to_dense();
        let total: f64 = dense.iter().sum();
        let rows: Vec<f64> = (0..12).map(|i| dense.row(i).sum()).collect();
        let expected = DMatrix::from_fn(12, 12, |i, j| {
            let v = dense[(i, j)];
            if v > 0.0 {
                (v * total / (rows[i] * rows[j])).ln().max(0.0)
            } else {
                0.0
            }
        });
        let got = pmi_matrix(&c).matrix().to_dense();
        assert!((got - expected).amax() < 1e-12);
        assert!(pmi_matrix(&c).matrix().values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn log_count_matches_dense_formula() {
        let c = random_counts(10, 4);
        let expected = c.counts().to_dense().map(f64::ln_1p);
        assert_eq!(log_count_matrix(&c).matrix().to_dense(), expected);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("pmi".parse::<SignalKind>().unwrap(), SignalKind::Pmi);
        assert_eq!("logcount".parse::<SignalKind>().unwrap(), SignalKind::LogCount);
        assert!("raw".parse::<SignalKind>().is_err());
    }
}
