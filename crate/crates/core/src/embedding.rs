//! Vocabulary-indexed embedding matrices.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// An `n x d` real matrix whose row `i` is the vector of `vocab[i]`.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    matrix: DMatrix<f64>,
    standardized: bool,
}

impl PartialEq for EmbeddingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.matrix == other.matrix
            && self.standardized == other.standardized
    }
}

fn validate_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::InvalidEmbedding("empty vocabulary entry".into()));
    }
    if word.chars().any(char::is_whitespace) {
        return Err(Error::InvalidEmbedding(format!(
            "vocabulary entry {word:?} contains whitespace"
        )));
    }
    Ok(())
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::InvalidEmbedding("empty vocabulary".into()));
        }
        if matrix.nrows() != vocab.len() {
            return Err(Error::InvalidEmbedding(format!(
                "{} vocabulary entries but {} matrix rows",
                vocab.len(),
                matrix.nrows()
            )));
        }
        if matrix.ncols() == 0 {
            return Err(Error::InvalidEmbedding("dimension must be positive".into()));
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            let row = pos % matrix.nrows();
            return Err(Error::InvalidEmbedding(format!(
                "non-finite entry in row of {:?}",
                vocab[row]
            )));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, word) in vocab.iter().enumerate() {
            validate_word(word)?;
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::DuplicateVocab {
                    word: word.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(EmbeddingMatrix {
            vocab,
            index,
            matrix,
            standardized: false,
        })
    }

    /// Builds from row vectors; every row must have the same length.
    pub fn from_rows(vocab: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidEmbedding(format!(
                "row {} has {} entries, expected {d}",
                bad,
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(vocab, DMatrix::from_row_slice(rows.len(), d, &flat))
    }

    /// Synthetic vocabulary `w0 .. w{n-1}`.
    pub fn synthetic_vocab(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    /// `n x d` matrix with i.i.d. standard normal entries, reproducible from `seed`.
    pub fn random_gaussian(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Precondition(format!(
                "random embedding needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        let matrix = gaussian_matrix(n, d, seed, 0);
        Self::new(Self::synthetic_vocab(n), matrix)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_parts(self) -> (Vec<String>, DMatrix<f64>) {
        (self.vocab, self.matrix)
    }

    /// Number of words.
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    pub fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub(crate) fn row_is_zero(&self, i: usize) -> bool {
        self.matrix.row(i).iter().all(|&v| v == 0.0)
    }

    /// Standard deviation of the entries about zero, `||E||_F / sqrt(n d)`.
    pub fn entry_scale(&self) -> f64 {
        entry_scale(self.matrix.as_slice())
    }

    /// Divides every entry by [`entry_scale`](Self::entry_scale). The mean
    /// is neither subtracted nor used, so `standardize(E Q)` is
    /// `standardize(E) Q` for orthogonal `Q`.
    pub fn standardize(&self) -> Result<Self> {
        Ok(EmbeddingMatrix {
            vocab: self.vocab.clone(),
            index: self.index.clone(),
            matrix: standardized(&self.matrix)?,
            standardized: true,
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.vocab.clone(), &self.matrix * factor)
    }

    /// Right-multiplies by a `d x k` matrix, e.g. an orthogonal rotation.
    pub fn transformed(&self, transform: &DMatrix<f64>) -> Result<Self> {
        if transform.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "transform has {} rows, embedding dimension is {}",
                transform.nrows(),
                self.dim()
            )));
        }
        Self::new(self.vocab.clone(), &self.matrix * transform)
    }

    /// Rows for `words`, in the given order.
    pub fn select(&self, words: &[String]) -> Result<Self> {
        let rows: Vec<usize> = words
            .iter()
            .map(|w| {
                self.index_of(w)
                    .ok_or_else(|| Error::Alignment(format!("word {w:?} not in vocabulary")))
            })
            .collect::<Result<_>>()?;
        let matrix = self.matrix.select_rows(rows.iter());
        let mut out = Self::new(words.to_vec(), matrix)?;
        out.standardized = self.standardized;
        Ok(out)
    }

    /// Applies the same row permutation to vocabulary and matrix: new row `i`
    /// is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::Dimension("permutation length differs from n".into()));
        }
        let words: Vec<String> = order.iter().map(|&i| self.vocab[i].clone()).collect();
        self.select(&words)
    }
}

pub(crate) fn entry_scale(values: &[f64]) -> f64 {
    let sq = compensated_sum(values.iter().map(|v| v * v));
    (sq / values.len() as f64).sqrt()
}

pub(crate) fn standardized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.len() < 2 {
        return Err(Error::Degenerate(
            "standardization needs at least 2 entries".into(),
        ));
    }
    let scale = entry_scale(m.as_slice());
    if !(scale > 0.0) {
        return Err(Error::Degenerate("all-zero matrix".into()));
    }
    Ok(m / scale)
}

/// Standard normal matrix filled in row-major order from ChaCha stream `stream`.
pub(crate) fn gaussian_matrix(n: usize, d: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(n, d, &data)
}

/// Two embedding matrices restricted to the same, identically ordered vocabulary.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    left: EmbeddingMatrix,
    right: EmbeddingMatrix,
    coverage_left: f64,
    coverage_right: f64,
}

impl AlignedPair {
    /// Wraps two matrices that already share an identical vocabulary order.
    pub fn new(left: EmbeddingMatrix, right: EmbeddingMatrix) -> Result<Self> {
        if left.vocab != right.vocab {
            return Err(Error::Alignment(
                "left and right vocabularies differ; use align_vocabularies".into(),
            ));
        }
        Ok(AlignedPair {
            left,
            right,
            coverage_left: 1.0,
            coverage_right: 1.0,
        })
    }

    pub fn left(&self) -> &EmbeddingMatrix {
        &self.left
    }

    pub fn right(&self) -> &EmbeddingMatrix {
        &self.right
    }

    pub fn shared_vocab(&self) -> &[String] {
        self.left.vocab()
    }

    pub fn n(&self) -> usize {
        self.left.n()
    }

    /// Fraction of the original left vocabulary kept by the intersection.
    pub fn coverage_left(&self) -> f64 {
        self.coverage_left
    }

    pub fn coverage_right(&self) -> f64 {
        self.coverage_right
    }

    pub fn swapped(self) -> Self {
        AlignedPair {
            left: self.right,
            right: self.left,
            coverage_left: self.coverage_right,
            coverage_right: self.coverage_left,
        }
    }
}

/// Restricts both matrices to their shared vocabulary, ordered by code point.
///
/// Shared words whose vector is all zeros on either side are rejected.
pub fn align_vocabularies(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<AlignedPair> {
    let shared: Vec<String> = a
        .vocab
        .iter()
        .filter(|w| b.contains(w))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(Error::Alignment("vocabularies do not intersect".into()));
    }
    let left = a.select(&shared)?;
    let right = b.select(&shared)?;
    for (side, emb) in [("left", &left), ("right", &right)] {
        if let Some(i) = (0..emb.n()).find(|&i| emb.row_is_zero(i)) {
            return Err(Error::Alignment(format!(
                "word {:?} has an all-zero vector on the {side} side",
                shared[i]
            )));
        }
    }
    let k = shared.len() as f64;
    Ok(AlignedPair {
        left,
        right,
        coverage_left: k / a.n() as f64,
        coverage_right: k / b.n() as f64,
    })
}

/// Global intersection of several vocabularies, ordered by code point.
pub fn common_vocabulary<'a, I>(embeddings: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a EmbeddingMatrix>,
{
    let mut iter = embeddings.into_iter();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let mut shared: BTreeSet<&String> = first.vocab.iter().collect();
    for emb in iter {
        shared.retain(|w| emb.contains(w));
    }
    shared.into_iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    fn emb(ws: &[&str], rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(words(ws), rows).unwrap()
    }

    #[test]
    fn rejects_bad_vocab() {
        let m = DMatrix::zeros(2, 2);
        assert!(matches!(
            EmbeddingMatrix::new(words(&["a", "a"]), m.clone()),
            Err(Error::DuplicateVocab { .. })
        ));
        assert!(EmbeddingMatrix::new(words(&["a", "b c"]), m.clone()).is_err());
        assert!(EmbeddingMatrix::new(words(&["a", ""]), m.clone()).is_err());
        assert!(EmbeddingMatrix::new(words(&["a"]), m).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(EmbeddingMatrix::new(words(&["a"]), m).is_err());
    }

    #[test]
    fn standardize_unit_std_is_unchanged() {
        let e = emb(&["a", "b"], &[vec![1.0, -1.0], vec![1.0, -1.0]]);
        let s = e.standardize().unwrap();
        assert_eq!(s.matrix(), e.matrix());
        assert!(s.is_standardized());
    }

    #[test]
    fn standardize_rescales() {
        let e = emb(&["a", "b"], &[vec![2.0, -2.0], vec![2.0, -2.0]]);
        let s = e.standardize().unwrap();
        assert_eq!(s.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]));
    }

    #[test]
    fn standardize_does_not_center() {
        let e = emb(&["a", "b"], &[vec![3.0, 1.0], vec![3.0, 1.0]]);
        let s = e.standardize().unwrap();
        let r = 5f64.sqrt();
        assert_eq!(s.row(0), vec![3.0 / r, 1.0 / r]);
    }

    #[test]
    fn standardize_commutes_with_rotation() {
        let e = EmbeddingMatrix::random_gaussian(20, 4, 9).unwrap().scaled(3.0).unwrap();
        let shifted = EmbeddingMatrix::new(
            e.vocab().to_vec(),
            e.matrix().map(|v| v + 1.5),
        )
        .unwrap();
        let q = EmbeddingMatrix::random_gaussian(4, 4, 10).unwrap().matrix().clone().qr().q();
        let a = shifted.standardize().unwrap().transformed(&q).unwrap();
        let b = shifted.transformed(&q).unwrap().standardize().unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-12);
    }

    #[test]
    fn standardize_degenerate() {
        let zeros = emb(&["a", "b"], &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(zeros.standardize(), Err(Error::Degenerate(_))));
        let single = emb(&["a"], &[vec![1.0]]);
        assert!(matches!(single.standardize(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn standardize_idempotent_and_scale_invariant() {
        let e = EmbeddingMatrix::random_gaussian(40, 7, 3).unwrap();
        let s = e.standardize().unwrap();
        let ss = s.standardize().unwrap();
        assert!((s.entry_scale() - 1.0).abs() < 1e-12);
        assert!((s.matrix() - ss.matrix()).amax() < 1e-12);
        for c in [-3.0, 0.01, 7.0] {
            let sc = e.scaled(c).unwrap().standardize().unwrap();
            let expected = s.matrix() * c.signum();
            assert!((sc.matrix() - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = EmbeddingMatrix::random_gaussian(4, 3, 7).unwrap();
        let b = EmbeddingMatrix::random_gaussian(4, 3, 7).unwrap();
        assert_eq!(a, b);
        let c = EmbeddingMatrix::random_gaussian(4, 3, 8).unwrap();
        assert_ne!(a.matrix(), c.matrix());
        assert_eq!(a.vocab(), &words(&["w0", "w1", "w2", "w3"])[..]);
    }

    #[test]
    fn gaussian_moments() {
        let e = EmbeddingMatrix::random_gaussian(10_000, 100, 1).unwrap();
        let m = crate::numeric::Moments::of(e.matrix().as_slice());
        assert!(m.mean.abs() < 0.02, "mean {}", m.mean);
        assert!((m.m2.sqrt() - 1.0).abs() < 0.02);
    }

    #[test]
    fn gaussian_rejects_empty() {
        assert!(matches!(
            EmbeddingMatrix::random_gaussian(0, 3, 1),
            Err(Error::Precondition(_))
        ));
        assert!(EmbeddingMatrix::random_gaussian(3, 0, 1).is_err());
    }

    #[test]
    fn align_intersects_and_sorts() {
        let a = emb(&["c", "a", "b"], &[vec![3.0], vec![1.0], vec![2.0]]);
        let b = emb(&["d", "c", "b"], &[vec![40.0], vec![30.0], vec![20.0]]);
        let pair = align_vocabularies(&a, &b).unwrap();
        assert_eq!(pair.shared_vocab(), &words(&["b", "c"])[..]);
        assert_eq!(pair.left().row(0), vec![2.0]);
        assert_eq!(pair.right().row(1), vec![30.0]);
        assert!((pair.coverage_left() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn align_order_independent_of_argument_order() {
        let a = emb(&["x", "y", "z"], &[vec![1.0], vec![2.0], vec![3.0]]);
        let b = emb(&["z", "x", "y"], &[vec![3.0], vec![1.0], vec![2.0]]);
        let ab = align_vocabularies(&a, &b).unwrap();
        let ba = align_vocabularies(&b, &a).unwrap();
        assert_eq!(ab.shared_vocab(), ba.shared_vocab());
        assert_eq!(ab.left().matrix(), ba.right().matrix());
    }

    #[test]
    fn align_disjoint_fails() {
        let a = emb(&["a"], &[vec![1.0]]);
        let b = emb(&["b"], &[vec![1.0]]);
        assert!(matches!(align_vocabularies(&a, &b), Err(Error::Alignment(_))));
    }

    #[test]
    fn align_rejects_zero_rows() {
        let a = emb(&["a", "b"], &[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let b = emb(&["a", "b"], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(align_vocabularies(&a, &b), Err(Error::Alignment(_))));
    }

    #[test]
    fn common_vocab_of_three() {
        let a = emb(&["a", "b", "c"], &[vec![1.0], vec![1.0], vec![1.0]]);
        let b = emb(&["c", "b"], &[vec![1.0], vec![1.0]]);
        let c = emb(&["b", "c", "d"], &[vec![1.0], vec![1.0], vec![1.0]]);
        assert_eq!(common_vocabulary([&a, &b, &c]), words(&["b", "c"]));
    }
}
