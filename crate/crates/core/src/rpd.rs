//! Relative pairwise inner product distance.
//!
//! ```text
//! RPD(E1, E2) = 1/2 * ||Ẽ1 Ẽ1^T - Ẽ2 Ẽ2^T||^2 / (||Ẽ1 Ẽ1^T|| ||Ẽ2 Ẽ2^T||)
//!             = 1/2 (a/b + b/a) - <Ẽ1 Ẽ1^T, Ẽ2 Ẽ2^T> / (a b)
//! ```
//!
//! where `Ẽ` is `E` divided by its entry standard deviation and
//! `a`, `b` are the two Gram norms. The second form is what gets computed.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{standardized, AlignedPair, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::gram::{cross_product, per_word_gram_stats, squared_frobenius};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDivergence {
    pub word: String,
    /// Cosine between the word's two Gram rows; `None` when either row is zero.
    #[serde(rename = "cos_theta_i")]
    pub cos_theta: Option<f64>,
    /// Exact weight `||v̂_i^(1)|| ||v̂_i^(2)|| / (||Ê1|| ||Ê2||)`.
    #[serde(rename = "w_i")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpdReport {
    pub rpd: f64,
    /// `1/2 (a/b + b/a)`, always `>= 1`.
    pub ratio_term: f64,
    /// `<G1, G2> / (a b)`.
    pub cosine_term: f64,
    pub n: usize,
    pub d_left: usize,
    pub d_right: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_word: Option<Vec<WordDivergence>>,
    /// Sum of the per-word weights. At most 1, with equality when the two
    /// Gram matrices have proportional row norms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_sum: Option<f64>,
}

impl RpdReport {
    /// Keeps only the first `k` per-word entries (the most divergent words).
    pub fn truncate_per_word(&mut self, k: usize) {
        if let Some(words) = self.per_word.as_mut() {
            words.truncate(k);
        }
    }
}

/// The three `d x d`-space quantities RPD is built from.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GramTerms {
    /// `||G1||`
    pub a: f64,
    /// `||G2||`
    pub b: f64,
    /// `<G1, G2>`
    pub inner: f64,
}

impl GramTerms {
    pub fn compute(left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<Self> {
        let a = squared_frobenius(&cross_product(left, left)).sqrt();
        let b = squared_frobenius(&cross_product(right, right)).sqrt();
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::Degenerate("Gram matrix has zero norm".into()));
        }
        let inner = squared_frobenius(&cross_product(left, right));
        Ok(GramTerms { a, b, inner })
    }

    pub fn ratio_term(&self) -> f64 {
        0.5 * (self.a / self.b + self.b / self.a)
    }

    pub fn cosine_term(&self) -> f64 {
        self.inner / (self.a * self.b)
    }

    pub fn rpd(&self) -> f64 {
        (self.ratio_term() - self.cosine_term()).max(0.0)
    }
}

fn prepared(pair: &AlignedPair, standardize_inputs: bool) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    if standardize_inputs {
        Ok((pair.left().standardize()?, pair.right().standardize()?))
    } else {
        Ok((pair.left().clone(), pair.right().clone()))
    }
}

/// RPD between raw matrices of equal row count.
pub(crate) fn rpd_of_matrices(
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    standardize_inputs: bool,
) -> Result<f64> {
    if standardize_inputs {
        GramTerms::compute(&standardized(left)?, &standardized(right)?).map(|t| t.rpd())
    } else {
        GramTerms::compute(left, right).map(|t| t.rpd())
    }
}

/// RPD of an aligned pair. `standardize_inputs` applies the entry-std
/// normalization to both sides first (the usual choice).
pub fn rpd(pair: &AlignedPair, standardize_inputs: bool) -> Result<RpdReport> {
    let (left, right) = prepared(pair, standardize_inputs)?;
    let terms = GramTerms::compute(left.matrix(), right.matrix())?;
    Ok(RpdReport {
        rpd: terms.rpd(),
        ratio_term: terms.ratio_term(),
        cosine_term: terms.cosine_term(),
        n: pair.n(),
        d_left: left.dim(),
        d_right: right.dim(),
        per_word: None,
        weight_sum: None,
    })
}

/// RPD plus the per-word cosine/weight decomposition of the cosine term,
/// sorted by ascending cosine (most divergent words first).
pub fn decompose_per_word(pair: &AlignedPair, standardize_inputs: bool) -> Result<RpdReport> {
    let (left, right) = prepared(pair, standardize_inputs)?;
    let terms = GramTerms::compute(left.matrix(), right.matrix())?;
    let stats = per_word_gram_stats(&left, &right)?;
    let denom = terms.a * terms.b;
    let mut words: Vec<WordDivergence> = stats
        .iter()
        .zip(pair.shared_vocab())
        .map(|(s, word)| {
            let norms = s.norm_a * s.norm_b;
            let cos_theta = (norms > 0.0).then(|| (s.dot / norms).clamp(-1.0, 1.0));
            WordDivergence {
                word: word.clone(),
                cos_theta,
                weight: norms / denom,
            }
        })
        .collect();
    let weight_sum = crate::numeric::compensated_sum(words.iter().map(|w| w.weight));
    words.sort_by(|x, y| match (x.cos_theta, y.cos_theta) {
        (Some(a), Some(b)) => a.total_cmp(&b).then_with(|| x.word.cmp(&y.word)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => x.word.cmp(&y.word),
    });
    Ok(RpdReport {
        rpd: terms.rpd(),
        ratio_term: terms.ratio_term(),
        cosine_term: terms.cosine_term(),
        n: pair.n(),
        d_left: left.dim(),
        d_right: right.dim(),
        per_word: Some(words),
        weight_sum: Some(weight_sum),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub rpd: f64,
    pub bound: f64,
}

/// RPD against its Cauchy-Schwarz bound `1/2 (a/b + b/a)`.
pub fn rpd_upper_bound_check(pair: &AlignedPair, standardize_inputs: bool) -> Result<UpperBound> {
    let report = rpd(pair, standardize_inputs)?;
    let out = UpperBound {
        rpd: report.rpd,
        bound: report.ratio_term,
    };
    if out.rpd > out.bound + 1e-12 {
        return Err(Error::Degenerate(format!(
            "rpd {} exceeds its bound {}",
            out.rpd, out.bound
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::align_vocabularies;

    fn gaussian(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        EmbeddingMatrix::random_gaussian(n, d, seed).unwrap()
    }

    fn pair(a: EmbeddingMatrix, b: EmbeddingMatrix) -> AlignedPair {
        AlignedPair::new(a, b).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let e = gaussian(100, 10, 1);
        let r = rpd(&pair(e.clone(), e), true).unwrap();
        assert!(r.rpd <= 1e-12);
        assert_eq!(r.ratio_term, 1.0);
    }

    #[test]
    fn independent_gaussians_near_one_minus_d_over_n() {
        let r = rpd(&pair(gaussian(2000, 50, 1), gaussian(2000, 50, 2)), true).unwrap();
        assert!((r.rpd - 0.975).abs() < 0.01, "rpd {}", r.rpd);
    }

    #[test]
    fn eq1_consistency() {
        let r = rpd(&pair(gaussian(80, 5, 3), gaussian(80, 9, 4)), true).unwrap();
        assert!((r.rpd - (r.ratio_term - r.cosine_term)).abs() < 1e-10);
        assert!(r.ratio_term >= 1.0);
        assert!(r.cosine_term >= 0.0 && r.cosine_term <= r.ratio_term);
        assert_eq!((r.n, r.d_left, r.d_right), (80, 5, 9));
    }

    #[test]
    fn degenerate_zero_matrix() {
        let z = EmbeddingMatrix::new(EmbeddingMatrix::synthetic_vocab(3), DMatrix::zeros(3, 2)).unwrap();
        let e = gaussian(3, 2, 0);
        assert!(matches!(rpd(&pair(z.clone(), e.clone()), false), Err(Error::Degenerate(_))));
        assert!(matches!(rpd(&pair(z, e), true), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bound_equal_norms_is_one() {
        let e = gaussian(50, 4, 5);
        let b = rpd_upper_bound_check(&pair(e.clone(), e), false).unwrap();
        assert_eq!(b.bound, 1.0);
    }

    #[test]
    fn bound_for_scaled_matrix() {
        // scaling E by sqrt(2) doubles ||E E^T||
        let e = gaussian(50, 4, 6);
        let scaled = e.scaled(2f64.sqrt()).unwrap();
        let b = rpd_upper_bound_check(&pair(scaled, e), false).unwrap();
        assert!((b.bound - 1.25).abs() < 1e-12);
        assert!(b.rpd <= b.bound);
    }

    #[test]
    fn decomposition_self_pair() {
        let e = gaussian(40, 6, 7);
        let r = decompose_per_word(&pair(e.clone(), e), true).unwrap();
        let words = r.per_word.unwrap();
        assert_eq!(words.len(), 40);
        for w in &words {
            assert!((w.cos_theta.unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((r.weight_sum.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decomposition_identity_and_order() {
        let p = pair(gaussian(100, 8, 8), gaussian(100, 5, 9));
        let r = decompose_per_word(&p, true).unwrap();
        let words = r.per_word.as_ref().unwrap();
        let weighted: f64 = words.iter().map(|w| w.weight * w.cos_theta.unwrap()).sum();
        assert!((weighted - r.cosine_term).abs() < 1e-9);
        assert!(words.windows(2).all(|w| w[0].cos_theta <= w[1].cos_theta));
        assert!(r.weight_sum.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn zero_word_is_flagged() {
        let a = EmbeddingMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.5, 2.0]],
        )
        .unwrap();
        let b = EmbeddingMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![1.0], vec![2.0], vec![-1.0]],
        )
        .unwrap();
        let r = decompose_per_word(&pair(a, b), true).unwrap();
        let words = r.per_word.unwrap();
        assert_eq!(words.last().unwrap().word, "b");
        assert!(words.last().unwrap().cos_theta.is_none());
        let weighted: f64 = words.iter().filter_map(|w| w.cos_theta.map(|c| c * w.weight)).sum();
        assert!((weighted - r.cosine_term).abs() < 1e-9);
    }

    #[test]
    fn report_json_field_names() {
        let e = gaussian(5, 2, 1);
        let mut r = decompose_per_word(&pair(e.clone(), e.clone()), true).unwrap();
        r.truncate_per_word(2);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["rpd", "ratio_term", "cosine_term", "n", "d_left", "d_right", "per_word"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let first = &json["per_word"][0];
        assert!(first.get("cos_theta_i").is_some() && first.get("w_i").is_some());
        assert_eq!(json["per_word"].as_array().unwrap().len(), 2);
        let plain = serde_json::to_value(rpd(&pair(e.clone(), e), true).unwrap()).unwrap();
        assert!(plain.get("per_word").is_none());
    }

    #[test]
    fn works_through_alignment() {
        let a = gaussian(30, 3, 1);
        let b = a.permuted(&(0..30).rev().collect::<Vec<_>>()).unwrap();
        let p = align_vocabularies(&a, &b).unwrap();
        assert!(rpd(&p, true).unwrap().rpd < 1e-12);
    }
}
