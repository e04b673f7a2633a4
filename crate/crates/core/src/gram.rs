//! Gram-matrix statistics computed in `d x d` space.
//!
//! For `E` of shape `n x d`, `||E E^T||_F = ||E^T E||_F` and
//! `<E1 E1^T, E2 E2^T> = ||E1^T E2||_F^2`, so no `n x n` matrix is ever formed
//! outside of [`naive_gram_oracle`].

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Largest `n` the naive oracle will materialize.
pub const ORACLE_MAX_N: usize = 2000;

/// Row-block size for the chunked cross products. Fixed so results do not
/// depend on the thread count.
const ROW_BLOCK: usize = 2048;

/// `a^T b` summed over fixed row blocks, reduced in block order.
pub(crate) fn cross_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let n = a.nrows();
    if n <= ROW_BLOCK {
        return a.tr_mul(b);
    }
    let blocks: Vec<DMatrix<f64>> = (0..n)
        .step_by(ROW_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let len = ROW_BLOCK.min(n - start);
            a.rows(start, len).tr_mul(&b.rows(start, len))
        })
        .collect();
    let mut iter = blocks.into_iter();
    let mut acc = iter.next().expect("n > 0");
    for block in iter {
        acc += block;
    }
    acc
}

pub(crate) fn squared_frobenius(m: &DMatrix<f64>) -> f64 {
    compensated_sum(m.iter().map(|v| v * v))
}

/// `||E E^T||_F` in `O(n d^2)` time and `O(d^2)` extra space.
pub fn gram_frobenius_norm(emb: &EmbeddingMatrix) -> f64 {
    let m = emb.matrix();
    squared_frobenius(&cross_product(m, m)).sqrt()
}

fn check_rows(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::Dimension(format!(
            "row counts differ: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    Ok(())
}

/// `<E1 E1^T, E2 E2^T> = trace((E1 E1^T)^T E2 E2^T)`, via `||E1^T E2||_F^2`.
pub fn cross_gram_inner(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<f64> {
    check_rows(a, b)?;
    Ok(squared_frobenius(&cross_product(a.matrix(), b.matrix())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveGramStats {
    pub norm_a: f64,
    pub norm_b: f64,
    pub inner: f64,
}

/// Reference values from explicitly materialized `n x n` Gram matrices.
pub fn naive_gram_oracle(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<NaiveGramStats> {
    check_rows(a, b)?;
    if a.n() > ORACLE_MAX_N {
        return Err(Error::OracleGuard {
            n: a.n(),
            limit: ORACLE_MAX_N,
        });
    }
    let n = a.n();
    let (ea, eb) = (a.matrix(), b.matrix());
    let gram = |e: &DMatrix<f64>| {
        DMatrix::from_fn(n, n, |i, j| {
            compensated_sum((0..e.ncols()).map(|k| e[(i, k)] * e[(j, k)]))
        })
    };
    let ga = gram(ea);
    let gb = gram(eb);
    Ok(NaiveGramStats {
        norm_a: compensated_sum(ga.iter().map(|v| v * v)).sqrt(),
        norm_b: compensated_sum(gb.iter().map(|v| v * v)).sqrt(),
        inner: compensated_sum(ga.iter().zip(gb.iter()).map(|(x, y)| x * y)),
    })
}

/// Per-word statistics of the Gram rows `v̂_i = (v_i v_1^T, ..., v_i v_n^T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordGramStats {
    /// `<v̂_i^(1), v̂_i^(2)>`
    pub dot: f64,
    /// `||v̂_i^(1)||`
    pub norm_a: f64,
    /// `||v̂_i^(2)||`
    pub norm_b: f64,
}

/// Row-wise `x_i M y_i^T` for all `i`.
fn row_quadratic_forms(x: &DMatrix<f64>, m: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let xm = x * m;
    (0..x.nrows())
        .map(|i| xm.row(i).dot(&y.row(i)))
        .collect()
}

/// Gram-row inner products and norms for every word, using the `d x d`
/// matrices `E1^T E1`, `E2^T E2` and `E1^T E2`.
pub fn per_word_gram_stats(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
) -> Result<Vec<WordGramStats>> {
    check_rows(a, b)?;
    let (ea, eb) = (a.matrix(), b.matrix());
    let aa = cross_product(ea, ea);
    let bb = cross_product(eb, eb);
    let ab = cross_product(ea, eb);
    let dots = row_quadratic_forms(ea, &ab, eb);
    let na = row_quadratic_forms(ea, &aa, ea);
    let nb = row_quadratic_forms(eb, &bb, eb);
    Ok(dots
        .into_iter()
        .zip(na)
        .zip(nb)
        .map(|((dot, na2), nb2)| WordGramStats {
            dot,
            norm_a: na2.max(0.0).sqrt(),
            norm_b: nb2.max(0.0).sqrt(),
        })
        .collect())
}
