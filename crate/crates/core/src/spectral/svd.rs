//! Randomized truncated SVD with convergence-controlled subspace iteration.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::embedding::{gaussian_matrix, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::spectral::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdConfig {
    pub seed: u64,
    /// Extra columns in the Gaussian test matrix.
    pub oversample: usize,
    /// Minimum number of power (subspace) iterations.
    pub power_iters: usize,
    /// Iteration stops once the top-`d` Ritz values move by at most
    /// `tol * sigma_1` between sweeps. `0.0` runs exactly `power_iters`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            seed: 0,
            oversample: 10,
            power_iters: 4,
            tol: 1e-10,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `nrows x d`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    /// `ncols x d`, orthonormal columns.
    pub v: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl TruncatedSvd {
    /// For a symmetric input, the number of retained directions whose
    /// eigenvalue is negative (left and right vectors point opposite ways).
    pub fn negative_eigen_directions(&self) -> usize {
        if self.u.nrows() != self.v.nrows() {
            return 0;
        }
        (0..self.u.ncols())
            .filter(|&i| self.singular_values[i] > 0.0 && self.u.column(i).dot(&self.v.column(i)) < 0.0)
            .count()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.u.nrows(), self.u.ncols(), |i, j| {
            self.u[(i, j)] * self.singular_values[j]
        });
        scaled * self.v.transpose()
    }
}

fn orthonormal(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Top `d` singular values of `w`, from the eigenvalues of `w^T w`.
fn ritz_values(w: &DMatrix<f64>, d: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(w.tr_mul(w))
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.truncate(d);
    vals
}

fn settled(prev: &[f64], cur: &[f64], tol: f64) -> bool {
    let top = cur.first().copied().unwrap_or(0.0);
    prev.iter()
        .zip(cur)
        .all(|(p, c)| (p - c).abs() <= tol * top)
}

/// Rank-`d` SVD of `m`.
///
/// A seeded Gaussian test matrix with `d + oversample` columns spans the
/// starting subspace; subspace iteration re-orthonormalizes after every
/// product and runs for at least `power_iters` sweeps and then until the
/// Ritz values settle. The small projected problem is solved exactly.
pub fn truncated_svd(m: &SparseMatrix, d: usize, config: &SvdConfig) -> Result<TruncatedSvd> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let full = rows.min(cols);
    if d == 0 {
        return Err(Error::Precondition("rank must be at least 1".into()));
    }
    if d > full {
        return Err(Error::Dimension(format!(
            "rank {d} exceeds matrix size {rows}x{cols}"
        )));
    }
    let k = (d + config.oversample).min(full);
    let mt = m.transpose();

    let omega = gaussian_matrix(cols, k, config.seed, 0);
    let mut q = orthonormal(&m.mul_dense(&omega));
    let mut w = mt.mul_dense(&q);
    let mut prev: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let limit = config.max_iters.max(config.power_iters);
    loop {
        let ritz = (config.tol > 0.0).then(|| ritz_values(&w, d));
        if iterations >= config.power_iters {
            match (&prev, &ritz) {
                (_, None) => converged = true,
                (Some(p), Some(r)) => converged = settled(p, r, config.tol),
                _ => {}
            }
        }
        if converged || iterations >= limit {
            break;
        }
        prev = ritz;
        q = orthonormal(&m.mul_dense(&orthonormal(&w)));
        w = mt.mul_dense(&q);
        iterations += 1;
    }

    // w = M^T Q = U_w S V_w^T, so Q^T M = V_w S U_w^T and M ~ (Q V_w) S U_w^T
    let svd = w.svd(true, true);
    let uw = svd.u.expect("requested u");
    let vw = svd.v_t.expect("requested v_t").transpose();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.truncate(d);

    let left = &q * &vw;
    let u = DMatrix::from_fn(rows, d, |i, j| left[(i, order[j])]);
    let v = DMatrix::from_fn(cols, d, |i, j| uw[(i, order[j])]);
    let singular_values = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    Ok(TruncatedSvd {
        u,
        singular_values,
        v,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdEmbedding {
    pub embedding: EmbeddingMatrix,
    /// Negative singular values that were clamped to zero.
    pub clamped: usize,
}

/// `E = U[:, :d] diag(sqrt(S[:d]))`, not standardized.
pub fn svd_embedding(vocab: Vec<String>, u: &DMatrix<f64>, s: &[f64], d: usize) -> Result<SvdEmbedding> {
    if d == 0 || d > u.ncols() || d > s.len() {
        return Err(Error::Dimension(format!(
            "cannot take {d} components from {} vectors and {} values",
            u.ncols(),
            s.len()
        )));
    }
    let clamped = s[..d].iter().filter(|&&v| v < 0.0).count();
    let roots: Vec<f64> = s[..d].iter().map(|v| v.max(0.0).sqrt()).collect();
    let matrix = DMatrix::from_fn(u.nrows(), d, |i, j| u[(i, j)] * roots[j]);
    Ok(SvdEmbedding {
        embedding: EmbeddingMatrix::new(vocab, matrix)?,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::gaussian_matrix;

    fn dense_to_sparse(m: &DMatrix<f64>) -> SparseMatrix {
        let t = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        SparseMatrix::from_triplets(m.nrows(), m.ncols(), t).unwrap()
    }

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let g = gaussian_matrix(n, n, seed, 7);
        (&g + g.transpose()) * 0.5
    }

    fn oracle_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
        let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    fn assert_orthonormal(u: &DMatrix<f64>, tol: f64) {
        let g = u.tr_mul(u);
        assert!((g - DMatrix::identity(u.ncols(), u.ncols())).amax() < tol);
    }

    #[test]
    fn diagonal_matrix() {
        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 3.0), (1, 1, 2.0), (2, 2, 1.0)]).unwrap();
        let svd = truncated_svd(&m, 2, &SvdConfig::default()).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 2.0).abs() < 1e-12);
        assert!((svd.u[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((svd.u[(1, 1)].abs() - 1.0).abs() < 1e-12);
        assert!(svd.u[(2, 0)].abs() < 1e-12 && svd.u[(2, 1)].abs() < 1e-12);
    }

    #[test]
    fn random_symmetric_matches_dense_oracle() {
        let dense = random_symmetric(200, 1);
        let svd = truncated_svd(&dense_to_sparse(&dense), 20, &SvdConfig::default()).unwrap();
        assert!(svd.converged);
        let oracle = oracle_singular_values(&dense);
        for (got, want) in svd.singular_values.iter().zip(&oracle) {
            assert!((got - want).abs() / want < 1e-6, "{got} vs {want}");
        }
        assert_orthonormal(&svd.u, 1e-8);
        assert_orthonormal(&svd.v, 1e-8);
    }

    #[test]
    fn full_rank_reconstruction() {
        let dense = gaussian_matrix(12, 12, 3, 0);
        let svd = truncated_svd(&dense_to_sparse(&dense), 12, &SvdConfig::default()).unwrap();
        let err = (svd.reconstruct() - &dense).norm() / dense.norm();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn truncation_error_is_optimal() {
        let dense = random_symmetric(80, 4);
        let d = 10;
        let svd = truncated_svd(&dense_to_sparse(&dense), d, &SvdConfig::default()).unwrap();
        let err = (svd.reconstruct() - &dense).norm();
        let oracle = oracle_singular_values(&dense);
        let best = oracle[d..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((err - best).abs() / best < 1e-6);
    }

    #[test]
    fn rank_too_large() {
        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0)]).unwrap();
        assert!(matches!(truncated_svd(&m, 4, &SvdConfig::default()), Err(Error::Dimension(_))));
        assert!(truncated_svd(&m, 0, &SvdConfig::default()).is_err());
    }

    #[test]
    fn deterministic_and_seed_stable() {
        let m = dense_to_sparse(&random_symmetric(60, 5));
        let a = truncated_svd(&m, 8, &SvdConfig::default()).unwrap();
        let b = truncated_svd(&m, 8, &SvdConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = truncated_svd(&m, 8, &SvdConfig { seed: 99, ..Default::default() }).unwrap();
        for (x, y) in a.singular_values.iter().zip(&c.singular_values) {
            assert!((x - y).abs() / x < 1e-6);
        }
    }

    #[test]
    fn fixed_iteration_mode() {
        let m = dense_to_sparse(&random_symmetric(40, 6));
        let cfg = SvdConfig { tol: 0.0, power_iters: 3, ..Default::default() };
        let svd = truncated_svd(&m, 5, &cfg).unwrap();
        assert_eq!(svd.iterations, 3);
        assert!(svd.converged);
    }

    #[test]
    fn negative_eigenvalue_flagged() {
        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 3.0), (1, 1, -2.0), (2, 2, 1.0)]).unwrap();
        let svd = truncated_svd(&m, 2, &SvdConfig::default()).unwrap();
        assert_eq!(svd.negative_eigen_directions(), 1);
        let psd = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 3.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(truncated_svd(&psd, 2, &SvdConfig::default()).unwrap().negative_eigen_directions(), 0);
    }

    #[test]
    fn embedding_from_identity() {
        let vocab: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let e = svd_embedding(vocab, &DMatrix::identity(3, 3), &[4.0, 1.0, 0.0], 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(e.embedding.matrix(), &expected);
        assert!(!e.embedding.is_standardized());
        assert_eq!(e.clamped, 0);
    }

    #[test]
    fn embedding_gram_is_diagonal() {
        let dense = random_symmetric(50, 8);
        let svd = truncated_svd(&dense_to_sparse(&dense), 6, &SvdConfig::default()).unwrap();
        let vocab = EmbeddingMatrix::synthetic_vocab(50);
        let e = svd_embedding(vocab, &svd.u, &svd.singular_values, 6).unwrap().embedding;
        let ete = e.matrix().tr_mul(e.matrix());
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.singular_values.clone()));
        assert!((ete - diag).amax() < 1e-8);
    }

    #[test]
    fn negative_values_clamped() {
        let vocab = vec!["a".to_string(), "b".to_string()];
        let e = svd_embedding(vocab, &DMatrix::identity(2, 2), &[1.0, -1e-14], 2).unwrap();
        assert_eq!(e.clamped, 1);
        assert_eq!(e.embedding.matrix()[(1, 1)], 0.0);
    }
}
