//! Scalar uncertainty measures: predictive entropy, one minus the maximum
//! softmax probability, and the class-conditional Gaussian (Mahalanobis) score.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidParameter(
            "probabilities must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn predictive_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(-p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>())
}

/// `1 - max_c p_c`.
pub fn one_minus_msp(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Per-class means and the pooled within-class covariance of embeddings.
#[derive(Debug, Clone)]
pub struct GaussianClassStats {
    means: Array2<f64>,
    pooled_cov: Array2<f64>,
    precision: DMatrix<f64>,
    ridge: f64,
}

impl GaussianClassStats {
    /// Fits class means and the pooled covariance normalized by the total
    /// sample count. When the smallest eigenvalue falls below
    /// `1e-10 * trace / d`, a ridge of `1e-6 * trace / d` (or `1e-6` for an
    /// all-zero covariance) is added before inverting; see [`Self::ridge`].
    pub fn fit(embeddings: ArrayView2<'_, f64>, class_ids: &[usize]) -> Result<Self> {
        let (n, d) = embeddings.dim();
        if n == 0 || d == 0 {
            return Err(Error::Empty);
        }
        if class_ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: class_ids.len(),
            });
        }
        if embeddings.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embeddings".into()));
        }
        let classes = class_ids.iter().max().map_or(0, |c| c + 1);
        let mut counts = vec![0usize; classes];
        let mut means = Array2::<f64>::zeros((classes, d));
        for (row, &c) in embeddings.outer_iter().zip(class_ids) {
            counts[c] += 1;
            let mut mean = means.row_mut(c);
            mean += &row;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidParameter(format!("class {empty} has no samples")));
        }
        for (mut mean, &count) in means.outer_iter_mut().zip(&counts) {
            mean /= count as f64;
        }

        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (row, &c) in embeddings.outer_iter().zip(class_ids) {
            let diff = DVector::from_iterator(d, row.iter().zip(means.row(c)).map(|(x, m)| x - m));
            cov += &diff * diff.transpose();
        }
        cov /= n as f64;
        // exact symmetry
        let cov = (&cov + cov.transpose()) * 0.5;

        let scale = cov.trace() / d as f64;
        let min_eig = cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let ridge = if min_eig < 1e-10 * scale || scale <= 0.0 {
            1e-6 * if scale > 0.0 { scale } else { 1.0 }
        } else {
            0.0
        };
        let regularized = &cov + DMatrix::<f64>::identity(d, d) * ridge;
        let precision = regularized
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("pooled covariance".into()))?
            .inverse();
        let pooled_cov = Array2::from_shape_fn((d, d), |(i, j)| regularized[(i, j)]);
        Ok(Self {
            means,
            pooled_cov,
            precision,
            ridge,
        })
    }

    /// Class means, one row per class.
    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    /// Pooled covariance including any ridge that was added.
    pub fn pooled_cov(&self) -> &Array2<f64> {
        &self.pooled_cov
    }

    pub fn precision(&self) -> Array2<f64> {
        let d = self.precision.nrows();
        Array2::from_shape_fn((d, d), |(i, j)| self.precision[(i, j)])
    }

    /// Ridge added to the diagonal; 0 when the covariance was well conditioned.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Squared Mahalanobis distance to the closest class mean.
    pub fn mahalanobis_score(&self, embedding: ArrayView1<'_, f64>) -> Result<f64> {
        let d = self.dim();
        if embedding.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: embedding.len(),
            });
        }
        let best = self
            .means
            .outer_iter()
            .map(|mean| {
                let diff = DVector::from_iterator(d, embedding.iter().zip(mean).map(|(x, m)| x - m));
                (diff.transpose() * &self.precision * &diff)[(0, 0)]
            })
            .fold(f64::INFINITY, f64::min);
        Ok(best.max(0.0))
    }

    /// [`Self::mahalanobis_score`] for every row.
    pub fn mahalanobis_scores(&self, embeddings: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        embeddings
            .outer_iter()
            .map(|row| self.mahalanobis_score(row))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn entropy_examples() {
        assert!((predictive_entropy(&[0.1; 10]).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert_eq!(predictive_entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((predictive_entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(predictive_entropy(&[0.5, 0.6]).is_err());
        assert!(predictive_entropy(&[-0.5, 1.5]).is_err());
    }

    #[test]
    fn msp_examples() {
        assert_eq!(one_minus_msp(&[0.0, 1.0]).unwrap(), 0.0);
        assert!((one_minus_msp(&[0.25; 4]).unwrap() - 0.75).abs() < 1e-15);
        assert!((one_minus_msp(&[0.7, 0.2, 0.1]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn uniform_maximizes_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for c in 2..=5 {
            let top = (c as f64).ln();
            for _ in 0..2000 {
                let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
                assert!(predictive_entropy(&p).unwrap() <= top + 1e-12);
            }
        }
    }

    #[test]
    fn pooled_covariance_by_hand() {
        let x = array![[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
        let stats = GaussianClassStats::fit(x.view(), &[0, 0, 1, 1]).unwrap();
        assert_eq!(stats.means(), &array![[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(stats.pooled_cov(), &array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(stats.ridge(), 0.0);
        let s = stats.mahalanobis_score(array![1.0, 0.0].view()).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_classes_trigger_ridge() {
        let x = array![[0.0, 0.0], [2.0, 1.0]];
        let stats = GaussianClassStats::fit(x.view(), &[0, 1]).unwrap();
        assert!(stats.ridge() > 0.0);
        assert_eq!(stats.mahalanobis_score(array![2.0, 1.0].view()).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0]];
        assert!(GaussianClassStats::fit(x.view(), &[0, 2]).is_err());
        assert!(GaussianClassStats::fit(array![[f64::NAN]].view(), &[0]).is_err());
        let stats = GaussianClassStats::fit(x.view(), &[0, 0]).unwrap();
        assert!(stats.mahalanobis_score(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn identity_covariance_midpoint() {
        // per-class spread sqrt(2) * {(+-1, 0), (0, +-1)} has pooled covariance I
        let r = 2f64.sqrt();
        let base = [[-r, 0.0], [r, 0.0], [0.0, -r], [0.0, r]];
        let mut rows = Vec::new();
        for shift in [0.0, 2.0] {
            for p in base {
                rows.push([p[0] + shift, p[1]]);
            }
        }
        let x = Array2::from_shape_fn((8, 2), |(i, k)| rows[i][k]);
        let stats = GaussianClassStats::fit(x.view(), &[0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        for (got, want) in stats.pooled_cov().iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((stats.mahalanobis_score(array![1.0, 0.0].view()).unwrap() - 1.0).abs() < 1e-12);
    }

    fn random_data(seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((60, 3), |_| rng.random_range(-2.0..2.0));
        let y = (0..60).map(|i| i % 3).collect();
        (x, y)
    }

    #[test]
    fn invariants() {
        let (x, y) = random_data(4);
        let stats = GaussianClassStats::fit(x.view(), &y).unwrap();
        let prec = stats.precision();
        let prod = prec.dot(stats.pooled_cov());
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-6);
                assert!((stats.pooled_cov()[(i, j)] - stats.pooled_cov()[(j, i)]).abs() < 1e-10);
            }
        }
        for mean in stats.means().outer_iter() {
            assert!(stats.mahalanobis_score(mean).unwrap().abs() < 1e-10);
        }

        // sample order does not matter
        let perm: Vec<usize> = (0..60).rev().collect();
        let xp = x.select(ndarray::Axis(0), &perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let permuted = GaussianClassStats::fit(xp.view(), &yp).unwrap();
        for (a, b) in stats.pooled_cov().iter().zip(permuted.pooled_cov().iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        // duplicating the data leaves the statistics unchanged
        let xd = ndarray::concatenate(ndarray::Axis(0), &[x.view(), x.view()]).unwrap();
        let yd: Vec<usize> = y.iter().chain(&y).copied().collect();
        let dup = GaussianClassStats::fit(xd.view(), &yd).unwrap();
        for (a, b) in stats.pooled_cov().iter().zip(dup.pooled_cov().iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        // invertible linear maps leave scores unchanged
        let a = array![[2.0, 0.5, 0.0], [0.1, 1.0, -0.3], [0.0, 0.7, 1.5]];
        let xa = x.dot(&a.t());
        let mapped = GaussianClassStats::fit(xa.view(), &y).unwrap();
        let query = array![[0.3, -1.0, 2.0], [5.0, 5.0, -5.0]];
        for q in query.outer_iter() {
            let s1 = stats.mahalanobis_score(q).unwrap();
            let s2 = mapped.mahalanobis_score(a.dot(&q).view()).unwrap();
            assert!(s1 >= 0.0);
            assert!((s1 - s2).abs() < 1e-6 * (1.0 + s1));
        }
    }
}
