//! Seeded synthetic data and a linear softmax classifier.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One Gaussian component of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Row-major `d x d` symmetric positive-definite covariance.
    pub covariance: Array2<f64>,
    pub label: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    pub components: Vec<GaussianComponent>,
}

/// Features (one sample per row) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
}

fn cholesky_factor(cov: &Array2<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    if cov.ncols() != d {
        return Err(Error::NotPositiveDefinite("covariance is not square".into()));
    }
    for i in 0..d {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                return Err(Error::NotPositiveDefinite("covariance is not symmetric".into()));
            }
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[(i, j)]);
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("covariance".into()))
}

/// Draws every component in order (rows grouped by component). Each sample is
/// `mean + L z` with `L` the Cholesky factor and `z` standard normal.
pub fn sample_mixture(spec: &GaussianMixtureSpec, seed: u64) -> Result<Labeled> {
    let d = spec
        .components
        .first()
        .map(|c| c.mean.len())
        .ok_or(Error::Empty)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = spec.components.iter().map(|c| c.count).sum();
    let mut x = Array2::zeros((total, d));
    let mut y = Vec::with_capacity(total);
    let mut row = 0;
    for comp in &spec.components {
        if comp.mean.len() != d || comp.covariance.dim() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: comp.mean.len(),
            });
        }
        if comp.count == 0 {
            return Err(Error::InvalidParameter("component count must be at least 1".into()));
        }
        let l = cholesky_factor(&comp.covariance)?;
        for _ in 0..comp.count {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            for i in 0..d {
                let mut v = comp.mean[i];
                for (j, zj) in z.iter().enumerate().take(i + 1) {
                    v += l[(i, j)] * zj;
                }
                x[(row, i)] = v;
            }
            y.push(comp.label);
            row += 1;
        }
    }
    Ok(Labeled { x, y })
}

/// Settings of the two-Gaussian motivating experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub class_means: [[f64; 2]; 2],
    pub shared_covariance: [[f64; 2]; 2],
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub ood_mean: [f64; 2],
    pub ood_variance: f64,
    pub ood_count: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            class_means: [[-0.8, 0.0], [0.8, 0.2]],
            shared_covariance: [[1.0, 0.6], [0.6, 1.2]],
            train_per_class: 2000,
            test_per_class: 2000,
            ood_mean: [-4.0, 4.0],
            ood_variance: 0.25,
            ood_count: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    pub train: Labeled,
    pub test: Labeled,
    pub ood: Array2<f64>,
}

impl ToyConfig {
    pub fn id_spec(&self, per_class: usize) -> GaussianMixtureSpec {
        let cov = Array2::from_shape_fn((2, 2), |(i, j)| self.shared_covariance[i][j]);
        GaussianMixtureSpec {
            components: self
                .class_means
                .iter()
                .enumerate()
                .map(|(label, mean)| GaussianComponent {
                    mean: mean.to_vec(),
                    covariance: cov.clone(),
                    label,
                    count: per_class,
                })
                .collect(),
        }
    }

    pub fn ood_spec(&self) -> GaussianMixtureSpec {
        GaussianMixtureSpec {
            components: vec![GaussianComponent {
                mean: self.ood_mean.to_vec(),
                covariance: Array2::eye(2) * self.ood_variance,
                label: 0,
                count: self.ood_count,
            }],
        }
    }
}

/// Train, test and OOD splits of the two-Gaussian problem. Each split has its
/// own stream derived from `seed`.
pub fn make_toy_experiment(config: &ToyConfig, seed: u64) -> Result<ToyData> {
    let stream = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
    Ok(ToyData {
        train: sample_mixture(&config.id_spec(config.train_per_class), stream(1))?,
        test: sample_mixture(&config.id_spec(config.test_per_class), stream(2))?,
        ood: sample_mixture(&config.ood_spec(), stream(3))?.x,
    })
}

/// Center of blob `c` out of `n_classes` placed evenly on a circle.
pub fn blob_center(c: usize, n_classes: usize, radius: f64) -> [f64; 2] {
    let angle = 2.0 * std::f64::consts::PI * c as f64 / n_classes as f64;
    [radius * angle.cos(), radius * angle.sin()]
}

/// Isotropic Gaussian blobs on a circle, one class per blob.
pub fn make_blobs(n_classes: usize, radius: f64, std: f64, per_class: usize, seed: u64) -> Result<Labeled> {
    if n_classes < 2 {
        return Err(Error::InvalidParameter("need at least two blobs".into()));
    }
    if std.is_nan() || std <= 0.0 {
        return Err(Error::InvalidParameter("blob std must be positive".into()));
    }
    let spec = GaussianMixtureSpec {
        components: (0..n_classes)
            .map(|c| GaussianComponent {
                mean: blob_center(c, n_classes, radius).to_vec(),
                covariance: Array2::eye(2) * (std * std),
                label: c,
                count: per_class,
            })
            .collect(),
    };
    sample_mixture(&spec, seed)
}

/// Multinomial logistic regression: `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxModel {
    /// `classes x features`
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    /// Mean cross-entropy on the training set after the last epoch.
    pub training_loss: f64,
}

impl LinearSoftmaxModel {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            weights: Array2::zeros((classes, features)),
            biases: Array1::zeros(classes),
            training_loss: (classes as f64).ln(),
        }
    }

    pub fn classes(&self) -> usize {
        self.biases.len()
    }

    /// Class probabilities, one row per sample.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut logits = x.dot(&self.weights.t());
        logits += &self.biases;
        for mut row in logits.outer_iter_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|z| (z - max).exp());
            let total = row.sum();
            row /= total;
        }
        logits
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        self.predict_proba(x)
            .outer_iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
                    .0
            })
            .collect()
    }
}

/// Mean cross-entropy and its gradient with respect to weights and biases.
pub fn loss_and_gradient(
    model: &LinearSoftmaxModel,
    x: ArrayView2<'_, f64>,
    y: &[usize],
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut probs = model.predict_proba(x);
    let loss = probs
        .outer_iter()
        .zip(y)
        .map(|(p, &c)| -p[c].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n;
    // dL/dlogits = p - onehot
    for (mut p, &c) in probs.outer_iter_mut().zip(y) {
        p[c] -= 1.0;
    }
    let grad_w = probs.t().dot(&x) / n;
    let grad_b = probs.sum_axis(Axis(0)) / n;
    (loss, grad_w, grad_b)
}

/// Full-batch gradient descent on the mean cross-entropy from a zero start.
pub fn train_softmax(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    epochs: usize,
    learning_rate: f64,
) -> Result<LinearSoftmaxModel> {
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let classes = y.iter().max().map_or(0, |c| c + 1);
    let mut seen = vec![false; classes];
    for &c in y {
        seen[c] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::SingleClass);
    }
    let mut model = LinearSoftmaxModel::zeros(classes, x.ncols());
    for _ in 0..epochs {
        let (_, gw, gb) = loss_and_gradient(&model, x, y);
        model.weights.scaled_add(-learning_rate, &gw);
        model.biases.scaled_add(-learning_rate, &gb);
    }
    model.training_loss = loss_and_gradient(&model, x, y).0;
    if !model.training_loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    Ok(model)
}
