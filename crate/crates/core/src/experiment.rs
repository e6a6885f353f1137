//! End-to-end synthetic experiments: the two-Gaussian robustness study and
//! the blobs score map.

use ndarray::{Array2, ArrayView2, Axis};

use crate::baselines::{one_minus_msp, predictive_entropy, GaussianClassStats};
use crate::error::Result;
use crate::metrics::roc_auc;
use crate::rank::{RankConfig, RankModel};
use crate::scores::ScoreMatrix;
use crate::synth::{make_blobs, make_toy_experiment, train_softmax, LinearSoftmaxModel, ToyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyExperimentConfig {
    pub data: ToyConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Number of training rows (evenly strided) whose score vectors calibrate
    /// the rank model.
    pub calibration_size: usize,
    pub rank: RankConfig,
}

impl Default for ToyExperimentConfig {
    fn default() -> Self {
        Self {
            data: ToyConfig::default(),
            epochs: 1000,
            learning_rate: 0.5,
            calibration_size: 1000,
            rank: RankConfig::default(),
        }
    }
}

/// ROC-AUC of one method on the two detection tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskAucs {
    pub misclassification: f64,
    pub ood: f64,
}

impl TaskAucs {
    pub fn worst(&self) -> f64 {
        self.misclassification.min(self.ood)
    }
}

/// Per-sample scores and the resulting table.
#[derive(Debug, Clone)]
pub struct ToyReport {
    pub msp: TaskAucs,
    pub mahalanobis: TaskAucs,
    pub vecuq: TaskAucs,
    /// Test rows first, then OOD rows.
    pub eval_msp: Vec<f64>,
    pub eval_mahalanobis: Vec<f64>,
    pub eval_vecuq: Vec<f64>,
    /// `true` for OOD rows.
    pub is_ood: Vec<bool>,
    /// `true` for test rows the classifier got wrong (always `false` for OOD rows).
    pub misclassified: Vec<bool>,
    pub test_accuracy: f64,
    pub per_class_error: Vec<f64>,
    pub sinkhorn_residual: f64,
    pub sinkhorn_iterations: usize,
}

impl ToyReport {
    pub fn rows(&self) -> [(&'static str, TaskAucs); 3] {
        [
            ("1-MSP", self.msp),
            ("Mahalanobis", self.mahalanobis),
            ("VecUQ-OT", self.vecuq),
        ]
    }
}

fn msp_scores(model: &LinearSoftmaxModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    model
        .predict_proba(x)
        .outer_iter()
        .map(|p| one_minus_msp(p.as_slice().expect("standard layout")))
        .collect()
}

/// Trains the classifier, scores test and OOD points with 1-MSP, the
/// Mahalanobis score and the transported combination of both, and reports
/// misclassification and OOD ROC-AUC for each.
pub fn run_toy(config: &ToyExperimentConfig, seed: u64) -> Result<ToyReport> {
    let data = make_toy_experiment(&config.data, seed)?;
    let clf = train_softmax(data.train.x.view(), &data.train.y, config.epochs, config.learning_rate)?;
    let stats = GaussianClassStats::fit(data.train.x.view(), &data.train.y)?;

    let stride = (data.train.x.nrows() / config.calibration_size.max(1)).max(1);
    let cal_rows: Vec<usize> = (0..data.train.x.nrows()).step_by(stride).collect();
    let cal_x = data.train.x.select(Axis(0), &cal_rows);
    let calibration = ScoreMatrix::stack(
        &[msp_scores(&clf, cal_x.view())?, stats.mahalanobis_scores(cal_x.view())?],
        &["one_minus_msp", "mahalanobis"],
    )?;
    let rank = RankModel::fit(&calibration, &config.rank)?;

    let eval_x = ndarray::concatenate(Axis(0), &[data.test.x.view(), data.ood.view()])
        .expect("test and OOD share the feature dimension");
    let n_test = data.test.x.nrows();
    let eval_msp = msp_scores(&clf, eval_x.view())?;
    let eval_maha = stats.mahalanobis_scores(eval_x.view())?;
    let query = ScoreMatrix::stack(&[eval_msp.clone(), eval_maha.clone()], &["one_minus_msp", "mahalanobis"])?;
    let eval_vecuq = rank.rank_score(&query)?;

    let predicted = clf.predict(data.test.x.view());
    let wrong: Vec<bool> = predicted.iter().zip(&data.test.y).map(|(p, y)| p != y).collect();
    let is_ood: Vec<bool> = (0..eval_x.nrows()).map(|i| i >= n_test).collect();
    let mut misclassified = wrong.clone();
    misclassified.resize(eval_x.nrows(), false);

    let aucs = |scores: &[f64]| -> Result<TaskAucs> {
        Ok(TaskAucs {
            misclassification: roc_auc(&scores[..n_test], &wrong)?,
            ood: roc_auc(scores, &is_ood)?,
        })
    };
    let classes = data.test.y.iter().max().map_or(0, |c| c + 1);
    let per_class_error = (0..classes)
        .map(|c| {
            let (errors, total) = wrong
                .iter()
                .zip(&data.test.y)
                .filter(|(_, &y)| y == c)
                .fold((0usize, 0usize), |(e, t), (&w, _)| (e + w as usize, t + 1));
            errors as f64 / total.max(1) as f64
        })
        .collect();

    Ok(ToyReport {
        msp: aucs(&eval_msp)?,
        mahalanobis: aucs(&eval_maha)?,
        vecuq: aucs(&eval_vecuq)?,
        test_accuracy: 1.0 - wrong.iter().filter(|&&w| w).count() as f64 / n_test as f64,
        per_class_error,
        sinkhorn_residual: rank.coupling().marginal_residual(),
        sinkhorn_iterations: rank.coupling().iterations_run(),
        eval_msp,
        eval_mahalanobis: eval_maha,
        eval_vecuq,
        is_ood,
        misclassified,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobsConfig {
    pub n_classes: usize,
    pub radius: f64,
    pub std: f64,
    pub per_class: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub calibration_size: usize,
    /// Points per side of the evaluation grid.
    pub grid_side: usize,
    /// Half-width of the square evaluation grid.
    pub grid_extent: f64,
    pub rank: RankConfig,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            radius: 8.0,
            std: 1.0,
            per_class: 200,
            epochs: 2000,
            learning_rate: 0.1,
            calibration_size: 1000,
            grid_side: 60,
            grid_extent: 14.0,
            rank: RankConfig::default(),
        }
    }
}

/// Entropy, Mahalanobis and combined scores at a set of points.
#[derive(Debug, Clone)]
pub struct ScoredPoints {
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub entropy: Vec<f64>,
    pub mahalanobis: Vec<f64>,
    pub vecuq: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BlobsReport {
    pub data: ScoredPoints,
    pub grid: ScoredPoints,
    pub train_accuracy: f64,
}

/// Scores the blob training points and a square grid around them.
pub fn run_blobs(config: &BlobsConfig, seed: u64) -> Result<BlobsReport> {
    let data = make_blobs(config.n_classes, config.radius, config.std, config.per_class, seed)?;
    let clf = train_softmax(data.x.view(), &data.y, config.epochs, config.learning_rate)?;
    let stats = GaussianClassStats::fit(data.x.view(), &data.y)?;

    let entropies = |x: ArrayView2<'_, f64>| -> Result<Vec<f64>> {
        clf.predict_proba(x)
            .outer_iter()
            .map(|p| predictive_entropy(p.as_slice().expect("standard layout")))
            .collect()
    };
    let names = ["entropy", "mahalanobis"];
    let stride = (data.x.nrows() / config.calibration_size.max(1)).max(1);
    let cal_rows: Vec<usize> = (0..data.x.nrows()).step_by(stride).collect();
    let cal_x = data.x.select(Axis(0), &cal_rows);
    let calibration = ScoreMatrix::stack(
        &[entropies(cal_x.view())?, stats.mahalanobis_scores(cal_x.view())?],
        &names,
    )?;
    let rank = RankModel::fit(&calibration, &config.rank)?;

    let score = |x: Array2<f64>, labels: Option<Vec<usize>>| -> Result<ScoredPoints> {
        let entropy = entropies(x.view())?;
        let mahalanobis = stats.mahalanobis_scores(x.view())?;
        let vecuq = rank.rank_score(&ScoreMatrix::stack(&[entropy.clone(), mahalanobis.clone()], &names)?)?;
        Ok(ScoredPoints {
            x,
            labels,
            entropy,
            mahalanobis,
            vecuq,
        })
    };

    let side = config.grid_side.max(2);
    let step = 2.0 * config.grid_extent / (side - 1) as f64;
    let grid = Array2::from_shape_fn((side * side, 2), |(i, k)| {
        let idx = if k == 0 { i % side } else { i / side };
        -config.grid_extent + step * idx as f64
    });
    let predicted = clf.predict(data.x.view());
    let train_accuracy =
        predicted.iter().zip(&data.y).filter(|(a, b)| a == b).count() as f64 / data.y.len() as f64;

    Ok(BlobsReport {
        data: score(data.x.clone(), Some(data.y.clone()))?,
        grid: score(grid, None)?,
        train_accuracy,
    })
}
