//! The fitted rank pipeline: scale, add outer anchors, couple to the reference
//! and score new vectors by the norm of their barycentric projection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reference::{sample_reference, ReferenceCloud, ReferenceFamily, ReferenceSpec};
use crate::scores::{Scaler, ScalingKind, ScoreMatrix};
use crate::sinkhorn::{fit_coupling, squared_distance, Coupling, SinkhornConfig};

/// Largest number of non-constant measures for which anchors are generated.
pub const MAX_ANCHOR_DIM: usize = 20;

/// Outer anchor placement. `gamma = 0` disables anchors; otherwise anchors sit
/// at the nonzero corners of `[0, gamma * M_1] x ... x [0, gamma * M_m]`,
/// where `M_k` is the largest scaled calibration value of measure `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorConfig {
    pub gamma: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self { gamma: 5.0 }
    }
}

impl AnchorConfig {
    pub const DISABLED: AnchorConfig = AnchorConfig { gamma: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if self.gamma == 0.0 || (self.gamma.is_finite() && self.gamma > 1.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "anchor multiplier must be 0 or greater than 1, got {}",
                self.gamma
            )))
        }
    }

    pub fn enabled(&self) -> bool {
        self.gamma > 0.0
    }
}

/// Everything [`RankModel::fit`] needs besides the calibration scores.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RankConfig {
    pub scaling: ScalingKind,
    pub family: ReferenceFamily,
    pub anchors: AnchorConfig,
    pub sinkhorn: SinkhornConfig,
}

/// The `2^m - 1` nonzero corners of the box `prod_k [0, gamma * maxes[k]]`.
///
/// Row `r - 1` holds the corner whose bit `k` of `r` selects `gamma * maxes[k]`.
pub fn make_anchors(maxes: &[f64], gamma: f64) -> Result<Array2<f64>> {
    let m = maxes.len();
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "anchor multiplier must exceed 1, got {gamma}"
        )));
    }
    if m == 0 {
        return Err(Error::Empty);
    }
    if m > MAX_ANCHOR_DIM {
        return Err(Error::TooManyAnchors {
            dim: m,
            cap: MAX_ANCHOR_DIM,
        });
    }
    if let Some(bad) = maxes.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "anchor box extents must be positive, got {bad}"
        )));
    }
    let count = (1usize << m) - 1;
    Ok(Array2::from_shape_fn((count, m), |(row, k)| {
        if (row + 1) >> k & 1 == 1 {
            gamma * maxes[k]
        } else {
            0.0
        }
    }))
}

/// A fitted transport from score space to the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct RankModel {
    scaler: Scaler,
    anchors: AnchorConfig,
    anchor_count: usize,
    family: ReferenceFamily,
    reference: ReferenceCloud,
    coupling: Coupling,
    names: Vec<String>,
}

impl RankModel {
    /// Fits the pipeline on in-distribution calibration scores.
    ///
    /// Anchors are built in scaled space. Constant measures (scaled maximum 0)
    /// contribute only the 0 coordinate, so the anchor set is the corners over
    /// the remaining measures. The reference gets one atom per source row
    /// (rounded up to a full grid) and every source row carries equal mass.
    pub fn fit(calibration: &ScoreMatrix, config: &RankConfig) -> Result<Self> {
        config.anchors.validate()?;
        config.family.validate()?;
        config.sinkhorn.validate()?;
        let m = calibration.ncols();

        let scaler = Scaler::fit(config.scaling, calibration);
        let scaled = scaler.apply(calibration.values())?;

        let anchors = if config.anchors.enabled() {
            anchors_for(&scaled, config.anchors.gamma)?
        } else {
            Array2::zeros((0, m))
        };
        let anchor_count = anchors.nrows();
        let source = ndarray::concatenate(Axis(0), &[scaled.view(), anchors.view()])
            .expect("anchor rows share the score dimension");

        let p = source.nrows();
        let reference = sample_reference(&ReferenceSpec {
            family: config.family,
            dim: m,
            atom_budget: p,
        })?;
        let weights = vec![1.0 / p as f64; p];
        let coupling = fit_coupling(source.view(), &weights, &reference, &config.sinkhorn)?;

        Ok(Self {
            scaler,
            anchors: config.anchors,
            anchor_count,
            family: config.family,
            reference,
            coupling,
            names: calibration.names().to_vec(),
        })
    }

    /// Reassembles a model from stored components.
    pub fn from_parts(
        scaler: Scaler,
        anchors: AnchorConfig,
        anchor_count: usize,
        family: ReferenceFamily,
        coupling: Coupling,
        names: Vec<String>,
    ) -> Result<Self> {
        anchors.validate()?;
        family.validate()?;
        let m = scaler.dim();
        if names.len() != m || coupling.target_atoms().ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: names.len(),
            });
        }
        if anchor_count > coupling.source_atoms().nrows() {
            return Err(Error::InvalidParameter(
                "anchor count exceeds source rows".into(),
            ));
        }
        let reference = ReferenceCloud::new(
            coupling.target_atoms().clone(),
            coupling.target_weights().to_vec(),
        )?;
        Ok(Self {
            scaler,
            anchors,
            anchor_count,
            family,
            reference,
            coupling,
            names,
        })
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }
    pub fn anchor_config(&self) -> AnchorConfig {
        self.anchors
    }
    /// Number of anchor rows appended after the calibration block.
    pub fn anchor_count(&self) -> usize {
        self.anchor_count
    }
    pub fn calibration_count(&self) -> usize {
        self.coupling.source_atoms().nrows() - self.anchor_count
    }
    pub fn family(&self) -> ReferenceFamily {
        self.family
    }
    pub fn reference(&self) -> &ReferenceCloud {
        &self.reference
    }
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }
    pub fn measure_names(&self) -> &[String] {
        &self.names
    }
    pub fn epsilon(&self) -> f64 {
        self.coupling.epsilon()
    }
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Projection weights of one scaled query over the reference atoms.
    pub fn projection_weights(&self, scaled: ArrayView1<'_, f64>) -> Vec<f64> {
        let atoms = self.reference.atoms();
        let eps = self.coupling.epsilon();
        let mut logits: Vec<f64> = atoms
            .outer_iter()
            .zip(self.coupling.log_v())
            .map(|(atom, lv)| lv - squared_distance(scaled, atom) / eps)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        logits.iter_mut().for_each(|w| *w /= total);
        logits
    }

    /// Barycentric projection of rows already in scaled space.
    pub fn project_scaled(&self, scaled: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let m = self.dim();
        if scaled.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: scaled.ncols(),
            });
        }
        let atoms = self.reference.atoms();
        // A convex combination stays inside the atoms' bounding box; clamping
        // removes the last-ulp overshoot rounding can introduce when the
        // weight sits almost entirely on an extreme atom.
        let bounds: Vec<(f64, f64)> = atoms
            .columns()
            .into_iter()
            .map(|c| c.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x))))
            .collect();
        let rows: Vec<Array1<f64>> = (0..scaled.nrows())
            .into_par_iter()
            .map(|i| {
                let w = self.projection_weights(scaled.row(i));
                let mut out = Array1::zeros(m);
                for (atom, wj) in atoms.outer_iter().zip(&w) {
                    out.scaled_add(*wj, &atom);
                }
                for (x, &(lo, hi)) in out.iter_mut().zip(&bounds) {
                    *x = x.clamp(lo, hi);
                }
                out
            })
            .collect();
        let mut out = Array2::zeros((rows.len(), m));
        for (mut dst, src) in out.outer_iter_mut().zip(rows) {
            dst.assign(&src);
        }
        Ok(out)
    }

    /// Rank vectors of raw query scores.
    pub fn project(&self, query: &ScoreMatrix) -> Result<Array2<f64>> {
        self.project_values(query.values())
    }

    /// Like [`RankModel::project`] for an unvalidated raw matrix.
    pub fn project_values(&self, query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let scaled = self.scaler.apply(query)?;
        self.project_scaled(scaled.view())
    }

    /// Distance of each rank vector from the origin; larger means more uncertain.
    pub fn rank_score(&self, query: &ScoreMatrix) -> Result<Vec<f64>> {
        Ok(norms(&self.project(query)?))
    }

    pub fn rank_score_values(&self, query: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(norms(&self.project_values(query)?))
    }

    /// The `v`-weighted mean of the reference atoms: the limit of the
    /// projection when all kernel terms are equal.
    pub fn v_barycenter(&self) -> Array1<f64> {
        let log_v = self.coupling.log_v();
        let max = log_v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v: Vec<f64> = log_v.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = v.iter().sum();
        let mut out = Array1::zeros(self.dim());
        for (atom, vj) in self.reference.atoms().outer_iter().zip(&v) {
            out.scaled_add(vj / total, &atom);
        }
        out
    }
}

fn norms(vectors: &Array2<f64>) -> Vec<f64> {
    vectors
        .outer_iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect()
}

fn anchors_for(scaled: &Array2<f64>, gamma: f64) -> Result<Array2<f64>> {
    let m = scaled.ncols();
    let maxes: Vec<f64> = scaled
        .axis_iter(Axis(1))
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let active: Vec<usize> = (0..m).filter(|&k| maxes[k] > 0.0).collect();
    if active.is_empty() {
        return Ok(Array2::zeros((0, m)));
    }
    let active_maxes: Vec<f64> = active.iter().map(|&k| maxes[k]).collect();
    let corners = make_anchors(&active_maxes, gamma)?;
    let mut out = Array2::zeros((corners.nrows(), m));
    for (slot, &k) in active.iter().enumerate() {
        out.column_mut(k).assign(&corners.column(slot));
    }
    Ok(out)
}
