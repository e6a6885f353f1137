//! Score containers and the min-max scalers applied before transport fitting.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x m` matrix of nonnegative uncertainty scores: one row per sample,
/// one column per measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: Array2<f64>,
    names: Vec<String>,
}

impl ScoreMatrix {
    /// Validates and wraps a row-major matrix of scores.
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        let (n, m) = values.dim();
        if n == 0 || m == 0 {
            return Err(Error::Empty);
        }
        if names.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: names.len(),
            });
        }
        for ((row, column), &value) in values.indexed_iter() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidScore { column, row, value });
            }
        }
        Ok(Self { values, names })
    }

    /// Like [`ScoreMatrix::new`] with generated names `s0, s1, ...`.
    pub fn unnamed(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|k| format!("s{k}")).collect();
        Self::new(values, names)
    }

    /// Stacks per-measure columns side by side.
    pub fn stack(columns: &[Vec<f64>], names: &[&str]) -> Result<Self> {
        let m = columns.len();
        if m == 0 || columns[0].is_empty() {
            return Err(Error::Empty);
        }
        if names.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: names.len(),
            });
        }
        let n = columns[0].len();
        for (column, values) in columns.iter().enumerate() {
            if values.len() != n {
                return Err(Error::LengthMismatch {
                    column,
                    len: values.len(),
                    expected: n,
                });
            }
            if let Some((row, &value)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || **v < 0.0)
            {
                return Err(Error::InvalidScore { column, row, value });
            }
        }
        let values = Array2::from_shape_fn((n, m), |(i, k)| columns[k][i]);
        Ok(Self {
            values,
            names: names.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Which min-max statistics a [`Scaler`] is fitted with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    /// Separate min and max per column.
    #[default]
    FeatureWise,
    /// One min and max over the whole matrix.
    Global,
    /// No scaling.
    Identity,
}

impl ScalingKind {
    pub const ALL: [ScalingKind; 3] = [Self::FeatureWise, Self::Global, Self::Identity];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FeatureWise => "featurewise",
            Self::Global => "global",
            Self::Identity => "identity",
        }
    }
}

impl std::str::FromStr for ScalingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "featurewise" => Ok(Self::FeatureWise),
            "global" => Ok(Self::Global),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown scaling '{other}' (expected featurewise, global or identity)"
            ))),
        }
    }
}

/// Fitted min-max parameters mapping raw scores into the transport working space.
///
/// `Global` stores the single global extremes replicated across all columns.
/// `Identity` stores mins of 0 and maxes of 1 and is applied as an exact no-op.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    kind: ScalingKind,
    mins: Vec<f64>,
    maxes: Vec<f64>,
}

impl Scaler {
    pub fn fit(kind: ScalingKind, data: &ScoreMatrix) -> Self {
        let values = data.values();
        let m = data.ncols();
        let (mins, maxes) = match kind {
            ScalingKind::FeatureWise => values
                .axis_iter(Axis(1))
                .map(|col| {
                    col.iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                            (lo.min(v), hi.max(v))
                        })
                })
                .unzip(),
            ScalingKind::Global => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (vec![lo; m], vec![hi; m])
            }
            ScalingKind::Identity => (vec![0.0; m], vec![1.0; m]),
        };
        Self { kind, mins, maxes }
    }

    /// Rebuilds a scaler from stored parameters.
    pub fn from_parts(kind: ScalingKind, mins: Vec<f64>, maxes: Vec<f64>) -> Result<Self> {
        if mins.len() != maxes.len() || mins.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: mins.len(),
                got: maxes.len(),
            });
        }
        if mins
            .iter()
            .zip(&maxes)
            .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
        {
            return Err(Error::InvalidParameter(
                "scaler requires finite mins <= maxes".into(),
            ));
        }
        Ok(Self { kind, mins, maxes })
    }

    pub fn kind(&self) -> ScalingKind {
        self.kind
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxes(&self) -> &[f64] {
        &self.maxes
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Maps raw scores to `(x - min) / (max - min)` per column. Constant
    /// columns map to 0. Values outside the fitted range are not clipped, so the
    /// output may leave `[0, 1]` and is returned as a plain matrix.
    pub fn apply(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: data.ncols(),
            });
        }
        if self.kind == ScalingKind::Identity {
            return Ok(data.to_owned());
        }
        let mut out = data.to_owned();
        for (k, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.mins[k], self.maxes[k]);
            let span = hi - lo;
            if span > 0.0 {
                col.mapv_inplace(|x| (x - lo) / span);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn two_rows() -> ScoreMatrix {
        ScoreMatrix::unnamed(array![[1.0, 10.0], [3.0, 30.0]]).unwrap()
    }

    #[test]
    fn stack_places_columns() {
        let s = ScoreMatrix::stack(&[vec![1.0, 2.0], vec![3.0, 4.0]], &["a", "b"]).unwrap();
        assert_eq!(s.values(), array![[1.0, 3.0], [2.0, 4.0]]);
        assert_eq!(s.names(), &["a".to_string(), "b".to_string()]);

        let single = ScoreMatrix::stack(&[vec![0.5]], &["x"]).unwrap();
        assert_eq!(single.values().dim(), (1, 1));
    }

    #[test]
    fn stack_rejects_bad_input() {
        let err = ScoreMatrix::stack(&[vec![1.0], vec![-0.1]], &["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::InvalidScore { column: 1, .. }));
        let err = ScoreMatrix::stack(&[vec![1.0, f64::NAN]], &["a"]).unwrap_err();
        assert!(matches!(err, Error::InvalidScore { column: 0, row: 1, .. }));
        let err = ScoreMatrix::stack(&[vec![1.0, 2.0], vec![1.0]], &["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { column: 1, .. }));
        assert_eq!(ScoreMatrix::stack(&[], &[]).unwrap_err(), Error::Empty);
    }

    #[test]
    fn fit_kinds() {
        let d = two_rows();
        let fw = Scaler::fit(ScalingKind::FeatureWise, &d);
        assert_eq!(fw.mins(), &[1.0, 10.0]);
        assert_eq!(fw.maxes(), &[3.0, 30.0]);

        let g = Scaler::fit(ScalingKind::Global, &d);
        assert_eq!(g.mins(), &[1.0, 1.0]);
        assert_eq!(g.maxes(), &[30.0, 30.0]);

        let id = Scaler::fit(ScalingKind::Identity, &d);
        assert_eq!(id.apply(d.values()).unwrap(), d.values());
    }

    #[test]
    fn apply_examples() {
        let s = Scaler::fit(ScalingKind::FeatureWise, &two_rows());
        assert_eq!(s.apply(array![[2.0, 20.0]].view()).unwrap(), array![[0.5, 0.5]]);
        // no clipping
        assert_eq!(s.apply(array![[5.0, 10.0]].view()).unwrap(), array![[2.0, 0.0]]);
        assert!(s.apply(array![[1.0]].view()).is_err());

        let constant = ScoreMatrix::unnamed(array![[7.0], [7.0]]).unwrap();
        let s = Scaler::fit(ScalingKind::FeatureWise, &constant);
        assert_eq!(s.apply(array![[7.0], [9.0]].view()).unwrap(), array![[0.0], [0.0]]);
    }

    fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
        (1usize..8, 1usize..4).prop_flat_map(|(n, m)| {
            proptest::collection::vec(0.0f64..100.0, n * m)
                .prop_map(move |v| Array2::from_shape_vec((n, m), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn featurewise_lands_in_unit_box(values in matrix_strategy()) {
            let d = ScoreMatrix::unnamed(values).unwrap();
            let s = Scaler::fit(ScalingKind::FeatureWise, &d);
            let out = s.apply(d.values()).unwrap();
            prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn global_is_one_affine_map(values in matrix_strategy()) {
            let d = ScoreMatrix::unnamed(values).unwrap();
            let s = Scaler::fit(ScalingKind::Global, &d);
            let out = s.apply(d.values()).unwrap();
            let span = s.maxes()[0] - s.mins()[0];
            prop_assume!(span > 0.0);
            for (x, y) in d.values().iter().zip(out.iter()) {
                prop_assert!((y * span + s.mins()[0] - x).abs() < 1e-9);
            }
        }
    }
}
