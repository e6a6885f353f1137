//! Discrete reference clouds: a midpoint Cartesian grid on the unit hypercube
//! pushed through a per-coordinate inverse CDF.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special;

/// Largest number of atoms a grid may hold.
pub const MAX_GRID_ATOMS: usize = 1 << 24;

/// Marginal distribution shared by every coordinate of the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ReferenceFamily {
    /// Exponential with the given rate; support `[0, inf)`.
    Exponential { rate: f64 },
    /// Beta(alpha, beta); support `[0, 1]`.
    Beta { alpha: f64, beta: f64 },
}

impl Default for ReferenceFamily {
    fn default() -> Self {
        Self::Beta {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl ReferenceFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Beta { alpha, beta } => {
                alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "reference parameters must be positive and finite: {self:?}"
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exp",
            Self::Beta { .. } => "beta",
        }
    }

    /// Quantile function of the marginal at `u` in the open interval (0, 1).
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::ProbabilityOutOfRange(u));
        }
        Ok(match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Beta { alpha, beta } => special::beta_cdf_inverse(u, alpha, beta),
        })
    }

    /// CDF of the marginal.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Beta { alpha, beta } => special::beta_cdf(x, alpha, beta),
        }
    }
}

/// Requested reference: marginal family, dimension and atom budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub family: ReferenceFamily,
    pub dim: usize,
    pub atom_budget: usize,
}

/// Target atoms (one per row) with their probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCloud {
    atoms: Array2<f64>,
    weights: Vec<f64>,
}

impl ReferenceCloud {
    /// Wraps explicit atoms and weights after checking the weight simplex.
    pub fn new(atoms: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::Empty);
        }
        if weights.len() != atoms.nrows() {
            return Err(Error::DimensionMismatch {
                expected: atoms.nrows(),
                got: weights.len(),
            });
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference atoms".into()));
        }
        check_simplex(&weights)?;
        Ok(Self { atoms, weights })
    }

    /// A cloud with uniform weights.
    pub fn uniform(atoms: Array2<f64>) -> Result<Self> {
        let q = atoms.nrows().max(1);
        Self::new(atoms, vec![1.0 / q as f64; q])
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.atoms.ncols()
    }
}

pub(crate) fn check_simplex(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidWeights("non-positive or non-finite weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(())
}

/// Per-axis grid resolution: the smallest `k` with `k^dim >= budget`.
fn per_axis_count(dim: usize, budget: usize) -> Result<usize> {
    let fits = |k: usize| -> Option<usize> {
        let mut total = 1usize;
        for _ in 0..dim {
            total = total.checked_mul(k)?;
        }
        Some(total)
    };
    let mut k = (budget as f64).powf(1.0 / dim as f64).floor().max(1.0) as usize;
    // correct floating point drift in either direction
    while k > 1 && fits(k - 1).is_some_and(|t| t >= budget) {
        k -= 1;
    }
    loop {
        match fits(k) {
            Some(t) if t >= budget => break,
            Some(_) => k += 1,
            None => {
                return Err(Error::GridTooLarge {
                    per_axis: k,
                    dim,
                    limit: MAX_GRID_ATOMS,
                })
            }
        }
    }
    match fits(k) {
        Some(t) if t <= MAX_GRID_ATOMS => Ok(k),
        _ => Err(Error::GridTooLarge {
            per_axis: k,
            dim,
            limit: MAX_GRID_ATOMS,
        }),
    }
}

/// Midpoint Cartesian grid on `(0,1)^dim` with at least `budget` points.
///
/// With `k` points per axis the coordinates are `(i + 0.5) / k`; all `k^dim`
/// points are kept. Rows enumerate the product with the last axis varying fastest.
pub fn unit_grid(dim: usize, budget: usize) -> Result<Array2<f64>> {
    if dim == 0 || budget == 0 {
        return Err(Error::InvalidParameter(
            "grid dimension and budget must be at least 1".into(),
        ));
    }
    let k = per_axis_count(dim, budget)?;
    let q = k.pow(dim as u32);
    let mut grid = Array2::zeros((q, dim));
    for (row, mut point) in grid.outer_iter_mut().enumerate() {
        let mut rest = row;
        for axis in (0..dim).rev() {
            point[axis] = ((rest % k) as f64 + 0.5) / k as f64;
            rest /= k;
        }
    }
    Ok(grid)
}

/// Samples the reference cloud by transforming a unit grid coordinate-wise.
pub fn sample_reference(spec: &ReferenceSpec) -> Result<ReferenceCloud> {
    spec.family.validate()?;
    let grid = unit_grid(spec.dim, spec.atom_budget)?;
    // grid values repeat across rows; transform each distinct level once
    let k = per_axis_count(spec.dim, spec.atom_budget)?;
    let levels = (0..k)
        .map(|i| spec.family.inverse_cdf((i as f64 + 0.5) / k as f64))
        .collect::<Result<Vec<_>>>()?;
    let atoms = grid.mapv(|u| levels[(u * k as f64 - 0.5).round() as usize]);
    ReferenceCloud::uniform(atoms)
}
