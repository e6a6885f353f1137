//! Entropy-regularized discrete optimal transport solved by log-domain
//! Sinkhorn iterations.
//!
//! The plan is kept in scaling form `P_ij = exp(log_u_i - C_ij / eps + log_v_j)`
//! with squared Euclidean cost. All updates are log-sum-exp reductions, so
//! cost entries that differ by many orders of magnitude never overflow or
//! underflow to NaN.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reference::{check_simplex, ReferenceCloud};

/// Stopping rule for [`fit_coupling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    /// L1 marginal residual at which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            tol: 1e-6,
            max_iters: 10_000,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// A fitted entropic transport plan in Sinkhorn scaling form.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    epsilon: f64,
    source_atoms: Array2<f64>,
    source_weights: Vec<f64>,
    target_atoms: Array2<f64>,
    target_weights: Vec<f64>,
    log_u: Vec<f64>,
    log_v: Vec<f64>,
    iterations_run: usize,
    marginal_residual: f64,
    converged: bool,
}

/// Stored fields of a [`Coupling`], used to rebuild one from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingParts {
    pub epsilon: f64,
    pub source_atoms: Array2<f64>,
    pub source_weights: Vec<f64>,
    pub target_atoms: Array2<f64>,
    pub target_weights: Vec<f64>,
    pub log_u: Vec<f64>,
    pub log_v: Vec<f64>,
    pub iterations_run: usize,
    pub marginal_residual: f64,
    pub converged: bool,
}

impl Coupling {
    pub fn from_parts(parts: CouplingParts) -> Result<Self> {
        let p = parts.source_atoms.nrows();
        let q = parts.target_atoms.nrows();
        if parts.source_atoms.ncols() != parts.target_atoms.ncols() {
            return Err(Error::DimensionMismatch {
                expected: parts.source_atoms.ncols(),
                got: parts.target_atoms.ncols(),
            });
        }
        for (len, expected) in [
            (parts.source_weights.len(), p),
            (parts.log_u.len(), p),
            (parts.target_weights.len(), q),
            (parts.log_v.len(), q),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, got: len });
            }
        }
        if !(parts.epsilon.is_finite() && parts.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if parts.log_u.iter().chain(&parts.log_v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("stored Sinkhorn scalings".into()));
        }
        check_simplex(&parts.source_weights)?;
        check_simplex(&parts.target_weights)?;
        Ok(Self {
            epsilon: parts.epsilon,
            source_atoms: parts.source_atoms,
            source_weights: parts.source_weights,
            target_atoms: parts.target_atoms,
            target_weights: parts.target_weights,
            log_u: parts.log_u,
            log_v: parts.log_v,
            iterations_run: parts.iterations_run,
            marginal_residual: parts.marginal_residual,
            converged: parts.converged,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn source_atoms(&self) -> &Array2<f64> {
        &self.source_atoms
    }
    pub fn source_weights(&self) -> &[f64] {
        &self.source_weights
    }
    pub fn target_atoms(&self) -> &Array2<f64> {
        &self.target_atoms
    }
    pub fn target_weights(&self) -> &[f64] {
        &self.target_weights
    }
    pub fn log_u(&self) -> &[f64] {
        &self.log_u
    }
    pub fn log_v(&self) -> &[f64] {
        &self.log_v
    }
    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }
    /// L1 distance between the plan's row sums and the source weights at the
    /// returned scalings. Column sums match the target weights up to rounding
    /// because the last update is always the column update.
    pub fn marginal_residual(&self) -> f64 {
        self.marginal_residual
    }
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Materializes the dense `p x q` plan.
    pub fn plan(&self) -> Array2<f64> {
        let cost = cost_matrix(self.source_atoms.view(), self.target_atoms.view())
            .expect("coupling atoms share a dimension");
        Array2::from_shape_fn(cost.dim(), |(i, j)| {
            (self.log_u[i] - cost[(i, j)] / self.epsilon + self.log_v[j]).exp()
        })
    }
}

/// Pairwise squared Euclidean distances between source and target rows.
pub fn cost_matrix(source: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if source.ncols() != target.ncols() {
        return Err(Error::DimensionMismatch {
            expected: source.ncols(),
            got: target.ncols(),
        });
    }
    Ok(Array2::from_shape_fn(
        (source.nrows(), target.nrows()),
        |(i, j)| squared_distance(source.row(i), target.row(j)),
    ))
}

#[inline]
pub(crate) fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `log(sum_i exp(x_i))` with the max shifted out.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `log_sum_exp(offset + row)` for a contiguous row.
#[inline]
fn lse_shifted(row: &[f64], offset: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (a, b) in row.iter().zip(offset) {
        max = max.max(a + b);
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for (a, b) in row.iter().zip(offset) {
        sum += (a + b - max).exp();
    }
    max + sum.ln()
}

/// `LSE_j(kernel_ij + other_j)` for every row of a row-major kernel.
fn row_lse(log_kernel: &[f64], width: usize, other: &[f64]) -> Vec<f64> {
    log_kernel
        .par_chunks(width)
        .map(|row| lse_shifted(row, other))
        .collect()
}

fn l1_residual(log_mass: &[f64], weights: &[f64]) -> f64 {
    log_mass
        .iter()
        .zip(weights)
        .map(|(lm, w)| (lm.exp() - w).abs())
        .sum()
}

/// Fits the entropic plan between weighted source atoms and a reference cloud.
///
/// Iterates alternating row and column scaling updates until the L1 residual
/// of the row marginal drops to `config.tol` or `config.max_iters` column
/// updates have been made. Falling short of the tolerance is reported through
/// [`Coupling::converged`], not as an error.
pub fn fit_coupling(
    source: ArrayView2<'_, f64>,
    source_weights: &[f64],
    reference: &ReferenceCloud,
    config: &SinkhornConfig,
) -> Result<Coupling> {
    config.validate()?;
    let target = reference.atoms();
    let (p, q) = (source.nrows(), target.nrows());
    if p == 0 {
        return Err(Error::Empty);
    }
    if source_weights.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: source_weights.len(),
        });
    }
    check_simplex(source_weights)?;
    check_simplex(reference.weights())?;

    let cost = cost_matrix(source, target.view())?;
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix".into()));
    }
    let eps = config.epsilon;
    // row-major -C/eps and its transpose for the column pass
    let log_kernel: Vec<f64> = cost.iter().map(|c| -c / eps).collect();
    let mut log_kernel_t = vec![0.0; p * q];
    for i in 0..p {
        for j in 0..q {
            log_kernel_t[j * p + i] = log_kernel[i * q + j];
        }
    }
    let log_mu: Vec<f64> = source_weights.iter().map(|w| w.ln()).collect();
    let log_nu: Vec<f64> = reference.weights().iter().map(|w| w.ln()).collect();

    let mut log_u = vec![0.0; p];
    let mut log_v = vec![0.0; q];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        let lse = row_lse(&log_kernel, q, &log_v);
        // row masses at the current scalings come for free from the row update
        if iterations > 0 {
            let row_mass: Vec<f64> = log_u.iter().zip(&lse).map(|(u, l)| u + l).collect();
            residual = l1_residual(&row_mass, source_weights);
            if residual <= config.tol {
                converged = true;
                break;
            }
        }
        for ((u, w), l) in log_u.iter_mut().zip(&log_mu).zip(&lse) {
            *u = w - l;
        }
        let lse = row_lse(&log_kernel_t, p, &log_u);
        for ((v, w), l) in log_v.iter_mut().zip(&log_nu).zip(&lse) {
            *v = w - l;
        }
        iterations += 1;
    }
    if !converged {
        residual = final_residual(&log_kernel, q, &log_u, &log_v, source_weights);
        converged = residual <= config.tol;
    }
    if log_u.iter().chain(&log_v).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Sinkhorn scalings".into()));
    }
    Ok(Coupling {
        epsilon: eps,
        source_atoms: source.to_owned(),
        source_weights: source_weights.to_vec(),
        target_atoms: target.clone(),
        target_weights: reference.weights().to_vec(),
        log_u,
        log_v,
        iterations_run: iterations,
        marginal_residual: residual,
        converged,
    })
}

fn final_residual(log_kernel: &[f64], width: usize, log_u: &[f64], log_v: &[f64], mu: &[f64]) -> f64 {
    let row_mass: Vec<f64> = row_lse(log_kernel, width, log_v)
        .iter()
        .zip(log_u)
        .map(|(l, u)| u + l)
        .collect();
    l1_residual(&row_mass, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn cloud(atoms: Array2<f64>) -> ReferenceCloud {
        ReferenceCloud::uniform(atoms).unwrap()
    }

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    /// Entropic objective of the 2x2 plan [[t, 1/2 - t], [1/2 - t, t]] for
    /// atoms {0, 1} on both sides, minimized by golden-section search.
    fn two_point_oracle(eps: f64) -> f64 {
        let objective = |t: f64| {
            let off = 0.5 - t;
            // diagonal cost 0, off-diagonal cost 1
            2.0 * off + eps * 2.0 * (t * t.ln() + off * off.ln())
        };
        let (mut a, mut b) = (1e-15, 0.5 - 1e-15);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if objective(c) < objective(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost_matrix(array![[0.0, 0.0]].view(), array![[3.0, 4.0]].view()).unwrap(), array![[25.0]]);
        assert_eq!(cost_matrix(array![[2.0]].view(), array![[2.0]].view()).unwrap(), array![[0.0]]);
        assert_eq!(
            cost_matrix(array![[1.0]].view(), array![[0.0], [2.0]].view()).unwrap(),
            array![[1.0, 1.0]]
        );
        assert!(cost_matrix(array![[1.0]].view(), array![[0.0, 1.0]].view()).is_err());
        let a = array![[0.1, 0.7], [0.3, 0.2], [1.0, 0.0]];
        let b = array![[0.5, 0.5], [0.9, 0.1]];
        assert_eq!(cost_matrix(a.view(), b.view()).unwrap(), cost_matrix(b.view(), a.view()).unwrap().t());
    }

    #[test]
    fn single_atom_plan_is_one() {
        for eps in [0.01, 0.5, 10.0] {
            let c = fit_coupling(
                array![[0.3, 2.0]].view(),
                &[1.0],
                &cloud(array![[0.9, 0.1]]),
                &SinkhornConfig { epsilon: eps, ..Default::default() },
            )
            .unwrap();
            assert!((c.plan()[(0, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_problem_matches_brute_force() {
        for eps in [0.5, 100.0, 1000.0] {
            let c = fit_coupling(
                array![[0.0], [1.0]].view(),
                &uniform(2),
                &cloud(array![[0.0], [1.0]]),
                &SinkhornConfig { epsilon: eps, tol: 1e-12, max_iters: 10_000 },
            )
            .unwrap();
            let plan = c.plan();
            let t = two_point_oracle(eps);
            assert!((plan[(0, 0)] - t).abs() < 1e-8, "eps={eps}: {} vs {t}", plan[(0, 0)]);
            assert!((plan[(0, 1)] - (0.5 - t)).abs() < 1e-8);
            for s in plan.sum_axis(ndarray::Axis(0)).iter().chain(plan.sum_axis(ndarray::Axis(1)).iter()) {
                assert!((s - 0.5).abs() < 1e-10);
            }
            // near-independent coupling once eps dwarfs the cost
            if eps == 1000.0 {
                assert!(plan.iter().all(|&x| (x - 0.25).abs() < 1e-3));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = cloud(array![[0.0], [1.0]]);
        let cfg = SinkhornConfig::default();
        let src = array![[0.0], [1.0]];
        assert!(matches!(
            fit_coupling(src.view(), &[1.0, 0.0], &r, &cfg),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            fit_coupling(src.view(), &[0.7, 0.7], &r, &cfg),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            fit_coupling(array![[f64::INFINITY], [1.0]].view(), &uniform(2), &r, &cfg),
            Err(Error::NonFinite(_))
        ));
        for bad in [
            SinkhornConfig { epsilon: 0.0, ..cfg },
            SinkhornConfig { tol: -1.0, ..cfg },
            SinkhornConfig { max_iters: 0, ..cfg },
        ] {
            assert!(fit_coupling(src.view(), &uniform(2), &r, &bad).is_err());
        }
    }

    #[test]
    fn shortfall_is_reported_not_raised() {
        let src = Array2::from_shape_fn((40, 2), |(i, k)| ((i * 7 + k * 3) % 11) as f64 / 10.0);
        let r = cloud(Array2::from_shape_fn((40, 2), |(i, k)| ((i * 5 + k) % 13) as f64 / 12.0));
        let c = fit_coupling(
            src.view(),
            &uniform(40),
            &r,
            &SinkhornConfig { epsilon: 0.01, tol: 1e-14, max_iters: 3 },
        )
        .unwrap();
        assert_eq!(c.iterations_run(), 3);
        assert!(!c.converged());
        assert!(c.marginal_residual() > 1e-14);
    }

    #[test]
    fn huge_cost_spread_stays_finite() {
        // components on wildly different scales
        let src = array![[1e-6, 0.0], [1e3, 2.0], [5e4, 1.0]];
        let r = cloud(array![[0.1, 0.1], [0.5, 0.9], [0.9, 0.5]]);
        let c = fit_coupling(src.view(), &uniform(3), &r, &SinkhornConfig { epsilon: 0.05, ..Default::default() })
            .unwrap();
        assert!(c.log_u().iter().chain(c.log_v()).all(|x| x.is_finite()));
        assert!(c.marginal_residual().is_finite());
        assert!(c.plan().iter().all(|x| x.is_finite()));
    }

    fn instance() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, f64)> {
        (1usize..25, 1usize..25, 1usize..4, prop_oneof![Just(0.1), Just(0.5), Just(2.0)]).prop_flat_map(
            |(p, q, m, eps)| {
                (
                    proptest::collection::vec(0.0f64..1.0, p * m)
                        .prop_map(move |v| Array2::from_shape_vec((p, m), v).unwrap()),
                    proptest::collection::vec(0.0f64..1.0, q * m)
                        .prop_map(move |v| Array2::from_shape_vec((q, m), v).unwrap()),
                    Just(eps),
                )
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn plan_is_feasible_and_positive((src, tgt, eps) in instance()) {
            let p = src.nrows();
            let cfg = SinkhornConfig { epsilon: eps, ..Default::default() };
            let c = fit_coupling(src.view(), &uniform(p), &cloud(tgt), &cfg).unwrap();
            prop_assert!(c.converged());
            let plan = c.plan();
            prop_assert!(plan.iter().all(|&x| x > 0.0));
            let rows: f64 = plan.sum_axis(ndarray::Axis(1)).iter().zip(c.source_weights()).map(|(a, b)| (a - b).abs()).sum();
            let cols: f64 = plan.sum_axis(ndarray::Axis(0)).iter().zip(c.target_weights()).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(rows <= cfg.tol * (1.0 + 1e-9));
            prop_assert!(cols <= 1e-12);
        }

        #[test]
        fn residual_does_not_exceed_first_iteration((src, tgt, eps) in instance()) {
            let p = src.nrows();
            let r = cloud(tgt);
            let first = fit_coupling(src.view(), &uniform(p), &r, &SinkhornConfig { epsilon: eps, max_iters: 1, ..Default::default() }).unwrap();
            let full = fit_coupling(src.view(), &uniform(p), &r, &SinkhornConfig { epsilon: eps, ..Default::default() }).unwrap();
            prop_assert!(full.marginal_residual() <= first.marginal_residual() + 1e-15);
        }

        #[test]
        fn scaling_cost_and_epsilon_together_keeps_plan((src, tgt, eps) in instance(), c in 0.5f64..4.0) {
            let p = src.nrows();
            let cfg = SinkhornConfig { epsilon: eps, tol: 1e-12, max_iters: 20_000 };
            let base = fit_coupling(src.view(), &uniform(p), &cloud(tgt.clone()), &cfg).unwrap();
            // stretching coordinates by sqrt(c) multiplies the cost by c
            let s = c.sqrt();
            let scaled = fit_coupling(
                src.mapv(|x| x * s).view(),
                &uniform(p),
                &cloud(tgt.mapv(|x| x * s)),
                &SinkhornConfig { epsilon: eps * c, ..cfg },
            ).unwrap();
            for (a, b) in base.plan().iter().zip(scaled.plan().iter()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }
}
