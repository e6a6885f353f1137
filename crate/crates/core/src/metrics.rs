//! Downstream evaluation metrics for uncertainty scores.
//!
//! All uncertainty inputs follow the convention "higher = more uncertain".

use ndarray::Array2;

use crate::error::{Error, Result};

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// Average (1-based) ranks with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (the Mann-Whitney statistic).
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    check_len(scores.len(), positive.len())?;
    check_finite(scores, "scores")?;
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(r, _)| r)
        .sum();
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Indices sorted by ascending uncertainty; ties keep input order.
fn ascending(uncertainty: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..uncertainty.len()).collect();
    order.sort_by(|&a, &b| uncertainty[a].total_cmp(&uncertainty[b]));
    order
}

/// Area under the accuracy-coverage curve.
///
/// Samples are admitted in ascending uncertainty order; the result is the mean
/// of the prefix accuracies at coverages `1/n, 2/n, ..., 1`. An empty input
/// yields 0.
pub fn accuracy_coverage_auc(uncertainty: &[f64], correct: &[bool]) -> Result<f64> {
    check_len(uncertainty.len(), correct.len())?;
    check_finite(uncertainty, "uncertainty")?;
    let n = uncertainty.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, idx) in ascending(uncertainty).into_iter().enumerate() {
        hits += correct[idx] as usize;
        total += hits as f64 / (i + 1) as f64;
    }
    Ok(total / n as f64)
}

/// Retained-mean curve for a rejection order: entry `i` is the mean quality of
/// the samples left after rejecting the first `i` of `reject_order`, for
/// `i = 0..=last`.
fn rejection_curve(quality: &[f64], reject_order: &[usize], last: usize) -> Vec<f64> {
    let n = quality.len();
    // suffix sums over the rejection order give the kept totals
    let mut kept = vec![0.0; n + 1];
    for pos in (0..n).rev() {
        kept[pos] = kept[pos + 1] + quality[reject_order[pos]];
    }
    (0..=last).map(|i| kept[i] / (n - i) as f64).collect()
}

/// Prediction Rejection Ratio over rejection rates `0, 1/n, ..., floor(max_rejection * n)/n`.
///
/// Each curve is integrated with one rectangle of width `1/n` per point. The
/// rejection rate is capped at `(n - 1)/n` so at least one sample is kept.
pub fn prr(uncertainty: &[f64], quality: &[f64], max_rejection: f64) -> Result<f64> {
    check_len(uncertainty.len(), quality.len())?;
    check_finite(uncertainty, "uncertainty")?;
    check_finite(quality, "quality")?;
    let n = quality.len();
    if n < 2 {
        return Err(Error::Degenerate("PRR needs at least two samples".into()));
    }
    if !(max_rejection > 0.0 && max_rejection <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "max rejection must lie in (0, 1], got {max_rejection}"
        )));
    }
    let last = ((max_rejection * n as f64).floor() as usize).min(n - 1);

    // most uncertain rejected first
    let mut by_uncertainty = ascending(uncertainty);
    by_uncertainty.reverse();
    // worst quality rejected first
    let mut by_quality: Vec<usize> = (0..n).collect();
    by_quality.sort_by(|&a, &b| quality[a].total_cmp(&quality[b]));

    let area = |curve: Vec<f64>| curve.iter().sum::<f64>() / n as f64;
    let auc_unc = area(rejection_curve(quality, &by_uncertainty, last));
    let auc_oracle = area(rejection_curve(quality, &by_quality, last));
    let mean = quality.iter().sum::<f64>() / n as f64;
    let auc_random = mean * (last + 1) as f64 / n as f64;

    let denom = auc_oracle - auc_random;
    if denom.is_nan() || denom.abs() <= 1e-12 * (1.0 + auc_oracle.abs()) {
        return Err(Error::Degenerate(
            "oracle and random rejection curves coincide; PRR is undefined".into(),
        ));
    }
    Ok((auc_unc - auc_random) / denom)
}

/// Metric values of several methods on several tasks; higher is better.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodTaskTable {
    pub methods: Vec<String>,
    pub tasks: Vec<String>,
    /// `methods x tasks`.
    pub values: Array2<f64>,
}

impl MethodTaskTable {
    pub fn new(methods: Vec<String>, tasks: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (methods.len(), tasks.len()) {
            return Err(Error::DimensionMismatch {
                expected: methods.len() * tasks.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("method/task table".into()));
        }
        Ok(Self {
            methods,
            tasks,
            values,
        })
    }

    /// Every unordered pair of distinct tasks.
    pub fn all_pairs(&self) -> Vec<(usize, usize)> {
        let t = self.tasks.len();
        (0..t)
            .flat_map(|a| ((a + 1)..t).map(move |b| (a, b)))
            .collect()
    }
}

/// Flags the points not weakly dominated by any other point. Equal points do
/// not dominate each other.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .0
            .total_cmp(&points[a].0)
            .then(points[b].1.total_cmp(&points[a].1))
    });
    let mut on_front = vec![false; points.len()];
    // best y among points with strictly larger x
    let mut best_y_right = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let x = points[order[start]].0;
        let mut end = start;
        while end < order.len() && points[order[end]].0 == x {
            end += 1;
        }
        let group_best = points[order[start]].1;
        for &idx in &order[start..end] {
            let y = points[idx].1;
            let beaten_here = y < group_best;
            let beaten_right = best_y_right >= y;
            on_front[idx] = !(beaten_here || beaten_right);
        }
        best_y_right = best_y_right.max(group_best);
        start = end;
    }
    on_front
}

/// Fraction of task pairs on which each method sits on the two-metric Pareto front.
pub fn pareto_front_share(table: &MethodTaskTable) -> Result<Vec<f64>> {
    pareto_front_share_over(table, &table.all_pairs())
}

/// [`pareto_front_share`] restricted to an explicit list of task pairs.
pub fn pareto_front_share_over(table: &MethodTaskTable, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if table.tasks.len() < 2 {
        return Err(Error::InvalidParameter(
            "Pareto analysis needs at least two tasks".into(),
        ));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no task pairs given".into()));
    }
    let t = table.tasks.len();
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= t || *b >= t || a == b) {
        return Err(Error::InvalidParameter(format!("invalid task pair ({a}, {b})")));
    }
    let mut counts = vec![0usize; table.methods.len()];
    for &(a, b) in pairs {
        let points: Vec<(f64, f64)> = table
            .values
            .outer_iter()
            .map(|row| (row[a], row[b]))
            .collect();
        for (count, front) in counts.iter_mut().zip(pareto_front(&points)) {
            *count += front as usize;
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / pairs.len() as f64)
        .collect())
}
