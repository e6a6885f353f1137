//! The four subcommands, written against `io::Write` so they can be driven
//! from tests as well as from `main`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use vecuq_core::experiment::{run_blobs, run_toy, BlobsConfig, ScoredPoints, ToyExperimentConfig};
use vecuq_core::metrics::{accuracy_coverage_auc, prr, roc_auc};
use vecuq_core::{AnchorConfig, RankConfig, RankModel, ReferenceFamily, ScalingKind, ScoreMatrix, SinkhornConfig};

use crate::csvio::{fmt_all, fmt_f64, read_table, write_table, Table};
use crate::error::{CliError, Result};
use crate::model_file::ModelFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Beta,
    Exp,
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub calibration: PathBuf,
    pub out: PathBuf,
    pub scaling: ScalingKind,
    pub target: Target,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub sinkhorn: SinkhornConfig,
}

impl FitArgs {
    /// Defaults: Beta(1, 1) target, feature-wise scaling, anchors at 5x.
    pub fn new(calibration: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            calibration: calibration.into(),
            out: out.into(),
            scaling: ScalingKind::FeatureWise,
            target: Target::Beta,
            alpha: 1.0,
            beta: 1.0,
            lambda: 1.0,
            gamma: AnchorConfig::default().gamma,
            sinkhorn: SinkhornConfig::default(),
        }
    }

    pub fn rank_config(&self) -> RankConfig {
        RankConfig {
            scaling: self.scaling,
            family: match self.target {
                Target::Beta => ReferenceFamily::Beta {
                    alpha: self.alpha,
                    beta: self.beta,
                },
                Target::Exp => ReferenceFamily::Exponential { rate: self.lambda },
            },
            anchors: AnchorConfig { gamma: self.gamma },
            sinkhorn: self.sinkhorn,
        }
    }
}

fn score_matrix(table: Table, path: &Path) -> Result<ScoreMatrix> {
    if let Some((row, col)) = table
        .rows
        .indexed_iter()
        .find_map(|((i, k), &v)| (v < 0.0).then_some((i, k)))
    {
        return Err(CliError::input(
            path,
            format!(
                "line {}: column '{}': negative score {}",
                row + 2,
                table.header[col],
                table.rows[[row, col]]
            ),
        ));
    }
    ScoreMatrix::new(table.rows, table.header).map_err(|e| CliError::input(path, e.to_string()))
}

/// Fits and saves a model, then prints a short report.
pub fn fit(args: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<RankModel> {
    let table = read_table(&args.calibration)?;
    if table.rows.nrows() == 0 {
        return Err(CliError::input(&args.calibration, "no data rows"));
    }
    let scores = score_matrix(table, &args.calibration)?;
    let model = RankModel::fit(&scores, &args.rank_config()).map_err(|e| match e {
        vecuq_core::Error::InvalidParameter(_) | vecuq_core::Error::TooManyAnchors { .. } | vecuq_core::Error::GridTooLarge { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Core(other),
    })?;
    ModelFile::from_model(&model).save(&args.out)?;

    let c = model.coupling();
    let report = (|| -> std::io::Result<()> {
        writeln!(out, "measures: {}", model.dim())?;
        writeln!(
            out,
            "source size: {} ({} calibration rows + {} anchors)",
            c.source_atoms().nrows(),
            model.calibration_count(),
            model.anchor_count()
        )?;
        writeln!(out, "reference size: {}", c.target_atoms().nrows())?;
        writeln!(out, "sinkhorn residual: {:e}", c.marginal_residual())?;
        writeln!(out, "sinkhorn iterations: {}", c.iterations_run())?;
        if !c.converged() {
            writeln!(
                err,
                "warning: Sinkhorn stopped after {} iterations with marginal residual {:e} (tolerance {:e})",
                c.iterations_run(),
                c.marginal_residual(),
                args.sinkhorn.tol
            )?;
        }
        Ok(())
    })();
    report.map_err(|e| CliError::io("<stdout>", e))?;
    Ok(model)
}

/// Reorders query columns to the model's measure order.
fn align_columns(table: &Table, names: &[String], path: &Path) -> Result<Array2<f64>> {
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| !table.header.contains(n))
        .map(String::as_str)
        .collect();
    let extra: Vec<&str> = table
        .header
        .iter()
        .filter(|h| !names.contains(h))
        .map(String::as_str)
        .collect();
    let mut dup = table.header.clone();
    dup.sort();
    dup.dedup();
    if !missing.is_empty() || !extra.is_empty() || dup.len() != table.header.len() {
        let mut msg = String::from("query columns do not match the model's measures");
        if !missing.is_empty() {
            msg += &format!("; missing: {}", missing.join(", "));
        }
        if !extra.is_empty() {
            msg += &format!("; extra: {}", extra.join(", "));
        }
        if dup.len() != table.header.len() {
            msg += "; duplicate column names";
        }
        return Err(CliError::input(path, msg));
    }
    let order: Vec<usize> = names
        .iter()
        .map(|n| table.header.iter().position(|h| h == n).expect("checked above"))
        .collect();
    Ok(table.rows.select(ndarray::Axis(1), &order))
}

/// Scores every query row; output columns are `index,rank_score`.
pub fn rank(model_path: &Path, query_path: &Path, out: &mut dyn Write) -> Result<Vec<f64>> {
    let model = ModelFile::load(model_path)?.into_model(model_path)?;
    let table = read_table(query_path)?;
    let values = align_columns(&table, model.measure_names(), query_path)?;
    let scores = if values.nrows() == 0 {
        Vec::new()
    } else {
        let query = score_matrix(
            Table {
                header: model.measure_names().to_vec(),
                rows: values,
            },
            query_path,
        )?;
        model.rank_score(&query)?
    };
    let index: Vec<String> = (0..scores.len()).map(|i| i.to_string()).collect();
    write_table(out, &["index", "rank_score"], &[index, fmt_all(&scores)])
        .map_err(|e| CliError::io("<output>", e))?;
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RocAuc,
    AccCov,
    Prr,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Self::RocAuc => "roc_auc",
            Self::AccCov => "acc_cov",
            Self::Prr => "prr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub scores: PathBuf,
    pub labels: PathBuf,
    pub metric: Metric,
    pub max_rejection: f64,
    /// Score column to read; by default `rank_score`, or the only column
    /// besides `index`.
    pub column: Option<String>,
}

fn pick_column(table: &Table, wanted: Option<&str>, default: &str, path: &Path) -> Result<Vec<f64>> {
    let name = match wanted {
        Some(w) => w.to_string(),
        None if table.header.iter().any(|h| h == default) => default.to_string(),
        None => {
            let candidates: Vec<&String> = table.header.iter().filter(|h| *h != "index").collect();
            match candidates.as_slice() {
                [only] => (*only).clone(),
                _ => {
                    return Err(CliError::input(
                        path,
                        format!("cannot choose a column among [{}]; name one explicitly", table.header.join(", ")),
                    ))
                }
            }
        }
    };
    table
        .column(&name)
        .ok_or_else(|| CliError::input(path, format!("no column named '{name}'")))
}

fn binary_labels(values: &[f64], path: &Path) -> Result<Vec<bool>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(CliError::input(path, format!("line {}: label must be 0 or 1, got {v}", i + 2))),
        })
        .collect()
}

/// Computes one metric and prints it twice: readable, then as `metric,value`.
pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<f64> {
    let scores_table = read_table(&args.scores)?;
    let labels_table = read_table(&args.labels)?;
    let scores = pick_column(&scores_table, args.column.as_deref(), "rank_score", &args.scores)?;
    let labels = pick_column(&labels_table, None, "label", &args.labels)?;
    if scores.len() != labels.len() {
        return Err(CliError::input(
            &args.labels,
            format!("{} labels for {} scores", labels.len(), scores.len()),
        ));
    }
    let input = |e: vecuq_core::Error| CliError::input(&args.labels, e.to_string());
    let value = match args.metric {
        Metric::RocAuc => roc_auc(&scores, &binary_labels(&labels, &args.labels)?).map_err(input)?,
        Metric::AccCov => accuracy_coverage_auc(&scores, &binary_labels(&labels, &args.labels)?).map_err(input)?,
        Metric::Prr => prr(&scores, &labels, args.max_rejection).map_err(input)?,
    };
    writeln!(out, "{}: {value:.4}", args.metric.name())
        .and_then(|_| writeln!(out, "{},{}", args.metric.name(), fmt_f64(value)))
        .map_err(|e| CliError::io("<stdout>", e))?;
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Toy,
    Blobs,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn flag(values: &[bool]) -> Vec<String> {
    values.iter().map(|&b| u8::from(b).to_string()).collect()
}

fn write_file(path: &Path, header: &[&str], columns: &[Vec<String>]) -> Result<()> {
    let w = create(path)?;
    write_table(w, header, columns).map_err(|e| CliError::io(path, e))
}

/// Runs a synthetic experiment and writes its CSVs into `out_dir`.
pub fn synth(experiment: Experiment, seed: u64, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let stdout = |e| CliError::io("<stdout>", e);
    match experiment {
        Experiment::Toy => {
            let r = run_toy(&ToyExperimentConfig::default(), seed)?;
            let n = r.is_ood.len();
            let index: Vec<String> = (0..n).map(|i| i.to_string()).collect();
            write_file(
                &out_dir.join("toy_scores.csv"),
                &["index", "is_ood", "misclassified", "one_minus_msp", "mahalanobis", "vecuq_ot"],
                &[
                    index,
                    flag(&r.is_ood),
                    flag(&r.misclassified),
                    fmt_all(&r.eval_msp),
                    fmt_all(&r.eval_mahalanobis),
                    fmt_all(&r.eval_vecuq),
                ],
            )?;
            let rows = r.rows();
            write_file(
                &out_dir.join("toy_table.csv"),
                &["method", "misclassification_auc", "ood_auc"],
                &[
                    rows.iter().map(|(m, _)| m.to_string()).collect(),
                    rows.iter().map(|(_, a)| fmt_f64(a.misclassification)).collect(),
                    rows.iter().map(|(_, a)| fmt_f64(a.ood)).collect(),
                ],
            )?;
            writeln!(out, "{:<12} {:>10} {:>10}", "method", "miscls", "ood").map_err(stdout)?;
            for (name, auc) in rows {
                writeln!(out, "{name:<12} {:>10.4} {:>10.4}", auc.misclassification, auc.ood).map_err(stdout)?;
            }
            writeln!(
                out,
                "test accuracy {:.4}; sinkhorn residual {:e} after {} iterations",
                r.test_accuracy, r.sinkhorn_residual, r.sinkhorn_iterations
            )
            .map_err(stdout)?;
        }
        Experiment::Blobs => {
            let r = run_blobs(&BlobsConfig::default(), seed)?;
            let write_points = |name: &str, p: &ScoredPoints| -> Result<()> {
                let n = p.x.nrows();
                let mut header = vec!["index", "x0", "x1"];
                let mut cols = vec![
                    (0..n).map(|i| i.to_string()).collect(),
                    fmt_all(&p.x.column(0).to_vec()),
                    fmt_all(&p.x.column(1).to_vec()),
                ];
                if let Some(labels) = &p.labels {
                    header.push("label");
                    cols.push(labels.iter().map(|l| l.to_string()).collect());
                }
                header.extend(["entropy", "mahalanobis", "vecuq_ot"]);
                cols.extend([fmt_all(&p.entropy), fmt_all(&p.mahalanobis), fmt_all(&p.vecuq)]);
                write_file(&out_dir.join(name), &header, &cols)
            };
            write_points("blobs_points.csv", &r.data)?;
            write_points("blobs_grid.csv", &r.grid)?;
            writeln!(
                out,
                "blobs: {} points, {} grid cells, train accuracy {:.4}",
                r.data.x.nrows(),
                r.grid.x.nrows(),
                r.train_accuracy
            )
            .map_err(stdout)?;
        }
    }
    Ok(())
}
