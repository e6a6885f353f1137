use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vecuq_cli::commands::{self, EvalArgs, Experiment, FitArgs, Metric, Target};
use vecuq_cli::{CliError, Result};
use vecuq_core::{ScalingKind, SinkhornConfig};

/// Combine several uncertainty scores into one ordering via entropic optimal transport.
#[derive(Debug, Parser)]
#[command(name = "vecuq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScalingArg {
    Featurewise,
    Global,
    Identity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Beta,
    Exp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    #[value(name = "roc_auc")]
    RocAuc,
    #[value(name = "acc_cov")]
    AccCov,
    Prr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Toy,
    Blobs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a rank model from a calibration score CSV.
    Fit {
        calibration: PathBuf,
        #[arg(long, value_enum, default_value = "featurewise")]
        scaling: ScalingArg,
        #[arg(long, value_enum, default_value = "beta")]
        target: TargetArg,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Outer-anchor multiplier; 0 disables anchors.
        #[arg(long, default_value_t = 5.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a query CSV with a fitted model.
    Rank {
        model: PathBuf,
        query: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a score column against a label file.
    Eval {
        scores: PathBuf,
        labels: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long, default_value_t = 0.5)]
        max_rejection: f64,
        /// Score column to use (default: rank_score, or the only non-index column).
        #[arg(long)]
        column: Option<String>,
    },
    /// Run a synthetic experiment and write its CSVs.
    Synth {
        #[arg(value_enum)]
        experiment: ExperimentArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("VECUQ_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("VECUQ_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Fit {
            calibration,
            scaling,
            target,
            alpha,
            beta,
            lambda,
            gamma,
            epsilon,
            tol,
            max_iters,
            out: model_out,
        } => {
            let args = FitArgs {
                scaling: match scaling {
                    ScalingArg::Featurewise => ScalingKind::FeatureWise,
                    ScalingArg::Global => ScalingKind::Global,
                    ScalingArg::Identity => ScalingKind::Identity,
                },
                target: match target {
                    TargetArg::Beta => Target::Beta,
                    TargetArg::Exp => Target::Exp,
                },
                alpha,
                beta,
                lambda,
                gamma,
                sinkhorn: SinkhornConfig {
                    epsilon,
                    tol,
                    max_iters,
                },
                ..FitArgs::new(calibration, model_out)
            };
            commands::fit(&args, &mut out, &mut std::io::stderr())?;
        }
        Command::Rank { model, query, out: dest } => match dest {
            Some(path) => {
                let mut file = std::io::BufWriter::new(
                    std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?,
                );
                commands::rank(&model, &query, &mut file)?;
                file.flush().map_err(|e| CliError::io(&path, e))?;
            }
            None => {
                commands::rank(&model, &query, &mut out)?;
            }
        },
        Command::Eval {
            scores,
            labels,
            metric,
            max_rejection,
            column,
        } => {
            let args = EvalArgs {
                scores,
                labels,
                metric: match metric {
                    MetricArg::RocAuc => Metric::RocAuc,
                    MetricArg::AccCov => Metric::AccCov,
                    MetricArg::Prr => Metric::Prr,
                },
                max_rejection,
                column,
            };
            commands::eval(&args, &mut out)?;
        }
        Command::Synth {
            experiment,
            seed,
            out_dir,
        } => {
            let experiment = match experiment {
                ExperimentArg::Toy => Experiment::Toy,
                ExperimentArg::Blobs => Experiment::Blobs,
            };
            commands::synth(experiment, seed, &out_dir, &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own usage errors exit with 2, which is reserved here for
    // numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
