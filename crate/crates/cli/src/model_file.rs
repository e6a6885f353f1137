//! JSON persistence for fitted rank models.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use vecuq_core::{AnchorConfig, Coupling, CouplingParts, RankModel, ReferenceFamily, Scaler, ScalingKind};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerFile {
    pub kind: ScalingKind,
    pub mins: Vec<f64>,
    pub maxes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    #[serde(flatten)]
    pub family: ReferenceFamily,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// On-disk form of a [`RankModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub measure_names: Vec<String>,
    pub scaler: ScalerFile,
    pub gamma: f64,
    pub anchor_count: usize,
    pub epsilon: f64,
    pub reference: ReferenceFile,
    pub source_atoms: Vec<Vec<f64>>,
    pub source_weights: Vec<f64>,
    pub log_u: Vec<f64>,
    pub log_v: Vec<f64>,
    pub diagnostics: Diagnostics,
}

fn rows_of(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix_of(rows: &[Vec<f64>], what: &str) -> std::result::Result<Array2<f64>, String> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(format!("{what}: rows have unequal lengths"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| format!("{what}: {e}"))
}

impl ModelFile {
    pub fn from_model(model: &RankModel) -> Self {
        let c = model.coupling();
        Self {
            format_version: FORMAT_VERSION,
            measure_names: model.measure_names().to_vec(),
            scaler: ScalerFile {
                kind: model.scaler().kind(),
                mins: model.scaler().mins().to_vec(),
                maxes: model.scaler().maxes().to_vec(),
            },
            gamma: model.anchor_config().gamma,
            anchor_count: model.anchor_count(),
            epsilon: c.epsilon(),
            reference: ReferenceFile {
                family: model.family(),
                atoms: rows_of(c.target_atoms()),
                weights: c.target_weights().to_vec(),
            },
            source_atoms: rows_of(c.source_atoms()),
            source_weights: c.source_weights().to_vec(),
            log_u: c.log_u().to_vec(),
            log_v: c.log_v().to_vec(),
            diagnostics: Diagnostics {
                iterations: c.iterations_run(),
                residual: c.marginal_residual(),
                converged: c.converged(),
            },
        }
    }

    pub fn into_model(self, path: &Path) -> Result<RankModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::input(
                path,
                format!(
                    "unsupported model format version {} (expected {FORMAT_VERSION})",
                    self.format_version
                ),
            ));
        }
        let bad = |msg: String| CliError::input(path, msg);
        let corrupt = |e: vecuq_core::Error| CliError::input(path, format!("invalid model file: {e}"));
        let scaler = Scaler::from_parts(self.scaler.kind, self.scaler.mins, self.scaler.maxes).map_err(corrupt)?;
        let coupling = Coupling::from_parts(CouplingParts {
            epsilon: self.epsilon,
            source_atoms: matrix_of(&self.source_atoms, "source_atoms").map_err(bad)?,
            source_weights: self.source_weights,
            target_atoms: matrix_of(&self.reference.atoms, "reference atoms").map_err(bad)?,
            target_weights: self.reference.weights,
            log_u: self.log_u,
            log_v: self.log_v,
            iterations_run: self.diagnostics.iterations,
            marginal_residual: self.diagnostics.residual,
            converged: self.diagnostics.converged,
        })
        .map_err(corrupt)?;
        RankModel::from_parts(
            scaler,
            AnchorConfig { gamma: self.gamma },
            self.anchor_count,
            self.reference.family,
            coupling,
            self.measure_names,
        )
        .map_err(corrupt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, format!("invalid model file: {e}")))
    }
}
