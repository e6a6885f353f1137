//! Aggregation of heterogeneous uncertainty scores into a single ordering.
//!
//! Per-sample score vectors are mapped onto an isotropic reference
//! distribution with entropic optimal transport. The norm of the transported
//! vector (its Monge-Kantorovich rank) is the combined uncertainty score.
//!
//! The crate also carries the evaluation side: scalar baseline scores,
//! detection and selective-prediction metrics, and seeded synthetic
//! experiments.

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod rank;
pub mod reference;
pub mod scores;
pub mod sinkhorn;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use rank::{make_anchors, AnchorConfig, RankConfig, RankModel};
pub use reference::{sample_reference, unit_grid, ReferenceCloud, ReferenceFamily, ReferenceSpec};
pub use scores::{Scaler, ScalingKind, ScoreMatrix};
pub use sinkhorn::{cost_matrix, fit_coupling, Coupling, CouplingParts, SinkhornConfig};
