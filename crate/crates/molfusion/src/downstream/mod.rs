//! Frozen-encoder downstream evaluation: aggregation operators, scaffold
//! splitting, linear probes, and metrics.

mod dataset;
mod evaluate;
mod metrics;
mod probe;
mod scaffold;

pub use dataset::{TaskDataset, TaskType};
pub use evaluate::{
    ablation_grid, encode_molecule, evaluate, molecule_features, split_for_dataset,
    AblationTable, MetricReport, REG_GRID,
};
pub use metrics::{rmse, roc_auc};
pub use probe::{probe_fit, ProbeModel, TaskProbe};
pub use scaffold::{scaffold_atoms, scaffold_key, scaffold_split, Split};

use thiserror::Error;

use crate::fusion::FusionError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum DownstreamError {
    #[error("EWA requires equal widths, got {left} and {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric needs both classes present")]
    SingleClass,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How the two modal embeddings combine into one probe feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    SmilesOnly,
    MgOnly,
    /// Element-wise addition; requires equal widths.
    Ewa,
    /// Concatenation; width is the sum of widths.
    Cco,
}

impl Aggregation {
    pub const ALL: [Aggregation; 4] = [
        Aggregation::SmilesOnly,
        Aggregation::MgOnly,
        Aggregation::Ewa,
        Aggregation::Cco,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::SmilesOnly => "smiles-only",
            Aggregation::MgOnly => "mg-only",
            Aggregation::Ewa => "ewa",
            Aggregation::Cco => "cco",
        }
    }

    pub fn from_name(name: &str) -> Option<Aggregation> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

pub fn aggregate(
    s_emb: &[f64],
    g_emb: &[f64],
    mode: Aggregation,
) -> Result<Vec<f64>, DownstreamError> {
    match mode {
        Aggregation::SmilesOnly => Ok(s_emb.to_vec()),
        Aggregation::MgOnly => Ok(g_emb.to_vec()),
        Aggregation::Ewa => {
            if s_emb.len() != g_emb.len() {
                return Err(DownstreamError::WidthMismatch {
                    left: s_emb.len(),
                    right: g_emb.len(),
                });
            }
            Ok(s_emb.iter().zip(g_emb).map(|(a, b)| a + b).collect())
        }
        Aggregation::Cco => {
            let mut out = s_emb.to_vec();
            out.extend_from_slice(g_emb);
            Ok(out)
        }
    }
}
