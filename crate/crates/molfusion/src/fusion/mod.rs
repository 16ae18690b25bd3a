//! Fusion training objectives.
//!
//! MolSim regresses the scaled cross-modal similarity matrix Q = τ⁻¹·S·Gᵀ
//! onto the Tanimoto target T with MSE. AtomAlign predicts masked SMILES
//! atoms from the per-atom difference between graph and masked-SMILES
//! encodings through a single linear head. The combined objective is
//! L_MolSim + β·L_AtomAlign, trained synchronously.

mod losses;
mod train;

pub use losses::{
    atomalign_loss, contrastive_baseline_loss, forward_batch, molsim_loss, unimodal_mask_loss,
    LossBreakdown,
};
pub use train::{
    batch_target, masked_accuracy, prepare, train, EpochLog, MoleculeRecord, TrainOutcome,
};

use thiserror::Error;

use crate::chemcore::ChemError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("no molecule in the corpus parsed successfully")]
    AllUnparseable,
    #[error("batch contains a molecule with no atoms")]
    EmptyMolecule,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Chem(#[from] ChemError),
}

/// How the "which atoms are unmasked" signal enters the AtomAlign head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnmaskHead {
    /// One (V+1)-way softmax; class V is NOT_MASKED.
    #[default]
    Folded,
    /// V-way atom-type head plus a separate two-logit indicator head.
    Binary,
}

/// Training objective selection, covering the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMethod {
    NoTrain,
    ContrastiveOnly,
    MolSimOnly,
    AtomAlignOnly,
    ContrastiveAtomAlign,
    MolSimUnimask,
    #[default]
    MolFusion,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 7] = [
        FusionMethod::NoTrain,
        FusionMethod::ContrastiveOnly,
        FusionMethod::MolSimOnly,
        FusionMethod::AtomAlignOnly,
        FusionMethod::ContrastiveAtomAlign,
        FusionMethod::MolSimUnimask,
        FusionMethod::MolFusion,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FusionMethod::NoTrain => "no-train",
            FusionMethod::ContrastiveOnly => "contrastive",
            FusionMethod::MolSimOnly => "molsim",
            FusionMethod::AtomAlignOnly => "atomalign",
            FusionMethod::ContrastiveAtomAlign => "contrastive+atomalign",
            FusionMethod::MolSimUnimask => "molsim+unimask",
            FusionMethod::MolFusion => "molfusion",
        }
    }

    pub fn from_name(name: &str) -> Option<FusionMethod> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn needs_training(&self) -> bool {
        !matches!(self, FusionMethod::NoTrain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mask_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub patience: usize,
    pub seed: u64,
    pub unmask_head: UnmaskHead,
    pub method: FusionMethod,
    /// Diagnostic weight on the MolSim term; 1.0 in normal use.
    pub molsim_weight: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            alpha: 0.8,
            beta: 1.0,
            mask_rate: 0.15,
            batch_size: 32,
            epochs: 100,
            lr: 1e-3,
            patience: 5,
            seed: 0,
            unmask_head: UnmaskHead::Folded,
            method: FusionMethod::MolFusion,
            molsim_weight: 1.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tau <= 0.0 {
            return Err(format!("tau must be > 0, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must be in [0,1], got {}", self.alpha));
        }
        if self.beta < 0.0 {
            return Err(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(format!("mask_rate must be in [0,1], got {}", self.mask_rate));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be >= 1".into());
        }
        Ok(())
    }
}
