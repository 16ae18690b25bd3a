//! MolFusion: multi-granularity fusion learning over SMILES and molecular
//! graph representations.
//!
//! The crate bundles a SMILES parser, Morgan/Tanimoto fingerprints, a small
//! reverse-mode tensor engine, two desk-scale molecule encoders, the fusion
//! training objectives, and a frozen-encoder downstream evaluation harness.

pub mod checkpoint;
pub mod chemcore;
pub mod config;
pub mod downstream;
pub mod encoders;
pub mod fingerprint;
pub mod fusion;
pub mod numerics;
pub mod rng;
