//! Desk-scale molecule encoders: a transformer over SMILES tokens and a
//! message-passing network over the molecular graph. Both emit per-atom
//! embeddings in molecule atom-index order plus a mean-pooled molecule
//! embedding, so the two modalities stay row-aligned per atom.

mod graph;
mod masking;
mod smiles;
mod vocab;

pub use graph::encode_graph;
pub use masking::{mask_atoms, MaskingOutcome};
pub use smiles::{encode_smiles, positional_encoding};
pub use vocab::Vocab;

use rand::Rng;

use crate::chemcore::{ATOM_FEATURE_DIM, BOND_FEATURE_DIM};
use crate::numerics::{ParamStore, Result, Tensor};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub d_shared: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub mp_rounds: usize,
    pub vocab_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            d_shared: 64,
            n_layers: 2,
            n_heads: 4,
            mp_rounds: 3,
            vocab_size: 0, // set from the corpus vocabulary
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.d_model == 0 || self.n_layers == 0 || self.n_heads == 0 || self.mp_rounds == 0 {
            return Err("encoder dimensions and layer counts must be >= 1".into());
        }
        if self.d_model % self.n_heads != 0 {
            return Err(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        Ok(())
    }

    pub fn d_ff(&self) -> usize {
        2 * self.d_model
    }
}

/// Per-atom embeddings (rows follow molecule atom indices) plus the pooled
/// molecule embedding.
#[derive(Debug, Clone)]
pub struct AtomEmbeddingSequence {
    pub per_atom: Tensor,
    pub pooled: Tensor,
}

/// Linear map from an encoder's pooled output into the shared space.
pub fn project(pooled: &Tensor, binding: &crate::numerics::Binding, prefix: &str) -> Result<Tensor> {
    let w = binding.get(&format!("{prefix}.proj.w"));
    let b = binding.get(&format!("{prefix}.proj.b"));
    pooled.matmul(&w)?.add(&b)
}

fn xavier(seed: u64, name: &str, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    // Every parameter draws from its own named sub-stream, so adding or
    // removing one component never shifts another's initialization.
    let mut rng = rng::stream(seed, &format!("init.{name}"));
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-a..a)).collect()
}

fn add_linear(store: &mut ParamStore, seed: u64, name: &str, d_in: usize, d_out: usize) {
    add_linear_scaled(store, seed, name, d_in, d_out, 1.0);
}

fn add_linear_scaled(
    store: &mut ParamStore,
    seed: u64,
    name: &str,
    d_in: usize,
    d_out: usize,
    scale: f64,
) {
    let mut w = xavier(seed, &format!("{name}.w"), d_in, d_out, d_in * d_out);
    for v in &mut w {
        *v *= scale;
    }
    store.insert(&format!("{name}.w"), vec![d_in, d_out], w);
    store.insert(&format!("{name}.b"), vec![d_out], vec![0.0; d_out]);
}

fn add_layer_norm(store: &mut ParamStore, name: &str, d: usize) {
    store.insert(&format!("{name}.gain"), vec![d], vec![1.0; d]);
    store.insert(&format!("{name}.bias"), vec![d], vec![0.0; d]);
}

/// Initialize every trainable parameter: both encoders, both projections,
/// and all prediction heads. `n_atom_types` is V, the number of atom-type
/// classes in the vocabulary.
pub fn init_params(cfg: &EncoderConfig, n_atom_types: usize, seed: u64) -> ParamStore {
    let mut store = ParamStore::new();
    let d = cfg.d_model;
    store.insert(
        "smiles.embed",
        vec![cfg.vocab_size, d],
        xavier(seed, "smiles.embed", cfg.vocab_size, d, cfg.vocab_size * d),
    );
    for l in 0..cfg.n_layers {
        for part in ["wq", "wk", "wv", "wo"] {
            add_linear(&mut store, seed, &format!("smiles.l{l}.attn.{part}"), d, d);
        }
        add_layer_norm(&mut store, &format!("smiles.l{l}.ln1"), d);
        add_linear(&mut store, seed, &format!("smiles.l{l}.ffn.in"), d, cfg.d_ff());
        add_linear(&mut store, seed, &format!("smiles.l{l}.ffn.out"), cfg.d_ff(), d);
        add_layer_norm(&mut store, &format!("smiles.l{l}.ln2"), d);
    }
    // Shared-space projections start small so the similarity regression
    // begins near Q = 0 instead of swamping the other loss terms.
    add_linear_scaled(&mut store, seed, "smiles.proj", d, cfg.d_shared, 0.1);

    add_linear(&mut store, seed, "graph.in", ATOM_FEATURE_DIM, d);
    for r in 0..cfg.mp_rounds {
        add_linear(&mut store, seed, &format!("graph.r{r}.msg"), d + BOND_FEATURE_DIM, d);
        add_linear(&mut store, seed, &format!("graph.r{r}.upd"), 2 * d, d);
    }
    add_linear_scaled(&mut store, seed, "graph.proj", d, cfg.d_shared, 0.1);

    // AtomAlign head: V atom-type classes plus the NOT_MASKED class.
    add_linear(&mut store, seed, "head.atomalign", d, n_atom_types + 1);
    // Binary-indicator variant of the unmask term.
    add_linear(&mut store, seed, "head.atomtype", d, n_atom_types);
    add_linear(&mut store, seed, "head.maskflag", d, 2);
    // Single-modality masked-prediction baseline.
    add_linear(&mut store, seed, "head.unimask", d, n_atom_types);
    store
}
