use crate::numerics::{Binding, Result, Tensor};

use super::{AtomEmbeddingSequence, EncoderConfig};

/// Sinusoidal positional signal for `n` positions at width `d`.
pub fn positional_encoding(n: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; n * d];
    for pos in 0..n {
        for i in 0..d / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
            data[pos * d + 2 * i] = (pos as f64 * freq).sin();
            data[pos * d + 2 * i + 1] = (pos as f64 * freq).cos();
        }
    }
    Tensor::constant(vec![n, d], data)
}

fn linear(x: &Tensor, binding: &Binding, name: &str) -> Result<Tensor> {
    x.matmul(&binding.get(&format!("{name}.w")))?
        .add(&binding.get(&format!("{name}.b")))
}

fn attention_layer(
    x: &Tensor,
    binding: &Binding,
    prefix: &str,
    n_heads: usize,
) -> Result<Tensor> {
    let d = x.shape()[1];
    let dh = d / n_heads;
    let q = linear(x, binding, &format!("{prefix}.attn.wq"))?;
    let k = linear(x, binding, &format!("{prefix}.attn.wk"))?;
    let v = linear(x, binding, &format!("{prefix}.attn.wv"))?;
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = q.slice_cols(h * dh, dh)?;
        let kh = k.slice_cols(h * dh, dh)?;
        let vh = v.slice_cols(h * dh, dh)?;
        let scores = qh.matmul(&kh.transpose()?)?.scale(1.0 / (dh as f64).sqrt());
        let weights = scores.softmax()?;
        heads.push(weights.matmul(&vh)?);
    }
    let merged = Tensor::concat_cols(&heads)?;
    linear(&merged, binding, &format!("{prefix}.attn.wo"))
}

fn layer_norm(x: &Tensor, binding: &Binding, name: &str) -> Result<Tensor> {
    x.layer_norm(
        &binding.get(&format!("{name}.gain")),
        &binding.get(&format!("{name}.bias")),
        1e-5,
    )
}

/// Transformer encoder over a token-id sequence.
///
/// `atom_positions[k]` is the token index of the k-th atom token and
/// `atom_map[k]` the molecule atom index it denotes; the returned per-atom
/// rows are ordered by molecule atom index.
pub fn encode_smiles(
    token_ids: &[usize],
    atom_positions: &[usize],
    atom_map: &[usize],
    binding: &Binding,
    cfg: &EncoderConfig,
) -> Result<AtomEmbeddingSequence> {
    let embed = binding.get("smiles.embed");
    for &id in token_ids {
        assert!(
            id < cfg.vocab_size,
            "token id {id} overflows vocabulary of {}",
            cfg.vocab_size
        );
    }
    let mut x = embed
        .gather_rows(token_ids)?
        .add(&positional_encoding(token_ids.len(), cfg.d_model))?;
    for l in 0..cfg.n_layers {
        let prefix = format!("smiles.l{l}");
        let attn = attention_layer(&x, binding, &prefix, cfg.n_heads)?;
        x = layer_norm(&x.add(&attn)?, binding, &format!("{prefix}.ln1"))?;
        let ff = linear(
            &linear(&x, binding, &format!("{prefix}.ffn.in"))?.relu(),
            binding,
            &format!("{prefix}.ffn.out"),
        )?;
        x = layer_norm(&x.add(&ff)?, binding, &format!("{prefix}.ln2"))?;
    }
    // reorder atom-token rows into molecule atom-index order
    let mut pos_by_atom = vec![0usize; atom_map.len()];
    for (k, &atom) in atom_map.iter().enumerate() {
        pos_by_atom[atom] = atom_positions[k];
    }
    let per_atom = x.gather_rows(&pos_by_atom)?;
    let pooled = per_atom.mean_rows()?;
    Ok(AtomEmbeddingSequence { per_atom, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemcore::tokenize;
    use crate::encoders::{init_params, Vocab};

    fn tiny_cfg(vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            d_model: 8,
            d_shared: 8,
            n_layers: 1,
            n_heads: 2,
            mp_rounds: 1,
            vocab_size,
        }
    }

    fn encode(smiles: &str, seed: u64) -> AtomEmbeddingSequence {
        let tok = tokenize(smiles).unwrap();
        let vocab = Vocab::build(std::iter::once(&tok));
        let cfg = tiny_cfg(vocab.size());
        let store = init_params(&cfg, vocab.n_atom_types(), seed);
        let binding = store.bind_frozen();
        encode_smiles(
            &vocab.encode(&tok),
            &tok.atom_token_positions(),
            &tok.atom_map,
            &binding,
            &cfg,
        )
        .unwrap()
    }

    #[test]
    fn output_shapes() {
        let e = encode("CCO", 3);
        assert_eq!(e.per_atom.shape(), &[3, 8]);
        assert_eq!(e.pooled.shape(), &[1, 8]);
    }

    #[test]
    fn deterministic_for_same_params() {
        let a = encode("C(=O)Oc1ccccc1", 11);
        let b = encode("C(=O)Oc1ccccc1", 11);
        assert_eq!(a.per_atom.data(), b.per_atom.data());
        assert_eq!(a.pooled.data(), b.pooled.data());
    }

    #[test]
    fn context_sensitivity() {
        // Masking one atom must change the other atoms' rows too.
        let tok = tokenize("CCO").unwrap();
        let vocab = Vocab::build(std::iter::once(&tok));
        let cfg = tiny_cfg(vocab.size());
        let store = init_params(&cfg, vocab.n_atom_types(), 5);
        let binding = store.bind_frozen();
        let plain = encode_smiles(
            &vocab.encode(&tok),
            &tok.atom_token_positions(),
            &tok.atom_map,
            &binding,
            &cfg,
        )
        .unwrap();
        let mut masked_ids = vocab.encode(&tok);
        masked_ids[2] = Vocab::MASK;
        let masked = encode_smiles(
            &masked_ids,
            &tok.atom_token_positions(),
            &tok.atom_map,
            &binding,
            &cfg,
        )
        .unwrap();
        assert_ne!(plain.per_atom.data()[0..8], masked.per_atom.data()[0..8]);
    }

    #[test]
    fn positional_encoding_shape_and_range() {
        let pe = positional_encoding(5, 8);
        assert_eq!(pe.shape(), &[5, 8]);
        assert!(pe.data().iter().all(|v| v.abs() <= 1.0));
        // position 0: sin=0, cos=1 pattern
        assert_eq!(pe.data()[0], 0.0);
        assert_eq!(pe.data()[1], 1.0);
    }
}
