use crate::chemcore::{AtomFeatures, Molecule, BOND_FEATURE_DIM};
use crate::numerics::{Binding, Result, Tensor};

use super::{AtomEmbeddingSequence, EncoderConfig};

/// Message-passing encoder over the molecular graph.
///
/// Each round sends linear(neighbor state ∥ bond features) along every
/// directed edge, sums incoming messages per atom, and updates with
/// tanh(linear(state ∥ aggregate)). Sum aggregation keeps the pooled
/// output invariant under atom relabeling.
pub fn encode_graph(
    mol: &Molecule,
    feats: &AtomFeatures,
    binding: &Binding,
    cfg: &EncoderConfig,
) -> Result<AtomEmbeddingSequence> {
    let n = mol.atom_count();
    // directed edge lists: one entry per bond direction
    let mut src = Vec::with_capacity(2 * mol.bonds.len());
    let mut dst = Vec::with_capacity(2 * mol.bonds.len());
    let mut edge_feats = Vec::with_capacity(2 * mol.bonds.len() * BOND_FEATURE_DIM);
    for (i, b) in mol.bonds.iter().enumerate() {
        let row = feats.bond_row(i);
        src.push(b.endpoints.0);
        dst.push(b.endpoints.1);
        edge_feats.extend_from_slice(row);
        src.push(b.endpoints.1);
        dst.push(b.endpoints.0);
        edge_feats.extend_from_slice(row);
    }
    let n_edges = src.len();
    let bond_tensor = Tensor::constant(vec![n_edges, BOND_FEATURE_DIM], edge_feats);

    let atom_input = Tensor::constant(
        vec![n, crate::chemcore::ATOM_FEATURE_DIM],
        feats.atom.clone(),
    );
    let mut state = atom_input
        .matmul(&binding.get("graph.in.w"))?
        .add(&binding.get("graph.in.b"))?;
    for r in 0..cfg.mp_rounds {
        let msg_in = Tensor::concat_cols(&[state.gather_rows(&src)?, bond_tensor.clone()])?;
        let msg = msg_in
            .matmul(&binding.get(&format!("graph.r{r}.msg.w")))?
            .add(&binding.get(&format!("graph.r{r}.msg.b")))?;
        let agg = msg.scatter_sum_rows(&dst, n)?;
        let upd_in = Tensor::concat_cols(&[state.clone(), agg])?;
        state = upd_in
            .matmul(&binding.get(&format!("graph.r{r}.upd.w")))?
            .add(&binding.get(&format!("graph.r{r}.upd.b")))?
            .tanh();
    }
    let pooled = state.mean_rows()?;
    Ok(AtomEmbeddingSequence {
        per_atom: state,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemcore::{featurize, parse, Bond, Molecule};
    use crate::encoders::init_params;

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            d_model: 8,
            d_shared: 8,
            n_layers: 1,
            n_heads: 2,
            mp_rounds: 2,
            vocab_size: 8,
        }
    }

    fn encode(mol: &Molecule, seed: u64) -> AtomEmbeddingSequence {
        let cfg = tiny_cfg();
        let store = init_params(&cfg, 4, seed);
        let binding = store.bind_frozen();
        encode_graph(mol, &featurize(mol), &binding, &cfg).unwrap()
    }

    #[test]
    fn shape_contract() {
        let (mol, _) = parse("CCO").unwrap();
        let e = encode(&mol, 3);
        assert_eq!(e.per_atom.shape(), &[3, 8]);
        assert_eq!(e.pooled.shape(), &[1, 8]);
    }

    #[test]
    fn isolated_atom() {
        let (mol, _) = parse("C").unwrap();
        let e = encode(&mol, 3);
        assert_eq!(e.per_atom.shape(), &[1, 8]);
    }

    #[test]
    fn pooled_invariant_under_relabeling() {
        let (mol, _) = parse("CCO").unwrap();
        // relabel atoms 0<->2 with permuted bonds; same molecule
        let permuted = Molecule {
            atoms: {
                let mut atoms = vec![
                    mol.atoms[2].clone(),
                    mol.atoms[1].clone(),
                    mol.atoms[0].clone(),
                ];
                for (i, a) in atoms.iter_mut().enumerate() {
                    a.index = i;
                }
                atoms
            },
            bonds: mol
                .bonds
                .iter()
                .map(|b| Bond {
                    endpoints: (2 - b.endpoints.0, 2 - b.endpoints.1),
                    order: b.order,
                })
                .collect(),
        };
        let a = encode(&mol, 9);
        let b = encode(&permuted, 9);
        for (x, y) in a.pooled.data().iter().zip(b.pooled.data()) {
            assert!((x - y).abs() < 1e-9);
        }
        // per-atom rows are equivariant: row i of one equals row 2-i of the other
        let d = 8;
        for i in 0..3 {
            for j in 0..d {
                let x = a.per_atom.data()[i * d + j];
                let y = b.per_atom.data()[(2 - i) * d + j];
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
