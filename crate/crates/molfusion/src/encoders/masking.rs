use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::chemcore::TokenizedSmiles;

use super::Vocab;

/// Outcome of masking one tokenized SMILES string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskingOutcome {
    /// Full token-id sequence with masked atom positions replaced by MASK.
    pub masked_token_ids: Vec<usize>,
    /// Per-atom 0/1 indicator, molecule atom-index order.
    pub mask_indicator: Vec<u8>,
    /// Per-atom atom-type class, molecule atom-index order.
    pub atom_type_labels: Vec<usize>,
}

impl MaskingOutcome {
    pub fn masked_atoms(&self) -> Vec<usize> {
        (0..self.mask_indicator.len())
            .filter(|&i| self.mask_indicator[i] == 1)
            .collect()
    }

    pub fn unmasked_atoms(&self) -> Vec<usize> {
        (0..self.mask_indicator.len())
            .filter(|&i| self.mask_indicator[i] == 0)
            .collect()
    }
}

/// Mask atom tokens uniformly without replacement. When `mask_rate > 0` the
/// count is max(1, round(mask_rate * n_atoms)); positional information is
/// preserved, only the token id is replaced.
pub fn mask_atoms(
    tok: &TokenizedSmiles,
    vocab: &Vocab,
    mask_rate: f64,
    rng: &mut ChaCha8Rng,
) -> MaskingOutcome {
    assert!((0.0..=1.0).contains(&mask_rate), "mask_rate out of [0,1]");
    let n_atoms = tok.atom_count();
    let n_mask = if mask_rate > 0.0 {
        ((mask_rate * n_atoms as f64).round() as usize).max(1)
    } else {
        0
    };
    let mut atom_order: Vec<usize> = (0..n_atoms).collect();
    atom_order.shuffle(rng);
    let chosen = &atom_order[..n_mask.min(n_atoms)];

    let mut masked_token_ids = vocab.encode(tok);
    let positions = tok.atom_token_positions();
    let mut mask_indicator = vec![0u8; n_atoms];
    for &atom in chosen {
        mask_indicator[atom] = 1;
    }
    for (k, &pos) in positions.iter().enumerate() {
        if mask_indicator[tok.atom_map[k]] == 1 {
            masked_token_ids[pos] = Vocab::MASK;
        }
    }
    MaskingOutcome {
        masked_token_ids,
        mask_indicator,
        atom_type_labels: vocab.atom_type_labels(tok),
    }
}
