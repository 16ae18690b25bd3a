use crate::encoders::{
    encode_graph, encode_smiles, project, EncoderConfig, MaskingOutcome,
};
use crate::numerics::{Binding, Tensor};

use super::train::MoleculeRecord;
use super::{FusionConfig, FusionError, FusionMethod, UnmaskHead};

/// MolSim: mean squared error between Q = τ⁻¹·S·Gᵀ and the Tanimoto target.
pub fn molsim_loss(
    s: &Tensor,
    g: &Tensor,
    target: &Tensor,
    tau: f64,
) -> Result<Tensor, FusionError> {
    let q = s.matmul(&g.transpose()?)?.scale(1.0 / tau);
    Ok(q.mse(target)?)
}

/// The scaled similarity matrix Q itself (diagnostics and tests).
pub fn similarity_logits(s: &Tensor, g: &Tensor, tau: f64) -> Result<Tensor, FusionError> {
    Ok(s.matmul(&g.transpose()?)?.scale(1.0 / tau))
}

/// Symmetric InfoNCE over cross-modal pairs; same-molecule pairs are the
/// positives on the diagonal.
pub fn contrastive_baseline_loss(
    s: &Tensor,
    g: &Tensor,
    tau: f64,
) -> Result<Tensor, FusionError> {
    let logits = similarity_logits(s, g, tau)?;
    let n = logits.shape()[0];
    let diagonal: Vec<usize> = (0..n).collect();
    let row_ce = logits.cross_entropy(&diagonal)?;
    let col_ce = logits.transpose()?.cross_entropy(&diagonal)?;
    Ok(row_ce.add(&col_ce)?.scale(0.5))
}

fn flatten_positions(maskings: &[&MaskingOutcome]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut masked = Vec::new();
    let mut unmasked = Vec::new();
    let mut masked_labels = Vec::new();
    let mut offset = 0;
    for m in maskings {
        for (i, &flag) in m.mask_indicator.iter().enumerate() {
            if flag == 1 {
                masked.push(offset + i);
                masked_labels.push(m.atom_type_labels[i]);
            } else {
                unmasked.push(offset + i);
            }
        }
        offset += m.mask_indicator.len();
    }
    (masked, unmasked, masked_labels)
}

/// AtomAlign: per-atom difference 𝓓 = 𝓣 − 𝓔_mask through a single linear
/// head; masked positions predict their atom type, unmasked positions the
/// NOT_MASKED class, combined as α·L_mask + (1−α)·L_unmask. A term with an
/// empty position set is dropped and the other takes weight 1.
pub fn atomalign_loss(
    graph_per_atom: &Tensor,
    masked_smiles_per_atom: &Tensor,
    maskings: &[&MaskingOutcome],
    binding: &Binding,
    alpha: f64,
    unmask_head: UnmaskHead,
    n_atom_types: usize,
) -> Result<Tensor, FusionError> {
    if graph_per_atom.shape().first() == Some(&0) || graph_per_atom.is_empty() {
        return Err(FusionError::EmptyMolecule);
    }
    let diff = graph_per_atom.sub(masked_smiles_per_atom)?;
    let (masked, unmasked, masked_labels) = flatten_positions(maskings);

    let (mask_term, unmask_term) = match unmask_head {
        UnmaskHead::Folded => {
            let logits = diff
                .matmul(&binding.get("head.atomalign.w"))?
                .add(&binding.get("head.atomalign.b"))?;
            let mask_term = if masked.is_empty() {
                None
            } else {
                Some(logits.gather_rows(&masked)?.cross_entropy(&masked_labels)?)
            };
            let unmask_term = if unmasked.is_empty() {
                None
            } else {
                let not_masked = vec![n_atom_types; unmasked.len()];
                Some(logits.gather_rows(&unmasked)?.cross_entropy(&not_masked)?)
            };
            (mask_term, unmask_term)
        }
        UnmaskHead::Binary => {
            let mask_term = if masked.is_empty() {
                None
            } else {
                let type_logits = diff
                    .matmul(&binding.get("head.atomtype.w"))?
                    .add(&binding.get("head.atomtype.b"))?;
                Some(
                    type_logits
                        .gather_rows(&masked)?
                        .cross_entropy(&masked_labels)?,
                )
            };
            let unmask_term = if unmasked.is_empty() {
                None
            } else {
                let flag_logits = diff
                    .matmul(&binding.get("head.maskflag.w"))?
                    .add(&binding.get("head.maskflag.b"))?;
                let targets = vec![0usize; unmasked.len()];
                Some(flag_logits.gather_rows(&unmasked)?.cross_entropy(&targets)?)
            };
            (mask_term, unmask_term)
        }
    };

    match (mask_term, unmask_term) {
        (Some(m), Some(u)) => Ok(m.scale(alpha).add(&u.scale(1.0 - alpha))?),
        (Some(m), None) => Ok(m),
        (None, Some(u)) => Ok(u),
        (None, None) => Err(FusionError::EmptyMolecule),
    }
}

/// Single-modality baseline: predict masked atom types directly from the
/// masked-SMILES rows, no graph subtraction, masked positions only.
pub fn unimodal_mask_loss(
    masked_smiles_per_atom: &Tensor,
    maskings: &[&MaskingOutcome],
    binding: &Binding,
) -> Result<Tensor, FusionError> {
    let (masked, _, masked_labels) = flatten_positions(maskings);
    if masked.is_empty() {
        return Err(FusionError::EmptyMolecule);
    }
    let logits = masked_smiles_per_atom
        .matmul(&binding.get("head.unimask.w"))?
        .add(&binding.get("head.unimask.b"))?;
    Ok(logits.gather_rows(&masked)?.cross_entropy(&masked_labels)?)
}

/// Component values of one batch forward pass.
#[derive(Debug)]
pub struct LossBreakdown {
    pub total: Tensor,
    pub molsim: Option<f64>,
    pub atomalign: Option<f64>,
    pub contrastive: Option<f64>,
    pub unimask: Option<f64>,
}

/// Run every encoding the configured method needs over one batch and
/// assemble its loss. MolSim's S comes from unmasked SMILES encodings;
/// AtomAlign uses the masked ones.
pub fn forward_batch(
    records: &[&MoleculeRecord],
    maskings: &[&MaskingOutcome],
    target: &Tensor,
    binding: &Binding,
    enc_cfg: &EncoderConfig,
    cfg: &FusionConfig,
) -> Result<LossBreakdown, FusionError> {
    let method = cfg.method;
    let needs_pooled = matches!(
        method,
        FusionMethod::ContrastiveOnly
            | FusionMethod::MolSimOnly
            | FusionMethod::ContrastiveAtomAlign
            | FusionMethod::MolSimUnimask
            | FusionMethod::MolFusion
    );
    let needs_atomalign = matches!(
        method,
        FusionMethod::AtomAlignOnly
            | FusionMethod::ContrastiveAtomAlign
            | FusionMethod::MolFusion
    );
    let needs_unimask = matches!(method, FusionMethod::MolSimUnimask);
    let needs_masked = needs_atomalign || needs_unimask;
    let needs_graph = needs_pooled || needs_atomalign;

    let graph_embs: Vec<_> = if needs_graph {
        records
            .iter()
            .map(|r| encode_graph(&r.mol, &r.feats, binding, enc_cfg))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let masked_embs: Vec<_> = if needs_masked {
        records
            .iter()
            .zip(maskings)
            .map(|(r, m)| {
                encode_smiles(
                    &m.masked_token_ids,
                    &r.atom_positions,
                    &r.tok.atom_map,
                    binding,
                    enc_cfg,
                )
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };

    let mut molsim = None;
    let mut atomalign = None;
    let mut contrastive = None;
    let mut unimask = None;
    // (weight, term); single unit-weight terms pass through unscaled so
    // degenerate configs stay bit-identical to the lone component.
    let mut terms: Vec<(f64, Tensor)> = Vec::new();

    if needs_pooled {
        let smiles_embs: Vec<_> = records
            .iter()
            .map(|r| {
                encode_smiles(
                    &r.token_ids,
                    &r.atom_positions,
                    &r.tok.atom_map,
                    binding,
                    enc_cfg,
                )
            })
            .collect::<Result<_, _>>()?;
        let s_rows: Vec<Tensor> = smiles_embs
            .iter()
            .map(|e| project(&e.pooled, binding, "smiles"))
            .collect::<Result<_, _>>()?;
        let g_rows: Vec<Tensor> = graph_embs
            .iter()
            .map(|e| project(&e.pooled, binding, "graph"))
            .collect::<Result<_, _>>()?;
        let s = Tensor::concat_rows(&s_rows)?;
        let g = Tensor::concat_rows(&g_rows)?;
        match method {
            FusionMethod::ContrastiveOnly | FusionMethod::ContrastiveAtomAlign => {
                let loss = contrastive_baseline_loss(&s, &g, cfg.tau)?;
                contrastive = Some(loss.item());
                terms.push((1.0, loss));
            }
            _ => {
                let loss = molsim_loss(&s, &g, target, cfg.tau)?;
                molsim = Some(loss.item());
                terms.push((cfg.molsim_weight, loss));
            }
        }
    }

    if needs_atomalign {
        let g_atoms: Vec<Tensor> = graph_embs.iter().map(|e| e.per_atom.clone()).collect();
        let m_atoms: Vec<Tensor> = masked_embs.iter().map(|e| e.per_atom.clone()).collect();
        let loss = atomalign_loss(
            &Tensor::concat_rows(&g_atoms)?,
            &Tensor::concat_rows(&m_atoms)?,
            maskings,
            binding,
            cfg.alpha,
            cfg.unmask_head,
            records[0].n_atom_types,
        )?;
        atomalign = Some(loss.item());
        let weight = if method == FusionMethod::AtomAlignOnly {
            1.0
        } else {
            cfg.beta
        };
        terms.push((weight, loss));
    }

    if needs_unimask {
        let m_atoms: Vec<Tensor> = masked_embs.iter().map(|e| e.per_atom.clone()).collect();
        let loss = unimodal_mask_loss(&Tensor::concat_rows(&m_atoms)?, maskings, binding)?;
        unimask = Some(loss.item());
        terms.push((cfg.beta, loss));
    }

    let live: Vec<(f64, Tensor)> = terms.into_iter().filter(|(w, _)| *w != 0.0).collect();
    let total = match live.len() {
        0 => Tensor::scalar(0.0),
        1 if live[0].0 == 1.0 => live[0].1.clone(),
        _ => {
            let mut acc = live[0].1.scale(live[0].0);
            for (w, t) in &live[1..] {
                acc = acc.add(&t.scale(*w))?;
            }
            acc
        }
    };
    Ok(LossBreakdown {
        total,
        molsim,
        atomalign,
        contrastive,
        unimask,
    })
}
