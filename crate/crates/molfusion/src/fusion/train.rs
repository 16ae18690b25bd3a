use rand::seq::SliceRandom;

use crate::chemcore::{featurize, parse, AtomFeatures, Molecule, TokenizedSmiles};
use crate::encoders::{
    encode_graph, encode_smiles, init_params, mask_atoms, EncoderConfig, MaskingOutcome, Vocab,
};
use crate::fingerprint::{morgan, tanimoto, Fingerprint};
use crate::numerics::{adam_step, AdamHyper, AdamState, ParamStore, Tensor};
use crate::rng;

use super::{forward_batch, FusionConfig, FusionError};

/// Everything one molecule contributes to a training step, preprocessed
/// once up front.
#[derive(Debug, Clone)]
pub struct MoleculeRecord {
    pub smiles: String,
    pub mol: Molecule,
    pub tok: TokenizedSmiles,
    pub feats: AtomFeatures,
    pub token_ids: Vec<usize>,
    pub atom_positions: Vec<usize>,
    pub fingerprint: Fingerprint,
    pub n_atom_types: usize,
}

pub fn prepare(
    smiles: &str,
    vocab: &Vocab,
    fp_radius: u32,
    fp_bits: usize,
) -> Result<MoleculeRecord, FusionError> {
    let (mol, mut tok) = parse(smiles)?;
    vocab.assign(&mut tok);
    let feats = featurize(&mol);
    let fingerprint = morgan(&mol, fp_radius, fp_bits);
    Ok(MoleculeRecord {
        smiles: smiles.to_string(),
        token_ids: tok.vocab_ids.clone(),
        atom_positions: tok.atom_token_positions(),
        fingerprint,
        n_atom_types: vocab.n_atom_types(),
        mol,
        tok,
        feats,
    })
}

/// Tanimoto target matrix for one batch.
pub fn batch_target(records: &[&MoleculeRecord]) -> Tensor {
    let n = records.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let t = tanimoto(&records[i].fingerprint, &records[j].fingerprint)
                .expect("uniform fingerprint length");
            values[i * n + j] = t;
            values[j * n + i] = t;
        }
    }
    Tensor::constant(vec![n, n], values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub molsim: Option<f64>,
    pub atomalign: Option<f64>,
    pub contrastive: Option<f64>,
    pub unimask: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub store: ParamStore,
    pub vocab: Vocab,
    pub enc_cfg: EncoderConfig,
    pub history: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    /// SMILES strings that failed to parse and were skipped.
    pub skipped: Vec<(String, String)>,
}

fn epoch_maskings(
    records: &[&MoleculeRecord],
    vocab: &Vocab,
    cfg: &FusionConfig,
    stream_name: &str,
) -> Vec<MaskingOutcome> {
    let mut rng = rng::stream(cfg.seed, stream_name);
    records
        .iter()
        .map(|r| mask_atoms(&r.tok, vocab, cfg.mask_rate, &mut rng))
        .collect()
}

fn run_batches(
    indices: &[usize],
    records: &[MoleculeRecord],
    vocab: &Vocab,
    store: &mut ParamStore,
    adam: Option<(&mut AdamState, &AdamHyper)>,
    enc_cfg: &EncoderConfig,
    cfg: &FusionConfig,
    mask_stream_prefix: &str,
) -> Result<(f64, LossComponents), FusionError> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut comps = LossComponents::default();
    let mut adam = adam;
    for (bi, chunk) in indices.chunks(cfg.batch_size).enumerate() {
        let batch: Vec<&MoleculeRecord> = chunk.iter().map(|&i| &records[i]).collect();
        let maskings = epoch_maskings(&batch, vocab, cfg, &format!("{mask_stream_prefix}.b{bi}"));
        let masking_refs: Vec<&MaskingOutcome> = maskings.iter().collect();
        let target = batch_target(&batch);
        let training = adam.is_some();
        let binding = if training {
            store.bind()
        } else {
            store.bind_frozen()
        };
        let out = forward_batch(&batch, &masking_refs, &target, &binding, enc_cfg, cfg)?;
        if let Some((state, hyper)) = adam.as_mut() {
            out.total.backward()?;
            let grads = binding.grads();
            adam_step(store, &grads, state, hyper);
        }
        total += out.total.item() * batch.len() as f64;
        count += batch.len();
        comps.accumulate(&out, batch.len());
    }
    Ok((total / count.max(1) as f64, comps))
}

#[derive(Debug, Default)]
struct LossComponents {
    molsim: Option<f64>,
    atomalign: Option<f64>,
    contrastive: Option<f64>,
    unimask: Option<f64>,
    weight: f64,
}

impl LossComponents {
    fn accumulate(&mut self, out: &super::LossBreakdown, n: usize) {
        let w = n as f64;
        for (slot, value) in [
            (&mut self.molsim, out.molsim),
            (&mut self.atomalign, out.atomalign),
            (&mut self.contrastive, out.contrastive),
            (&mut self.unimask, out.unimask),
        ] {
            if let Some(v) = value {
                *slot = Some(slot.unwrap_or(0.0) + v * w);
            }
        }
        self.weight += w;
    }

    fn mean(&self, v: Option<f64>) -> Option<f64> {
        v.map(|x| x / self.weight.max(1.0))
    }
}

/// Train both encoders, the projections, and the prediction heads jointly
/// on a SMILES corpus. Returns the best-validation-loss parameters.
pub fn train(
    corpus: &[String],
    enc_cfg: &EncoderConfig,
    cfg: &FusionConfig,
    fp_radius: u32,
    fp_bits: usize,
    mut log: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, FusionError> {
    if corpus.is_empty() {
        return Err(FusionError::EmptyCorpus);
    }
    // Vocabulary over everything that tokenizes; records over everything
    // that fully parses.
    let mut toks = Vec::new();
    let mut parsed: Vec<String> = Vec::new();
    let mut skipped = Vec::new();
    for s in corpus {
        match parse(s) {
            Ok((_, tok)) => {
                toks.push(tok);
                parsed.push(s.clone());
            }
            Err(e) => skipped.push((s.clone(), e.to_string())),
        }
    }
    if parsed.is_empty() {
        return Err(FusionError::AllUnparseable);
    }
    let vocab = Vocab::build(&toks);
    let mut enc_cfg = enc_cfg.clone();
    enc_cfg.vocab_size = vocab.size();

    let records: Vec<MoleculeRecord> = parsed
        .iter()
        .map(|s| prepare(s, &vocab, fp_radius, fp_bits))
        .collect::<Result<_, _>>()?;

    let mut store = init_params(&enc_cfg, vocab.n_atom_types(), cfg.seed);
    if !cfg.method.needs_training() || cfg.epochs == 0 {
        return Ok(TrainOutcome {
            store,
            vocab,
            enc_cfg,
            history: Vec::new(),
            best_epoch: None,
            skipped,
        });
    }

    // 90/10 train/validation split by seeded shuffle.
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(cfg.seed, "shuffle"));
    let n_val = if n >= 2 { (n / 10).max(1) } else { 0 };
    let val_idx: Vec<usize> = order[..n_val].to_vec();
    let train_idx: Vec<usize> = order[n_val..].to_vec();

    let hyper = AdamHyper {
        lr: cfg.lr,
        ..AdamHyper::default()
    };
    let mut adam = AdamState::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut bad_epochs = 0usize;

    for epoch in 0..cfg.epochs {
        let mut epoch_order = train_idx.clone();
        epoch_order.shuffle(&mut rng::stream(cfg.seed, &format!("order.e{epoch}")));
        let (train_loss, comps) = run_batches(
            &epoch_order,
            &records,
            &vocab,
            &mut store,
            Some((&mut adam, &hyper)),
            &enc_cfg,
            cfg,
            &format!("mask.e{epoch}"),
        )?;
        // Validation masks are fixed across epochs so losses compare.
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            run_batches(
                &val_idx,
                &records,
                &vocab,
                &mut store,
                None,
                &enc_cfg,
                cfg,
                "valmask",
            )?
            .0
        };
        let entry = EpochLog {
            epoch,
            train_loss,
            val_loss,
            molsim: comps.mean(comps.molsim),
            atomalign: comps.mean(comps.atomalign),
            contrastive: comps.mean(comps.contrastive),
            unimask: comps.mean(comps.unimask),
        };
        log(&entry);
        history.push(entry);

        let improved = best.as_ref().map_or(true, |(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, epoch, store.clone()));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > cfg.patience {
                break;
            }
        }
    }

    let (_, best_epoch, best_store) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        store: best_store,
        vocab,
        enc_cfg,
        history,
        best_epoch: Some(best_epoch),
        skipped,
    })
}

/// Top-1 accuracy of masked-atom prediction over a corpus, using the
/// configured AtomAlign head on frozen parameters.
pub fn masked_accuracy(
    records: &[MoleculeRecord],
    vocab: &Vocab,
    store: &ParamStore,
    enc_cfg: &EncoderConfig,
    cfg: &FusionConfig,
    stream_name: &str,
) -> Result<f64, FusionError> {
    let binding = store.bind_frozen();
    let mut rng = rng::stream(cfg.seed, stream_name);
    let mut correct = 0usize;
    let mut total = 0usize;
    for r in records {
        let masking = mask_atoms(&r.tok, vocab, cfg.mask_rate, &mut rng);
        let graph = encode_graph(&r.mol, &r.feats, &binding, enc_cfg)?;
        let masked = encode_smiles(
            &masking.masked_token_ids,
            &r.atom_positions,
            &r.tok.atom_map,
            &binding,
            enc_cfg,
        )?;
        let diff = graph.per_atom.sub(&masked.per_atom)?;
        let logits = diff
            .matmul(&binding.get("head.atomalign.w"))?
            .add(&binding.get("head.atomalign.b"))?;
        let c = logits.shape()[1];
        for atom in masking.masked_atoms() {
            let row = &logits.data()[atom * c..(atom + 1) * c];
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if argmax == masking.atom_type_labels[atom] {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total.max(1) as f64)
}
