//! Finite-difference checks of the analytic gradients through both
//! encoders and every training objective.

use molfusion::chemcore::parse;
use molfusion::encoders::{mask_atoms, init_params, EncoderConfig, MaskingOutcome, Vocab};
use molfusion::fusion::{
    batch_target, forward_batch, prepare, FusionConfig, FusionMethod, MoleculeRecord, UnmaskHead,
};
use molfusion::numerics::ParamStore;
use molfusion::rng;
use rand::Rng;

const SMILES: [&str; 4] = ["CCO", "c1ccccc1", "CC(=O)O", "CCN"];

struct Setup {
    records: Vec<MoleculeRecord>,
    maskings: Vec<MaskingOutcome>,
    enc_cfg: EncoderConfig,
    store: ParamStore,
}

fn setup(seed: u64) -> Setup {
    let toks: Vec<_> = SMILES.iter().map(|s| parse(s).unwrap().1).collect();
    let vocab = Vocab::build(&toks);
    let enc_cfg = EncoderConfig {
        d_model: 8,
        d_shared: 8,
        n_layers: 1,
        n_heads: 2,
        mp_rounds: 2,
        vocab_size: vocab.size(),
    };
    let records: Vec<_> = SMILES
        .iter()
        .map(|s| prepare(s, &vocab, 2, 128).unwrap())
        .collect();
    let mut mask_rng = rng::stream(seed, "gradcheck.mask");
    let maskings: Vec<_> = records
        .iter()
        .map(|r| mask_atoms(&r.tok, &vocab, 0.3, &mut mask_rng))
        .collect();
    let store = init_params(&enc_cfg, vocab.n_atom_types(), seed);
    Setup {
        records,
        maskings,
        enc_cfg,
        store,
    }
}

fn loss_value(s: &Setup, cfg: &FusionConfig) -> f64 {
    let refs: Vec<&MoleculeRecord> = s.records.iter().collect();
    let mask_refs: Vec<&MaskingOutcome> = s.maskings.iter().collect();
    let target = batch_target(&refs);
    let binding = s.store.bind_frozen();
    forward_batch(&refs, &mask_refs, &target, &binding, &s.enc_cfg, cfg)
        .unwrap()
        .total
        .item()
}

fn check_method(cfg: &FusionConfig, seed: u64, n_coords: usize) {
    let mut s = setup(seed);
    let refs: Vec<&MoleculeRecord> = s.records.iter().collect();
    let mask_refs: Vec<&MaskingOutcome> = s.maskings.iter().collect();
    let target = batch_target(&refs);
    let binding = s.store.bind();
    let out = forward_batch(&refs, &mask_refs, &target, &binding, &s.enc_cfg, cfg).unwrap();
    out.total.backward().unwrap();
    let grads = binding.grads();
    drop(binding);

    let names: Vec<String> = s.store.names().map(|n| n.to_string()).collect();
    let mut pick = rng::stream(seed, "gradcheck.pick");
    let h = 1e-5;
    let mut checked = 0;
    while checked < n_coords {
        let name = &names[pick.gen_range(0..names.len())];
        let len = s.store.get(name).unwrap().1.len();
        let idx = pick.gen_range(0..len);
        let analytic = grads[name][idx];
        let orig = s.store.get(name).unwrap().1[idx];
        s.store.get_mut(name).unwrap()[idx] = orig + h;
        let up = loss_value(&s, cfg);
        s.store.get_mut(name).unwrap()[idx] = orig - h;
        let down = loss_value(&s, cfg);
        s.store.get_mut(name).unwrap()[idx] = orig;
        let numeric = (up - down) / (2.0 * h);
        // mixed tolerance: relative for real gradients, absolute floor for
        // coordinates whose true gradient is (near) zero, where central
        // differences only produce rounding noise
        let err = (analytic - numeric).abs();
        let tol = 1e-4 * analytic.abs().max(numeric.abs()) + 1e-7;
        assert!(
            err < tol,
            "{name}[{idx}]: analytic {analytic:.3e} vs numeric {numeric:.3e} (err {err:.3e})"
        );
        checked += 1;
    }
}

#[test]
fn gradcheck_molsim() {
    check_method(
        &FusionConfig {
            method: FusionMethod::MolSimOnly,
            ..FusionConfig::default()
        },
        3,
        40,
    );
}

#[test]
fn gradcheck_atomalign_folded() {
    check_method(
        &FusionConfig {
            method: FusionMethod::AtomAlignOnly,
            ..FusionConfig::default()
        },
        4,
        40,
    );
}

#[test]
fn gradcheck_atomalign_binary() {
    check_method(
        &FusionConfig {
            method: FusionMethod::AtomAlignOnly,
            unmask_head: UnmaskHead::Binary,
            ..FusionConfig::default()
        },
        5,
        40,
    );
}

#[test]
fn gradcheck_contrastive() {
    check_method(
        &FusionConfig {
            method: FusionMethod::ContrastiveOnly,
            ..FusionConfig::default()
        },
        6,
        40,
    );
}

#[test]
fn gradcheck_molsim_unimask() {
    check_method(
        &FusionConfig {
            method: FusionMethod::MolSimUnimask,
            ..FusionConfig::default()
        },
        7,
        40,
    );
}

#[test]
fn gradcheck_molfusion_combined() {
    check_method(
        &FusionConfig {
            method: FusionMethod::MolFusion,
            beta: 0.7,
            ..FusionConfig::default()
        },
        8,
        60,
    );
}
