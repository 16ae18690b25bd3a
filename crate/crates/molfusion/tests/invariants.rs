//! Property-based invariants over generated SMILES strings.

use molfusion::chemcore::parse;
use molfusion::downstream::roc_auc;
use molfusion::fingerprint::{morgan, tanimoto};
use proptest::prelude::*;

const BACKBONE: [&str; 2] = ["C", "N"];
const LEAF: [&str; 4] = ["C", "N", "O", "F"];

/// Builds an acyclic single-bonded SMILES from a choice list, recording
/// element symbols in order of appearance. Branch atoms are always leaves
/// so no atom exceeds its valence.
fn build(spec: &[(u8, u8, bool)]) -> (String, Vec<String>) {
    let mut smiles = String::new();
    let mut elements = Vec::new();
    for (i, &(backbone, leaf, branch)) in spec.iter().enumerate() {
        let atom = BACKBONE[backbone as usize % BACKBONE.len()];
        smiles.push_str(atom);
        elements.push(atom.to_string());
        if branch && i + 1 < spec.len() {
            let leaf = LEAF[leaf as usize % LEAF.len()];
            smiles.push('(');
            smiles.push_str(leaf);
            smiles.push(')');
            elements.push(leaf.to_string());
        }
    }
    (smiles, elements)
}

fn spec_strategy() -> impl Strategy<Value = Vec<(u8, u8, bool)>> {
    prop::collection::vec((0u8..2, 0u8..4, any::<bool>()), 1..16)
}

proptest! {
    #[test]
    fn tokenize_round_trips(spec in spec_strategy()) {
        let (smiles, _) = build(&spec);
        let (_, tok) = parse(&smiles).unwrap();
        let joined: String = tok.tokens.iter().map(|t| t.text()).collect();
        prop_assert_eq!(joined, smiles);
    }

    #[test]
    fn atom_order_matches_appearance(spec in spec_strategy()) {
        let (smiles, elements) = build(&spec);
        let (mol, _) = parse(&smiles).unwrap();
        let parsed: Vec<String> =
            mol.atoms.iter().map(|a| a.element.symbol().to_string()).collect();
        prop_assert_eq!(parsed, elements);
    }

    #[test]
    fn trees_have_one_bond_less_than_atoms(spec in spec_strategy()) {
        let (smiles, _) = build(&spec);
        let (mol, _) = parse(&smiles).unwrap();
        prop_assert_eq!(mol.bonds.len(), mol.atom_count() - 1);
    }

    #[test]
    fn tanimoto_is_a_similarity(a in spec_strategy(), b in spec_strategy()) {
        let (sa, _) = build(&a);
        let (sb, _) = build(&b);
        let fa = morgan(&parse(&sa).unwrap().0, 2, 1024);
        let fb = morgan(&parse(&sb).unwrap().0, 2, 1024);
        let t_ab = tanimoto(&fa, &fb).unwrap();
        let t_ba = tanimoto(&fb, &fa).unwrap();
        prop_assert_eq!(t_ab, t_ba);
        prop_assert!((0.0..=1.0).contains(&t_ab));
        prop_assert_eq!(tanimoto(&fa, &fa).unwrap(), 1.0);
    }

    #[test]
    fn roc_auc_is_rank_invariant(pairs in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..60)) {
        let scores: Vec<f64> = pairs.iter().map(|&(s, _)| s).collect();
        let labels: Vec<u8> = pairs.iter().map(|&(_, l)| l as u8).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let base = roc_auc(&scores, &labels).unwrap();
        let shifted: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
        prop_assert_eq!(base, roc_auc(&shifted, &labels).unwrap());
        prop_assert_eq!(base, roc_auc(&cubed, &labels).unwrap());
        prop_assert!((0.0..=1.0).contains(&base));
    }
}
