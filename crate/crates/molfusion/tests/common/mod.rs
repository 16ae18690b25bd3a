//! Shared fixtures for the integration tests.

use std::path::Path;

/// Ring cores without oxygen; side chains decide the oxygen label, so
/// every scaffold group mixes both classes.
pub const CORES: [&str; 20] = [
    "C1CC1",
    "C1CCC1",
    "C1CCCC1",
    "C1CCCCC1",
    "C1CCCCCC1",
    "c1ccccc1",
    "c1ccncc1",
    "c1ccsc1",
    "C1CCNC1",
    "C1CCSC1",
    "C1CCNCC1",
    "C1CCSCC1",
    "c1ccc2ccccc2c1",
    "c1ccccc1c1ccccc1",
    "c1ccccc1Cc1ccccc1",
    "C1CCCCC1C1CCCCC1",
    "c1ccccc1C1CCCCC1",
    "C1CCCCC1CC1CCCCC1",
    "C1CCC2CCCCC2C1",
    "C1CCNC1C1CCNC1",
];

pub const CHAINS: [&str; 15] = [
    "", "C", "CC", "CCC", "CC(C)", "N", "NC", "NCC", "OC", "OCC", "OCCC", "COC", "OC(C)",
    "OCCN", "CCOC",
];

/// 300 molecules (20 scaffold cores x 15 side chains) labeled by whether
/// they contain oxygen. Oxygen only ever appears in side chains, so the
/// label varies within every scaffold group.
pub fn synthetic_oxygen_dataset() -> (Vec<String>, Vec<u8>) {
    let mut smiles = Vec::new();
    let mut labels = Vec::new();
    for core in CORES {
        for chain in CHAINS {
            let s = format!("{chain}{core}");
            let label = u8::from(s.contains(['O', 'o']));
            smiles.push(s);
            labels.push(label);
        }
    }
    (smiles, labels)
}

pub fn write_oxygen_csv(path: &Path) {
    let (smiles, labels) = synthetic_oxygen_dataset();
    let mut text = String::from("smiles,has_oxygen\n");
    for (s, l) in smiles.iter().zip(&labels) {
        text.push_str(&format!("{s},{l}\n"));
    }
    std::fs::write(path, text).unwrap();
}

pub fn write_corpus(path: &Path, smiles: &[String]) {
    std::fs::write(path, format!("{}\n", smiles.join("\n"))).unwrap();
}

/// Small acyclic-plus-aromatic corpus for memorization runs.
pub fn memorization_corpus() -> Vec<String> {
    [
        "CCO", "CC(=O)O", "c1ccccc1", "CCN", "CCCl", "CC(C)O", "C=CC", "CCOC", "CNC",
        "c1ccncc1", "CCS", "CC#N", "CCCO", "CCC=O", "COC=O", "c1ccccc1O", "c1ccccc1N",
        "CCBr", "CC(C)C", "CCCC",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
