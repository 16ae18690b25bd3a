use super::{ring_info, BondOrder, Molecule};

// element one-hot (11 + OTHER) + degree one-hot 0-6 + charge + aromatic
// + explicit_h one-hot 0-4 + in-ring flag
pub const ATOM_FEATURE_DIM: usize = 12 + 7 + 1 + 1 + 5 + 1;
pub const BOND_FEATURE_DIM: usize = 4;

/// Per-atom and per-bond input features for the graph encoder. Row order
/// follows atom indices; bond rows follow `mol.bonds`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomFeatures {
    pub atom: Vec<f64>,
    pub bond: Vec<f64>,
    pub n_atoms: usize,
    pub n_bonds: usize,
}

impl AtomFeatures {
    pub fn atom_row(&self, i: usize) -> &[f64] {
        &self.atom[i * ATOM_FEATURE_DIM..(i + 1) * ATOM_FEATURE_DIM]
    }

    pub fn bond_row(&self, i: usize) -> &[f64] {
        &self.bond[i * BOND_FEATURE_DIM..(i + 1) * BOND_FEATURE_DIM]
    }
}

pub fn featurize(mol: &Molecule) -> AtomFeatures {
    let (atom_in_ring, _) = ring_info(mol);
    let n = mol.atom_count();
    let mut atom = vec![0.0; n * ATOM_FEATURE_DIM];
    for (i, a) in mol.atoms.iter().enumerate() {
        let row = &mut atom[i * ATOM_FEATURE_DIM..(i + 1) * ATOM_FEATURE_DIM];
        row[a.element.class_index()] = 1.0;
        let degree = mol.degree(i).min(6);
        row[12 + degree] = 1.0;
        row[19] = a.formal_charge as f64;
        row[20] = if a.aromatic { 1.0 } else { 0.0 };
        let h = (a.explicit_h as usize).min(4);
        row[21 + h] = 1.0;
        row[26] = if atom_in_ring[i] { 1.0 } else { 0.0 };
    }
    let mut bond = vec![0.0; mol.bonds.len() * BOND_FEATURE_DIM];
    for (i, b) in mol.bonds.iter().enumerate() {
        let slot = match b.order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        };
        bond[i * BOND_FEATURE_DIM + slot] = 1.0;
    }
    AtomFeatures {
        atom,
        bond,
        n_atoms: n,
        n_bonds: mol.bonds.len(),
    }
}
