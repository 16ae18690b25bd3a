use std::collections::{BTreeMap, VecDeque};

use crate::chemcore::{ring_info, Molecule};

/// Scaffold of a molecule: the subgraph induced by all ring atoms plus the
/// atoms on shortest paths between rings. Acyclic molecules get the empty
/// scaffold. This is a simplified Bemis-Murcko variant computable without
/// canonical graph isomorphism.
pub fn scaffold_atoms(mol: &Molecule) -> Vec<usize> {
    let (ring_atoms, _) = ring_info(mol);
    let ring: Vec<usize> = (0..mol.atom_count()).filter(|&i| ring_atoms[i]).collect();
    if ring.is_empty() {
        return Vec::new();
    }
    let mut included = ring_atoms.clone();
    // linkers: atoms on a BFS shortest path between any two ring atoms
    for &start in &ring {
        let mut parent = vec![usize::MAX; mol.atom_count()];
        let mut seen = vec![false; mol.atom_count()];
        let mut queue = VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &mol.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        for &end in &ring {
            if end <= start || !seen[end] {
                continue;
            }
            let mut at = end;
            while at != start {
                included[at] = true;
                at = parent[at];
            }
        }
    }
    (0..mol.atom_count()).filter(|&i| included[i]).collect()
}

/// Cheap canonical key for a scaffold: the sorted multiset of
/// (element, degree-within-scaffold) pairs joined with the sorted edge
/// multiset of (bond order, endpoint invariants). Hash collisions merge
/// groups, which only makes the split more conservative.
pub fn scaffold_key(mol: &Molecule) -> String {
    let atoms = scaffold_atoms(mol);
    if atoms.is_empty() {
        return String::new();
    }
    let in_scaffold = {
        let mut f = vec![false; mol.atom_count()];
        for &a in &atoms {
            f[a] = true;
        }
        f
    };
    let mut degree = vec![0usize; mol.atom_count()];
    let mut edges = Vec::new();
    for b in &mol.bonds {
        let (u, v) = b.endpoints;
        if in_scaffold[u] && in_scaffold[v] {
            degree[u] += 1;
            degree[v] += 1;
            edges.push((b.order, u, v));
        }
    }
    let mut atom_inv: Vec<String> = atoms
        .iter()
        .map(|&a| format!("{}:{}", mol.atoms[a].element.symbol(), degree[a]))
        .collect();
    atom_inv.sort();
    let mut edge_inv: Vec<String> = edges
        .iter()
        .map(|&(order, u, v)| {
            let mut ends = [
                format!("{}:{}", mol.atoms[u].element.symbol(), degree[u]),
                format!("{}:{}", mol.atoms[v].element.symbol(), degree[v]),
            ];
            ends.sort();
            format!("{}[{}|{}]", order.code(), ends[0], ends[1])
        })
        .collect();
    edge_inv.sort();
    format!("{}//{}", atom_inv.join(","), edge_inv.join(","))
}

/// Disjoint train/valid/test index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Scaffold split with target fractions 0.8/0.1/0.1. Groups are assigned
/// greedily to train until its capacity is reached, then to whichever of
/// valid and test has the larger remaining capacity (valid on ties).
pub fn scaffold_split(mols: &[Molecule]) -> Split {
    let n = mols.len();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, m) in mols.iter().enumerate() {
        groups.entry(scaffold_key(m)).or_default().push(i);
    }
    let mut ordered: Vec<(String, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let train_cap = (0.8 * n as f64).round() as usize;
    let valid_cap = (0.1 * n as f64).round() as usize;
    let test_cap = n - train_cap - valid_cap;

    let mut split = Split {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for (_, members) in ordered {
        if split.train.len() < train_cap {
            split.train.extend(members);
        } else {
            let valid_left = valid_cap.saturating_sub(split.valid.len());
            let test_left = test_cap.saturating_sub(split.test.len());
            if valid_left >= test_left {
                split.valid.extend(members);
            } else {
                split.test.extend(members);
            }
        }
    }
    split.train.sort_unstable();
    split.valid.sort_unstable();
    split.test.sort_unstable();
    split
}
