use super::Molecule;

/// Ring membership via bridge detection: an atom (or bond) is in a ring
/// iff it touches (is) an edge that is not a bridge.
///
/// Returns (per-atom in-ring flags, per-bond in-ring flags aligned with
/// `mol.bonds`).
pub fn ring_info(mol: &Molecule) -> (Vec<bool>, Vec<bool>) {
    let n = mol.atom_count();
    let m = mol.bonds.len();
    // adjacency with edge ids
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (eid, b) in mol.bonds.iter().enumerate() {
        adj[b.endpoints.0].push((b.endpoints.1, eid));
        adj[b.endpoints.1].push((b.endpoints.0, eid));
    }

    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; m];
    let mut timer = 0usize;

    // Iterative DFS to survive deep chains.
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // stack frames: (node, incoming edge id, iterator position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while !stack.is_empty() {
            let top = stack.len() - 1;
            let (u, in_edge, pos) = stack[top];
            if pos < adj[u].len() {
                stack[top].2 += 1;
                let (v, eid) = adj[u][pos];
                if eid == in_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, eid, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[in_edge] = true;
                    }
                }
            }
        }
    }

    let bond_in_ring: Vec<bool> = is_bridge.iter().map(|&b| !b).collect();
    let mut atom_in_ring = vec![false; n];
    for (eid, b) in mol.bonds.iter().enumerate() {
        if bond_in_ring[eid] {
            atom_in_ring[b.endpoints.0] = true;
            atom_in_ring[b.endpoints.1] = true;
        }
    }
    (atom_in_ring, bond_in_ring)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemcore::parse;

    #[test]
    fn chain_has_no_rings() {
        let (mol, _) = parse("CCCCC").unwrap();
        let (atoms, bonds) = ring_info(&mol);
        assert!(atoms.iter().all(|&f| !f));
        assert!(bonds.iter().all(|&f| !f));
    }

    #[test]
    fn benzene_fully_in_ring() {
        let (mol, _) = parse("c1ccccc1").unwrap();
        let (atoms, bonds) = ring_info(&mol);
        assert!(atoms.iter().all(|&f| f));
        assert!(bonds.iter().all(|&f| f));
    }

    #[test]
    fn toluene_methyl_outside_ring() {
        let (mol, _) = parse("Cc1ccccc1").unwrap();
        let (atoms, _) = ring_info(&mol);
        assert!(!atoms[0]);
        assert!(atoms[1..].iter().all(|&f| f));
    }

    #[test]
    fn linker_between_rings_not_in_ring() {
        // biphenylmethane-like: ring CH2 ring
        let (mol, _) = parse("c1ccccc1Cc1ccccc1").unwrap();
        let (atoms, _) = ring_info(&mol);
        assert!(!atoms[6]);
        assert_eq!(atoms.iter().filter(|&&f| f).count(), 12);
    }

    #[test]
    fn fused_bicyclic() {
        let (mol, _) = parse("C1CC2CCC1C2").unwrap();
        let (atoms, _) = ring_info(&mol);
        assert!(atoms.iter().all(|&f| f));
    }

    #[test]
    fn isolated_atom() {
        let (mol, _) = parse("C").unwrap();
        let (atoms, bonds) = ring_info(&mol);
        assert_eq!(atoms, [false]);
        assert!(bonds.is_empty());
    }
}
