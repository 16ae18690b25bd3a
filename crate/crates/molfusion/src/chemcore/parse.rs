use std::collections::{BTreeMap, HashSet};

use super::{
    tokenize, Atom, Bond, BondOrder, ChemError, Molecule, Token, TokenizedSmiles,
};

fn bond_order_from_symbol(symbol: char) -> BondOrder {
    match symbol {
        '=' => BondOrder::Double,
        '#' => BondOrder::Triple,
        ':' => BondOrder::Aromatic,
        // '/' and '\' carry stereo information we discard; '-' is explicit single.
        _ => BondOrder::Single,
    }
}

struct OpenRing {
    atom: usize,
    symbol: Option<char>,
}

/// Parse a SMILES string into a molecular graph plus its token stream.
pub fn parse(smiles: &str) -> Result<(Molecule, TokenizedSmiles), ChemError> {
    let tok = tokenize(smiles)?;
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut bond_set: HashSet<(usize, usize)> = HashSet::new();
    let mut branch_stack: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(char, usize)> = None;
    let mut open_rings: BTreeMap<u16, OpenRing> = BTreeMap::new();
    // atom aromatic flags, needed before Atom construction for elided bonds
    let mut aromatic_flags: Vec<bool> = Vec::new();

    let add_bond = |bonds: &mut Vec<Bond>,
                        bond_set: &mut HashSet<(usize, usize)>,
                        a: usize,
                        b: usize,
                        order: BondOrder|
     -> Result<(), ChemError> {
        let key = (a.min(b), a.max(b));
        if !bond_set.insert(key) {
            return Err(ChemError::DuplicateBond(key.0, key.1));
        }
        bonds.push(Bond {
            endpoints: (a, b),
            order,
        });
        Ok(())
    };

    for token in &tok.tokens {
        match token {
            Token::Atom(at) => {
                let index = atoms.len();
                atoms.push(Atom {
                    element: at.element.clone(),
                    formal_charge: at.charge,
                    aromatic: at.aromatic,
                    explicit_h: at.hcount.unwrap_or(0),
                    index,
                });
                aromatic_flags.push(at.aromatic);
                if let Some(p) = prev {
                    let order = match pending.take() {
                        Some((sym, _)) => bond_order_from_symbol(sym),
                        None => {
                            if aromatic_flags[p] && at.aromatic {
                                BondOrder::Aromatic
                            } else {
                                BondOrder::Single
                            }
                        }
                    };
                    add_bond(&mut bonds, &mut bond_set, p, index, order)?;
                }
                prev = Some(index);
            }
            Token::Bond { symbol, pos } => {
                if pending.is_some() || prev.is_none() {
                    return Err(ChemError::DanglingBond(*pos));
                }
                pending = Some((*symbol, *pos));
            }
            Token::BranchOpen => {
                let p = prev.ok_or(ChemError::BranchWithoutAtom)?;
                if pending.is_some() {
                    return Err(ChemError::DanglingBond(pending.unwrap().1));
                }
                branch_stack.push(p);
            }
            Token::BranchClose => {
                if pending.is_some() {
                    return Err(ChemError::DanglingBond(pending.unwrap().1));
                }
                prev = Some(branch_stack.pop().ok_or(ChemError::UnclosedBranch)?);
            }
            Token::Ring { number, .. } => {
                let current = prev.ok_or(ChemError::UnmatchedRingClosure(*number))?;
                let symbol = pending.take().map(|(s, _)| s);
                match open_rings.remove(number) {
                    None => {
                        open_rings.insert(
                            *number,
                            OpenRing {
                                atom: current,
                                symbol,
                            },
                        );
                    }
                    Some(open) => {
                        if open.atom == current {
                            return Err(ChemError::RingSelfBond(*number));
                        }
                        let order = match (open.symbol, symbol) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(ChemError::RingBondOrderMismatch(*number))
                            }
                            (Some(s), _) | (_, Some(s)) => bond_order_from_symbol(s),
                            (None, None) => {
                                if aromatic_flags[open.atom] && aromatic_flags[current] {
                                    BondOrder::Aromatic
                                } else {
                                    BondOrder::Single
                                }
                            }
                        };
                        add_bond(&mut bonds, &mut bond_set, open.atom, current, order)?;
                    }
                }
            }
            Token::Dot { .. } => return Err(ChemError::MultiFragmentInput),
        }
    }

    if let Some((_, pos)) = pending {
        return Err(ChemError::DanglingBond(pos));
    }
    if !branch_stack.is_empty() {
        return Err(ChemError::UnclosedBranch);
    }
    if let Some((&number, _)) = open_rings.iter().next() {
        return Err(ChemError::UnmatchedRingClosure(number));
    }
    if atoms.is_empty() {
        return Err(ChemError::EmptyInput);
    }

    let mut mol = Molecule { atoms, bonds };
    assign_implicit_hydrogens(&mut mol, &tok)?;
    Ok((mol, tok))
}

/// Implicit hydrogen assignment from fixed standard valences. Bracket atoms
/// keep their explicit count; aromatic atoms get one valence slot consumed
/// by the delocalized system (aromatic-adjusted valence).
fn assign_implicit_hydrogens(mol: &mut Molecule, tok: &TokenizedSmiles) -> Result<(), ChemError> {
    let mut bond_sums = vec![0u16; mol.atoms.len()];
    for b in &mol.bonds {
        bond_sums[b.endpoints.0] += b.order.valence() as u16;
        bond_sums[b.endpoints.1] += b.order.valence() as u16;
    }
    let brackets: Vec<bool> = tok.atom_tokens().map(|a| a.bracket).collect();
    for (i, atom) in mol.atoms.iter_mut().enumerate() {
        if brackets[i] {
            continue; // explicit hcount already set
        }
        let used = bond_sums[i];
        let target = atom
            .element
            .valence_targets()
            .iter()
            .find(|&&t| t as u16 >= used)
            .copied();
        let subvalence = match target {
            Some(t) => t as u16 - used,
            None => return Err(ChemError::ValenceOverflow(i)),
        };
        atom.explicit_h = if atom.aromatic {
            subvalence.saturating_sub(1) as u8
        } else {
            subvalence as u8
        };
    }
    Ok(())
}
