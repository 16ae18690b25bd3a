//! SMILES parsing and molecular graph construction.
//!
//! Atom indices follow the left-to-right order of atom tokens in the source
//! string; every downstream per-atom alignment relies on that ordering.
//! Supported grammar: organic-subset atoms, bracket atoms with charge /
//! H-count / arbitrary element, bonds `- = # :`, branches, ring closures
//! 1-9 and `%nn`, aromatic lowercase `b c n o p s`. Stereo markers are
//! accepted and discarded. Multi-fragment (`.`) inputs are rejected.

mod featurize;
mod parse;
mod rings;
mod tokenize;

pub use featurize::{featurize, AtomFeatures, ATOM_FEATURE_DIM, BOND_FEATURE_DIM};
pub use parse::parse;
pub use rings::ring_info;
pub use tokenize::tokenize;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("unknown character at position {0}")]
    UnknownCharacter(usize),
    #[error("unterminated bracket atom starting at position {0}")]
    UnterminatedBracket(usize),
    #[error("formal charge out of range at position {0}")]
    ChargeOutOfRange(usize),
    #[error("ring closure digit {0} never closed")]
    UnmatchedRingClosure(u16),
    #[error("ring closure {0} reopened on the same atom")]
    RingSelfBond(u16),
    #[error("ring closure {0} bond symbols disagree")]
    RingBondOrderMismatch(u16),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("unclosed or unbalanced branch")]
    UnclosedBranch,
    #[error("branch opened before any atom")]
    BranchWithoutAtom,
    #[error("bond symbol at position {0} has no following atom")]
    DanglingBond(usize),
    #[error("multi-fragment ('.') SMILES are not supported")]
    MultiFragmentInput,
    #[error("valence overflow on atom {0}")]
    ValenceOverflow(usize),
}

/// Chemical element of an atom. Anything outside the supported set parses
/// as `Other` and featurizes as the OTHER class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
    H,
    Other(String),
}

impl Element {
    pub fn symbol(&self) -> &str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::H => "H",
            Element::Other(s) => s,
        }
    }

    /// Standard valence targets used for implicit hydrogen assignment.
    fn valence_targets(&self) -> &[u8] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N | Element::P => &[3, 5],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::H => &[1],
            Element::Other(_) => &[],
        }
    }

    /// Index into the one-hot element feature block.
    pub fn class_index(&self) -> usize {
        match self {
            Element::B => 0,
            Element::C => 1,
            Element::N => 2,
            Element::O => 3,
            Element::P => 4,
            Element::S => 5,
            Element::F => 6,
            Element::Cl => 7,
            Element::Br => 8,
            Element::I => 9,
            Element::H => 10,
            Element::Other(_) => 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Multiplicity used for valence accounting (aromatic counts as 1).
    pub fn valence(&self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Distinct code per order, for hashing and features.
    pub fn code(&self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    /// Hydrogens attached to this atom: the bracket H-count when written
    /// explicitly, otherwise the implicit count from standard valences.
    pub explicit_h: u8,
    /// 0-based order of first appearance in the SMILES string.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl Molecule {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.endpoints.0 == atom || b.endpoints.1 == atom)
            .count()
    }

    /// Neighbors of `atom` as (neighbor index, bond order).
    pub fn neighbors(&self, atom: usize) -> Vec<(usize, BondOrder)> {
        let mut out = Vec::new();
        for b in &self.bonds {
            if b.endpoints.0 == atom {
                out.push((b.endpoints.1, b.order));
            } else if b.endpoints.1 == atom {
                out.push((b.endpoints.0, b.order));
            }
        }
        out
    }
}

/// Token of a SMILES string. Each token keeps its exact source text so the
/// stream detokenizes back to the input byte-for-byte.
#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Atom(AtomToken),
    Bond { symbol: char, pos: usize },
    BranchOpen,
    BranchClose,
    Ring { number: u16, text: String },
    Dot { pos: usize },
}

impl Token {
    pub fn text(&self) -> String {
        match self {
            Token::Atom(a) => a.text.clone(),
            Token::Bond { symbol, .. } => symbol.to_string(),
            Token::BranchOpen => "(".to_string(),
            Token::BranchClose => ")".to_string(),
            Token::Ring { text, .. } => text.clone(),
            Token::Dot { .. } => ".".to_string(),
        }
    }

    /// Key under which this token enters the vocabulary.
    pub fn vocab_key(&self) -> String {
        self.text()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomToken {
    pub text: String,
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Explicit bracket H-count; None for organic-subset atoms.
    pub hcount: Option<u8>,
    pub bracket: bool,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedSmiles {
    pub tokens: Vec<Token>,
    /// Molecule atom index for each atom token, in token order.
    pub atom_map: Vec<usize>,
    /// Vocabulary ids per token; empty until a vocabulary assigns them.
    pub vocab_ids: Vec<usize>,
}

impl TokenizedSmiles {
    pub fn detokenize(&self) -> String {
        self.tokens.iter().map(|t| t.text()).collect()
    }

    /// Token-stream positions of atom tokens, in order.
    pub fn atom_token_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| matches!(t, Token::Atom(_)).then_some(i))
            .collect()
    }

    pub fn atom_tokens(&self) -> impl Iterator<Item = &AtomToken> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Atom(a) => Some(a),
            _ => None,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atom_map.len()
    }
}
