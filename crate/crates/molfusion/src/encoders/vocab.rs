use std::collections::BTreeMap;

use crate::chemcore::{Token, TokenizedSmiles};

/// Token vocabulary plus the atom-type class list used as AtomAlign labels.
///
/// Token ids: 0 = PAD, 1 = MASK, 2 = UNK, then corpus tokens in sorted
/// order. Atom-type classes are the distinct atom-token spellings in the
/// corpus plus a trailing OTHER class for out-of-corpus atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    atom_types: Vec<String>,
    atom_index: BTreeMap<String, usize>,
}

impl Vocab {
    pub const PAD: usize = 0;
    pub const MASK: usize = 1;
    pub const UNK: usize = 2;
    pub const ATOM_TYPE_OTHER: &'static str = "<OTHER>";

    pub fn build<'a>(corpus: impl IntoIterator<Item = &'a TokenizedSmiles>) -> Vocab {
        let mut token_set: BTreeMap<String, ()> = BTreeMap::new();
        let mut atom_set: BTreeMap<String, ()> = BTreeMap::new();
        for tok in corpus {
            for t in &tok.tokens {
                token_set.insert(t.vocab_key(), ());
                if matches!(t, Token::Atom(_)) {
                    atom_set.insert(t.vocab_key(), ());
                }
            }
        }
        let mut tokens = vec!["<PAD>".to_string(), "<MASK>".to_string(), "<UNK>".to_string()];
        tokens.extend(token_set.into_keys());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let mut atom_types: Vec<String> = atom_set.into_keys().collect();
        atom_types.push(Self::ATOM_TYPE_OTHER.to_string());
        let atom_index = atom_types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            tokens,
            index,
            atom_types,
            atom_index,
        }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// V: number of atom-type classes (including OTHER).
    pub fn n_atom_types(&self) -> usize {
        self.atom_types.len()
    }

    /// Class index of the NOT_MASKED label in the folded V+1 head.
    pub fn not_masked_class(&self) -> usize {
        self.n_atom_types()
    }

    pub fn token_id(&self, key: &str) -> usize {
        self.index.get(key).copied().unwrap_or(Self::UNK)
    }

    pub fn atom_type(&self, key: &str) -> usize {
        self.atom_index
            .get(key)
            .copied()
            .unwrap_or(self.n_atom_types() - 1)
    }

    pub fn encode(&self, tok: &TokenizedSmiles) -> Vec<usize> {
        tok.tokens.iter().map(|t| self.token_id(&t.vocab_key())).collect()
    }

    /// Fill in `vocab_ids` on a token stream.
    pub fn assign(&self, tok: &mut TokenizedSmiles) {
        tok.vocab_ids = self.encode(tok);
    }

    /// Atom-type class per atom, in molecule atom-index order.
    pub fn atom_type_labels(&self, tok: &TokenizedSmiles) -> Vec<usize> {
        let mut labels = vec![0usize; tok.atom_count()];
        for (k, at) in tok.atom_tokens().enumerate() {
            labels[tok.atom_map[k]] = self.atom_type(&at.text);
        }
        labels
    }

    pub fn token_strings(&self) -> &[String] {
        &self.tokens
    }

    pub fn atom_type_strings(&self) -> &[String] {
        &self.atom_types
    }

    /// Rebuild from serialized token and atom-type lists (checkpoint load).
    pub fn from_lists(tokens: Vec<String>, atom_types: Vec<String>) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let atom_index = atom_types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            tokens,
            index,
            atom_types,
            atom_index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemcore::tokenize;

    #[test]
    fn build_and_encode() {
        let toks: Vec<TokenizedSmiles> = ["CCO", "C(=O)O", "c1ccccc1"]
            .iter()
            .map(|s| tokenize(s).unwrap())
            .collect();
        let vocab = Vocab::build(&toks);
        // specials + {C, O, c, (, ), =, 1}
        assert_eq!(vocab.size(), 3 + 7);
        let ids = vocab.encode(&toks[0]);
        assert_eq!(ids.len(), 3);
        assert!(ids.iter().all(|&i| i >= 3));
        // atom types: C, O, c + OTHER
        assert_eq!(vocab.n_atom_types(), 4);
        assert_eq!(vocab.not_masked_class(), 4);
    }

    #[test]
    fn unknown_tokens_map_to_unk_and_other() {
        let toks = vec![tokenize("CCO").unwrap()];
        let vocab = Vocab::build(&toks);
        let novel = tokenize("CCN").unwrap();
        let ids = vocab.encode(&novel);
        assert_eq!(ids[2], Vocab::UNK);
        let labels = vocab.atom_type_labels(&novel);
        assert_eq!(labels[2], vocab.n_atom_types() - 1);
    }

    #[test]
    fn round_trips_through_lists() {
        let toks = vec![tokenize("c1ccc(Cl)cc1").unwrap()];
        let vocab = Vocab::build(&toks);
        let rebuilt = Vocab::from_lists(
            vocab.token_strings().to_vec(),
            vocab.atom_type_strings().to_vec(),
        );
        assert_eq!(vocab, rebuilt);
    }
}
