use super::{AtomToken, ChemError, Element, Token, TokenizedSmiles};

/// Split a SMILES string into tokens. Atom indices are assigned later by
/// `parse`; here `atom_map` is filled with sequential indices since atoms
/// appear in token order.
pub fn tokenize(smiles: &str) -> Result<TokenizedSmiles, ChemError> {
    if smiles.is_empty() {
        return Err(ChemError::EmptyInput);
    }
    let bytes = smiles.as_bytes();
    if !bytes.is_ascii() {
        let pos = smiles
            .char_indices()
            .find(|(_, c)| !c.is_ascii())
            .map(|(i, _)| i)
            .unwrap_or(0);
        return Err(ChemError::UnknownCharacter(pos));
    }
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            '(' => {
                tokens.push(Token::BranchOpen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::BranchClose);
                i += 1;
            }
            '-' | '=' | '#' | ':' | '/' | '\\' => {
                tokens.push(Token::Bond { symbol: c, pos: i });
                i += 1;
            }
            '.' => {
                tokens.push(Token::Dot { pos: i });
                i += 1;
            }
            '1'..='9' => {
                tokens.push(Token::Ring {
                    number: (bytes[i] - b'0') as u16,
                    text: c.to_string(),
                });
                i += 1;
            }
            '%' => {
                if i + 2 >= bytes.len()
                    || !bytes[i + 1].is_ascii_digit()
                    || !bytes[i + 2].is_ascii_digit()
                {
                    return Err(ChemError::UnknownCharacter(i));
                }
                let number = (bytes[i + 1] - b'0') as u16 * 10 + (bytes[i + 2] - b'0') as u16;
                tokens.push(Token::Ring {
                    number,
                    text: smiles[i..i + 3].to_string(),
                });
                i += 3;
            }
            '[' => {
                let (tok, next) = read_bracket(smiles, i)?;
                tokens.push(Token::Atom(tok));
                i = next;
            }
            _ => {
                let (tok, next) = read_organic(smiles, i)?;
                tokens.push(Token::Atom(tok));
                i = next;
            }
        }
    }
    let atom_map: Vec<usize> = (0..tokens
        .iter()
        .filter(|t| matches!(t, Token::Atom(_)))
        .count())
        .collect();
    Ok(TokenizedSmiles {
        tokens,
        atom_map,
        vocab_ids: Vec::new(),
    })
}

fn read_organic(smiles: &str, start: usize) -> Result<(AtomToken, usize), ChemError> {
    let bytes = smiles.as_bytes();
    // Two-letter symbols first.
    if bytes.len() >= start + 2 {
        let two = &smiles[start..start + 2];
        let elem = match two {
            "Cl" => Some(Element::Cl),
            "Br" => Some(Element::Br),
            _ => None,
        };
        if let Some(element) = elem {
            return Ok((
                AtomToken {
                    text: two.to_string(),
                    element,
                    aromatic: false,
                    charge: 0,
                    hcount: None,
                    bracket: false,
                    pos: start,
                },
                start + 2,
            ));
        }
    }
    let c = bytes[start] as char;
    let (element, aromatic) = match c {
        'B' => (Element::B, false),
        'C' => (Element::C, false),
        'N' => (Element::N, false),
        'O' => (Element::O, false),
        'P' => (Element::P, false),
        'S' => (Element::S, false),
        'F' => (Element::F, false),
        'I' => (Element::I, false),
        'b' => (Element::B, true),
        'c' => (Element::C, true),
        'n' => (Element::N, true),
        'o' => (Element::O, true),
        'p' => (Element::P, true),
        's' => (Element::S, true),
        _ => return Err(ChemError::UnknownCharacter(start)),
    };
    Ok((
        AtomToken {
            text: c.to_string(),
            element,
            aromatic,
            charge: 0,
            hcount: None,
            bracket: false,
            pos: start,
        },
        start + 1,
    ))
}

// [isotope? symbol chirality? hcount? charge? class?]
fn read_bracket(smiles: &str, start: usize) -> Result<(AtomToken, usize), ChemError> {
    let bytes = smiles.as_bytes();
    let close = smiles[start..]
        .find(']')
        .map(|o| start + o)
        .ok_or(ChemError::UnterminatedBracket(start))?;
    let mut i = start + 1;
    if i == close {
        return Err(ChemError::UnknownCharacter(i));
    }
    // Isotope digits: accepted and discarded.
    while i < close && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == close {
        return Err(ChemError::UnknownCharacter(i));
    }
    // Element symbol. Lowercase first letter means aromatic.
    let first = bytes[i] as char;
    let (symbol, aromatic) = if first == '*' {
        i += 1;
        ("*".to_string(), false)
    } else if first.is_ascii_uppercase() {
        let mut sym = first.to_string();
        i += 1;
        if i < close && (bytes[i] as char).is_ascii_lowercase() {
            // An hcount is uppercase 'H', so a lowercase letter here is
            // always the second letter of the symbol (Cl, Se, Rh, ...).
            sym.push(bytes[i] as char);
            i += 1;
        }
        (sym, false)
    } else if first.is_ascii_lowercase() {
        let mut sym = first.to_string();
        i += 1;
        if i < close && (bytes[i] as char).is_ascii_lowercase() {
            // two-letter aromatic like 'se'
            let cand = format!("{}{}", first, bytes[i] as char);
            if cand == "se" || cand == "as" {
                sym = cand;
                i += 1;
            }
        }
        (sym, true)
    } else {
        return Err(ChemError::UnknownCharacter(i));
    };
    let element = element_from_symbol(&symbol, aromatic);
    // Chirality markers: discarded.
    while i < close && bytes[i] == b'@' {
        i += 1;
    }
    // Explicit hydrogen count.
    let mut hcount: u8 = 0;
    if i < close && bytes[i] == b'H' {
        i += 1;
        hcount = 1;
        if i < close && bytes[i].is_ascii_digit() {
            hcount = bytes[i] - b'0';
            i += 1;
        }
    }
    // Charge: +, -, ++, --, +2, -3 ...
    let mut charge: i16 = 0;
    if i < close && (bytes[i] == b'+' || bytes[i] == b'-') {
        let sign: i16 = if bytes[i] == b'+' { 1 } else { -1 };
        let sign_byte = bytes[i];
        let charge_pos = i;
        i += 1;
        let mut magnitude: i16 = 1;
        if i < close && bytes[i].is_ascii_digit() {
            magnitude = 0;
            while i < close && bytes[i].is_ascii_digit() {
                magnitude = magnitude * 10 + (bytes[i] - b'0') as i16;
                i += 1;
            }
        } else {
            while i < close && bytes[i] == sign_byte {
                magnitude += 1;
                i += 1;
            }
        }
        charge = sign * magnitude;
        if charge.abs() > 4 {
            return Err(ChemError::ChargeOutOfRange(charge_pos));
        }
    }
    // Atom class ':n' — accepted and discarded.
    if i < close && bytes[i] == b':' {
        i += 1;
        if i == close || !bytes[i].is_ascii_digit() {
            return Err(ChemError::UnknownCharacter(i));
        }
        while i < close && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i != close {
        return Err(ChemError::UnknownCharacter(i));
    }
    Ok((
        AtomToken {
            text: smiles[start..=close].to_string(),
            element,
            aromatic,
            charge: charge as i8,
            hcount: Some(hcount),
            bracket: true,
            pos: start,
        },
        close + 1,
    ))
}

fn element_from_symbol(symbol: &str, aromatic: bool) -> Element {
    let canonical = if aromatic {
        let mut s = symbol.to_string();
        s[..1].make_ascii_uppercase();
        s
    } else {
        symbol.to_string()
    };
    match canonical.as_str() {
        "B" => Element::B,
        "C" => Element::C,
        "N" => Element::N,
        "O" => Element::O,
        "P" => Element::P,
        "S" => Element::S,
        "F" => Element::F,
        "Cl" => Element::Cl,
        "Br" => Element::Br,
        "I" => Element::I,
        "H" => Element::H,
        other => Element::Other(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom_elements(tok: &TokenizedSmiles) -> Vec<String> {
        tok.atom_tokens()
            .map(|a| a.element.symbol().to_string())
            .collect()
    }

    #[test]
    fn simple_chain() {
        let tok = tokenize("CCO").unwrap();
        assert_eq!(tok.tokens.len(), 3);
        assert_eq!(atom_elements(&tok), ["C", "C", "O"]);
    }

    #[test]
    fn branch_with_bond() {
        let tok = tokenize("C(=O)O").unwrap();
        let kinds: Vec<&str> = tok
            .tokens
            .iter()
            .map(|t| match t {
                Token::Atom(_) => "atom",
                Token::Bond { .. } => "bond",
                Token::BranchOpen => "open",
                Token::BranchClose => "close",
                Token::Ring { .. } => "ring",
                Token::Dot { .. } => "dot",
            })
            .collect();
        assert_eq!(kinds, ["atom", "open", "bond", "atom", "close", "atom"]);
    }

    #[test]
    fn bracket_selenium_is_other() {
        let tok = tokenize("C[Se]C").unwrap();
        assert_eq!(tok.atom_count(), 3);
        let se = tok.atom_tokens().nth(1).unwrap();
        assert_eq!(se.element, Element::Other("Se".to_string()));
    }

    #[test]
    fn two_letter_halogens() {
        let tok = tokenize("ClCCBr").unwrap();
        assert_eq!(atom_elements(&tok), ["Cl", "C", "C", "Br"]);
    }

    #[test]
    fn bracket_charge_and_hcount() {
        let tok = tokenize("[NH4+]").unwrap();
        let a = tok.atom_tokens().next().unwrap();
        assert_eq!(a.element, Element::N);
        assert_eq!(a.hcount, Some(4));
        assert_eq!(a.charge, 1);

        let tok = tokenize("[O-2]").unwrap();
        assert_eq!(tok.atom_tokens().next().unwrap().charge, -2);
        let tok = tokenize("[Fe++]").unwrap();
        assert_eq!(tok.atom_tokens().next().unwrap().charge, 2);
    }

    #[test]
    fn percent_ring_number() {
        let tok = tokenize("C%12CC%12").unwrap();
        let rings: Vec<u16> = tok
            .tokens
            .iter()
            .filter_map(|t| match t {
                Token::Ring { number, .. } => Some(*number),
                _ => None,
            })
            .collect();
        assert_eq!(rings, [12, 12]);
    }

    #[test]
    fn unknown_character_position() {
        assert_eq!(tokenize("CC?O"), Err(ChemError::UnknownCharacter(2)));
    }

    #[test]
    fn unterminated_bracket() {
        assert_eq!(tokenize("C[NH"), Err(ChemError::UnterminatedBracket(1)));
    }

    #[test]
    fn charge_out_of_range() {
        assert!(matches!(
            tokenize("[O-5]"),
            Err(ChemError::ChargeOutOfRange(_))
        ));
    }

    #[test]
    fn empty_input() {
        assert_eq!(tokenize(""), Err(ChemError::EmptyInput));
    }

    #[test]
    fn detokenize_round_trip() {
        for s in [
            "CCO",
            "C(=O)O",
            "c1ccccc1",
            "C[C@H](N)C(=O)O",
            "O=C(NC1CC1)c1ccc(Cl)cc1",
            "C%12CC%12",
            "F/C=C/F",
        ] {
            let tok = tokenize(s).unwrap();
            assert_eq!(tok.detokenize(), s);
        }
    }
}
