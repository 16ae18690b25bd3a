//! Checkpoint persistence.
//!
//! Layout: magic string, little-endian u64 header length, JSON header
//! (config snapshot, vocabulary, parameter manifest), raw row-major f64
//! little-endian parameter blocks in manifest order, and a trailing
//! SHA-256 checksum over everything before it.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoders::{EncoderConfig, Vocab};
use crate::numerics::ParamStore;

pub const MAGIC: &[u8] = b"MOLFUSION-CKPT-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint: bad magic header")]
    BadMagic,
    #[error("checksum mismatch: file corrupted or truncated")]
    BadChecksum,
    #[error("malformed checkpoint header: {0}")]
    BadHeader(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: BTreeMap<String, String>,
    encoder: EncoderSnapshot,
    vocab_tokens: Vec<String>,
    vocab_atom_types: Vec<String>,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EncoderSnapshot {
    d_model: usize,
    d_shared: usize,
    n_layers: usize,
    n_heads: usize,
    mp_rounds: usize,
    vocab_size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub config: BTreeMap<String, String>,
    pub enc_cfg: EncoderConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config.clone(),
            encoder: EncoderSnapshot {
                d_model: self.enc_cfg.d_model,
                d_shared: self.enc_cfg.d_shared,
                n_layers: self.enc_cfg.n_layers,
                n_heads: self.enc_cfg.n_heads,
                mp_rounds: self.enc_cfg.mp_rounds,
                vocab_size: self.enc_cfg.vocab_size,
            },
            vocab_tokens: self.vocab.token_strings().to_vec(),
            vocab_atom_types: self.vocab.atom_type_strings().to_vec(),
            params: self
                .store
                .iter()
                .map(|(name, shape, _)| ParamEntry {
                    name: name.to_string(),
                    shape: shape.to_vec(),
                })
                .collect(),
        };
        let header_json = serde_json::to_vec(&header).expect("serializable header");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        for (_, _, values) in self.store.iter() {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
        if bytes.len() < MAGIC.len() + 8 + 32 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let (payload, checksum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(payload).as_slice() != checksum {
            return Err(CheckpointError::BadChecksum);
        }
        let mut cursor = &payload[MAGIC.len()..];
        let mut len_buf = [0u8; 8];
        cursor
            .read_exact(&mut len_buf)
            .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
        let header_len = u64::from_le_bytes(len_buf) as usize;
        if cursor.len() < header_len {
            return Err(CheckpointError::BadHeader("header truncated".into()));
        }
        let header: Header = serde_json::from_slice(&cursor[..header_len])
            .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
        cursor = &cursor[header_len..];

        let mut store = ParamStore::new();
        for entry in &header.params {
            let count: usize = entry.shape.iter().product();
            if cursor.len() < count * 8 {
                return Err(CheckpointError::BadHeader(format!(
                    "parameter block {} truncated",
                    entry.name
                )));
            }
            let values: Vec<f64> = cursor[..count * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            cursor = &cursor[count * 8..];
            store.insert(&entry.name, entry.shape.clone(), values);
        }
        if !cursor.is_empty() {
            return Err(CheckpointError::BadHeader(
                "trailing bytes after parameter blocks".into(),
            ));
        }
        Ok(Checkpoint {
            config: header.config,
            enc_cfg: EncoderConfig {
                d_model: header.encoder.d_model,
                d_shared: header.encoder.d_shared,
                n_layers: header.encoder.n_layers,
                n_heads: header.encoder.n_heads,
                mp_rounds: header.encoder.mp_rounds,
                vocab_size: header.encoder.vocab_size,
            },
            vocab: Vocab::from_lists(header.vocab_tokens, header.vocab_atom_types),
            store,
        })
    }

    /// Writes atomically: temp file in the target directory, then rename.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io_err = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        tmp.write_all(&self.to_bytes()).map_err(io_err)?;
        tmp.persist(path).map_err(|e| io_err(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
