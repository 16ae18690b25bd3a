//! Flat `key = value` run configuration with `#` comments. Unknown keys
//! are rejected by name so typos fail loudly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::downstream::{Aggregation, TaskType};
use crate::encoders::EncoderConfig;
use crate::fusion::{FusionConfig, FusionMethod, UnmaskHead};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

const KNOWN_KEYS: [&str; 25] = [
    "d_model",
    "d_shared",
    "n_layers",
    "n_heads",
    "mp_rounds",
    "tau",
    "alpha",
    "beta",
    "mask_rate",
    "batch_size",
    "epochs",
    "lr",
    "patience",
    "seed",
    "unmask_head",
    "method",
    "molsim_weight",
    "corpus",
    "datasets",
    "output_dir",
    "seeds",
    "fp_radius",
    "fp_bits",
    "aggregations",
    "ablation",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub name: String,
    pub task_type: TaskType,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub fusion: FusionConfig,
    pub corpus_path: Option<PathBuf>,
    pub datasets: Vec<DatasetSpec>,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub fp_radius: u32,
    pub fp_bits: usize,
    pub aggregations: Vec<Aggregation>,
    pub ablation: bool,
    /// Normalized key = value snapshot as parsed, for embedding in
    /// checkpoints.
    pub raw: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            fusion: FusionConfig::default(),
            corpus_path: None,
            datasets: Vec::new(),
            output_dir: PathBuf::from("."),
            seeds: vec![0],
            fp_radius: 2,
            fp_bits: 2048,
            aggregations: Aggregation::ALL.to_vec(),
            ablation: false,
            raw: BTreeMap::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("{e}"),
    })
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.apply(line, key, value)?;
            cfg.raw.insert(key.to_string(), value.to_string());
        }
        Ok(cfg)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            message,
        };
        match key {
            "d_model" => self.encoder.d_model = parse_num(line, key, value)?,
            "d_shared" => self.encoder.d_shared = parse_num(line, key, value)?,
            "n_layers" => self.encoder.n_layers = parse_num(line, key, value)?,
            "n_heads" => self.encoder.n_heads = parse_num(line, key, value)?,
            "mp_rounds" => self.encoder.mp_rounds = parse_num(line, key, value)?,
            "tau" => self.fusion.tau = parse_num(line, key, value)?,
            "alpha" => self.fusion.alpha = parse_num(line, key, value)?,
            "beta" => self.fusion.beta = parse_num(line, key, value)?,
            "mask_rate" => self.fusion.mask_rate = parse_num(line, key, value)?,
            "batch_size" => self.fusion.batch_size = parse_num(line, key, value)?,
            "epochs" => self.fusion.epochs = parse_num(line, key, value)?,
            "lr" => self.fusion.lr = parse_num(line, key, value)?,
            "patience" => self.fusion.patience = parse_num(line, key, value)?,
            "seed" => self.fusion.seed = parse_num(line, key, value)?,
            "molsim_weight" => self.fusion.molsim_weight = parse_num(line, key, value)?,
            "unmask_head" => {
                self.fusion.unmask_head = match value {
                    "folded" => UnmaskHead::Folded,
                    "binary" => UnmaskHead::Binary,
                    other => return Err(bad(format!("expected folded|binary, got {other:?}"))),
                }
            }
            "method" => {
                self.fusion.method = FusionMethod::from_name(value)
                    .ok_or_else(|| bad(format!("unknown method {value:?}")))?
            }
            "corpus" => self.corpus_path = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "fp_radius" => self.fp_radius = parse_num(line, key, value)?,
            "fp_bits" => self.fp_bits = parse_num(line, key, value)?,
            "ablation" => {
                self.ablation = match value {
                    "true" => true,
                    "false" => false,
                    other => return Err(bad(format!("expected true|false, got {other:?}"))),
                }
            }
            "seeds" => {
                let parsed: Result<Vec<u64>, _> =
                    value.split(',').map(|s| s.trim().parse()).collect();
                self.seeds = parsed.map_err(|e| bad(format!("{e}")))?;
            }
            "aggregations" => {
                let parsed: Option<Vec<Aggregation>> = value
                    .split(',')
                    .map(|s| Aggregation::from_name(s.trim()))
                    .collect();
                self.aggregations =
                    parsed.ok_or_else(|| bad(format!("unknown aggregation in {value:?}")))?;
            }
            "datasets" => {
                // entries like data/tox.csv:classification, comma separated
                let mut specs = Vec::new();
                for entry in value.split(',') {
                    let entry = entry.trim();
                    let (path, ty) = entry.rsplit_once(':').ok_or_else(|| {
                        bad(format!("expected path:task_type, got {entry:?}"))
                    })?;
                    let task_type = TaskType::from_name(ty.trim()).ok_or_else(|| {
                        bad(format!("unknown task type {ty:?}"))
                    })?;
                    let path = PathBuf::from(path.trim());
                    let name = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| path.display().to_string());
                    specs.push(DatasetSpec {
                        path,
                        name,
                        task_type,
                    });
                }
                self.datasets = specs;
            }
            _ => unreachable!("key filtered against KNOWN_KEYS"),
        }
        Ok(())
    }

    /// Structural checks beyond per-line parsing: seeds non-empty and
    /// numeric ranges valid.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.encoder
            .validate()
            .map_err(ConfigError::Invalid)?;
        self.fusion.validate().map_err(ConfigError::Invalid)?;
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must be non-empty".into()));
        }
        if self.aggregations.is_empty() {
            return Err(ConfigError::Invalid(
                "aggregations must be non-empty".into(),
            ));
        }
        Ok(())
    }

    /// Existence check for every referenced path; an input-data concern,
    /// kept separate from config validation.
    pub fn ensure_paths_exist(&self) -> Result<(), String> {
        if let Some(p) = &self.corpus_path {
            if !p.exists() {
                return Err(format!("corpus path {} does not exist", p.display()));
            }
        }
        for d in &self.datasets {
            if !d.path.exists() {
                return Err(format!("dataset path {} does not exist", d.path.display()));
            }
        }
        Ok(())
    }
}
