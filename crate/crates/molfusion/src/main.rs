use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use molfusion::checkpoint::Checkpoint;
use molfusion::chemcore::parse;
use molfusion::config::RunConfig;
use molfusion::downstream::{
    ablation_grid, encode_molecule, evaluate, Aggregation, DownstreamError, TaskDataset, TaskType,
};
use molfusion::fingerprint::{morgan, similarity_matrix};
use molfusion::fusion::{train, FusionError};
use molfusion::rng;
use rand::Rng;

#[derive(Parser)]
#[command(name = "molfusion", version, about = "Dual-modality molecular representation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a SMILES string and print the molecular graph.
    Parse { smiles: String },
    /// Print the Morgan fingerprint of one molecule.
    Fingerprint {
        smiles: String,
        #[arg(long, default_value_t = 2)]
        radius: u32,
        #[arg(long, default_value_t = 2048)]
        bits: usize,
    },
    /// Pairwise Tanimoto similarity matrix over a corpus file.
    Simmatrix {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        radius: u32,
        #[arg(long, default_value_t = 2048)]
        bits: usize,
    },
    /// Train the fusion model and write a checkpoint.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint path; defaults to <output_dir>/model.ckpt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a frozen checkpoint with a linear probe on one dataset.
    Probe {
        ckpt: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value = "classification")]
        task_type: String,
        #[arg(long, default_value = "cco")]
        agg: String,
        /// Comma-separated probe seeds.
        #[arg(long, default_value = "0")]
        seeds: String,
        /// Report path; defaults to report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every ablation method and evaluate the full grid.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Table path; defaults to <output_dir>/ablation.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump pooled shared-space embeddings for a corpus as CSV.
    ExportEmbeddings {
        ckpt: PathBuf,
        corpus: PathBuf,
        #[arg(long, default_value = "both")]
        modality: String,
        /// Reduce rows to 2 coordinates with PCA.
        #[arg(long)]
        pca2: bool,
        /// Output path; defaults to embeddings.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl std::fmt::Display) -> CliError {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }

    fn data(message: impl std::fmt::Display) -> CliError {
        CliError {
            code: 3,
            message: message.to_string(),
        }
    }

    fn ckpt(message: impl std::fmt::Display) -> CliError {
        CliError {
            code: 4,
            message: message.to_string(),
        }
    }
}

fn downstream_err(e: DownstreamError) -> CliError {
    match e {
        DownstreamError::WidthMismatch { .. } => CliError::ckpt(e),
        other => CliError::data(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Parse { smiles } => cmd_parse(&smiles),
        Command::Fingerprint {
            smiles,
            radius,
            bits,
        } => cmd_fingerprint(&smiles, radius, bits),
        Command::Simmatrix {
            input,
            radius,
            bits,
        } => cmd_simmatrix(&input, radius, bits),
        Command::Pretrain { config, seed, out } => cmd_pretrain(&config, seed, out),
        Command::Probe {
            ckpt,
            dataset,
            task_type,
            agg,
            seeds,
            out,
        } => cmd_probe(&ckpt, &dataset, &task_type, &agg, &seeds, out),
        Command::Ablate { config, out } => cmd_ablate(&config, out),
        Command::ExportEmbeddings {
            ckpt,
            corpus,
            modality,
            pca2,
            out,
        } => cmd_export(&ckpt, &corpus, &modality, pca2, out),
    }
}

/// Corpus ingestion: a CSV with a `smiles` column, or a plain text file
/// with one SMILES per line (# comments allowed).
fn read_corpus(path: &Path) -> Result<Vec<String>, CliError> {
    if path.extension().is_some_and(|e| e == "csv") {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let headers = reader.headers().map_err(CliError::data)?.clone();
        let col = headers
            .iter()
            .position(|h| h == "smiles")
            .ok_or_else(|| CliError::data("corpus CSV is missing a `smiles` column"))?;
        let mut out = Vec::new();
        for record in reader.records() {
            let record = record.map_err(CliError::data)?;
            out.push(record[col].trim().to_string());
        }
        Ok(out)
    } else {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.to_string())
            .collect())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    let dir = dir.unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn cmd_parse(smiles: &str) -> Result<(), CliError> {
    let (mol, tok) = parse(smiles).map_err(CliError::data)?;
    println!("smiles={smiles}");
    println!("atoms={} bonds={}", mol.atom_count(), mol.bonds.len());
    for a in &mol.atoms {
        println!(
            "atom index={} element={} aromatic={} charge={} implicit_h={}",
            a.index,
            a.element.symbol(),
            a.aromatic,
            a.formal_charge,
            a.explicit_h
        );
    }
    for b in &mol.bonds {
        println!(
            "bond a={} b={} order={}",
            b.endpoints.0, b.endpoints.1, b.order.code()
        );
    }
    println!("tokens={}", tok.tokens.len());
    Ok(())
}

fn cmd_fingerprint(smiles: &str, radius: u32, bits: usize) -> Result<(), CliError> {
    let (mol, _) = parse(smiles).map_err(CliError::data)?;
    let fp = morgan(&mol, radius, bits);
    let set: Vec<String> = (0..bits).filter(|&b| fp.bit(b)).map(|b| b.to_string()).collect();
    println!("smiles={smiles} radius={radius} n_bits={bits}");
    println!("popcount={}", set.len());
    println!("set_bits={}", set.join(","));
    Ok(())
}

fn cmd_simmatrix(input: &Path, radius: u32, bits: usize) -> Result<(), CliError> {
    let smiles = read_corpus(input)?;
    let mut mols = Vec::with_capacity(smiles.len());
    for s in &smiles {
        let (mol, _) = parse(s).map_err(|e| CliError::data(format!("{s:?}: {e}")))?;
        mols.push(mol);
    }
    let matrix = similarity_matrix(&mols, radius, bits);
    println!("n={}", matrix.n);
    for i in 0..matrix.n {
        let row: Vec<String> = (0..matrix.n)
            .map(|j| format!("{:.6}", matrix.values[i * matrix.n + j]))
            .collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}

fn cmd_pretrain(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = RunConfig::from_file(config).map_err(CliError::config)?;
    if let Some(seed) = seed {
        cfg.fusion.seed = seed;
        cfg.raw.insert("seed".to_string(), seed.to_string());
    }
    cfg.validate().map_err(CliError::config)?;
    let corpus_path = cfg
        .corpus_path
        .clone()
        .ok_or_else(|| CliError::config("config sets no `corpus` path"))?;
    cfg.ensure_paths_exist().map_err(CliError::data)?;
    let corpus = read_corpus(&corpus_path)?;

    let mut log_lines = Vec::new();
    let outcome = train(
        &corpus,
        &cfg.encoder,
        &cfg.fusion,
        cfg.fp_radius,
        cfg.fp_bits,
        |e| {
            let mut line = format!(
                "epoch={} train_loss={:.6} val_loss={:.6}",
                e.epoch, e.train_loss, e.val_loss
            );
            for (key, value) in [
                ("molsim", e.molsim),
                ("atomalign", e.atomalign),
                ("contrastive", e.contrastive),
                ("unimask", e.unimask),
            ] {
                if let Some(v) = value {
                    line.push_str(&format!(" {key}={v:.6}"));
                }
            }
            println!("{line}");
            log_lines.push(line);
        },
    )
    .map_err(CliError::data)?;
    for (s, reason) in &outcome.skipped {
        eprintln!("skipped={s:?} reason={reason:?}");
    }

    let ckpt = Checkpoint {
        config: cfg.raw.clone(),
        enc_cfg: outcome.enc_cfg,
        vocab: outcome.vocab,
        store: outcome.store,
    };
    let ckpt_path = out.unwrap_or_else(|| cfg.output_dir.join("model.ckpt"));
    write_atomic(&ckpt_path, &ckpt.to_bytes())?;
    let log_path = cfg.output_dir.join("pretrain.log");
    write_atomic(&log_path, format!("{}\n", log_lines.join("\n")).as_bytes())?;
    println!("checkpoint={}", ckpt_path.display());
    println!("log={}", log_path.display());
    if let Some(best) = outcome.best_epoch {
        println!("best_epoch={best}");
    }
    Ok(())
}

fn cmd_probe(
    ckpt_path: &Path,
    dataset: &Path,
    task_type: &str,
    agg: &str,
    seeds: &str,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let task_type = TaskType::from_name(task_type)
        .ok_or_else(|| CliError::config(format!("unknown task type {task_type:?}")))?;
    let agg = Aggregation::from_name(agg)
        .ok_or_else(|| CliError::config(format!("unknown aggregation {agg:?}")))?;
    let seeds: Vec<u64> = seeds
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::config(format!("bad --seeds: {e}")))?;
    let ckpt = Checkpoint::load(ckpt_path).map_err(CliError::ckpt)?;
    let name = dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dataset.display().to_string());
    let ds = TaskDataset::from_csv(dataset, &name, task_type).map_err(CliError::data)?;
    let report = evaluate(
        &ckpt.store,
        &ckpt.vocab,
        &ckpt.enc_cfg,
        &ds,
        "checkpoint",
        agg,
        &seeds,
    )
    .map_err(downstream_err)?;
    let json = serde_json::to_string_pretty(&report).expect("serializable report");
    let out = out.unwrap_or_else(|| PathBuf::from("report.json"));
    write_atomic(&out, format!("{json}\n").as_bytes())?;
    println!("{json}");
    println!("report={}", out.display());
    Ok(())
}

fn cmd_ablate(config: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::from_file(config).map_err(CliError::config)?;
    cfg.validate().map_err(CliError::config)?;
    let corpus_path = cfg
        .corpus_path
        .clone()
        .ok_or_else(|| CliError::config("config sets no `corpus` path"))?;
    if cfg.datasets.is_empty() {
        return Err(CliError::config("config sets no `datasets`"));
    }
    cfg.ensure_paths_exist().map_err(CliError::data)?;
    let corpus = read_corpus(&corpus_path)?;
    let datasets: Vec<TaskDataset> = cfg
        .datasets
        .iter()
        .map(|d| TaskDataset::from_csv(&d.path, &d.name, d.task_type))
        .collect::<Result<_, _>>()
        .map_err(CliError::data)?;

    let table = ablation_grid(
        &corpus,
        &datasets,
        &cfg.encoder,
        &cfg.fusion,
        cfg.fp_radius,
        cfg.fp_bits,
        &cfg.seeds,
        |line| println!("{line}"),
    )
    .map_err(|e| match e {
        DownstreamError::Fusion(FusionError::EmptyCorpus | FusionError::AllUnparseable) => {
            CliError::data(e)
        }
        other => downstream_err(other),
    })?;
    let json = serde_json::to_string_pretty(&table).expect("serializable table");
    let out = out.unwrap_or_else(|| cfg.output_dir.join("ablation.json"));
    write_atomic(&out, format!("{json}\n").as_bytes())?;
    println!("cells={} best={}", table.cells.len(), table.best.len());
    println!("table={}", out.display());
    Ok(())
}

/// Top-2 principal components by power iteration with deflation.
fn pca2(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut rng = rng::stream(0, "pca2");
    let mut components: Vec<Vec<f64>> = Vec::new();
    for _ in 0..2.min(d) {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..100 {
            // w = Cv computed as Xt(Xv) without forming the covariance
            let mut w = vec![0.0; d];
            for row in &centered {
                let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (wi, ri) in w.iter_mut().zip(row) {
                    *wi += dot * ri;
                }
            }
            for c in &components {
                let dot: f64 = w.iter().zip(c).map(|(a, b)| a * b).sum();
                for (wi, ci) in w.iter_mut().zip(c) {
                    *wi -= dot * ci;
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        components.push(v);
    }
    centered
        .iter()
        .map(|row| {
            let mut out = [0.0; 2];
            for (k, c) in components.iter().enumerate() {
                out[k] = row.iter().zip(c).map(|(a, b)| a * b).sum();
            }
            out
        })
        .collect()
}

fn cmd_export(
    ckpt_path: &Path,
    corpus: &Path,
    modality: &str,
    use_pca2: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let want_smiles = matches!(modality, "both" | "smiles");
    let want_graph = matches!(modality, "both" | "graph");
    if !want_smiles && !want_graph {
        return Err(CliError::config(format!(
            "unknown modality {modality:?}, expected both|smiles|graph"
        )));
    }
    let ckpt = Checkpoint::load(ckpt_path).map_err(CliError::ckpt)?;
    let corpus = read_corpus(corpus)?;

    let mut keys: Vec<(String, &str)> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for s in &corpus {
        match encode_molecule(&ckpt.store, &ckpt.vocab, &ckpt.enc_cfg, s) {
            Ok((_, s_vec, g_vec)) => {
                if want_smiles {
                    keys.push((s.clone(), "smiles"));
                    rows.push(s_vec);
                }
                if want_graph {
                    keys.push((s.clone(), "graph"));
                    rows.push(g_vec);
                }
            }
            Err(e) => eprintln!("skipped={s:?} reason={e}"),
        }
    }
    if rows.is_empty() {
        return Err(CliError::data("no molecule in the corpus could be encoded"));
    }

    let width = if use_pca2 { 2 } else { rows[0].len() };
    let mut text = String::from("smiles,modality");
    for i in 0..width {
        text.push_str(&format!(",c{i}"));
    }
    text.push('\n');
    let projected: Vec<Vec<f64>> = if use_pca2 {
        pca2(&rows).into_iter().map(|r| r.to_vec()).collect()
    } else {
        rows
    };
    for ((s, m), row) in keys.iter().zip(&projected) {
        text.push_str(s);
        text.push(',');
        text.push_str(m);
        for v in row {
            text.push_str(&format!(",{v:.8e}"));
        }
        text.push('\n');
    }
    let out = out.unwrap_or_else(|| PathBuf::from("embeddings.csv"));
    write_atomic(&out, text.as_bytes())?;
    println!("rows={} columns={} export={}", keys.len(), width + 2, out.display());
    Ok(())
}
