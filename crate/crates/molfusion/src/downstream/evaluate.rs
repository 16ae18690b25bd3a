use serde::{Deserialize, Serialize};

use super::{
    probe_fit, rmse, roc_auc, scaffold_split, Aggregation, DownstreamError, ProbeModel, Split,
    TaskDataset, TaskType,
};
use crate::chemcore::{featurize, parse, Molecule};
use crate::encoders::{encode_graph, encode_smiles, project, EncoderConfig, Vocab};
use crate::fusion::{train, FusionConfig, FusionMethod, TrainOutcome};
use crate::numerics::ParamStore;

pub const REG_GRID: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub method: String,
    pub aggregation: String,
    pub metric_name: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: Vec<u64>,
    pub n_tasks_evaluated: usize,
}

/// Pooled shared-space embeddings of one molecule under frozen
/// parameters: (SMILES-side, graph-side).
pub fn encode_molecule(
    store: &ParamStore,
    vocab: &Vocab,
    enc_cfg: &EncoderConfig,
    smiles: &str,
) -> Result<(Molecule, Vec<f64>, Vec<f64>), DownstreamError> {
    let binding = store.bind_frozen();
    let (mol, mut tok) = parse(smiles)
        .map_err(|e| DownstreamError::Dataset(format!("unparseable SMILES {smiles:?}: {e}")))?;
    vocab.assign(&mut tok);
    let feats = featurize(&mol);
    let s_emb = encode_smiles(
        &tok.vocab_ids,
        &tok.atom_token_positions(),
        &tok.atom_map,
        &binding,
        enc_cfg,
    )?;
    let g_emb = encode_graph(&mol, &feats, &binding, enc_cfg)?;
    let s_vec = project(&s_emb.pooled, &binding, "smiles")?.data().to_vec();
    let g_vec = project(&g_emb.pooled, &binding, "graph")?.data().to_vec();
    Ok((mol, s_vec, g_vec))
}

fn worker_count(n_items: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1);
    let cap = std::env::var("MOLFUSION_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(available);
    cap.min(available).min(n_items.max(1))
}

/// Aggregated frozen-encoder feature vectors, one per molecule, in
/// dataset order. Extraction runs across worker threads (capped by
/// MOLFUSION_THREADS); results are merged in input order so the output
/// does not depend on the thread count.
pub fn molecule_features(
    store: &ParamStore,
    vocab: &Vocab,
    enc_cfg: &EncoderConfig,
    smiles: &[String],
    agg: Aggregation,
) -> Result<(Vec<Molecule>, Vec<Vec<f64>>), DownstreamError> {
    let workers = worker_count(smiles.len());
    let chunk = smiles.len().div_ceil(workers.max(1)).max(1);
    let chunk_results: Vec<Result<Vec<(Molecule, Vec<f64>)>, DownstreamError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = smiles
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|s| {
                                let (mol, s_vec, g_vec) =
                                    encode_molecule(store, vocab, enc_cfg, s)?;
                                Ok((mol, super::aggregate(&s_vec, &g_vec, agg)?))
                            })
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("feature worker panicked"))
                .collect()
        });
    let mut mols = Vec::with_capacity(smiles.len());
    let mut features = Vec::with_capacity(smiles.len());
    for result in chunk_results {
        for (mol, feat) in result? {
            mols.push(mol);
            features.push(feat);
        }
    }
    Ok((mols, features))
}

fn select_rows<T: Clone>(rows: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

/// Mean metric over tasks for one fitted probe on one index set. Tasks
/// without a probe or without both classes in the subset contribute
/// nothing; returns the contributing task count.
fn subset_metric(
    model: &ProbeModel,
    features: &[Vec<f64>],
    labels: &[Vec<Option<f64>>],
    idx: &[usize],
) -> (Option<f64>, usize) {
    let mut values = Vec::new();
    for (t, probe) in model.tasks.iter().enumerate() {
        let Some(probe) = probe else { continue };
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for &i in idx {
            if let Some(v) = labels[i][t] {
                scores.push(probe.decision(&features[i]));
                truth.push(v);
            }
        }
        if scores.is_empty() {
            continue;
        }
        let value = match model.task_type {
            TaskType::Classification => {
                let bins: Vec<u8> = truth.iter().map(|&v| v as u8).collect();
                match roc_auc(&scores, &bins) {
                    Ok(v) => v,
                    Err(DownstreamError::SingleClass) => continue,
                    Err(e) => panic!("unexpected metric error: {e}"),
                }
            }
            TaskType::Regression => rmse(&scores, &truth).expect("aligned lengths"),
        };
        values.push(value);
    }
    if values.is_empty() {
        (None, 0)
    } else {
        let n = values.len();
        (Some(values.iter().sum::<f64>() / n as f64), n)
    }
}

fn better(task_type: TaskType, candidate: f64, incumbent: f64) -> bool {
    match task_type {
        TaskType::Classification => candidate > incumbent,
        TaskType::Regression => candidate < incumbent,
    }
}

/// Frozen-encoder evaluation: scaffold split, per-seed linear probes with
/// the L2 strength selected on the validation split, metric on the test
/// split, mean and std over seeds.
pub fn evaluate(
    store: &ParamStore,
    vocab: &Vocab,
    enc_cfg: &EncoderConfig,
    ds: &TaskDataset,
    method: &str,
    agg: Aggregation,
    seeds: &[u64],
) -> Result<MetricReport, DownstreamError> {
    if seeds.is_empty() {
        return Err(DownstreamError::Dataset("no seeds supplied".into()));
    }
    let (mols, features) = molecule_features(store, vocab, enc_cfg, &ds.smiles, agg)?;
    let split = scaffold_split(&mols);
    let train_features = select_rows(&features, &split.train);
    let train_labels = select_rows(&ds.labels, &split.train);

    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut n_tasks = 0;
    for &seed in seeds {
        let mut chosen: Option<(f64, ProbeModel)> = None;
        for &reg in &REG_GRID {
            let model = probe_fit(&train_features, &train_labels, ds.task_type, reg, seed)?;
            let (val_metric, _) = subset_metric(&model, &features, &ds.labels, &split.valid);
            let score = val_metric.unwrap_or(match ds.task_type {
                TaskType::Classification => f64::NEG_INFINITY,
                TaskType::Regression => f64::INFINITY,
            });
            let keep = match &chosen {
                None => true,
                Some((best, _)) => better(ds.task_type, score, *best),
            };
            if keep {
                chosen = Some((score, model));
            }
        }
        let (_, model) = chosen.expect("non-empty grid");
        let (test_metric, tasks) = subset_metric(&model, &features, &ds.labels, &split.test);
        let value = test_metric.ok_or_else(|| {
            DownstreamError::Dataset(format!(
                "dataset {}: no task evaluable on the test split",
                ds.name
            ))
        })?;
        per_seed.push(value);
        n_tasks = tasks;
    }

    let n = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / n;
    let var = per_seed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(MetricReport {
        dataset: ds.name.clone(),
        method: method.to_string(),
        aggregation: agg.name().to_string(),
        metric_name: match ds.task_type {
            TaskType::Classification => "roc_auc".to_string(),
            TaskType::Regression => "rmse".to_string(),
        },
        mean,
        std: var.sqrt(),
        seeds: seeds.to_vec(),
        n_tasks_evaluated: n_tasks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    /// Every method x aggregation x dataset cell.
    pub cells: Vec<MetricReport>,
    /// Per dataset and method, the best aggregation's report.
    pub best: Vec<MetricReport>,
}

/// Trains one checkpoint per ablation method and evaluates each under all
/// four aggregation modes, recording the per-method best across
/// aggregations.
pub fn ablation_grid(
    corpus: &[String],
    datasets: &[TaskDataset],
    enc_cfg: &EncoderConfig,
    base_cfg: &FusionConfig,
    fp_radius: u32,
    fp_bits: usize,
    seeds: &[u64],
    mut log: impl FnMut(&str),
) -> Result<AblationTable, DownstreamError> {
    let mut cells = Vec::new();
    let mut best = Vec::new();
    for method in FusionMethod::ALL {
        let cfg = FusionConfig {
            method,
            ..base_cfg.clone()
        };
        log(&format!("method={}", method.name()));
        let outcome: TrainOutcome =
            train(corpus, enc_cfg, &cfg, fp_radius, fp_bits, |_| {})?;
        for ds in datasets {
            let mut method_best: Option<MetricReport> = None;
            for agg in Aggregation::ALL {
                let report = evaluate(
                    &outcome.store,
                    &outcome.vocab,
                    &outcome.enc_cfg,
                    ds,
                    method.name(),
                    agg,
                    seeds,
                )?;
                let replace = match &method_best {
                    None => true,
                    Some(b) => better(ds.task_type, report.mean, b.mean),
                };
                if replace {
                    method_best = Some(report.clone());
                }
                cells.push(report);
            }
            best.push(method_best.expect("four aggregations"));
        }
    }
    Ok(AblationTable { cells, best })
}

pub fn split_for_dataset(ds: &TaskDataset) -> Result<Split, DownstreamError> {
    let mols: Result<Vec<Molecule>, _> = ds.smiles.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().map(|(m, _)| m).collect());
    let mols = mols.map_err(|e| DownstreamError::Dataset(format!("unparseable SMILES: {e}")))?;
    Ok(scaffold_split(&mols))
}
