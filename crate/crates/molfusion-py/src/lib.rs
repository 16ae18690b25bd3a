//! Python bindings for the core parsing, fingerprint, training, and
//! evaluation operations.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use molfusion::checkpoint::Checkpoint;
use molfusion::chemcore;
use molfusion::downstream::{self, Aggregation, TaskDataset, TaskType};
use molfusion::encoders::EncoderConfig;
use molfusion::fingerprint;
use molfusion::fusion::{self, FusionConfig, FusionMethod};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parsed molecular graph summary.
#[pyfunction]
fn parse_smiles(py: Python<'_>, smiles: &str) -> PyResult<PyObject> {
    let (mol, tok) = chemcore::parse(smiles).map_err(value_err)?;
    let dict = pyo3::types::PyDict::new_bound(py);
    dict.set_item("smiles", smiles)?;
    dict.set_item("atom_count", mol.atom_count())?;
    dict.set_item("bond_count", mol.bonds.len())?;
    let atoms: Vec<(String, bool, i8, u8)> = mol
        .atoms
        .iter()
        .map(|a| {
            (
                a.element.symbol().to_string(),
                a.aromatic,
                a.formal_charge,
                a.explicit_h,
            )
        })
        .collect();
    dict.set_item("atoms", atoms)?;
    let bonds: Vec<(usize, usize, u8)> = mol
        .bonds
        .iter()
        .map(|b| (b.endpoints.0, b.endpoints.1, b.order.code()))
        .collect();
    dict.set_item("bonds", bonds)?;
    let tokens: Vec<String> = tok.tokens.iter().map(|t| t.text().to_string()).collect();
    dict.set_item("tokens", tokens)?;
    Ok(dict.into())
}

/// Morgan fingerprint as the sorted list of set bit indices.
#[pyfunction]
#[pyo3(signature = (smiles, radius = 2, n_bits = 2048))]
fn morgan_fingerprint(smiles: &str, radius: u32, n_bits: usize) -> PyResult<Vec<usize>> {
    let (mol, _) = chemcore::parse(smiles).map_err(value_err)?;
    let fp = fingerprint::morgan(&mol, radius, n_bits);
    Ok((0..n_bits).filter(|&b| fp.bit(b)).collect())
}

#[pyfunction]
#[pyo3(signature = (smiles_a, smiles_b, radius = 2, n_bits = 2048))]
fn tanimoto(smiles_a: &str, smiles_b: &str, radius: u32, n_bits: usize) -> PyResult<f64> {
    let (a, _) = chemcore::parse(smiles_a).map_err(value_err)?;
    let (b, _) = chemcore::parse(smiles_b).map_err(value_err)?;
    fingerprint::tanimoto(
        &fingerprint::morgan(&a, radius, n_bits),
        &fingerprint::morgan(&b, radius, n_bits),
    )
    .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (smiles, radius = 2, n_bits = 2048))]
fn similarity_matrix(smiles: Vec<String>, radius: u32, n_bits: usize) -> PyResult<Vec<Vec<f64>>> {
    let mols: Vec<_> = smiles
        .iter()
        .map(|s| chemcore::parse(s).map(|(m, _)| m))
        .collect::<Result<_, _>>()
        .map_err(value_err)?;
    let m = fingerprint::similarity_matrix(&mols, radius, n_bits);
    Ok((0..m.n)
        .map(|i| m.values[i * m.n..(i + 1) * m.n].to_vec())
        .collect())
}

#[pyfunction]
fn scaffold_key(smiles: &str) -> PyResult<String> {
    let (mol, _) = chemcore::parse(smiles).map_err(value_err)?;
    Ok(downstream::scaffold_key(&mol))
}

/// 80/10/10 scaffold split; returns (train, valid, test) index lists.
#[pyfunction]
fn scaffold_split(smiles: Vec<String>) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let mols: Vec<_> = smiles
        .iter()
        .map(|s| chemcore::parse(s).map(|(m, _)| m))
        .collect::<Result<_, _>>()
        .map_err(value_err)?;
    let split = downstream::scaffold_split(&mols);
    Ok((split.train, split.valid, split.test))
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    downstream::roc_auc(&scores, &labels).map_err(value_err)
}

#[pyfunction]
fn rmse(pred: Vec<f64>, target: Vec<f64>) -> PyResult<f64> {
    downstream::rmse(&pred, &target).map_err(value_err)
}

/// A trained (or freshly initialized) model: both encoders plus heads.
#[pyclass(name = "Model")]
struct Model {
    ckpt: Checkpoint,
}

#[pymethods]
impl Model {
    /// Trains on a SMILES corpus and returns the best-validation model.
    #[staticmethod]
    #[pyo3(signature = (
        corpus, *, method = "molfusion", d_model = 32, d_shared = 32, n_layers = 1,
        n_heads = 2, mp_rounds = 2, epochs = 20, batch_size = 16, lr = 1e-3,
        seed = 0, mask_rate = 0.15, tau = 0.1, alpha = 0.8, beta = 1.0,
        patience = 5, fp_radius = 2, fp_bits = 2048
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        corpus: Vec<String>,
        method: &str,
        d_model: usize,
        d_shared: usize,
        n_layers: usize,
        n_heads: usize,
        mp_rounds: usize,
        epochs: usize,
        batch_size: usize,
        lr: f64,
        seed: u64,
        mask_rate: f64,
        tau: f64,
        alpha: f64,
        beta: f64,
        patience: usize,
        fp_radius: u32,
        fp_bits: usize,
    ) -> PyResult<Model> {
        let method = FusionMethod::from_name(method)
            .ok_or_else(|| value_err(format!("unknown method {method:?}")))?;
        let enc_cfg = EncoderConfig {
            d_model,
            d_shared,
            n_layers,
            n_heads,
            mp_rounds,
            vocab_size: 0,
        };
        let cfg = FusionConfig {
            method,
            epochs,
            batch_size,
            lr,
            seed,
            mask_rate,
            tau,
            alpha,
            beta,
            patience,
            ..FusionConfig::default()
        };
        cfg.validate().map_err(value_err)?;
        let outcome = fusion::train(&corpus, &enc_cfg, &cfg, fp_radius, fp_bits, |_| {})
            .map_err(value_err)?;
        Ok(Model {
            ckpt: Checkpoint {
                config: BTreeMap::new(),
                enc_cfg: outcome.enc_cfg,
                vocab: outcome.vocab,
                store: outcome.store,
            },
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model {
            ckpt: Checkpoint::load(&path).map_err(value_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.ckpt.save(&path).map_err(value_err)
    }

    /// Pooled shared-space embeddings: (smiles_side, graph_side).
    fn encode(&self, smiles: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (_, s_vec, g_vec) = downstream::encode_molecule(
            &self.ckpt.store,
            &self.ckpt.vocab,
            &self.ckpt.enc_cfg,
            smiles,
        )
        .map_err(value_err)?;
        Ok((s_vec, g_vec))
    }

    /// Frozen-probe evaluation on a dataset CSV; returns the MetricReport
    /// as a dict.
    #[pyo3(signature = (dataset_csv, *, task_type = "classification", aggregation = "cco", seeds = vec![0]))]
    fn evaluate(
        &self,
        py: Python<'_>,
        dataset_csv: PathBuf,
        task_type: &str,
        aggregation: &str,
        seeds: Vec<u64>,
    ) -> PyResult<PyObject> {
        let task_type = TaskType::from_name(task_type)
            .ok_or_else(|| value_err(format!("unknown task type {task_type:?}")))?;
        let agg = Aggregation::from_name(aggregation)
            .ok_or_else(|| value_err(format!("unknown aggregation {aggregation:?}")))?;
        let name = dataset_csv
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let ds = TaskDataset::from_csv(&dataset_csv, &name, task_type).map_err(value_err)?;
        let report = downstream::evaluate(
            &self.ckpt.store,
            &self.ckpt.vocab,
            &self.ckpt.enc_cfg,
            &ds,
            "python",
            agg,
            &seeds,
        )
        .map_err(value_err)?;
        let dict = pyo3::types::PyDict::new_bound(py);
        dict.set_item("dataset", report.dataset)?;
        dict.set_item("method", report.method)?;
        dict.set_item("aggregation", report.aggregation)?;
        dict.set_item("metric_name", report.metric_name)?;
        dict.set_item("mean", report.mean)?;
        dict.set_item("std", report.std)?;
        dict.set_item("seeds", report.seeds)?;
        dict.set_item("n_tasks_evaluated", report.n_tasks_evaluated)?;
        Ok(dict.into())
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.ckpt.enc_cfg.vocab_size
    }

    #[getter]
    fn d_shared(&self) -> usize {
        self.ckpt.enc_cfg.d_shared
    }
}

#[pymodule]
fn molfusion_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_smiles, m)?)?;
    m.add_function(wrap_pyfunction!(morgan_fingerprint, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(scaffold_key, m)?)?;
    m.add_function(wrap_pyfunction!(scaffold_split, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
