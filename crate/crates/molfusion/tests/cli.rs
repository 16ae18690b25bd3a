//! Exit-code contract and output sanity for the command-line interface.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molfusion"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        common::write_corpus(&dir.path().join("corpus.txt"), &common::memorization_corpus());
        common::write_oxygen_csv(&dir.path().join("task.csv"));
        std::fs::write(
            dir.path().join("run.cfg"),
            "corpus = corpus.txt\noutput_dir = out\n\
             d_model = 8\nd_shared = 8\nn_layers = 1\nn_heads = 2\nmp_rounds = 1\n\
             epochs = 1\nbatch_size = 8\n",
        )
        .unwrap();
        Workspace { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }
}

#[test]
fn parse_prints_counts_and_succeeds() {
    let ws = Workspace::new();
    let out = run(&["parse", "CC(=O)O"], ws.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("atoms=4"), "{text}");
    assert!(text.contains("bonds=3"), "{text}");
}

#[test]
fn parse_error_is_a_data_failure() {
    let ws = Workspace::new();
    let out = run(&["parse", "C("], ws.path());
    assert_eq!(code(&out), 3);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn fingerprint_is_spelling_invariant_on_stdout() {
    let ws = Workspace::new();
    let a = run(&["fingerprint", "CCO"], ws.path());
    let b = run(&["fingerprint", "OCC"], ws.path());
    assert_eq!(code(&a), 0);
    let bits = |o: &Output| {
        stdout(o)
            .lines()
            .find(|l| l.starts_with("set_bits="))
            .unwrap()
            .to_string()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn simmatrix_prints_unit_diagonal() {
    let ws = Workspace::new();
    std::fs::write(ws.path().join("three.txt"), "CCO\nCCN\nCCO\n").unwrap();
    let out = run(&["simmatrix", "three.txt"], ws.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| l.contains(' ')).collect();
    assert_eq!(rows.len(), 3, "{text}");
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = row.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals[i], 1.0);
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let ws = Workspace::new();
    std::fs::write(ws.path().join("bad.cfg"), "corpus = corpus.txt\nd_modle = 8\n").unwrap();
    let out = run(&["pretrain", "--config", "bad.cfg"], ws.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("d_modle"));
}

#[test]
fn invalid_config_value_exits_2() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path().join("bad.cfg"),
        "corpus = corpus.txt\nmask_rate = 1.5\n",
    )
    .unwrap();
    let out = run(&["pretrain", "--config", "bad.cfg"], ws.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_corpus_exits_3() {
    let ws = Workspace::new();
    std::fs::write(ws.path().join("bad.cfg"), "corpus = nowhere.txt\n").unwrap();
    let out = run(&["pretrain", "--config", "bad.cfg"], ws.path());
    assert_eq!(code(&out), 3);
}

#[test]
fn corrupted_checkpoint_exits_4() {
    let ws = Workspace::new();
    let out = run(&["pretrain", "--config", "run.cfg"], ws.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt_path = ws.path().join("out/model.ckpt");
    let mut bytes = std::fs::read(&ckpt_path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    std::fs::write(ws.path().join("broken.ckpt"), &bytes).unwrap();

    let out = run(&["probe", "broken.ckpt", "task.csv"], ws.path());
    assert_eq!(code(&out), 4);

    std::fs::write(ws.path().join("notckpt.ckpt"), b"plainly not a checkpoint").unwrap();
    let out = run(&["probe", "notckpt.ckpt", "task.csv"], ws.path());
    assert_eq!(code(&out), 4);
}

#[test]
fn pretrain_probe_export_roundtrip() {
    let ws = Workspace::new();
    // the oxygen corpus gives scaffold groups the probe can split
    let (smiles, _) = common::synthetic_oxygen_dataset();
    common::write_corpus(&ws.path().join("corpus.txt"), &smiles[..150].to_vec());

    let out = run(&["pretrain", "--config", "run.cfg", "--seed", "3"], ws.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("checkpoint="), "{text}");
    assert!(ws.path().join("out/model.ckpt").exists());
    assert!(ws.path().join("out/pretrain.log").exists());

    let out = run(
        &["probe", "out/model.ckpt", "task.csv", "--agg", "ewa", "--seeds", "0,1"],
        ws.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.path().join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["aggregation"], "ewa");
    assert_eq!(report["metric_name"], "roc_auc");
    assert_eq!(report["seeds"].as_array().unwrap().len(), 2);
    let mean = report["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));

    let out = run(
        &["export-embeddings", "out/model.ckpt", "corpus.txt", "--modality", "smiles"],
        ws.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(ws.path().join("embeddings.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("smiles,modality,"));
    assert_eq!(lines.count(), 150);
}

#[test]
fn probe_rejects_bad_task_type_with_exit_2() {
    let ws = Workspace::new();
    let out = run(&["pretrain", "--config", "run.cfg"], ws.path());
    assert_eq!(code(&out), 0);
    let out = run(
        &["probe", "out/model.ckpt", "task.csv", "--task-type", "ranking"],
        ws.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn probe_on_unparseable_dataset_exits_3() {
    let ws = Workspace::new();
    let out = run(&["pretrain", "--config", "run.cfg"], ws.path());
    assert_eq!(code(&out), 0);
    std::fs::write(ws.path().join("bad.csv"), "smiles,y\nC(,1\nCC,0\n").unwrap();
    let out = run(&["probe", "out/model.ckpt", "bad.csv"], ws.path());
    assert_eq!(code(&out), 3);
}
