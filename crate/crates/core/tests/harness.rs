use std::path::{Path, PathBuf};
use std::process::Command;

use attrirob::data::{idx_image_bytes, load_idx};
use attrirob::Error;
use sha2::{Digest, Sha256};

/// SHA-256 of the raw pixel bytes of the first bundled image.
const FIRST_IMAGE_SHA256: &str = "2d1c3087ac5f2bed7c4d54a1b33bf75d09f479ee63c0df2e0a4378f6e7e9ae66";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset").join(name)
}

fn images() -> PathBuf {
    fixture("images-idx3-ubyte")
}

fn labels() -> PathBuf {
    fixture("labels-idx1-ubyte")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn first_image_checksum_matches() {
    let raw = idx_image_bytes(images(), 0).unwrap();
    assert_eq!(raw.len(), 784);
    assert_eq!(hex(&Sha256::digest(&raw)), FIRST_IMAGE_SHA256);
}

#[test]
fn bundled_subset_loads() {
    let ds = load_idx(images(), labels(), usize::MAX).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.class_count), (1000, 784, 10));
    for c in 0..10 {
        assert_eq!(ds.labels.iter().filter(|&&l| l == c).count(), 100);
    }
    let raw = idx_image_bytes(images(), 0).unwrap();
    assert!(ds.inputs[0].iter().zip(&raw).all(|(v, b)| *v == *b as f64 / 255.0));
    assert!(load_idx(images(), labels(), 0).unwrap().is_empty());
    assert_eq!(load_idx(images(), labels(), 7).unwrap().len(), 7);
}

fn write_idx(dir: &Path, img: &[u8], lab: &[u8]) -> (PathBuf, PathBuf) {
    let (i, l) = (dir.join("i"), dir.join("l"));
    std::fs::write(&i, img).unwrap();
    std::fs::write(&l, lab).unwrap();
    (i, l)
}

fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
    std::iter::once(magic).chain(dims.iter().copied()).flat_map(u32::to_be_bytes).collect()
}

#[test]
fn malformed_idx_files_report_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = header(0x803, &[2, 2, 2]);
    img.extend([0, 255, 1, 2, 3, 4, 5, 6]);
    let mut lab = header(0x801, &[2]);
    lab.extend([1, 0]);

    let (i, l) = write_idx(dir.path(), &img, &lab);
    let ds = load_idx(&i, &l, 10).unwrap();
    assert_eq!(ds.inputs[0], vec![0.0, 1.0, 1.0 / 255.0, 2.0 / 255.0]);
    assert_eq!(ds.labels, vec![1, 0]);

    let mut bad = img.clone();
    bad[3] = 0x01;
    let (i, l) = write_idx(dir.path(), &bad, &lab);
    assert!(matches!(load_idx(&i, &l, 10), Err(Error::Parse { offset: 0, .. })));

    let (i, l) = write_idx(dir.path(), &img[..20], &lab);
    assert!(matches!(load_idx(&i, &l, 10), Err(Error::Parse { offset: 20, .. })));

    let mut three = header(0x801, &[3]);
    three.extend([0, 1, 0]);
    let (i, l) = write_idx(dir.path(), &img, &three);
    assert!(matches!(load_idx(&i, &l, 10), Err(Error::Parse { offset: 4, .. })));

    let (i, l) = write_idx(dir.path(), &img[..2], &lab);
    assert!(matches!(load_idx(&i, &l, 10), Err(Error::Parse { .. })));

    assert!(matches!(load_idx(dir.path().join("missing"), &l, 1), Err(Error::Io { .. })));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_attrirob"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

const TINY: &str = r#"{
  "schema": 1,
  "seed": 5,
  "dataset": {"kind": "blobs", "n": 60, "noise": 0.2},
  "model": {"hidden": [6]},
  "train": {"epochs": 2, "batch_size": 8, "use_igr": true, "seed": 5,
            "attack": {"epsilon": 0.05, "alpha": 0.02, "steps": 3, "m": 4}},
  "attack": {"epsilon": 0.05, "steps": 4, "restarts": 2, "k": 1, "m": 6},
  "eval": {"m": 6, "pgd_steps": 3}
}"#;

fn run(args: &[&str]) -> std::process::Output {
    bin().args(args).output().unwrap()
}

fn parse_csv(s: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = s.lines();
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    (head, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn eval_writes_layout_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["config.json", "checkpoint.json", "train_log.csv", "eval.csv", "summary.json"] {
        let a = std::fs::read(out_a.join(f)).unwrap();
        let b = std::fs::read(out_b.join(f)).unwrap();
        if f == "config.json" {
            assert!(!a.is_empty() && !b.is_empty());
        } else {
            assert_eq!(a, b, "{f} differs between runs");
        }
    }

    let (head, rows) = parse_csv(&std::fs::read_to_string(out_a.join("eval.csv")).unwrap());
    let col = |name: &str| head.iter().position(|h| h == name).unwrap();
    let mean_of = |name: &str| {
        let v: Vec<f64> = rows.iter().filter_map(|r| r[col(name)].parse().ok()).collect();
        attrirob::experiment::mean(v.into_iter())
    };
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["samples"].as_u64().unwrap() as usize, rows.len());
    assert_eq!(summary["ifia_mean"]["tau"].as_f64(), mean_of("mean_tau"));
    assert_eq!(summary["ifia_mean"]["cosine"].as_f64(), mean_of("mean_cosine"));
    assert_eq!(summary["ifia_mean"]["topk"].as_f64(), mean_of("mean_topk"));
    assert_eq!(summary["ifia_worst"]["topk"].as_f64(), mean_of("worst_topk"));
    assert_eq!(summary["pgd_ig_cosine"].as_f64(), mean_of("pgd_ig_cosine"));
    let acc = |name: &str| {
        attrirob::experiment::mean(rows.iter().map(|r| if r[col(name)] == "true" { 1.0 } else { 0.0 }))
    };
    assert_eq!(summary["natural_accuracy"].as_f64(), acc("natural_correct"));
    assert_eq!(summary["pgd_accuracy"].as_f64(), acc("pgd_correct"));
    let skipped = rows.iter().filter(|r| r[col("natural_correct")] == "false").count();
    assert_eq!(summary["skipped"].as_u64().unwrap() as usize, skipped);
}

#[test]
fn other_commands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let c = cfg.to_str().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert!(run(&["train", "--config", c, "--out", o]).status.success());
    let a = run(&["attack", "--config", c, "--out", o, "--eps", "0.1", "--steps", "3", "--k", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let csv = std::fs::read_to_string(out.join("attack.csv")).unwrap();
    assert!(csv.starts_with("sample_id,label_preserved,tau,cosine,pearson,topk\n"));
    assert_eq!(csv.lines().count(), 1 + 15);
    assert!(run(&["attack", "--config", c, "--out", o, "--objective", "igr"]).status.success());
    assert!(run(&["consistency", "--config", c, "--out", o]).status.success());
    let cons = std::fs::read_to_string(out.join("consistency.csv")).unwrap();
    assert!(cons.starts_with("model_id,dataset,consistency,layer_1\n"));

    let small = r#"{"schema": 1, "simulate": {"dim": 30, "n_samples": 12},
        "theorem": {"dims": [3], "trials": 50, "sequence_triples": 4, "max_dim": 4, "pearson_dim": 5}}"#;
    let sim_dir = dir.path().join("sim");
    std::fs::create_dir(&sim_dir).unwrap();
    let cfg2 = write_config(&sim_dir, small);
    let c2 = cfg2.to_str().unwrap();
    assert!(run(&["simulate", "--config", c2, "--out", o]).status.success());
    let sim = std::fs::read_to_string(out.join("simulate.csv")).unwrap();
    assert!(sim.starts_with("cosine,tau\n") && sim.lines().count() == 13);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("simulate_summary.json")).unwrap()).unwrap();
    assert_eq!((s["n"].as_u64(), s["dim"].as_u64()), (Some(12), Some(30)));
    assert!(run(&["theorem", "--config", c2, "--out", o, "--seed", "2"]).status.success());
    assert!(out.join("theorem.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let bad = write_config(dir.path(), r#"{"schema": 1, "unknown": true}"#);
    assert_eq!(run(&["train", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["eval", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let no_data = write_config(dir.path(), r#"{"schema": 1}"#);
    assert_eq!(run(&["train", "--config", no_data.to_str().unwrap()]).status.code(), Some(2));
    let wild = TINY.replace(r#""epochs": 2"#, r#""epochs": 2, "learning_rate": 1e300"#);
    let wild = write_config(dir.path(), &wild);
    let r = run(&["train", "--config", wild.to_str().unwrap(), "--out", o.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}
