//! Behavioral tests of the command-line surface: exit codes, file
//! artifacts, caching, golden outputs, and replay determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_baryaug"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn dist_translation_pair_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.csv");
    let out = bin()
        .args(["dist", "--input"])
        .arg(fixture("translation_pair.json"))
        .arg("--output")
        .arg(&matrix)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("n=2"));
    let content = std::fs::read_to_string(&matrix).unwrap();
    assert_eq!(content, "0,5\n5,0\n");
    assert!(matrix.with_file_name("m.csv.manifest.json").is_file());
}

#[test]
fn dist_corrupt_row_exits_2_names_record() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "0,0,1,0\n0.5,oops,2,3\n").unwrap();
    let out = bin()
        .args(["dist", "--csv-input", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(dir.path().join("m.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("record 1"), "{}", stderr(&out));
}

#[test]
fn dist_cache_hit_skips_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.csv");
    let run = || {
        bin()
            .args(["dist", "--input"])
            .arg(fixture("six_clouds.json"))
            .arg("--output")
            .arg(&matrix)
            .env("BARYAUG_CACHE_DIR", dir.path())
            .output()
            .unwrap()
    };
    let first = run();
    assert!(first.status.success());
    assert!(stdout(&first).contains("cache=miss"));
    let second = run();
    assert!(second.status.success());
    assert!(stdout(&second).contains("cache=hit"));
    // identical artifact either way
    let a = std::fs::read(&matrix).unwrap();
    assert!(!a.is_empty());
}

#[test]
fn augment_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("six_aug.json");
    let out = bin()
        .args(["augment", "--input"])
        .arg(fixture("six_clouds.json"))
        .arg("--output")
        .arg(&output)
        .args(["--k", "2", "--n-aug", "10", "--seed", "42"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let got = std::fs::read(&output).unwrap();
    let want = std::fs::read(golden("six_aug.json")).unwrap();
    assert_eq!(got, want, "augmented landmarks drifted from golden");
    let got = std::fs::read(output.with_extension("provenance.ldjson")).unwrap();
    let want = std::fs::read(golden("six_aug.provenance.ldjson")).unwrap();
    assert_eq!(got, want, "provenance drifted from golden");
}

#[test]
fn augment_deterministic_across_runs_and_threads() {
    let digests: Vec<(Vec<u8>, Vec<u8>)> = ["1", "4", "1"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let output = dir.path().join("aug.json");
            let out = bin()
                .args(["augment", "--input"])
                .arg(fixture("six_clouds.json"))
                .arg("--output")
                .arg(&output)
                .args(["--k", "2", "--n-aug", "10", "--seed", "42", "--threads", threads])
                .output()
                .unwrap();
            assert!(out.status.success(), "{}", stderr(&out));
            (
                std::fs::read(&output).unwrap(),
                std::fs::read(output.with_extension("provenance.ldjson")).unwrap(),
            )
        })
        .collect();
    assert_eq!(digests[0], digests[1], "thread count changed output");
    assert_eq!(digests[0], digests[2], "rerun changed output");
}

#[test]
fn augment_zero_samples_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["augment", "--input"])
        .arg(fixture("six_clouds.json"))
        .arg("--output")
        .arg(dir.path().join("aug.json"))
        .args(["--k", "2", "--n-aug", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn graph_and_cliques_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.csv");
    let graph = dir.path().join("g.txt");
    let cliques = dir.path().join("c.txt");
    assert!(bin()
        .args(["dist", "--input"])
        .arg(fixture("six_clouds.json"))
        .arg("--output")
        .arg(&matrix)
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args(["graph", "--matrix"])
        .arg(&matrix)
        .arg("--output")
        .arg(&graph)
        .args(["--k", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let out = bin()
        .args(["cliques", "--graph"])
        .arg(&graph)
        .arg("--output")
        .arg(&cliques)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&cliques).unwrap();
    // two tight clusters of three
    assert!(text.contains("clique 0 1 2"));
    assert!(text.contains("clique 3 4 5"));
}

#[test]
fn graph_k_out_of_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.csv");
    assert!(bin()
        .args(["dist", "--input"])
        .arg(fixture("translation_pair.json"))
        .arg("--output")
        .arg(&matrix)
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args(["graph", "--matrix"])
        .arg(&matrix)
        .arg("--output")
        .arg(dir.path().join("g.txt"))
        .args(["--k", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_self_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = bin()
        .args(["eval", "--set-a"])
        .arg(fixture("six_clouds.json"))
        .arg("--set-b")
        .arg(fixture("six_clouds.json"))
        .arg("--output")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("meta_w2=0 "), "{}", stdout(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["meta_w2"].as_f64().unwrap(), 0.0);
}

#[test]
fn eval_missing_file_exits_2() {
    let out = bin()
        .args(["eval", "--set-a", "/nonexistent/a.json", "--set-b"])
        .arg(fixture("six_clouds.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_sweep_writes_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = bin()
        .args(["eval", "--set-a"])
        .arg(fixture("six_clouds.json"))
        .arg("--set-b")
        .arg(fixture("six_clouds.json"))
        .arg("--output")
        .arg(&csv)
        .args([
            "--sweep", "--sizes", "4,6", "--runs", "3", "--k", "2", "--n-aug", "6", "--seed", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "size,median_meta_w2,q1,q3");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4,"));
    assert!(lines[2].starts_with("6,"));
}

#[test]
fn heatmap_argmax_at_landmark() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("one.json");
    std::fs::write(
        &input,
        r#"{"ordered": true, "n_points": 1, "landmarks": [[[5.0, 9.0]]]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("hm");
    let out = bin()
        .args(["heatmap", "--input"])
        .arg(&input)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--height", "16", "--width", "16"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let bytes = std::fs::read(out_dir.join("heatmap_00000.bahm")).unwrap();
    assert_eq!(&bytes[..4], b"BAHM");
    let dims: Vec<u32> = (0..3)
        .map(|i| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()))
        .collect();
    assert_eq!(dims, vec![1, 16, 16]);
    let vals: Vec<f64> = bytes[16..]
        .chunks(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let argmax = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert_eq!((argmax / 16, argmax % 16), (9, 5)); // row y, col x
    // default sigma recorded as 4
    let manifest = std::fs::read_to_string(out_dir.join("heatmaps.manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(parsed["config"]["sigma"].as_f64().unwrap(), 4.0);
}

#[test]
fn heatmap_zero_sigma_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["heatmap", "--input"])
        .arg(fixture("six_clouds.json"))
        .arg("--out-dir")
        .arg(dir.path().join("hm"))
        .args(["--sigma", "0", "--unordered"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heatmap_unordered_single_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("hm");
    let out = bin()
        .args(["heatmap", "--input"])
        .arg(fixture("six_clouds.json"))
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--height", "8", "--width", "8", "--unordered"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let bytes = std::fs::read(out_dir.join("heatmap_00000.bahm")).unwrap();
    let channels = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    assert_eq!(channels, 1);
}

#[test]
fn verify_theorem_triangle_holds() {
    let out = bin()
        .args(["verify-theorem", "--input"])
        .arg(fixture("triangle_diracs.json"))
        .args(["--n-mc", "3000", "--seed", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("holds=true"), "{}", stdout(&out));
}

#[test]
fn geom_augment_prob_zero_copies_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("g.json");
    let out = bin()
        .args(["geom-augment", "--input"])
        .arg(fixture("six_clouds.json"))
        .arg("--output")
        .arg(&output)
        .args(["--n-aug", "8", "--seed", "3", "--prob", "0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let input: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fixture("six_clouds.json")).unwrap(),
    )
    .unwrap();
    let got: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    for cloud in got["landmarks"].as_array().unwrap() {
        assert!(input["landmarks"]
            .as_array()
            .unwrap()
            .iter()
            .any(|orig| orig == cloud));
    }
}
