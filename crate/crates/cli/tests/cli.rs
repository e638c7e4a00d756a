use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ssi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssi")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) {
    let out = ssi(args, cwd);
    assert!(out.status.success(), "ssi {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &str = r#"{
  "synth": {"n_speakers": 4, "utterances_per_speaker_per_mode": 8, "test_prompts": 2},
  "seed": 3
}"#;

/// synth → train-am → decode ×2 → adapt → score → analyze on a small corpus
/// with directly sampled features.
fn pipeline(dir: &Path, jobs: &str) {
    fs::write(dir.join("run.json"), SMALL).unwrap();
    let g = ["--config", "run.json", "--jobs", jobs, "--corpus", "corpus", "--model", "model", "--results", "res"];
    let step = |s: &[&str]| {
        let mut a = s.to_vec();
        a.extend(g);
        ok(&a, dir);
    };
    step(&["synth", "--out", "corpus"]);
    step(&["train-am", "--out", "model"]);
    step(&["decode", "--out", "res"]);
    step(&["decode", "--features", "fmllr", "--out", "res"]);
    step(&["adapt", "--adapt", "map", "--out", "res"]);
    step(&["score", "--out", "res"]);
    step(&["analyze", "--out", "analysis"]);
}

fn csvs(dir: &Path) -> Vec<(String, String)> {
    let mut out = vec![];
    for sub in ["res", "analysis"] {
        let mut names: Vec<_> = fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            if p.extension().is_some_and(|e| e == "csv") {
                out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()));
            }
        }
    }
    out
}

#[test]
fn pipeline_reruns_reproduce_csvs_and_table_partitions_rows() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), "1");
    pipeline(b.path(), "1");
    let (ca, cb) = (csvs(a.path()), csvs(b.path()));
    assert!(ca.len() >= 6, "{:?}", ca.iter().map(|c| &c.0).collect::<Vec<_>>());
    assert_eq!(ca, cb);

    let long = fs::read_to_string(a.path().join("res/wer_long.csv")).unwrap();
    let keys: Vec<(String, String, String)> = long
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].into(), c[1].into(), c[2].into())
        })
        .collect();
    let unique: HashSet<_> = keys.iter().cloned().collect();
    assert_eq!(unique.len(), keys.len());
    assert_eq!(keys.len(), 2 * 3);
    let table = fs::read_to_string(a.path().join("res/wer_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "test_set,raw,fmllr,raw+map,raw+map_delta,fmllr+map,fmllr+map_delta");
    assert!(lines[1].starts_with("modal,") && lines[2].starts_with("silent,"));

    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("res/run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 3);
    assert_eq!(run["command"], "score");
    assert_eq!(run["config"]["synth"]["n_speakers"], 4);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), SMALL).unwrap();
    ok(&["synth", "--config", "c.json", "--seed", "9", "--lm-scale", "4", "--out", "corpus"], dir.path());
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corpus/run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 9);
    assert_eq!(run["config"]["decode"]["lm_scale"], 4.0);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corpus/truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 9);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec![],
        vec!["decode", "--out", "x"],
        vec!["adapt", "--corpus", "c", "--model", "m", "--out", "x"],
        vec!["synth", "--out", "x", "--alpha", "2"],
        vec!["report", "--out", "x"],
        vec!["decode", "--features", "mfcc"],
    ] {
        let out = ssi(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
    let out = ssi(&["frobnicate"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(ssi(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssi(&["decode", "--corpus", "missing", "--model", "m", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = ssi(&["synth", "--config", "bad.json", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"synth": {"n_speakers": 3, "utterances_per_speaker_per_mode": 6, "test_prompts": 1},
            "featnet": {"input_shape": [7, 16, 32], "conv_kernel": 5, "conv_filters": [2], "pool": 2,
                        "fc_dims": [8, 8, 4, 8], "n_classes": 8, "lr": 1e6, "epochs": 2, "batch_size": 16,
                        "l2_weight": 1.0, "seed": 0, "bn_eps": 1e-5, "bn_momentum": 0.1,
                        "bottleneck_layer": 2, "normalization": null}}"#,
    )
    .unwrap();
    ok(&["synth", "--config", "c.json", "--out", "corpus"], dir.path());
    let out = ssi(&["train-featnet", "--config", "c.json", "--corpus", "corpus", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
