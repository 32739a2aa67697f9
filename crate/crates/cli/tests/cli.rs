//! Binary-level tests: exit codes, artifacts, config handling.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use sstsearch_core::corpus::save_corpus;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sstsearch"));
    cmd.env_remove("SSTSEARCH_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_corpus(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("corpus.jsonl");
    save_corpus(&path, &common::shuffled_identifier_corpus(n, 5)).unwrap();
    path
}

#[test]
fn help_exits_zero_everywhere() {
    for sub in [
        None,
        Some("parse"),
        Some("transform"),
        Some("serialize"),
        Some("coverage"),
        Some("train"),
        Some("index"),
        Some("search"),
        Some("eval"),
    ] {
        let mut cmd = bin();
        if let Some(s) = sub {
            cmd.arg(s);
        }
        cmd.arg("--help");
        let output = run(&mut cmd);
        assert_eq!(output.status.code(), Some(0), "help for {sub:?}");
        let text = stdout(&output);
        assert!(text.contains("--config"), "{sub:?} help mentions --config");
        assert!(text.contains("--seed"), "{sub:?} help mentions --seed");
    }
}

#[test]
fn unknown_subcommand_and_flag_exit_one() {
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(run(bin().args(["serialize", "--bogus"])).status.code(), Some(1));
    assert_eq!(
        run(bin().args(["serialize", "--method", "nope", "--corpus", "x"])).status.code(),
        Some(1),
        "bad method value is a usage error"
    );
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"a\"}\n").unwrap();
    let output = run(bin()
        .args(["serialize", "--method", "sbt"])
        .arg("--corpus")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("line 1"));

    let output = run(bin()
        .args(["serialize", "--method", "sbt", "--corpus", "does-not-exist.jsonl"]));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn serialize_writes_aligned_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 40);
    let output = run(bin()
        .args(["serialize", "--method", "sbt", "--seed", "3"])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let train = std::fs::read_to_string(dir.path().join("train.sbt.txt")).unwrap();
    let valid = std::fs::read_to_string(dir.path().join("valid.sbt.txt")).unwrap();
    let test = std::fs::read_to_string(dir.path().join("test.sbt.txt")).unwrap();
    assert_eq!(train.lines().count(), 32);
    assert_eq!(valid.lines().count(), 4);
    assert_eq!(test.lines().count(), 4);
    // every line is a bracketed token sequence ending at the module root
    assert!(train.lines().all(|l| l.starts_with("( ") && l.ends_with("module")));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 30);
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        format!(
            "{{\"corpus\": {:?}, \"method\": \"lcrs\", \"seed\": 3, \"out\": {:?}}}",
            corpus.display().to_string(),
            dir.path().display().to_string()
        ),
    )
    .unwrap();
    let output = run(bin().args(["serialize", "--config"]).arg(&config));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    assert!(dir.path().join("train.lcrs.txt").exists());

    // flag overrides the config's method
    let output = run(bin()
        .args(["serialize", "--method", "sbt", "--config"])
        .arg(&config));
    assert_eq!(output.status.code(), Some(0));
    assert!(dir.path().join("train.sbt.txt").exists());

    // unknown config keys are data errors
    std::fs::write(&config, "{\"corpse\": \"x\"}").unwrap();
    let output = run(bin().args(["serialize", "--method", "sbt", "--config"]).arg(&config));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 30);
    let out_env = dir.path().join("env");
    let out_flag = dir.path().join("flag");

    // --seed 1 under SSTSEARCH_SEED=7 must equal a plain --seed 7 run
    let output = run(bin()
        .args(["serialize", "--method", "rootpath", "--seed", "1"])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&out_env)
        .env("SSTSEARCH_SEED", "7"));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let output = run(bin()
        .args(["serialize", "--method", "rootpath", "--seed", "7"])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&out_flag));
    assert_eq!(output.status.code(), Some(0));
    for name in ["train.rootpath.txt", "valid.rootpath.txt", "test.rootpath.txt"] {
        assert_eq!(
            std::fs::read(out_env.join(name)).unwrap(),
            std::fs::read(out_flag.join(name)).unwrap(),
            "{name}"
        );
    }

    let output = run(bin()
        .args(["serialize", "--method", "sbt"])
        .arg("--corpus")
        .arg(&corpus)
        .env("SSTSEARCH_SEED", "not-a-number"));
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn parse_source_prints_tree_object() {
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("demo.ml");
    std::fs::write(&source, "def f(x): { return x }\n").unwrap();
    let output = run(bin().args(["parse", "--source"]).arg(&source));
    assert_eq!(output.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(value["label"], "module");
    assert_eq!(value["kind"], "nonterminal");

    std::fs::write(&source, "def broken(:\n").unwrap();
    let output = run(bin().args(["parse", "--source"]).arg(&source));
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("line 1"));
}

#[test]
fn full_pipeline_search_prints_ranked_hits() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 50);
    let output = run(bin()
        .args([
            "train",
            "--mode",
            "uni-code",
            "--epochs",
            "6",
            "--embedding-dim",
            "24",
            "--batch-size",
            "8",
            "--min-token-count",
            "1",
            "--seed",
            "11",
        ])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    assert!(dir.path().join("uni-code.ckpt").exists());
    assert!(dir.path().join("uni-code.history.json").exists());

    let output = run(bin()
        .args(["index", "--seed", "11"])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--checkpoint")
        .arg(dir.path().join("uni-code.ckpt"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));

    let output = run(bin()
        .args(["search", "--query", "alpha bravo delta", "-k", "5"])
        .arg("--index")
        .arg(dir.path().join("uni-code.idx")));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = stdout(&output);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().next().unwrap().trim_start().starts_with("1."));

    let output = run(bin()
        .args(["eval", "--seed", "11"])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--checkpoint")
        .arg(dir.path().join("uni-code.ckpt"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(report["baseline"], "uni-code");
    assert_eq!(report["modes"][0]["change_ratio"], 0.0);
    assert!(report["modes"][0]["mrr"].as_f64().unwrap() > 0.0);
}

#[test]
fn coverage_prints_all_nine_modes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 20);
    let output = run(bin()
        .args(["coverage", "--seed", "2"])
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = stdout(&output);
    for mode in [
        "uni-code",
        "uni-rootpath",
        "uni-leafpath",
        "uni-sbt",
        "uni-lcrs",
        "multi-rootpath",
        "multi-leafpath",
        "multi-sbt",
        "multi-lcrs",
    ] {
        assert!(text.contains(mode), "coverage table lists {mode}");
    }
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("coverage.json")).unwrap())
            .unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 9);
    let by_mode = |m: &str| {
        rows.iter()
            .find(|r| r["mode"] == m)
            .unwrap_or_else(|| panic!("{m} row"))
            .clone()
    };
    assert_eq!(by_mode("uni-code")["link_coverage"], 0.0);
    assert_eq!(by_mode("uni-code")["node_coverage"], 1.0);
    assert_eq!(by_mode("uni-sbt")["link_coverage"], 1.0);
    assert_eq!(by_mode("multi-lcrs")["node_coverage"], 1.0);
}
