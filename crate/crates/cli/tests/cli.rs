//! End-to-end tests of the `confscout` binary: exit-code contract, stage
//! artifacts, idempotence, and the benchmark fixture reproduction.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn confscout() -> Command {
    Command::new(env!("CARGO_BIN_EXE_confscout"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "confscout-cli-{tag}-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/table1")
}

#[test]
fn configs_reports_704_for_default_emphasis_space() {
    let output = confscout().arg("configs").output().unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert_eq!(stdout_of(&output).trim(), "704\t704");
}

#[test]
fn configs_expect_size_mismatch_exits_2() {
    // No solver expansion table is shipped, so the identity table cannot
    // collapse 704 down to 353; expecting it must fail with a data error.
    let output = confscout()
        .args(["configs", "--expect-size", "353"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
    assert!(stderr_of(&output).contains("353"));
}

#[test]
fn configs_dedup_matches_library_on_fixture_table() {
    let dir = tempdir("configs");
    let params = r#"[
        {"name": "P", "levels": ["a", "b", "c"]},
        {"name": "Q", "levels": ["x", "y"]}
    ]"#;
    // P's levels a and c expand identically, so 6 points collapse to 4.
    let expansion = r#"{"entries": {
        "P": {"a": {"s": "1"}, "b": {"s": "2"}, "c": {"s": "1"}},
        "Q": {"x": {"t": "1"}, "y": {"t": "2"}}
    }}"#;
    std::fs::write(dir.join("params.json"), params).unwrap();
    std::fs::write(dir.join("expansion.json"), expansion).unwrap();
    let output = confscout()
        .args(["configs", "--params"])
        .arg(dir.join("params.json"))
        .arg("--expansion")
        .arg(dir.join("expansion.json"))
        .arg("--out")
        .arg(dir.join("space.json"))
        .args(["--expect-size", "4"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert_eq!(stdout_of(&output).trim(), "6\t4");

    // Library-level oracle.
    use confscout_core::configspace::{dedup, defs_from_json, enumerate_cartesian, ExpansionTable};
    let defs = defs_from_json(params.as_bytes()).unwrap();
    let table = ExpansionTable::from_json(expansion.as_bytes()).unwrap();
    let points = enumerate_cartesian(&defs).unwrap();
    let space = dedup(&defs, &points, &table).unwrap();
    let exported: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("space.json")).unwrap()).unwrap();
    let exported_survivors: Vec<usize> = exported["survivors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(exported_survivors, space.survivors);
}

#[test]
fn settings_dir_flows_from_configs_into_collect() {
    let dir = tempdir("settings-flow");
    let params = r#"[
        {"name": "P", "levels": ["a", "b", "c"]},
        {"name": "Q", "levels": ["x", "y"]}
    ]"#;
    let expansion = r#"{"entries": {
        "P": {"a": {"s": "1"}, "b": {"s": "2"}, "c": {"s": "1"}},
        "Q": {"x": {"t": "1"}, "y": {"t": "2"}}
    }}"#;
    std::fs::write(dir.join("params.json"), params).unwrap();
    std::fs::write(dir.join("expansion.json"), expansion).unwrap();
    let settings_dir = dir.join("settings");
    let output = confscout()
        .args(["configs", "--params"])
        .arg(dir.join("params.json"))
        .arg("--expansion")
        .arg(dir.join("expansion.json"))
        .arg("--settings-dir")
        .arg(&settings_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    // Survivors 0..3; duplicates 4, 5 collapsed away.
    let mut names: Vec<String> = std::fs::read_dir(&settings_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["config_0.set", "config_1.set", "config_2.set", "config_3.set"]
    );
    let text = std::fs::read_to_string(settings_dir.join("config_3.set")).unwrap();
    assert_eq!(text, "s = 2\nt = 2\n");

    // The emitted settings files drive a collection (synthetic adapter uses
    // the parsed config ids as its portfolio columns).
    let gen = confscout()
        .args(["generate", "--family", "dense", "--count", "2", "--seed", "3"])
        .arg("--out-dir")
        .arg(dir.join("instances"))
        .output()
        .unwrap();
    assert!(gen.status.success());
    let collect = confscout()
        .arg("collect")
        .arg("--instances")
        .arg(dir.join("instances"))
        .arg("--journal")
        .arg(dir.join("journal.tsv"))
        .arg("--settings-dir")
        .arg(&settings_dir)
        .output()
        .unwrap();
    assert!(collect.status.success(), "{}", stderr_of(&collect));
    let journal = std::fs::read_to_string(dir.join("journal.tsv")).unwrap();
    assert_eq!(journal.lines().count(), 2 * 4);
    assert!(journal.lines().all(|l| l.ends_with("ok")));
}

#[test]
fn quiet_log_level_silences_progress() {
    let dir = tempdir("quiet");
    let output = confscout()
        .env("CONFSCOUT_LOG", "quiet")
        .args(["generate", "--family", "sparse", "--count", "1", "--seed", "0"])
        .arg("--out-dir")
        .arg(dir.join("instances"))
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(stderr_of(&output).is_empty(), "{}", stderr_of(&output));
}

#[test]
fn missing_input_path_is_usage_error() {
    let output = confscout().args(["select"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1), "{}", stderr_of(&output));
}

#[test]
fn nonexistent_journal_is_data_error() {
    let output = confscout()
        .args(["select", "--journal", "/nonexistent/journal.tsv"])
        .args(["--n-configs", "4"])
        .args(["--chain", "/tmp/chain.tsv", "--portfolio", "/tmp/portfolio.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
}

#[test]
fn missing_adapter_binary_exits_3() {
    let dir = tempdir("adapter");
    let gen = confscout()
        .args(["generate", "--family", "sparse", "--count", "1"])
        .arg("--out-dir")
        .arg(dir.join("instances"))
        .output()
        .unwrap();
    assert!(gen.status.success(), "{}", stderr_of(&gen));
    let output = confscout()
        .arg("collect")
        .arg("--instances")
        .arg(dir.join("instances"))
        .arg("--journal")
        .arg(dir.join("journal.tsv"))
        .args(["--n-configs", "2", "--adapter-cmd", "/no/such/solver"])
        .args(["--adapter-args", "{instance}", "{output}"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr_of(&output));
}

#[test]
fn evaluate_reproduces_benchmark_fixture_summary() {
    let output = confscout()
        .arg("evaluate")
        .arg("--candidate")
        .arg(fixtures().join("item_placement_candidate.tsv"))
        .arg("--baseline")
        .arg(fixtures().join("item_placement_baseline.tsv"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let report = stdout_of(&output);
    assert!(report.contains("wins_candidate\t66"), "{report}");
    assert!(report.contains("wins_baseline\t34"), "{report}");
    let total_of = |key: &str| -> f64 {
        report
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("missing {key} in {report}"))
            .split('\t')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((total_of("gamma_total_candidate") / 1.36e6 - 1.0).abs() < 1e-9);
    assert!((total_of("gamma_total_baseline") / 1.54e6 - 1.0).abs() < 1e-9);
    // Total improvement ~ -11.7%.
    let line = report
        .lines()
        .find(|l| l.starts_with("improvement_total"))
        .expect("improvement_total line");
    let value: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((value - (-0.11688311688311688)).abs() < 1e-9);
}

#[test]
fn evaluate_rejects_mispaired_run_files() {
    let output = confscout()
        .arg("evaluate")
        .arg("--candidate")
        .arg(fixtures().join("item_placement_candidate.tsv"))
        .arg("--baseline")
        .arg(fixtures().join("anonymous_baseline.tsv"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("different (instance, seed) runs"));
}

#[test]
fn report_writes_svg_histogram() {
    let dir = tempdir("report");
    let output = confscout()
        .arg("report")
        .arg("--candidate")
        .arg(fixtures().join("anonymous_candidate.tsv"))
        .arg("--baseline")
        .arg(fixtures().join("anonymous_baseline.tsv"))
        .arg("--out")
        .arg(dir.join("report.txt"))
        .arg("--svg")
        .arg(dir.join("hist.svg"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let svg = std::fs::read_to_string(dir.join("hist.svg")).unwrap();
    assert!(svg.starts_with("<svg "));
    assert!(svg.contains("</svg>"));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("wins\t38/62"), "{stdout}");
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("wins_candidate\t38"));
}

#[test]
fn pipeline_end_to_end_produces_all_artifacts() {
    let dir = tempdir("pipeline");
    let output = confscout()
        .arg("pipeline")
        .arg("--workdir")
        .arg(&dir)
        // ~20 training instances and 8 configs keep this fast.
        .args(["--train-per-family", "7", "--test-per-family", "2"])
        .args(["--n-configs", "8", "--seeds", "2", "--epochs", "8"])
        .args(["--hidden", "12", "--members", "2", "--epsilon", "0.05"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        stdout_of(&output),
        stderr_of(&output)
    );
    for artifact in [
        "journal-train.tsv",
        "journal-test.tsv",
        "chain.tsv",
        "portfolio.json",
        "model.bin",
        "train_log.tsv",
        "predictions.tsv",
        "clusters.tsv",
        "cluster_predictions.tsv",
        "runs_candidate.tsv",
        "runs_baseline.tsv",
        "report.txt",
        "histogram.svg",
    ] {
        assert!(dir.join(artifact).exists(), "missing artifact {artifact}");
    }
    // The portfolio must be a valid subset of the config ids.
    let portfolio: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("portfolio.json")).unwrap())
            .unwrap();
    let ids = portfolio["config_ids"].as_array().unwrap();
    assert!(!ids.is_empty() && ids.len() <= 8);
    // Predictions cover every test instance.
    let predictions = std::fs::read_to_string(dir.join("predictions.tsv")).unwrap();
    assert_eq!(predictions.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn generate_is_idempotent() {
    let dir = tempdir("idempotent");
    for _ in 0..2 {
        let output = confscout()
            .args(["generate", "--family", "medium", "--count", "3", "--seed", "5"])
            .arg("--out-dir")
            .arg(dir.join("instances"))
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    // Same seed, same files.
    let mut names: Vec<String> = std::fs::read_dir(dir.join("instances"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3);
    let first = std::fs::read(dir.join("instances").join(&names[0])).unwrap();
    let output = confscout()
        .args(["generate", "--family", "medium", "--count", "3", "--seed", "5"])
        .arg("--out-dir")
        .arg(dir.join("again"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let second = std::fs::read(dir.join("again").join(&names[0])).unwrap();
    assert_eq!(first, second);
}

#[test]
fn collect_select_train_predict_individual_stages() {
    let dir = tempdir("stages");
    let run = |args: &[&str]| {
        let mut cmd = confscout();
        cmd.args(args);
        let output = cmd.output().unwrap();
        assert!(
            output.status.success(),
            "args {args:?}: {}",
            stderr_of(&output)
        );
        output
    };
    let instances = dir.join("instances");
    run(&[
        "generate",
        "--family",
        "all",
        "--count",
        "4",
        "--seed",
        "9",
        "--out-dir",
        instances.to_str().unwrap(),
    ]);
    let journal = dir.join("journal.tsv");
    run(&[
        "collect",
        "--instances",
        instances.to_str().unwrap(),
        "--journal",
        journal.to_str().unwrap(),
        "--n-configs",
        "8",
        "--seeds",
        "2",
    ]);
    // 12 instances x 8 configs x 2 seeds
    let journal_text = std::fs::read_to_string(&journal).unwrap();
    assert_eq!(journal_text.lines().count(), 12 * 8 * 2);

    let chain = dir.join("chain.tsv");
    let portfolio = dir.join("portfolio.json");
    let select_args = [
        "select",
        "--journal",
        journal.to_str().unwrap(),
        "--n-configs",
        "8",
        "--epsilon",
        "0.02",
        "--chain",
        chain.to_str().unwrap(),
        "--portfolio",
        portfolio.to_str().unwrap(),
    ];
    run(&select_args);
    assert!(std::fs::read_to_string(&chain).unwrap().lines().count() >= 2);
    // Idempotence: rerunning with identical inputs rewrites identical bytes.
    let chain_bytes = std::fs::read(&chain).unwrap();
    let portfolio_bytes = std::fs::read(&portfolio).unwrap();
    run(&select_args);
    assert_eq!(std::fs::read(&chain).unwrap(), chain_bytes);
    assert_eq!(std::fs::read(&portfolio).unwrap(), portfolio_bytes);

    let model = dir.join("model.bin");
    run(&[
        "train",
        "--journal",
        journal.to_str().unwrap(),
        "--instances",
        instances.to_str().unwrap(),
        "--portfolio",
        portfolio.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--members",
        "1",
        "--hidden",
        "8",
        "--epochs",
        "3",
        "--val-fraction",
        "0.25",
    ]);
    let predictions = dir.join("predictions.tsv");
    run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--portfolio",
        portfolio.to_str().unwrap(),
        "--instances",
        instances.to_str().unwrap(),
        "--out",
        predictions.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read_to_string(&predictions)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count(),
        12
    );

    // Cluster route over the same journal.
    let clusters = dir.join("clusters.tsv");
    run(&[
        "cluster-fit",
        "--journal",
        journal.to_str().unwrap(),
        "--instances",
        instances.to_str().unwrap(),
        "--n-configs",
        "8",
        "--model",
        clusters.to_str().unwrap(),
    ]);
    let cluster_predictions = dir.join("cluster_predictions.tsv");
    run(&[
        "cluster-predict",
        "--model",
        clusters.to_str().unwrap(),
        "--instances",
        instances.to_str().unwrap(),
        "--out",
        cluster_predictions.to_str().unwrap(),
    ]);
    assert!(std::fs::read_to_string(&cluster_predictions)
        .unwrap()
        .contains("syn-sparse"));
}
