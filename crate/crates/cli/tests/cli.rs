use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use treegnas::model::Activation;
use treegnas::ArchitectureParams;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_treegnas"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Writes a graph with one feature column equal to the label.
fn write_graph(dir: &Path, labels: &[usize], edges: &[(usize, usize)]) {
    let y = labels.iter().max().unwrap() + 1;
    fs::write(dir.join("meta.tsv"), format!("{}\t1\t{y}\n", labels.len())).unwrap();
    let e: String = edges.iter().map(|(u, v)| format!("{u}\t{v}\n")).collect();
    fs::write(dir.join("edges.tsv"), e).unwrap();
    let f: String = labels.iter().map(|l| format!("{l}.0\n")).collect();
    fs::write(dir.join("features.tsv"), f).unwrap();
    let l: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(dir.join("labels.tsv"), l).unwrap();
}

fn search_toy(out: &Path, extra: &[&str]) -> Output {
    let graph = data("toy30");
    let mut args = vec!["search", "--graph", graph.to_str().unwrap(), "--trials", "20", "--seed", "7"];
    args.extend(["--out", out.to_str().unwrap()]);
    args.extend(extra);
    run(&args)
}

#[test]
fn search_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = search_toy(&out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["best_architecture.json", "tree.json", "tree.dot", "trials.jsonl", "report.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let best = fs::read_to_string(out.join("best_architecture.json")).unwrap();
    ArchitectureParams::from_json(&best).unwrap();
    let tree: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["total_models"], 20);
    let trials = fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 20);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    let field = |k: &str| report.lines().find_map(|l| l.strip_prefix(k)).unwrap().trim().to_string();
    assert_eq!(field("trials:"), "20");
    let val: f64 = field("best_val_auc:").parse().unwrap();
    assert!((0.0..=1.0).contains(&val));
    assert!(report.contains("[selection ratios]"));
    assert!(fs::read_to_string(out.join("tree.dot")).unwrap().starts_with("digraph mct {"));
}

#[test]
fn untimed_search_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(search_toy(&a, &["--timing", "off"]).status.success());
    assert!(search_toy(&b, &["--timing", "off"]).status.success());
    for f in ["tree.json", "tree.dot", "trials.jsonl", "best_architecture.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_search_arguments_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    for bad in [&["--trials", "0"][..], &["--theta", "0"], &["--c", "-1"], &["--trials", "many"]] {
        let mut args = vec!["search", "--graph", "data/toy30", "--out", out.to_str().unwrap()];
        args.extend(bad);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
    assert!(!out.exists());
    assert_eq!(run(&["search", "--trials", "5"]).status.code(), Some(2));
}

#[test]
fn homophily_examples() {
    let dir = tempfile::tempdir().unwrap();
    write_graph(dir.path(), &[0, 0, 0], &[(0, 1), (1, 2), (0, 2)]);
    let o = run(&["homophily", "--graph", dir.path().to_str().unwrap()]);
    assert_eq!(stdout(&o), "1.0000\n");

    write_graph(dir.path(), &[0, 0, 1, 1], &[(0, 1), (1, 2), (2, 3)]);
    let o = run(&["homophily", "--graph", dir.path().to_str().unwrap()]);
    assert_eq!(stdout(&o), "0.6667\n");

    let o = run(&["homophily", "--graph", data("heterophilic300").to_str().unwrap()]);
    let h: f64 = stdout(&o).trim().parse().unwrap();
    assert!(h <= 0.3, "{h}");
    let o = run(&["homophily", "--graph", data("homophilic300").to_str().unwrap()]);
    let h: f64 = stdout(&o).trim().parse().unwrap();
    assert!(h >= 0.7, "{h}");

    let o = run(&["homophily", "--graph", "/no/such/graph"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));
}

fn write_arch(dir: &Path, name: &str, act: Activation) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, ArchitectureParams::gcn(2, 16, act).to_json()).unwrap();
    p
}

#[test]
fn train_fixed_compares_architectures() {
    let dir = tempfile::tempdir().unwrap();
    let relu = write_arch(dir.path(), "relu.json", Activation::Relu);
    let tanh = write_arch(dir.path(), "tanh.json", Activation::Tanh);
    let graph = data("toy30");
    let args = [
        "train-fixed",
        "--graph",
        graph.to_str().unwrap(),
        "--arch",
        relu.to_str().unwrap(),
        "--arch",
        tanh.to_str().unwrap(),
        "--seed",
        "3",
    ];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success(), "{}", stderr(&a));
    let lines: Vec<serde_json::Value> = stdout(&a).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["arch"].as_str().unwrap().ends_with("relu.json"));
    assert!(lines[1]["arch"].as_str().unwrap().ends_with("tanh.json"));
    for l in &lines {
        let v = l["val_auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stderr(&a).lines().filter(|l| l.contains("train_seconds=")).count(), 2);
}

#[test]
fn train_fixed_names_an_unknown_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_arch(dir.path(), "a.json", Activation::Relu);
    let text = fs::read_to_string(&p).unwrap().replacen("\"jknet\"", "\"jk_mode\"", 1);
    fs::write(&p, text).unwrap();
    let o = run(&["train-fixed", "--graph", data("toy30").to_str().unwrap(), "--arch", p.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("jk_mode"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn count_space() {
    let a = stdout(&run(&["count-space"]));
    let n: u64 = a.trim().parse().unwrap();
    assert!(n > 20_000_000);
    assert_eq!(a, stdout(&run(&["count-space"])));
    assert_eq!(stdout(&run(&["count-space", "--reduced"])), "3024\n");
}

#[test]
fn export_renders_a_saved_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(search_toy(&out, &["--theta", "5", "--timing", "off"]).status.success());
    let tree = out.join("tree.json");
    let printed = run(&["export", tree.to_str().unwrap()]);
    assert!(printed.status.success());
    let saved = fs::read_to_string(out.join("tree.dot")).unwrap();
    assert_eq!(stdout(&printed), saved);
    assert!(saved.contains("num_gnn_layers=1"));

    let file = dir.path().join("copy.dot");
    assert!(run(&["export", tree.to_str().unwrap(), "--out", file.to_str().unwrap()]).status.success());
    assert_eq!(fs::read_to_string(file).unwrap(), saved);

    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{\"total_models\": 1}").unwrap();
    let o = run(&["export", junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invalid tree JSON"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-config");
    let cfg = dir.path().join("run.cfg");
    let text = format!(
        "# small run\ngraph = {}\ntrials = 6\nseed = 7\ntiming = off\nout = {}\n",
        data("toy30").display(),
        out.display()
    );
    fs::write(&cfg, text).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "search"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trials = fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 6);

    // A flag overrides the file.
    let o = run(&["--config", cfg.to_str().unwrap(), "search", "--trials", "3"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("trials.jsonl")).unwrap().lines().count(), 3);

    fs::write(&cfg, "trails = 6\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "count-space"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trails"));
}

#[test]
fn duplicate_edges_are_merged_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    write_graph(dir.path(), &[0, 0, 1, 1], &[(0, 1), (1, 0), (1, 2), (2, 3), (0, 1)]);
    let o = run(&["homophily", "--graph", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.6667\n");
    assert!(stderr(&o).contains("merged 2 duplicate edge lines"), "{}", stderr(&o));
}
