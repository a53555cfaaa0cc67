use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TWO_TRIANGLES: &str = "\
# nodes: 6
0 1
1 2
0 2
3 4
4 5
3 5
2 3
";

// Triangle split: 12/14 − 2·(7/14)².
const Q_SPLIT: f64 = 5.0 / 14.0;

fn modmbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modmbo"))
        .args(args)
        .output()
        .expect("spawn modmbo")
}

fn ok(args: &[&str]) -> String {
    let out = modmbo(args);
    assert!(
        out.status.success(),
        "modmbo {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn detect_two_triangles() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.txt");
    fs::write(&graph, TWO_TRIANGLES).unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "detect", "--graph", s(&graph), "--scheme", "mbo", "--nhat", "2", "--neig", "6",
        "--out", s(&out),
    ]);
    let r = report(&out);
    let q = r["metrics"]["modularity"].as_f64().unwrap();
    assert!((q - Q_SPLIT).abs() < 1e-12, "Q = {q}");
    assert_eq!(r["metrics"]["n_communities"], 2);

    // The reported Q is recomputable from the emitted partition.
    let eval = ok(&[
        "eval", "--partition", s(&out.join("partition.csv")), "--graph", s(&graph),
    ]);
    let e: Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(e["modularity"].as_f64().unwrap(), q);
}

#[test]
fn detect_without_graph_fails() {
    let out = modmbo(&["detect", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--graph"));
}

#[test]
fn detect_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.txt");
    fs::write(&graph, "0 1 -2\n").unwrap();
    let out = modmbo(&["detect", "--graph", s(&graph), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));

    fs::write(&graph, TWO_TRIANGLES).unwrap();
    let out = modmbo(&[
        "detect", "--graph", s(&graph), "--gamma", "-1", "--out", s(tmp.path()),
    ]);
    assert!(!out.status.success());
}

#[test]
fn eval_partition_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.txt");
    fs::write(&graph, TWO_TRIANGLES).unwrap();
    let p = tmp.path().join("p.csv");
    fs::write(&p, "node,community\n0,0\n1,0\n2,0\n3,1\n4,1\n5,1\n").unwrap();
    let e: Value = serde_json::from_str(&ok(&[
        "eval", "--partition", s(&p), "--truth", s(&p), "--graph", s(&graph),
    ]))
    .unwrap();
    assert_eq!(e["nmi"].as_f64().unwrap(), 1.0);
    assert_eq!(e["purity"].as_f64().unwrap(), 1.0);
    assert!((e["modularity"].as_f64().unwrap() - Q_SPLIT).abs() < 1e-12);
}

#[test]
fn generate_detect_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["generate", "--planted", "120,3,0.3,0.01", "--seed", "3", "--out", s(&data)]);
    let out = tmp.path().join("run");
    ok(&[
        "detect", "--graph", s(&data.join("graph.txt")), "--scheme", "rmm", "--truth",
        s(&data.join("truth.csv")), "--out", s(&out),
    ]);
    let r = report(&out);
    assert!(r["metrics"]["nmi"].as_f64().unwrap() >= 0.95, "{}", r["metrics"]);
    let e: Value = serde_json::from_str(&ok(&[
        "eval", "--partition", s(&out.join("partition.csv")), "--truth",
        s(&data.join("truth.csv")), "--graph", s(&data.join("graph.txt")),
    ]))
    .unwrap();
    assert_eq!(e["nmi"], r["metrics"]["nmi"]);
    assert_eq!(e["modularity"], r["metrics"]["modularity"]);
}

#[test]
fn multi_writes_sweep_table() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.txt");
    fs::write(&graph, TWO_TRIANGLES).unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "detect", "--graph", s(&graph), "--scheme", "multi", "--nrange", "2..4", "--restarts",
        "2", "--neig", "6", "--out", s(&out),
    ]);
    let table = fs::read_to_string(out.join("qtable.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 * 2);
    let r = report(&out);
    assert_eq!(r["sweep"].as_array().unwrap().len(), 6);
    assert!((r["metrics"]["modularity"].as_f64().unwrap() - Q_SPLIT).abs() < 1e-12);
}

#[test]
fn isolated_nodes_are_unassigned() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.txt");
    fs::write(&graph, TWO_TRIANGLES.replace("# nodes: 6", "# nodes: 7")).unwrap();
    let out = tmp.path().join("run");
    ok(&["detect", "--graph", s(&graph), "--neig", "6", "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("partition.csv")).unwrap();
    assert_eq!(csv.lines().last().unwrap(), "6,unassigned");
    assert_eq!(report(&out)["unassigned_nodes"], 1);
}

#[test]
fn knn_three_points() {
    let tmp = tempfile::tempdir().unwrap();
    let features = tmp.path().join("x.csv");
    fs::write(&features, "0\n1\n3\n").unwrap();
    let graph = tmp.path().join("g.txt");
    ok(&["knn", "--features", s(&features), "--k", "1", "--out", s(&graph)]);
    let text = fs::read_to_string(&graph).unwrap();
    let edges: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(edges.len(), 2);
    assert!(edges.iter().all(|l| l.starts_with("0\t1") || l.starts_with("1\t2")));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["generate", "--planted", "90,3,0.25,0.02", "--seed", "9", "--out", s(&data)]);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "detect", "--graph", s(&data.join("graph.txt")), "--scheme", "multi", "--nrange",
            "2..5", "--seed", "4", "--out", s(&out),
        ]);
        (
            fs::read(out.join("partition.csv")).unwrap(),
            fs::read(out.join("qtable.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn eigen_cache_is_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.txt");
    fs::write(&graph, TWO_TRIANGLES).unwrap();
    let cache = tmp.path().join("cache");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_modmbo"))
            .args(["detect", "--graph", s(&graph), "--neig", "4", "--out", s(&out)])
            .env("MODMBO_EIG_CACHE", &cache)
            .status()
            .unwrap();
        assert!(status.success());
        let r = report(&out);
        (r["eig_cache_hit"].as_bool().unwrap(), fs::read(out.join("partition.csv")).unwrap())
    };
    let (hit_a, a) = run("a");
    let (hit_b, b) = run("b");
    assert!(!hit_a);
    assert!(hit_b);
    assert_eq!(a, b);
}
