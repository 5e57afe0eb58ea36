use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const D0: &str = "object_id,t,value\n1,0,2\n1,10,2\n2,0,0\n2,10,10\n3,0,6\n3,5,0\n3,10,6\n";

fn trank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trank")).current_dir(dir).env_remove("TRANK_DATA_DIR").args(args).output().unwrap()
}

fn lines(out: &Output) -> Vec<Value> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn error(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap()
}

fn with_d0() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d0.csv"), D0).unwrap();
    lines(&trank(dir.path(), &["ingest", "--input", "d0.csv", "--out", "d0.trnk"]));
    dir
}

#[test]
fn d0_query_end_to_end() {
    let dir = with_d0();
    let d = dir.path();
    let info = lines(&trank(d, &["info", "d0.trnk"]));
    assert_eq!(info[0]["m"], 3);
    assert_eq!(info[0]["mass"], 100.0);
    lines(&trank(d, &["build", "--data", "d0.trnk", "--method", "exact3", "--out", "d0.ex3"]));

    let rows = lines(&trank(d, &["query", "--index", "d0.ex3", "--k", "2", "--t1", "2", "--t2", "4"]));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["object"], 2);
    assert!((rows[0]["score"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert_eq!(rows[1]["object"], 3);
    assert!((rows[1]["score"].as_f64().unwrap() - 4.8).abs() < 1e-9);
    assert_eq!(rows[2]["method"], "exact3");
    assert_eq!(rows[2]["results"], 2);

    let rows = lines(&trank(d, &["query", "--index", "d0.ex3", "--k", "1", "--t1", "0", "--t2", "10", "--aggregate", "avg"]));
    assert_eq!(rows[0]["object"], 2);
    assert!((rows[0]["score"].as_f64().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = with_d0();
    let d = dir.path();
    lines(&trank(d, &["build", "--data", "d0.trnk", "--method", "exact1", "--out", "d0.ex1"]));
    let e = error(&trank(d, &["query", "--index", "d0.ex1", "--t1", "5", "--t2", "4"]));
    assert!(e["error"].as_str().unwrap().contains("not ordered"), "{e}");

    let out = trank(d, &["build", "--data", "d0.trnk", "--method", "appx1", "--r", "4", "--out", "d0.a1"]);
    assert!(error(&out)["error"].as_str().unwrap().contains("capacity"));
    assert!(!d.join("d0.a1").exists());

    let out = trank(d, &["build", "--data", "d0.trnk", "--method", "appx2", "--out", "d0.a2"]);
    assert!(error(&out)["error"].as_str().unwrap().contains("resolution"));

    let out = trank(d, &["query", "--index", "d0.ex1", "--t1", "0", "--t2", "1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error(&out)["kind"], "usage");
}

#[test]
fn gen_build_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = lines(&trank(d, &["gen", "--profile", "random-walk-positive", "--m", "20", "--n-avg", "30", "--seed", "3", "--out", "s.trnk"]));
    assert_eq!(g[0]["m"], 20);
    let again = lines(&trank(d, &["info", "s.trnk"]));
    assert_eq!(again[0]["n"], g[0]["n"]);

    let rows = lines(&trank(d, &["eval", "--data", "s.trnk", "--methods", "exact2,appx2", "--r", "16", "--k", "5", "--k-max", "10", "--queries", "20"]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["mean_precision_recall"], 1.0);
    assert_eq!(rows[1]["rankwise_pass_rate"], 1.0);

    let rows = lines(&trank(
        d,
        &["bench", "--data", "s.trnk", "--methods", "exact1,appx1", "--r", "8,16", "--k", "5", "--k-max", "10", "--queries", "10", "--out-prefix", "b"],
    ));
    assert_eq!(rows.len(), 3);
    let tsv = std::fs::read_to_string(d.join("b.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(d.join("b.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn data_dir_from_environment() {
    let dir = with_d0();
    let out = Command::new(env!("CARGO_BIN_EXE_trank"))
        .env("TRANK_DATA_DIR", dir.path())
        .args(["build", "--data", "d0.trnk", "--method", "appx2plus", "--r", "3", "--k-max", "2", "--oversized", "--out", "p"])
        .output()
        .unwrap();
    lines(&out);
    assert!(dir.path().join("p").exists());
    assert!(dir.path().join("p.ex2").exists());
    let info = lines(&trank(dir.path(), &["info", "p"]));
    assert_eq!(info[0]["method"], "appx2plus");
}

#[test]
fn outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = lines(&trank(d, &["gen", "--profile", "random-walk-mixed", "--m", "12", "--n-avg", "25", "--seed", "8", "--out", "g.trnk"]));
    lines(&trank(d, &["ingest", "--input", "g.trnk", "--out", "copy.trnk"]));
    let info = lines(&trank(d, &["info", "copy.trnk"]));
    for key in ["m", "n", "mass", "abs_mass", "t_end"] {
        assert_eq!(info[0][key], g[0][key], "{key}");
    }

    lines(&trank(d, &["build", "--data", "copy.trnk", "--method", "exact2", "--out", "g.ex2i"]));
    let rows = lines(&trank(d, &["query", "--index", "g.ex2i", "--k", "12", "--t1", "1234.5", "--t2", "7000.25"]));
    let idx = trank::index::open_file(&d.join("g.ex2i"), &mut trank_core::IoStats::default()).unwrap();
    let q = trank_core::QuerySpec::sum(12, 1234.5, 7000.25).unwrap();
    let ans = trank_core::TopKQuery::query(&idx, &q, &mut trank_core::IoStats::default()).unwrap();
    assert_eq!(rows.len(), ans.len() + 1);
    for (row, e) in rows.iter().zip(&ans.entries) {
        assert_eq!(row["object"].as_u64().unwrap(), u64::from(e.object.0));
        assert_eq!(row["score"].as_f64().unwrap().to_bits(), e.score.to_bits());
    }
}
