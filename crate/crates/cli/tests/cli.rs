use std::path::Path;
use std::process::{Command, Output};

fn xbcf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xbcf"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: [&str; 8] = ["--sweeps", "8", "--burnin", "3", "--trees-mu", "10", "--trees-tau", "5"];

fn simulate(dir: &Path, name: &str) {
    ok(&xbcf(
        &["simulate", "--n", "150", "--prognostic", "linear", "--treatment", "heterogeneous", "--seed", "7", "--out", name],
        dir,
    ));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a.csv");
    simulate(dir.path(), "b.csv");
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("x1,x2,x3,x4,x5,z,y,pi_true,mu_true,tau_true\n"));
    assert_eq!(text.lines().count(), 151);
}

#[test]
fn fit_then_predict_reproduces_cate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "data.csv");
    let mut args = vec!["fit", "--data", "data.csv", "--out", "fit.json", "--cate", "fit.csv", "--seed", "3"];
    args.extend(SMALL);
    ok(&xbcf(&args, d));
    ok(&xbcf(&["predict", "--archive", "fit.json", "--data", "data.csv", "--out", "pred.csv"], d));
    let fit = std::fs::read_to_string(d.join("fit.csv")).unwrap();
    assert_eq!(fit, std::fs::read_to_string(d.join("pred.csv")).unwrap());
    assert!(fit.starts_with("row_id,cate_mean,cate_lo,cate_hi\n"));

    // same seed, same archive bytes
    let mut again = vec!["fit", "--data", "data.csv", "--out", "fit2.json", "--cate", "fit2.csv", "--seed", "3"];
    again.extend(SMALL);
    ok(&xbcf(&again, d));
    assert_eq!(std::fs::read(d.join("fit.json")).unwrap(), std::fs::read(d.join("fit2.json")).unwrap());
}

#[test]
fn warmstart_and_subgroups() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "data.csv");
    let mut args = vec!["fit", "--data", "data.csv", "--out", "fit.json", "--cate", "fit.csv", "--propensity", "true"];
    args.extend(SMALL);
    ok(&xbcf(&args, d));
    ok(&xbcf(
        &[
            "warmstart", "--archive", "fit.json", "--data", "data.csv", "--propensity", "true", "--iters", "3",
            "--chains", "2", "--out", "ws.json", "--cate", "ws.csv",
        ],
        d,
    ));
    let archive = std::fs::read_to_string(d.join("ws.json")).unwrap();
    assert_eq!(archive.matches("\"chain\":1").count(), 3);

    let out = xbcf(
        &["subgroups", "--cate", "fit.csv", "--data", "data.csv", "--archive", "fit.json", "--min-leaf", "15"],
        d,
    );
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("subgroup"));
    assert!(text.contains("95% interval"));
}

#[test]
fn benchmark_one_rep_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "benchmark", "--reps", "1", "--n", "80", "--treatment", "homogeneous,heterogeneous", "--methods", "xbcf",
        "--out", "m.csv",
    ];
    args.extend(SMALL);
    ok(&xbcf(&args, dir.path()));
    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("config,method,ate_rmse,cate_rmse,ate_cover,cate_cover,ate_il,cate_il,seconds"));
    assert!(lines[1].starts_with("linear-homogeneous-n80,xbcf,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(xbcf(&["fit", "--bogus"], d).status.code(), Some(1));
    assert_eq!(xbcf(&["frobnicate"], d).status.code(), Some(1));
    let usage = xbcf(&["frobnicate"], d);
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));
    assert_eq!(xbcf(&["fit", "--data", "missing.csv", "--out", "x.json"], d).status.code(), Some(2));

    std::fs::write(d.join("bad.csv"), "y,z,x1\n1,0,0.1\n2,2,0.2\n").unwrap();
    let out = xbcf(&["fit", "--data", "bad.csv", "--out", "x.json"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
    assert_eq!(xbcf(&["--help"], d).status.code(), Some(0));
}
