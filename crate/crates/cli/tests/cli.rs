use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use batchq::analytic::steady_pmf_fixed_markov;
use tempfile::TempDir;

const MARKOV_N2: &str = r#"{"rate":{"base":1},"batch":{"kind":"fixed","n":2},"service":{"kind":"exponential","mu":1}}"#;

fn batchq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchq"))
        .current_dir(dir)
        .env_remove("BATCHQ_SEED")
        .args(args)
        .output()
        .expect("run batchq")
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("spec.json"), MARKOV_N2).unwrap();
    dir
}

/// Data rows of a CSV as fields, header checked and dropped.
fn rows(path: PathBuf, header: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), header);
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn moments_grid() {
    let dir = setup();
    let out = batchq(dir.path(), &["analytic", "spec.json", "--what", "moments", "--t-grid", "0:0.5:20", "--out", "m.csv"]);
    assert!(out.status.success());
    let r = rows(dir.path().join("m.csv"), "t,mean,variance");
    assert_eq!(r.len(), 41);
    assert_eq!((num(&r[0][1]), num(&r[0][2])), (0.0, 0.0));
    assert!((num(&r[40][1]) - 2.0).abs() < 1e-6);
    // 17 significant digits
    assert_eq!(r[40][1].split('e').next().unwrap().len(), 18);
    assert!(dir.path().join("m.csv.manifest.json").exists());
}

#[test]
fn steady_moments_via_inf() {
    let dir = setup();
    let out = batchq(dir.path(), &["analytic", "spec.json", "--what", "moments", "--t-grid", "inf", "--out", "m.csv"]);
    assert!(out.status.success());
    let r = rows(dir.path().join("m.csv"), "t,mean,variance");
    assert_eq!(r[0][0], "inf");
    assert_eq!((num(&r[0][1]), num(&r[0][2])), (2.0, 3.0));
}

#[test]
fn pmf_matches_recursion() {
    let dir = setup();
    let out = batchq(dir.path(), &["analytic", "spec.json", "--what", "pmf", "--n", "2", "--j-max", "20", "--out", "p.csv"]);
    assert!(out.status.success());
    let r = rows(dir.path().join("p.csv"), "j,p");
    let want = steady_pmf_fixed_markov(2, 1.0, 1.0, 20).unwrap().probs;
    assert_eq!(r.len(), want.len());
    for (row, p) in r.iter().zip(want) {
        assert_eq!(num(&row[1]), p);
    }
}

#[test]
fn cumulants_and_covariance() {
    let dir = setup();
    assert!(batchq(dir.path(), &["analytic", "spec.json", "--what", "cumulants", "--k-max", "3", "--out", "k.csv"]).status.success());
    let r = rows(dir.path().join("k.csv"), "k,cumulant,limit");
    assert_eq!(num(&r[1][1]), 0.75);
    assert!(batchq(dir.path(), &["analytic", "spec.json", "--what", "covariance", "--t-grid", "0,1,inf", "--out", "c.csv"]).status.success());
    let r = rows(dir.path().join("c.csv"), "t,cov,corr");
    assert_eq!(r[0][2], "NaN");
    assert!((num(&r[1][2]) - 0.683_939_720_585_721_2).abs() < 1e-12);
    assert_eq!(num(&r[2][2]), 0.5);
}

#[test]
fn usage_and_domain_errors() {
    let dir = setup();
    let empty = batchq(dir.path(), &["analytic", "spec.json", "--what", "moments", "--t-grid", "", "--out", "m.csv"]);
    assert_eq!(empty.status.code(), Some(2));
    let cap = batchq(dir.path(), &["analytic", "spec.json", "--what", "mgf", "--theta-grid", "-6", "--out", "m.csv"]);
    assert_eq!(cap.status.code(), Some(3));
    fs::write(dir.path().join("bad.json"), r#"{"rate":{"base":1,"cos":[3]}}"#).unwrap();
    let bad = batchq(dir.path(), &["analytic", "bad.json", "--what", "moments", "--out", "m.csv"]);
    assert_eq!(bad.status.code(), Some(2));
    let limit = batchq(dir.path(), &["limit", "--mode", "fluid", "--theta-grid", "5.5", "--out", "f.csv"]);
    assert_eq!(limit.status.code(), Some(3));
}

#[test]
fn batch_scaling_curves_converge() {
    let dir = setup();
    let out = batchq(dir.path(), &["limit", "--mode", "batch-scaling", "--n-list", "1,2,3,4", "--out", "b.csv"]);
    assert!(out.status.success());
    let r = rows(dir.path().join("b.csv"), "n,theta,mgf");
    assert_eq!(r.len(), 5 * 151);
    let curve = |label: &str| -> Vec<f64> { r.iter().filter(|x| x[0] == label).map(|x| num(&x[2])).collect() };
    let limit = curve("inf");
    let gap = |label: &str| curve(label).iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap("4") < gap("1"));
}

#[test]
fn fluid_and_diffusion() {
    let dir = setup();
    assert!(batchq(dir.path(), &["limit", "--mode", "diffusion", "--batch-mean", "1.5", "--batch-second-moment", "2.5", "--out", "d.csv"]).status.success());
    let r = rows(dir.path().join("d.csv"), "mean,variance");
    assert_eq!((num(&r[0][0]), num(&r[0][1])), (1.5, 2.0));
    assert!(batchq(dir.path(), &["limit", "--mode", "fluid", "--theta-grid", "0", "--t-grid", "0,2,inf", "--out", "f.csv"]).status.success());
    assert!(rows(dir.path().join("f.csv"), "t,theta,mgf").iter().all(|x| num(&x[2]) == 1.0));
}

#[test]
fn simulate_steady_mean() {
    let dir = setup();
    let out = batchq(dir.path(), &["simulate", "spec.json", "--t-grid", "20", "--reps", "10000", "--seed", "9", "--out", "s.csv"]);
    assert!(out.status.success());
    let r = rows(dir.path().join("s.csv"), "t,mean,variance,se,count");
    assert!((num(&r[0][1]) - 2.0).abs() < 3.0 * num(&r[0][3]));
    assert_eq!(r[0][4], "10000");
}

#[test]
fn simulate_identical_correlation() {
    let dir = setup();
    let out = batchq(dir.path(), &["simulate", "spec.json", "--t-grid", "20", "--reps", "100000", "--subqueues", "identical", "--out", "s.csv"]);
    assert!(out.status.success());
    let r = rows(dir.path().join("s-pairs.csv"), "t,i,j,cov,corr");
    assert!((num(&r[0][4]) - 0.5).abs() < 0.02);
    assert!(dir.path().join("s-subqueues.csv").exists());
}

#[test]
fn simulate_errors() {
    let dir = setup();
    let zero = batchq(dir.path(), &["simulate", "spec.json", "--t-grid", "1", "--reps", "0", "--out", "s.csv"]);
    assert_eq!(zero.status.code(), Some(2));
    let cfg = batchq(dir.path(), &["simulate", "spec.json", "--t-grid", "1", "--subqueues", "order-stat:1", "--out", "s.csv"]);
    assert_eq!(cfg.status.code(), Some(4));
}

#[test]
fn compare_gate_and_negative_control() {
    let dir = setup();
    let ok = batchq(dir.path(), &["compare", "spec.json", "--t", "5", "--reps", "100000", "--out", "c.csv"]);
    assert_eq!(ok.status.code(), Some(0));
    let r = rows(dir.path().join("c.csv"), "quantity,analytic,simulated,se,z");
    assert!(r.iter().all(|x| num(&x[4]).abs() < 4.0));
    fs::write(
        dir.path().join("wrong.json"),
        MARKOV_N2.replace(r#""mu":1"#, r#""mu":1.3"#),
    )
    .unwrap();
    let bad = batchq(dir.path(), &["compare", "spec.json", "--t", "5", "--reps", "100000", "--reference-spec", "wrong.json", "--out", "c.csv"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn compare_general_service() {
    let dir = setup();
    let uniform = r#"{"rate":{"base":1},"batch":{"kind":"fixed","n":3},"service":{"kind":"uniform","b":1}"#;
    fs::write(dir.path().join("u.json"), format!("{uniform}}}")).unwrap();
    fs::write(dir.path().join("uq.json"), format!(r#"{uniform},"q0":2}}"#)).unwrap();
    let ok = batchq(dir.path(), &["compare", "u.json", "--t", "2", "--reps", "100000", "--out", "c.csv"]);
    assert_eq!(ok.status.code(), Some(0));
    let early = batchq(dir.path(), &["compare", "u.json", "--t", "0.5", "--out", "c.csv"]);
    assert_eq!(early.status.code(), Some(2));
    let q0 = batchq(dir.path(), &["compare", "uq.json", "--t", "2", "--out", "c.csv"]);
    assert_eq!(q0.status.code(), Some(2));
}

#[test]
fn route_examples() {
    let dir = setup();
    assert!(batchq(dir.path(), &["route", "--k", "2", "--out", "r.csv"]).status.success());
    let r = rows(dir.path().join("r.csv"), "i,phi_i");
    assert!((num(&r[0][1]) - 0.5).abs() < 1e-14);
    assert!(batchq(dir.path(), &["route", "--k", "3", "--out", "r.csv", "--matrix-out", "m.csv"]).status.success());
    let r = rows(dir.path().join("r.csv"), "i,phi_i");
    for (row, want) in r.iter().zip([7.0 / 17.0, 4.0 / 17.0, 6.0 / 17.0]) {
        assert!((num(&row[1]) - want).abs() < 1e-14);
    }
    assert_eq!(r.last().unwrap(), &vec!["feasible".to_string(), "true".to_string()]);
    assert_eq!(rows(dir.path().join("m.csv"), "row,col1,col2").len(), 2);
    let det = batchq(dir.path(), &["route", "--k", "2", "--service", "deterministic", "--out", "r.csv"]);
    assert_eq!(det.status.code(), Some(3));
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = setup();
    let p = dir.path();
    let out = batchq(p, &["simulate", "spec.json", "--t-grid", "1,5", "--reps", "2000", "--seed", "4", "--subqueues", "identical", "--out", "s.csv"]);
    assert!(out.status.success());
    let names = ["s.csv", "s-pairs.csv", "s-subqueues.csv", "s.csv.manifest.json"];
    let before: Vec<Vec<u8>> = names.iter().map(|n| fs::read(p.join(n)).unwrap()).collect();
    for n in names {
        fs::remove_file(p.join(n)).ok();
    }
    fs::write(p.join("saved.json"), &before[3]).unwrap();
    let replay = batchq(p, &["replay", "saved.json"]);
    assert!(replay.status.success());
    for (n, b) in names.iter().zip(&before) {
        assert_eq!(&fs::read(p.join(n)).unwrap(), b, "{n} differs");
    }
}

#[test]
fn seed_env_override() {
    let dir = setup();
    let p = dir.path();
    let run = |env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_batchq"));
        cmd.current_dir(p).env_remove("BATCHQ_SEED");
        if let Some(v) = env {
            cmd.env("BATCHQ_SEED", v);
        }
        cmd.args(["simulate", "spec.json", "--t-grid", "3", "--reps", "500", "--seed", "1", "--out", out]);
        assert!(cmd.output().unwrap().status.success());
        fs::read_to_string(p.join(out)).unwrap()
    };
    let plain = run(None, "a.csv");
    let env77 = run(Some("77"), "b.csv");
    let flag77 = {
        let o = batchq(p, &["simulate", "spec.json", "--t-grid", "3", "--reps", "500", "--seed", "77", "--out", "c.csv"]);
        assert!(o.status.success());
        fs::read_to_string(p.join("c.csv")).unwrap()
    };
    assert_ne!(plain, env77);
    assert_eq!(env77, flag77);
    let manifest = fs::read_to_string(p.join("b.csv.manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 77"));
}
