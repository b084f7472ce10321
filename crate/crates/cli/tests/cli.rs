use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbsde-lab"))
}

fn experiment(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report(out: &Path, stem: &str) -> Value {
    serde_json::from_slice(&std::fs::read(out.join(format!("{stem}.json"))).unwrap()).unwrap()
}

#[test]
fn list_shows_catalog() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let line = |id: &str| text.lines().find(|l| l.trim_start().starts_with(id)).unwrap().to_string();
    assert!(line("abs-z").contains("(A1)(A2)(A3)"));
    assert!(line("sqrt-cap").contains("continuous non-Lipschitz"));
    assert!(line("corollary34").contains("n=d, q=z, b=0, σ=1"));
}

#[test]
fn every_shipped_experiment_validates() {
    let dir = experiment("");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let o = bin().arg("validate").arg(&p).output().unwrap();
            assert!(o.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn unknown_field_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "kind = \"solve\"\n\n[grid]\nhorizon = 1.0\nn_step = 10\n").unwrap();
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 5") && err.contains("n_step"), "{err}");

    std::fs::write(&cfg, "kind = \"solve\"\n[generator]\nid = \"linear\"\nbeta = [1.0, 2.0]\n").unwrap();
    let o = run(&cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("generator.beta"));
}

#[test]
fn unstable_penalty_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&experiment("unstable-penalty.toml"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("penalty scheme unstable"));
}

#[test]
fn falling_obstacle_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&experiment("falling-obstacle.toml"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "falling-obstacle");
    let sol = &r["results"]["solution"];
    assert!((sol["origin_y"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((sol["expected_k_total"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(r["passed"], Value::Bool(true));
    assert_eq!(r["config"]["solver"]["penalty_gap_tol"].as_f64(), Some(0.02));
    assert!(dir.path().join("falling-obstacle-penalty.csv").exists());
    let csv = std::fs::read_to_string(dir.path().join("falling-obstacle.csv")).unwrap();
    assert!(csv.starts_with("node,state,time,y,dk,obstacle,z0\n"));
}

#[test]
fn beta_z_representation_converges_to_1_6() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&experiment("beta-z.toml"), dir.path(), &["--paths-override", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path(), "beta-z");
    assert_eq!(r["results"]["verdict"], "converged");
    assert_eq!(r["overrides"]["n_paths"], 20000);
    assert_eq!(r["config"]["monte_carlo"]["n_paths"], 20000);
    assert!(r["tolerances"]["abs_tol"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("beta-z.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(cols[2], 1.6);
    assert!((cols[1] - 1.6).abs() < 0.05, "{last}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = experiment("abs-z-preset.toml");
    let args = ["--paths-override", "4000", "--seed-override", "11"];
    assert!(run(&cfg, a.path(), &args).status.success());
    assert!(run(&cfg, b.path(), &args).status.success());
    for f in ["abs-z-preset.csv", "abs-z-preset.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let r = report(a.path(), "abs-z-preset");
    assert_eq!(r["seeds"]["monte_carlo"], 11);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn failing_expectation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(experiment("flatness.toml")).unwrap().replace("expect_holds = false", "expect_holds = true");
    let cfg = dir.path().join("flip.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
