use std::path::Path;
use std::process::{Command, Output};

fn walkcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walkcorr"))
        .args(args)
        .env_remove("WALKCORR_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn plan_prints_segment_parameters() {
    let out = walkcorr(&["plan", "--tau", "8", "--eps", "1e-8"]);
    assert_eq!(code(&out), 0);
    let plan = json(&out);
    assert_eq!(plan["spec"]["segments"], 8);
    assert_eq!(plan["spec"]["cutoff"], 3);
    assert_eq!(plan["n"], 72);

    let out = walkcorr(&["plan", "--tau", "8", "--eps", "1e-8", "--rounds", "2"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["n_prime"].as_u64().unwrap() > 0);
}

#[test]
fn simulate_from_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let h = write(
        dir.path(),
        "x.json",
        r#"{"n": 1, "d": 1, "entries": [{"row": 0, "col": 1, "re": 1.0, "im": 0.0}]}"#,
    );
    let report_path = dir.path().join("report.json");
    let out = walkcorr(&[
        "simulate",
        "--hamiltonian",
        &h,
        "--time",
        "0.7",
        "--eps",
        "1e-8",
        "--algorithm",
        "corrected1",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["error_spectral"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["queries"], report["predicted_queries"]);
}

#[test]
fn simulate_random_for_each_algorithm() {
    for alg in ["uncorrected", "corrected1", "corrected2"] {
        let out = walkcorr(&["simulate", "--random", "2,2,11", "--tau", "4", "--eps", "1e-6", "--algorithm", alg]);
        assert_eq!(code(&out), 0, "{alg}");
        let report = json(&out);
        assert_eq!(report["pass"], true, "{alg}");
        assert_eq!(report["algorithm"], alg);
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_walkcorr"));
        cmd.args(["simulate", "--random", "2,3", "--tau", "1", "--eps", "1e-4", "--algorithm", "corrected1"]);
        match seed {
            Some(s) => cmd.env("WALKCORR_SEED", s),
            None => cmd.env_remove("WALKCORR_SEED"),
        };
        cmd.output().unwrap()
    };
    let a = run(Some("5"));
    let b = run(Some("5"));
    let c = run(Some("6"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(code(&run(Some("nope"))), 2);
}

#[test]
fn exit_codes() {
    // validation
    assert_eq!(code(&walkcorr(&["plan", "--tau", "1", "--eps", "2"])), 2);
    assert_eq!(code(&walkcorr(&["plan", "--tau", "-1", "--eps", "1e-3"])), 2);
    assert_eq!(code(&walkcorr(&["verify", "--suite", "nonsense"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let neg = write(
        dir.path(),
        "neg.json",
        r#"{"n": 1, "d": 2, "entries": [
            {"row": 0, "col": 0, "re": 1.0, "im": 0.0},
            {"row": 0, "col": 1, "re": 1.0, "im": 0.0},
            {"row": 1, "col": 1, "re": -1.0, "im": 0.0}]}"#,
    );
    let out = walkcorr(&["simulate", "--hamiltonian", &neg, "--tau", "1", "--eps", "1e-4", "--algorithm", "corrected1"]);
    assert_eq!(code(&out), 2);

    // infeasible
    let out = walkcorr(&["simulate", "--random", "1,1,0", "--tau", "900", "--eps", "1e-300", "--algorithm", "uncorrected"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));

    // resource
    let big = write(
        dir.path(),
        "big.json",
        r#"{"n": 7, "d": 1, "entries": [{"row": 0, "col": 1, "re": 1.0, "im": 0.0}]}"#,
    );
    let out = walkcorr(&["simulate", "--hamiltonian", &big, "--tau", "1", "--eps", "1e-4", "--algorithm", "corrected1"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn sweep_of_empty_grid_prints_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.json", "[]");
    let out = walkcorr(&["sweep", "--config", &cfg]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("tau,epsilon,algorithm,M,r,N,r_prime,N_prime,walk_steps,queries,error_spectral,pass,error"));
}

#[test]
fn sweep_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "grid.json",
        r#"[
            {"hamiltonian": {"random": {"n": 2, "d": 2, "seed": 3}}, "tau": 4.0, "epsilon": 1e-6, "algorithm": "corrected1"},
            {"hamiltonian": {"random": {"n": 1, "d": 2, "seed": 4}}, "tau": 2.0, "epsilon": 1e-6, "algorithm": "corrected2"},
            {"hamiltonian": {"random": {"n": 2, "d": 1, "seed": 5}}, "t": 1.5, "epsilon": 1e-4, "algorithm": "uncorrected"}
        ]"#,
    );
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for out in [&first, &second] {
        let res = walkcorr(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    let a = std::fs::read(&first).unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn sweep_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let both = write(
        dir.path(),
        "both.json",
        r#"[{"hamiltonian": {"random": {"n": 1, "d": 1}}, "t": 1.0, "tau": 1.0, "epsilon": 1e-4, "algorithm": "corrected1"}]"#,
    );
    assert_eq!(code(&walkcorr(&["sweep", "--config", &both])), 2);
    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"[{"hamiltonian": {"random": {"n": 1, "d": 1}}, "tau": 1.0, "epsilon": 1e-4, "algorithm": "corrected1", "extra": 1}]"#,
    );
    assert_eq!(code(&walkcorr(&["sweep", "--config", &unknown])), 2);
}

#[test]
fn verify_series_suite_passes() {
    let out = walkcorr(&["verify", "--suite", "series"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim_end().ends_with("0 failed"));
}
