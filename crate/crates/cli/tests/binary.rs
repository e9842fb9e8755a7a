use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qrf_sim(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrf-sim"));
    cmd.current_dir(dir).args(args).env_remove("QRF_SIM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_one_line_diagnostic(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("qrf-sim: {kind}: ")), "{err}");
}

#[test]
fn writes_csv_with_provenance_header_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment":"fig2","l":4,"n_steps":6}"#);
    let o = qrf_sim(dir.path(), &["fig2", "--config", &cfg, "--out", "run/out.csv"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = std::fs::read_to_string(dir.path().join("run/out.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# version: qrf-sim "));
    let hash = lines[1].strip_prefix("# config_sha256: ").unwrap();
    assert_eq!(hash.len(), 64);
    assert!(lines[2].starts_with("# rng: chacha20"));
    assert_eq!(lines[3], "# seeds: none");
    assert_eq!(lines[4], "step,Lx_over_l,Ly_over_l,Lz_over_l");
    assert_eq!(lines.len(), 5 + 7);

    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/out.json")).unwrap()).unwrap();
    assert_eq!(side["config_sha256"], hash);
    assert_eq!(side["experiment"], "fig2");
    assert_eq!(side["rows"], 7);
    assert!(side["summary"]["max_abs_Ly_over_l"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_path_does_not_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment":"fig1","l":6,"state":{"family":"thermal","r":0.5},"theta_grid":[1.0]}"#);
    let header = |out: &str| {
        let o = qrf_sim(dir.path(), &["fig1", "--config", &cfg, "--out", out], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join(out)).unwrap().lines().nth(1).unwrap().to_string()
    };
    assert_eq!(header("a.csv"), header("b.csv"));
}

#[test]
fn config_errors_exit_2_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.json", r#"{"experiment":"fig2","colour":1}"#, "fig2"),
        ("mismatch.json", r#"{"experiment":"fig2"}"#, "fig3"),
        ("range.json", r#"{"experiment":"fig2","z":1.5}"#, "fig2"),
        ("irrelevant.json", r#"{"experiment":"fig1","n_steps":3}"#, "fig1"),
        ("syntax.json", r#"{"experiment":"#, "fig2"),
        ("state.json", r#"{"experiment":"fig2","l":4,"state":{"family":"rotated_dicke","k":9}}"#, "fig2"),
    ];
    for (name, text, exp) in cases {
        let cfg = write(dir.path(), name, text);
        let o = qrf_sim(dir.path(), &[exp, "--config", &cfg, "--out", "x.csv"], &[]);
        assert_one_line_diagnostic(&o, 2, "config");
    }
    let missing = qrf_sim(dir.path(), &["fig2", "--config", "nope.json"], &[]);
    assert_one_line_diagnostic(&missing, 2, "config");
    let bad_flag = qrf_sim(dir.path(), &["fig2", "--config", "c.json", "--threads", "many"], &[]);
    assert_one_line_diagnostic(&bad_flag, 2, "config");
    let cfg = write(dir.path(), "ok.json", r#"{"experiment":"fig2","l":2,"n_steps":1}"#);
    let bad_env = qrf_sim(dir.path(), &["fig2", "--config", &cfg], &[("QRF_SIM_THREADS", "0")]);
    assert_one_line_diagnostic(&bad_env, 2, "config");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn help_and_version_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        assert_eq!(qrf_sim(dir.path(), &[flag], &[]).status.code(), Some(0));
    }
}

#[test]
fn seeded_runs_reproduce_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment":"fig5","l":4,"n_steps":8}"#);
    let run = |out: &str, extra: &[&str], env: &[(&str, &str)]| {
        let mut args = vec!["fig5", "--config", cfg.as_str(), "--out", out, "--seeds", "3,1,4,1,5,9,2,6"];
        args.extend_from_slice(extra);
        let o = qrf_sim(dir.path(), &args, env);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let one = run("one.csv", &["--threads", "1"], &[]);
    let four = run("four.csv", &["--threads", "4"], &[]);
    let env = run("env.csv", &["--threads", "1"], &[("QRF_SIM_THREADS", "3")]);
    assert_eq!(one, four);
    assert_eq!(one, env);
    let text = String::from_utf8(one).unwrap();
    assert!(text.lines().any(|l| l == "# seeds: 3,1,4,1,5,9,2,6"));
    assert!(text.contains("p_succ_uncorrected_se"));
}

#[test]
fn gamma_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment":"fig2","l":4,"n_steps":3,"gamma":1.0}"#);
    let o = qrf_sim(dir.path(), &["fig2", "--config", &cfg, "--gamma", "0", "--out", "g.csv"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["gamma"], 0.0);
    assert!(side["summary"]["max_abs_Ly_over_l"].as_f64().unwrap() < 1e-14);
}
