//! Drives the `batt` binary end to end on a shrunken default setup.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use batt_harness::config::DEFAULT_CONFIG;

fn small_config(dir: &Path) -> PathBuf {
    let text = DEFAULT_CONFIG
        .replace("trials = 10", "trials = 3")
        .replace("rounds = 25000", "rounds = 4000")
        .replace("users = 100000", "users = 800")
        .replace("c = [2.0, 4.0, 8.0]", "c = [4.0]");
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn batt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(sub: &str, cfg: &Path, out: &Path, seed: &str) -> Output {
    batt(&[
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        seed,
    ])
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_experiment_succeeds_and_writes_versioned_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for sub in ["threshold", "handover", "sweep"] {
        let out = tmp.path().join(sub);
        let o = run_into(sub, &cfg, &out, "5");
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        let files = dir_contents(&out);
        assert!(!files.is_empty());
        for (name, bytes) in files {
            let text = String::from_utf8(bytes).unwrap();
            assert!(text.starts_with("# batt-csv v1 "), "{name}");
        }
    }
    let names: Vec<String> = dir_contents(&tmp.path().join("threshold"))
        .into_iter()
        .map(|f| f.0)
        .collect();
    assert!(names.contains(&"threshold_rounds_eps_bsf.csv".to_string()));
    assert!(names.contains(&"threshold_summary.csv".to_string()));
}

#[test]
fn per_round_and_per_user_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    assert!(run_into("threshold", &cfg, &out, "1").status.success());
    assert!(run_into("handover", &cfg, &out, "1").status.success());
    let header = |f: &str| {
        std::fs::read_to_string(out.join(f))
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_eq!(header("threshold_rounds_uniform.csv"), "trial,round,arm,Z_dBm,outcome,phase");
    assert_eq!(
        header("handover_users.csv"),
        "trial,user,policy,n_meas,free_meas,y_ho,x_ho,success,cum_success"
    );
    assert_eq!(header("handover_summary.csv"), "group,metric,mean,stddev");
    // 3 trials x 800 users x 5 policies, plus the two header lines.
    let rows = std::fs::read_to_string(out.join("handover_users.csv")).unwrap().lines().count();
    assert_eq!(rows, 2 + 3 * 800 * 5);
}

#[test]
fn reruns_are_byte_identical_and_seed_matters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for sub in ["threshold", "handover"] {
        let a = tmp.path().join(format!("{sub}-a"));
        let b = tmp.path().join(format!("{sub}-b"));
        let c = tmp.path().join(format!("{sub}-c"));
        assert!(run_into(sub, &cfg, &a, "42").status.success());
        assert!(run_into(sub, &cfg, &b, "42").status.success());
        assert!(run_into(sub, &cfg, &c, "43").status.success());
        assert_eq!(dir_contents(&a), dir_contents(&b), "{sub}");
        assert_ne!(dir_contents(&a), dir_contents(&c), "{sub}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_batt"))
            .env("RAYON_NUM_THREADS", threads)
            .args(["handover", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success());
        outputs.push(dir_contents(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, DEFAULT_CONFIG.replace("half_width = 8.0", "half_width = -8.0")).unwrap();
    let o = batt(&["handover", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("env.cells"));

    let o = batt(&["threshold", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn contract_violations_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    // epsilon * T < J: the uniform sweep cannot visit every arm.
    std::fs::write(&cfg, DEFAULT_CONFIG.replace("epsilon = 0.3", "epsilon = 0.001")).unwrap();
    let out = tmp.path().join("o");
    let o = run_into("threshold", &cfg, &out, "0");
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(batt(&["threshold"]).status.code(), Some(2));
    assert_eq!(batt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let o = batt(&["verify"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}
