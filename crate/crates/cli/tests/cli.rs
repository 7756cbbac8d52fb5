use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn scenario(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", &format!("{name}.toml")].iter().collect()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levy-emm"));
    for v in ["LEVY_EMM_SCENARIO", "LEVY_EMM_SEED", "LEVY_EMM_N_PATHS", "LEVY_EMM_OUT", "LEVY_EMM_PROFILE"] {
        c.env_remove(v);
    }
    c
}

fn run(cmd: &str, name: &str, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--scenario")
        .arg(scenario(name))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_kernel_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, code) in [("stable-exponential", 0), ("phi0-zero", 2), ("one-sided", 3)] {
        let o = run("check-kernel", name, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let doc = json(&dir.path().join("kernel_check.json"));
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["verdict"]["verdict"], "indeterminate");
}

#[test]
fn construct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("construct", "h2-two-atom", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let doc = json(&dir.path().join("construct.json"));
    assert!(doc["validation"]["max_violation"].as_f64().unwrap() <= 1e-12);
    let o = run("construct", "h2-compact-unreachable", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zeta"));
}

#[test]
fn smoke_verify_passes_within_budget_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let o = run("verify", "h2-two-atom", dir.path(), &["--profile", "smoke"]);
    assert!(started.elapsed().as_secs() < 60);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("verification.json"));
    assert_eq!(doc["verdict"], "pass");
    assert_eq!(doc["n_paths"], 5000);
    for r in doc["reports"].as_array().unwrap() {
        for key in ["estimate", "std_error", "n_samples", "seed"] {
            assert!(!r[key].is_null(), "{} lacks {key}", r["name"]);
        }
    }
    let plot = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert!(plot.starts_with("t,weighted_mean,lower,upper"));

    let o = bin().arg("report").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall: pass"));
}

#[test]
fn negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("verify", "h2-broken-alpha", dir.path(), &["--n-paths", "2000"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("verification.json"))["verdict"], "fail");
}

#[test]
fn environment_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("verify")
        .env("LEVY_EMM_SCENARIO", scenario("gaussian-exponential"))
        .env("LEVY_EMM_SEED", "4242")
        .env("LEVY_EMM_N_PATHS", "300")
        .env("LEVY_EMM_OUT", dir.path())
        .env("LEVY_EMM_PROFILE", "smoke")
        .output()
        .unwrap();
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("verification.json"));
    assert_eq!(doc["seed"], 4242);
    assert_eq!(doc["n_paths"], 300);
    // flags win over the environment
    let o = bin()
        .args(["check-kernel", "--seed", "7"])
        .env("LEVY_EMM_SCENARIO", scenario("phi0-zero"))
        .env("LEVY_EMM_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", "h2-two-atom", dir.path(), &["--n-paths", "3"]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["paths.csv", "jumps.csv", "density.csv", "simulate.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn configuration_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("verify").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(64), "no scenario");
    let o = run("verify", "does-not-exist", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(64), "missing file");

    let text = std::fs::read_to_string(scenario("h2-two-atom")).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text.replace("eps_jump = 0.5", "eps_jump = 0.5\nepsilon = 1.0")).unwrap();
    let o = bin().arg("construct").arg("--scenario").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(64), "unknown key");
    std::fs::write(&bad, text.replace("a = 0.5\ntolerance", "tolerance")).unwrap();
    let o = bin().arg("construct").arg("--scenario").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(64), "h2 without a");

    let o = bin().args(["verify", "--profile", "huge"]).output().unwrap();
    assert_eq!(o.status.code(), Some(64), "bad flag");
}
