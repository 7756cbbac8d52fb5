use std::path::PathBuf;

use levy_emm::kernel::EmmVerdict;
use levy_emm::pipeline;
use levy_emm::scenario::Scenario;
use levy_emm::verify::Verdict;
use levy_emm::Error;

fn scenarios_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios"].iter().collect()
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(format!("{name}.toml"))).unwrap()
}

#[test]
fn every_shipped_scenario_loads_validates_and_round_trips() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let s = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        s.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again, "{}", path.display());
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn kernel_checks_of_shipped_scenarios() {
    let verdict = |name: &str| pipeline::check_kernel(&load(name)).unwrap().verdict;
    assert_eq!(verdict("stable-exponential"), EmmVerdict::Admissible);
    assert!(matches!(verdict("phi0-zero"), EmmVerdict::NotAdmissible(_)));
    assert!(matches!(verdict("one-sided"), EmmVerdict::Indeterminate(_)));
    assert_eq!(verdict("gaussian-exponential"), EmmVerdict::Admissible);
}

#[test]
fn construct_reports_zero_violation_on_discrete_measures() {
    for name in ["h1-four-atom", "h2-two-atom"] {
        let r = pipeline::construct(&load(name)).unwrap();
        assert!(r.passed, "{name}");
        let v = r.validation.unwrap();
        assert!(v.positive);
        assert!(v.max_violation <= 1e-12, "{name}: {:e}", v.max_violation);
    }
}

#[test]
fn construct_rejects_unreachable_zeta() {
    let err = pipeline::construct(&load("h2-compact-unreachable")).unwrap_err();
    assert!(matches!(err, Error::ZetaOutOfRange { .. }), "{err}");
}

#[test]
fn smoke_verification_is_reproducible() {
    let mut s = load("h2-two-atom");
    s.smoke();
    s.apply_overrides(Some(99), Some(2_000));
    let a = pipeline::verify(&s).unwrap();
    let b = pipeline::verify(&s).unwrap();
    assert_eq!(a.verdict, Verdict::Pass);
    for (x, y) in a.reports.iter().zip(&b.reports) {
        assert_eq!(x.estimate.to_bits(), y.estimate.to_bits(), "{}", x.name);
    }
    assert_eq!(a.plot.len(), 101);
}

#[test]
fn simulate_writes_csv_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = load("h1-four-atom");
    s.apply_overrides(None, Some(5));
    let summary = pipeline::simulate(&s, dir.path()).unwrap();
    assert_eq!(summary.n_paths, 5);
    for f in ["paths.csv", "jumps.csv", "density.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.lines().count() > 1, "{f}");
    }
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_and_sequential_maps_agree() {
    use levy_emm::par::{map_paths_parallel, map_paths_sequential};
    use rand::Rng;
    let f = |i: u64, r: &mut levy_emm::par::PathRng| (i, r.random::<f64>());
    assert_eq!(map_paths_parallel(500, 3, f), map_paths_sequential(500, 3, f));
}
