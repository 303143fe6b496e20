use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relaybf::model::rate_pair;
use relaybf::region::{read_points_csv, sample_channels, RegionResult, Scenario};
use relaybf::{Beamformer, Complex64};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relaybf"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario_path(name: &str) -> String {
    scenarios().join(name).to_string_lossy().into_owned()
}

#[test]
fn reference_scenario_emits_eleven_points_and_a_hull() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let o = run(&["region", &scenario_path("reciprocal_sum_power.json"), "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("hull vertices"));
    assert!(stdout(&o).contains("max sum rate"));

    let csv = dir.path().join("region.csv");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("grid_value,r1_mean,r2_mean,n_success\n"));
    let points = read_points_csv(&csv).unwrap();
    assert_eq!(points.len(), 11);
    assert!(points.iter().all(|p| p.n_success == 100));
    let res = RegionResult::read_json(&dir.path().join("region.json")).unwrap();
    assert_eq!(res.region.points, points);
    assert!(!res.region.hull.is_empty());
    assert_eq!(res.provenance.seed, 2024);
}

#[test]
fn region_runs_are_reproducible_and_flags_override() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sc = scenario_path("reciprocal_individual_power.json");
    for d in [&a, &b] {
        let o = run(&[
            "region",
            &sc,
            "--out",
            &d.path().to_string_lossy(),
            "--grid-step",
            "0.25",
            "--realizations",
            "7",
            "--seed",
            "5",
            "--per-realization",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["region.csv", "region.json", "hulls.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let res = RegionResult::read_json(&a.path().join("region.json")).unwrap();
    assert_eq!(res.region.points.len(), 5);
    assert_eq!(res.scenario.realizations, 7);
    assert_eq!(res.scenario.seed, 5);
    let hulls = fs::read_to_string(a.path().join("hulls.csv")).unwrap();
    assert!(hulls.starts_with("realization,vertex,r1,r2\n"));
}

#[test]
fn nonreciprocal_individual_region_writes_relaxed_bound() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "region",
        &scenario_path("nonreciprocal_individual_power.json"),
        "--out",
        &d.path().to_string_lossy(),
        "--grid-step",
        "0.5",
        "--realizations",
        "2",
        "--epsilon",
        "1e-3",
        "--rand-candidates",
        "50",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let res = RegionResult::read_json(&d.path().join("region.json")).unwrap();
    let relaxed = res.relaxed.expect("relaxed region");
    let relaxed_csv = read_points_csv(&d.path().join("region_relaxed.csv")).unwrap();
    assert_eq!(relaxed_csv, relaxed.points);
    assert_eq!(res.provenance.rand_candidates, 50);
    assert_eq!(res.baseline.unwrap().method, "greedy_phase");
}

#[test]
fn missing_field_exits_2_and_names_it() {
    let d = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("reciprocal_sum_power.json")).unwrap();
    let broken = text.replace("\"realizations\": 100,", "");
    assert_ne!(broken, text);
    let path = d.path().join("broken.json");
    fs::write(&path, broken).unwrap();
    let o = run(&["region", &path.to_string_lossy(), "--out", &d.path().to_string_lossy()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("realizations"), "{}", stderr(&o));
}

#[test]
fn bad_values_exit_2() {
    let sc = scenario_path("reciprocal_sum_power.json");
    assert_eq!(code(&run(&["region", &sc, "--grid-step", "0"])), 2);
    assert_eq!(code(&run(&["region", &sc, "--realizations", "many"])), 2);
    assert_eq!(code(&run(&["region", "/nonexistent/scenario.json"])), 2);
    let d = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("reciprocal_sum_power.json")).unwrap();
    let path = d.path().join("v2.json");
    fs::write(&path, text.replace("\"schema_version\": 1", "\"schema_version\": 2")).unwrap();
    let o = run(&["region", &path.to_string_lossy()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema_version"));
}

fn solve_json(args: &[&str]) -> serde_json::Value {
    let mut all = vec!["solve"];
    all.extend_from_slice(args);
    all.push("--json");
    let o = run(&all);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

fn weights_of(v: &serde_json::Value) -> Beamformer {
    let w = v["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| Complex64::new(r["re"].as_f64().unwrap(), r["im"].as_f64().unwrap()))
        .collect();
    Beamformer::new(w).unwrap()
}

#[test]
fn solve_reciprocal_prints_broadcast_values() {
    let sc = scenario_path("reciprocal_sum_power.json");
    let o = run(&["solve", &sc, "--mu", "0.5"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("xi_over_norm") && text.contains("within budget: yes"), "{text}");

    let v = solve_json(&[&sc, "--mu", "0.5", "--realization-seed", "11"]);
    assert_eq!(v["broadcast"]["mu"].as_f64(), Some(0.5));
    assert!(v["broadcast"]["xi_over_norm"].as_f64().unwrap() > 0.0);
    assert!((v["total_power"].as_f64().unwrap() - 10.0).abs() < 1e-9);

    let ind = scenario_path("reciprocal_individual_power.json");
    let v = solve_json(&[&ind, "--mu", "0.3"]);
    assert!(v["broadcast"]["lambda_kstar"].as_f64().is_some());
    for (row, cap) in v["weights"].as_array().unwrap().iter().zip([2.5, 3.0, 0.5, 1.0, 3.0]) {
        assert!(row["power"].as_f64().unwrap() <= cap * (1.0 + 1e-9));
    }
}

#[test]
fn solve_nonreciprocal_meets_the_rate_profile() {
    let path = scenarios().join("nonreciprocal_sum_power.json");
    let v = solve_json(&[&path.to_string_lossy(), "--kappa", "0.5", "--realization-seed", "3"]);
    let sc = Scenario::from_path(&path).unwrap();
    let ch = sample_channels(&sc.channel_spec(), 3, 0).unwrap();
    let sp = sc.system_params().unwrap();
    let r = rate_pair(&ch, &sp, &weights_of(&v)).unwrap();
    assert!((r.r1 - v["r1"].as_f64().unwrap()).abs() < 1e-9);
    assert!((r.r2 - v["r2"].as_f64().unwrap()).abs() < 1e-9);
    let r_sum = v["relaxation"]["r_sum"].as_f64().unwrap();
    assert!(r.r1.min(r.r2) / 0.5 >= r_sum - 1e-4);
    assert!(v["within_budget"].as_bool().unwrap());
}

#[test]
fn solve_flag_mismatch_exits_2() {
    let rec = scenario_path("reciprocal_sum_power.json");
    let non = scenario_path("nonreciprocal_sum_power.json");
    assert_eq!(code(&run(&["solve", &rec, "--kappa", "0.5"])), 2);
    assert_eq!(code(&run(&["solve", &non, "--mu", "0.5"])), 2);
    assert_eq!(code(&run(&["solve", &rec])), 2);
    assert_eq!(code(&run(&["solve", &rec, "--mu", "0.5", "--kappa", "0.5"])), 2);
    assert_eq!(code(&run(&["solve", &rec, "--mu", "1.5"])), 2);
}

#[test]
fn validate_suites() {
    assert_eq!(code(&run(&["validate", "bogus"])), 2);
    let d = tempfile::tempdir().unwrap();
    let o = run(&["validate", "region", "--seed", "3", "--out", &d.path().to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("validate_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);

    let o = run(&["validate", "sdp", "--out", &d.path().to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let o = run(&["validate", "recip", "--out", &d.path().to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("sweep_contains_random_beamformers"));
}
