use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use expulsive_cli::run;
use serde_json::Value;

fn exec(args: &[&str], out: &Path) -> i32 {
    let mut argv = vec!["expulsive".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out".into());
    argv.push(out.display().to_string());
    run(argv)
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn solve1d_reproduces_quartic_tail_phase() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let code = exec(&["solve1d", "--gamma", "2", "--g", "0", "--energy", "0", "--parity", "even", "--L", "30"], &out);
    assert_eq!(code, 0);
    let s = summary(&out);
    assert_eq!(s["status"], "ok");
    let chi0 = s["tail_fit"]["chi0"].as_f64().unwrap();
    assert!((chi0 - PI / 6.0).abs() < 0.1, "chi0 = {chi0}");
    assert_eq!(s["problem"]["gamma"], "2.0");
    assert_eq!(s["norm_curve"]["classification"], "convergent");
    let csv = fs::read_to_string(out.join("state.csv")).unwrap();
    assert!(csv.starts_with("x,phi,dphi\n"));
    assert!(!csv.contains('\r'));
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "solve1d");
    assert_eq!(m["config"]["L"], "30");
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "state.csv"));
}

#[test]
fn sub_unit_gamma_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(exec(&["solve1d", "--gamma", "0.5"], &out), 2);
    let s = summary(&out);
    assert_eq!(s["status"], "failed");
    assert_eq!(manifest(&out)["exit_code"], 2);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exec(&["no-such-command"], dir.path()), 2);
    assert_eq!(exec(&["solve1d", "--no-such-flag", "1"], dir.path()), 2);
    assert_eq!(run(["expulsive", "--help"]), 0);
    assert_eq!(exec(&["solve1d", "--gamma", "two"], &dir.path().join("bad")), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = ["solve1d", "--gamma", "1", "--energy", "-0.5", "--L", "12"];
    assert_eq!(exec(&args, &a), 0);
    assert_eq!(exec(&args, &b), 0);
    let manifest_path = a.join("manifest.json").display().to_string();
    assert_eq!(exec(&["solve1d", "--config", &manifest_path], &c), 0);
    let first = fs::read(a.join("state.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("state.csv")).unwrap());
    assert_eq!(first, fs::read(c.join("state.csv")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "gamma = 2\nL = 12\n# comment\nenergy = 1\n").unwrap();
    let out = dir.path().join("run");
    let conf_arg = conf.display().to_string();
    assert_eq!(exec(&["solve1d", "--config", &conf_arg, "--L", "10"], &out), 0);
    let m = manifest(&out);
    assert_eq!(m["config"]["L"], "10");
    assert_eq!(m["config"]["gamma"], "2");
    assert_eq!(m["config"]["energy"], "1");
    assert_eq!(m["config"]["ppw"], "16");
    assert_eq!(m["inputs"][0], conf_arg);

    fs::write(&conf, "gamma = 2\nunknown-key = 3\n").unwrap();
    assert_eq!(exec(&["solve1d", "--config", &conf_arg], &dir.path().join("bad")), 2);
}

#[test]
fn verify_passes_and_records_kappa_finding() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exec(&["verify"], dir.path()), 0);
    let table = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(!table.contains(",fail"));
    let s = summary(dir.path());
    let slope = s["kappa_sweep"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0 / 1f64.exp()).abs() < 1e-6);
    assert_eq!(s["kappa_sweep"]["vanishing_kappa"], 0.0);
}

#[test]
fn exact_objects_tabulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v1");
    assert_eq!(exec(&["exact", "--object", "vortex", "--vorticity", "1"], &out), 0);
    assert_eq!(summary(&out)["norm"], "log-divergent");
    let out = dir.path().join("v2");
    assert_eq!(exec(&["exact", "--object", "vortex", "--vorticity", "2", "--samples", "11"], &out), 0);
    assert!(summary(&out)["norm"].as_f64().unwrap() > 0.0);
    assert_eq!(fs::read_to_string(out.join("table.csv")).unwrap().lines().count(), 12);
    for object in ["vnw", "coupled"] {
        assert_eq!(exec(&["exact", "--object", object, "--r-max", "3"], &dir.path().join(object)), 0);
    }
    let out = dir.path().join("asym");
    assert_eq!(exec(&["exact", "--object", "asymptote", "--gamma", "2", "--r-min", "1"], &out), 0);
    assert_eq!(exec(&["exact", "--object", "nothing"], &dir.path().join("bad")), 2);
}

#[test]
fn fit_tail_reads_a_solved_state() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solved");
    assert_eq!(exec(&["solve1d", "--gamma", "2", "--parity", "odd", "--L", "20"], &solved), 0);
    let state = solved.join("state.csv").display().to_string();
    let out = dir.path().join("fit");
    assert_eq!(exec(&["fit-tail", "--state", &state, "--gamma", "2", "--parity", "odd"], &out), 0);
    let chi0 = summary(&out)["tail_fit"]["chi0"].as_f64().unwrap();
    assert!((chi0 - PI / 3.0).abs() < 0.1, "chi0 = {chi0}");
    assert_eq!(manifest(&out)["inputs"][0], state);
}

#[test]
fn scan_xmax_accepts_log_ladder() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exec(&["scan-xmax", "--gamma", "2", "--energies", "-10000:-100:log:5"], dir.path()), 0);
    let slope = summary(dir.path())["slope"].as_f64().unwrap();
    assert!((slope - 0.25).abs() < 0.03, "{slope}");
    let rows = fs::read_to_string(dir.path().join("xmax.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
}

#[test]
fn evolve_linear_state_keeps_its_profile() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["evolve", "--gamma", "2", "--energy", "1", "--t-end", "1", "--stride", "100"];
    assert_eq!(exec(&args, dir.path()), 0);
    let s = summary(dir.path());
    assert!(s["max_profile_deviation"].as_f64().unwrap() < 1e-3);
    assert!(s["blowup"].is_null());
    assert!(dir.path().join("trajectory.csv").exists());
    assert!(dir.path().join("final.csv").exists());
}

#[test]
fn numerical_failure_exits_one_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    // a single sub-threshold rung cannot bracket the collapse
    assert_eq!(exec(&["collapse-scan", "--amplitudes", "0.1", "--t-end", "2"], dir.path()), 1);
    let s = summary(dir.path());
    assert_eq!(s["status"], "failed");
    assert!(s["error"].as_str().unwrap().contains("no upper bracket"));
    assert_eq!(s["problem"]["sigma"], "2");
}
