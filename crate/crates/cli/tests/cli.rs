use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cavity-qsd"));
    c.env_remove("CAVITY_QSD_OUT").env("RUST_LOG", "error");
    c
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// fig1 cut down to a one-second run.
fn small_config() -> Value {
    let raw = std::fs::read_to_string(configs_dir().join("fig1.json")).unwrap();
    let mut v: Value = serde_json::from_str(&raw).unwrap();
    v["name"] = json!("small");
    v["truncation"] = json!(5);
    v["initial_state"]["alpha"] = json!(0.6);
    v["run"]["t_max"] = json!(1.0);
    v["run"]["dt"] = json!(0.05);
    v["output"]["sample_dt"] = json!(0.1);
    v["output"]["wigner_times"] = json!([0.5]);
    v["output"]["wigner_grid"]["nx"] = json!(11);
    v["output"]["wigner_grid"]["np"] = json!(9);
    v["output"]["rho_every"] = json!(0.5);
    v
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn golden_configs_validate() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), text(&out));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok", "{}", path.display());
    }
}

#[test]
fn validate_reports_the_missing_trajectory_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = small_config();
    v["run"]["method"] = json!("qsd");
    let p = write(tmp.path(), "qsd.json", &v);
    let out = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("run.n_traj"), "{}", text(&out));

    let out = bin().arg("simulate").arg(&p).arg("--out").arg(tmp.path().join("run")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn malformed_and_unknown_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("broken.json");
    std::fs::write(&p, "{\"model\": ").unwrap();
    let out = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let mut v = small_config();
    v["run"]["dt"] = json!("small");
    let p = write(tmp.path(), "typed.json", &v);
    let out = bin().arg("simulate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("run.dt"), "{}", text(&out));

    let out = bin().arg("validate").arg("not_a_builtin").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runaway_memory_iteration_exits_3() {
    // a hot, strongly coupled bath drives the finite-T coefficient fixed point apart
    let tmp = tempfile::tempdir().unwrap();
    let mut v = small_config();
    v["run"]["method"] = json!("master_finite_t");
    v["bath"]["nbar"] = json!(50.0);
    v["bath"]["kernel"]["gamma"] = json!(0.2);
    v["model"]["couplings"] = json!([5.0, 5.0]);
    let p = write(tmp.path(), "hot.json", &v);
    let out = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let out = bin().arg("simulate").arg(&p).arg("--out").arg(tmp.path().join("run")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
    assert!(text(&out).contains("fixed-point"), "{}", text(&out));
}

#[test]
fn simulate_writes_a_run_and_compare_reads_it() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "small.json", &small_config());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = bin().args(["simulate"]).arg(&p).arg("--seed").arg("7").arg("--out").arg(dir).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    }
    for f in ["observables.csv", "rho.csv", "wigner_cavity1_t0.5.csv", "manifest.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(
        std::fs::read(a.join("observables.csv")).unwrap(),
        std::fs::read(b.join("observables.csv")).unwrap()
    );

    for metric in ["trace_distance", "channel"] {
        let out = bin().arg("compare").arg(&a).arg(&b).args(["--metric", metric]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", text(&out));
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        match metric {
            "channel" => assert!(stdout.lines().skip(1).all(|l| l.ends_with(",0e0,0e0")), "{stdout}"),
            _ => assert!(stdout.contains("# max 0e0"), "{stdout}"),
        }
    }
    let out = bin().arg("compare").arg(&a).arg(tmp.path().join("missing")).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "small.json", &small_config());
    let root = tmp.path().join("root");
    let out = bin().arg("simulate").arg(&p).env("CAVITY_QSD_OUT", &root).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(root.join("small/observables.csv").exists());
}

#[test]
fn builtin_listing_matches_the_golden_configs() {
    let out = bin().arg("builtin").output().unwrap();
    let names: Vec<String> = String::from_utf8_lossy(&out.stdout).lines().map(str::to_owned).collect();
    assert_eq!(names.len(), 8);
    for n in &names {
        let out = bin().args(["builtin", n]).output().unwrap();
        let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
        let golden: Value =
            serde_json::from_str(&std::fs::read_to_string(configs_dir().join(format!("{n}.json"))).unwrap()).unwrap();
        assert_eq!(printed, golden, "configs/{n}.json is out of date");
    }
}
