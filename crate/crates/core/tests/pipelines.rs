//! End-to-end agreement between independent routes through the library.

use cavity_qsd::scenario::{
    builtin, compare_runs, run_scenario, CompareMetric, ComplexValue, InitialState, KernelConfig, Method,
    ScenarioConfig, Truncation,
};
use std::path::Path;

/// Two resonant cavities, a weak cat in cavity 1, four time units.
fn base() -> ScenarioConfig {
    let mut cfg = builtin("fig1").unwrap();
    cfg.name = "pipeline".into();
    cfg.model.lambdas = vec![0.3, 0.0];
    cfg.bath.kernel = KernelConfig::Ou { gamma: 0.2 };
    cfg.initial_state = InitialState::CatVacuum {
        alpha: ComplexValue::real(0.7),
        cavity: 1,
    };
    cfg.truncation = Truncation::Uniform(5);
    cfg.run.t_max = 4.0;
    cfg.run.dt = 0.02;
    cfg.output.sample_dt = Some(0.2);
    cfg.output.wigner_times.clear();
    cfg.output.rho_every = Some(0.2);
    cfg.output.channels.purity = false;
    cfg
}

fn run(cfg: &ScenarioConfig, dir: &Path) -> std::path::PathBuf {
    run_scenario(cfg, dir).unwrap().remove(0).directory
}

fn max_trace_distance(a: &Path, b: &Path) -> f64 {
    compare_runs(a, b, CompareMetric::TraceDistance).unwrap().max_trace_distance()
}

#[test]
fn finite_temperature_trajectories_match_the_master_equation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut me = base();
    me.run.method = Method::MasterFiniteT;
    me.bath.nbar = Some(0.3);
    let mut qsd = me.clone();
    qsd.run.method = Method::Qsd;
    qsd.run.n_traj = Some(500);
    qsd.run.seed = 11;
    let a = run(&me, &tmp.path().join("me"));
    let b = run(&qsd, &tmp.path().join("qsd"));
    let d = max_trace_distance(&a, &b);
    // 500 trajectories: statistical error of a few percent
    assert!(d < 0.08, "finite-T qsd vs master: {d}");
}

#[test]
fn zero_temperature_trajectories_match_the_master_equation() {
    let tmp = tempfile::tempdir().unwrap();
    let me = base();
    let mut qsd = me.clone();
    qsd.run.method = Method::Qsd;
    qsd.run.n_traj = Some(500);
    let a = run(&me, &tmp.path().join("me"));
    let b = run(&qsd, &tmp.path().join("qsd"));
    let d = max_trace_distance(&a, &b);
    assert!(d < 0.06, "zero-T qsd vs master: {d}");
}

#[test]
fn weak_occupation_moves_the_state_continuously() {
    // n̄ → 0 must degrade to the zero-temperature result
    let tmp = tempfile::tempdir().unwrap();
    let zero = run(&base(), &tmp.path().join("zero"));
    let mut last = f64::INFINITY;
    for (i, nbar) in [1e-2, 1e-3, 1e-4].into_iter().enumerate() {
        let mut cfg = base();
        cfg.run.method = Method::MasterFiniteT;
        cfg.bath.nbar = Some(nbar);
        let dir = run(&cfg, &tmp.path().join(format!("ft{i}")));
        let d = max_trace_distance(&zero, &dir);
        assert!(d < last, "n̄={nbar}: {d} did not shrink from {last}");
        last = d;
    }
    assert!(last < 1e-3, "{last}");
}

#[test]
fn ou_fast_and_volterra_runs_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let mut fast = base();
    fast.run.backend = cavity_qsd::scenario::Backend::OuFast;
    let mut volterra = base();
    volterra.run.backend = cavity_qsd::scenario::Backend::Volterra;
    let a = run(&fast, &tmp.path().join("fast"));
    let b = run(&volterra, &tmp.path().join("volterra"));
    assert!(max_trace_distance(&a, &b) < 1e-6);
}
