//! Acceptance criteria, one test per criterion.
//!
//! Every test prints a single `criterion N: PASS|FAIL` line with the measured
//! values next to the pinned thresholds, then asserts. The figure criteria
//! (6 to 8) quantify qualitative features; their thresholds are our reading
//! of the stated behaviour and are pinned here as such.
//!
//! Tests hold a common lock so that runtimes are measured on an otherwise
//! idle process.

use cavity_qsd::coeffs::{solve_master_coeffs_ft, solve_zero_t, solve_zero_t_ou_fast, MasterFtOptions, ZeroTOptions};
use cavity_qsd::grid::TimeGrid;
use cavity_qsd::hilbert::{cat_ket, cat_vector, coherent_vector, partial_trace, HilbertSpec, Ket, Rho};
use cavity_qsd::linalg::{max_abs_diff, trace_distance, CMat, C64, ONE, ZERO};
use cavity_qsd::model::{matched_markov_rate, BathSpec, Boundary, CavityChainModel, CorrelationKernel};
use cavity_qsd::observables::{
    cat_fidelity, cavity_cat_fidelity, cavity_wigner, mode_occupations, negativity, wigner_point, PhaseSpaceGrid,
};
use cavity_qsd::propagators::{propagate_finite_t, propagate_lindblad, propagate_zero_t, PropagateOptions, RhoSeries};
use cavity_qsd::qsd::{run_ensemble, EnsembleOptions, NoiseSource, ZeroTQsd};
use cavity_qsd::scenario::{builtin, resolve, run_scenario, ResolvedScenario, RunOutcome, BUILTIN_NAMES};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

// criterion 1
const TRACE_TOL: f64 = 1e-8;
const HERMITICITY_TOL: f64 = 1e-10;
const MIN_EIGENVALUE: f64 = -1e-6;
// criterion 2
const T0_RHO_TOL: f64 = 1e-6;
// criterion 3
const BACKEND_TOL: f64 = 1e-6;
// criterion 4
const QSD_TRACE_DISTANCE: f64 = 0.05;
const QSD_N_TRAJ: usize = 2000;
const QSD_BLOCK: usize = 500;
const QSD_MAX_TRAJ: usize = 8000;
const QSD_SLOPE: (f64, f64) = (-0.5, 0.15);
const QSD_SEED: u64 = 0;
// criterion 5
const MARKOV_GAMMA: f64 = 40.0;
const MARKOV_TRACE_DISTANCE: f64 = 0.03;
// criterion 6
const TRANSFER_FIDELITY: f64 = 0.8;
const TRANSFER_WIGNER_MIN: f64 = -0.01;
const MARKOV_TRANSFER_CEILING: f64 = 0.5;
// criterion 7
const OBC_PEAK_FIDELITY: f64 = 0.9;
const OBC_PEAK_WINDOW: (f64, f64) = (1.8, 2.6);
const PBC_REVIVAL_WINDOW: (f64, f64) = (1.7, 2.3);
// criterion 8
const BELL_NEGATIVITY: f64 = 0.5;
const NEGATIVITY_PEAK_WINDOW: (f64, f64) = (1.8, 2.6);
const SEPARABLE_BELOW: f64 = 0.1;
// criterion 9
const PSEUDOMODE_REL_TOL: f64 = 0.05;
// criterion 10
const ORACLE_TOL: f64 = 1e-6;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit_s: f64,
    start: Instant,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, limit_s: f64) -> Self {
        Criterion {
            id,
            title,
            limit_s,
            start: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.checks.push((what, ok));
    }

    /// Prints the criterion line straight to stdout (past the harness
    /// capture) and fails the test if any check failed.
    fn finish(mut self) {
        let elapsed = self.start.elapsed().as_secs_f64();
        self.check(
            elapsed < self.limit_s,
            format!("runtime {elapsed:.1} s < {} s", self.limit_s),
        );
        let pass = self.checks.iter().all(|(_, ok)| *ok);
        let mut line = format!(
            "criterion {}: {} {}",
            self.id,
            if pass { "PASS" } else { "FAIL" },
            self.title
        );
        for (what, ok) in &self.checks {
            line.push_str(&format!("\n    [{}] {what}", if *ok { "ok" } else { "FAILED" }));
        }
        line.push('\n');
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        assert!(pass, "{line}");
    }
}

fn ou(gamma: f64) -> CorrelationKernel {
    CorrelationKernel::OrnsteinUhlenbeck { gamma }
}

fn every(dt_sample: f64, dt: f64) -> usize {
    (dt_sample / dt).round() as usize
}

fn opts(sample_every: usize) -> PropagateOptions {
    PropagateOptions {
        sample_every,
        check_positivity: false,
    }
}

fn zero_t_series(r: &ResolvedScenario, sample_every: usize) -> RhoSeries {
    let cgrid = r.grid.refined(2);
    let c = solve_zero_t_ou_fast(&r.model, &BathSpec::zero_t(r.bath.kernel1.clone()), &cgrid).unwrap();
    propagate_zero_t(&r.model, &c, &r.psi0.projector(), &r.grid, opts(sample_every)).unwrap()
}

fn in_window(t: f64, w: (f64, f64)) -> bool {
    t >= w.0 - 1e-9 && t <= w.1 + 1e-9
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

/// Every builtin scenario run once through the scenario runner.
struct BuiltinRuns {
    _dir: tempfile::TempDir,
    runs: HashMap<String, RunOutcome>,
    /// (run name, name of the run whose propagation it reuses)
    shared: Vec<(String, String)>,
}

/// Runs that differ only in their output section (fig3 and fig4 add Wigner
/// snapshots to fig2's dynamics) produce bit-identical ρ(t); they are
/// propagated once.
fn builtin_runs() -> &'static BuiltinRuns {
    static RUNS: OnceLock<BuiltinRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut runs = HashMap::new();
        let mut by_dynamics: HashMap<String, String> = HashMap::new();
        let mut shared = Vec::new();
        for name in BUILTIN_NAMES {
            let cfg = builtin(name).unwrap();
            let mut key = serde_json::to_value(&cfg).unwrap();
            for k in ["name", "output"] {
                key.as_object_mut().unwrap().remove(k);
            }
            let key = key.to_string();
            if let Some(first) = by_dynamics.get(&key) {
                shared.push((name.to_string(), first.clone()));
                continue;
            }
            by_dynamics.insert(key, name.to_string());
            for out in run_scenario(&cfg, &dir.path().join(name)).unwrap() {
                runs.insert(out.name.clone(), out);
            }
        }
        BuiltinRuns { _dir: dir, runs, shared }
    })
}

fn channel(run: &RunOutcome, name: &str) -> Vec<f64> {
    run.observables.channel(name).unwrap_or_else(|| panic!("{} has no {name}", run.name))
}

#[test]
fn criterion_01_structural_invariants() {
    let _g = serial();
    let mut c = Criterion::new(1, "structural invariants of the master-equation propagators", 60.0);
    let b = builtin_runs();
    let mut names: Vec<_> = b.runs.keys().cloned().collect();
    names.sort();
    for name in names {
        let d = b.runs[&name].propagation.expect("master-equation run");
        let ev = d.min_eigenvalue.expect("positivity checked");
        c.check(
            d.max_trace_error < TRACE_TOL && d.max_hermiticity_error < HERMITICITY_TOL && ev >= MIN_EIGENVALUE,
            format!(
                "{name}: |Tr-1| {:.1e} < {TRACE_TOL:.0e}, hermiticity {:.1e} < {HERMITICITY_TOL:.0e}, \
                 min eigenvalue {ev:.2e} >= {MIN_EIGENVALUE:.0e}",
                d.max_trace_error, d.max_hermiticity_error
            ),
        );
    }
    for (name, first) in &b.shared {
        c.check(true, format!("{name}: same dynamics as {first}"));
    }
    c.finish();
}

#[test]
fn criterion_02_zero_temperature_limit_of_the_finite_temperature_pipeline() {
    let _g = serial();
    let mut c = Criterion::new(2, "finite-T pipeline at n=0 reproduces the zero-T pipeline", 300.0);
    let model = CavityChainModel::new(vec![1.0, 1.0], vec![0.5, 0.0], Boundary::Open, vec![ONE, ONE]).unwrap();
    let spec = HilbertSpec::uniform(2, 6).unwrap();
    let grid = TimeGrid::with_step(10.0, 0.01).unwrap();
    let cgrid = grid.refined(2);
    let rho0 = cat_ket(&spec, 0, ONE).unwrap().projector();
    let zt = solve_zero_t_ou_fast(&model, &BathSpec::zero_t(ou(0.2)), &cgrid).unwrap();
    let ft = solve_master_coeffs_ft(
        &model,
        &BathSpec::finite_t(ou(0.2), 0.0),
        &cgrid,
        10.0,
        MasterFtOptions::default(),
    )
    .unwrap();
    let a = propagate_zero_t(&model, &zt, &rho0, &grid, opts(10)).unwrap();
    let b = propagate_finite_t(&model, &ft, &rho0, &grid, opts(10)).unwrap();
    let dev = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| max_abs_diff(x, y))
        .fold(0.0, f64::max);
    c.check(
        dev < T0_RHO_TOL,
        format!("N=2, d=6, gamma=0.2, t in [0,10]: max |rho_ft - rho_zt| {dev:.2e} < {T0_RHO_TOL:.0e}"),
    );
    c.finish();
}

#[test]
fn criterion_03_ou_fast_path_matches_volterra() {
    let _g = serial();
    let mut c = Criterion::new(3, "OU closed-ODE coefficients match the Volterra solver", 60.0);
    for name in ["fig1", "fig2_obc", "fig2_pbc"] {
        let r = resolve(&builtin(name).unwrap()).unwrap();
        let cgrid = r.grid.refined(2);
        let bath = BathSpec::zero_t(r.bath.kernel1.clone());
        let fast = solve_zero_t_ou_fast(&r.model, &bath, &cgrid).unwrap();
        let volterra = solve_zero_t(&r.model, &bath, &cgrid, ZeroTOptions::default()).unwrap();
        let dev = fast
            .memory_nodes()
            .iter()
            .zip(volterra.memory_nodes())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        c.check(
            dev < BACKEND_TOL,
            format!("{name}: max |dP_i| {dev:.2e} < {BACKEND_TOL:.0e} over {} nodes", cgrid.n_points()),
        );
    }
    c.finish();
}

/// Least-squares slope of ln y against ln x.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn criterion_04_qsd_ensemble_matches_the_master_equation() {
    let _g = serial();
    let mut c = Criterion::new(4, "zero-T QSD ensemble vs master equation on the fig1 set", 900.0);
    let me = resolve(&builtin("fig1").unwrap()).unwrap();
    let reference = zero_t_series(&me, every(0.1, me.grid.dt()));

    // trajectories on dt = 0.02, sampled every 0.1
    let grid = TimeGrid::with_step(me.grid.t_max(), 0.02).unwrap();
    let sample_every = every(0.1, grid.dt());
    let cgrid = grid.refined(2);
    let bath = BathSpec::zero_t(me.bath.kernel1.clone());
    let coeffs = solve_zero_t_ou_fast(&me.model, &bath, &cgrid).unwrap();
    let engine = ZeroTQsd::new(&me.model, &me.spec, &coeffs).unwrap();
    let noise = NoiseSource::new(&bath, &cgrid).unwrap();

    // disjoint blocks of 500 trajectories; the first four make up the
    // seed-pinned 2000-trajectory ensemble
    let coarse = 5; // scaling fit on every 0.5
    let mut blocks: Vec<Vec<CMat>> = Vec::new();
    let mut first: Option<Vec<CMat>> = None;
    for g in 0..QSD_MAX_TRAJ / QSD_BLOCK {
        let o = EnsembleOptions {
            n_traj: QSD_BLOCK,
            seed: QSD_SEED,
            sample_every,
            ..EnsembleOptions::default()
        };
        let offset = (g * QSD_BLOCK) as u64;
        let res = run_ensemble(&me.spec, &o, |i| {
            engine.run(&noise.path(QSD_SEED, offset + i), &me.psi0, &grid, sample_every)
        })
        .unwrap();
        assert_eq!(res.mean.len(), reference.states.len());
        if (g + 1) * QSD_BLOCK <= QSD_N_TRAJ {
            let w = 1.0 / (QSD_N_TRAJ / QSD_BLOCK) as f64;
            let acc = first.get_or_insert_with(|| vec![CMat::zeros(me.spec.dim(), me.spec.dim()); res.mean.len()]);
            for (a, m) in acc.iter_mut().zip(&res.mean) {
                *a += m * C64::new(w, 0.0);
            }
        }
        blocks.push(res.mean.into_iter().step_by(coarse).collect());
    }

    let first = first.unwrap();
    let worst = first
        .iter()
        .zip(&reference.states)
        .zip(&reference.times)
        .map(|((q, m), &t)| (trace_distance(q, m), t))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    c.check(
        worst.0 < QSD_TRACE_DISTANCE,
        format!(
            "{QSD_N_TRAJ} trajectories (seed {QSD_SEED}): max trace distance {:.4} at t={:.1} < {QSD_TRACE_DISTANCE} over {} times",
            worst.0,
            worst.1,
            first.len()
        ),
    );

    // mean over disjoint groups of the time-averaged trace distance, t > 0
    let coarse_ref: Vec<&CMat> = reference.states.iter().step_by(coarse).collect();
    let mut points = Vec::new();
    let mut group = 1;
    while group <= blocks.len() {
        let mut errs = Vec::new();
        for chunk in blocks.chunks(group) {
            let mut e = 0.0;
            for k in 1..coarse_ref.len() {
                let mut mean = CMat::zeros(me.spec.dim(), me.spec.dim());
                for b in chunk {
                    mean += &b[k];
                }
                mean /= C64::new(group as f64, 0.0);
                e += trace_distance(&mean, coarse_ref[k]);
            }
            errs.push(e / (coarse_ref.len() - 1) as f64);
        }
        let n = group * QSD_BLOCK;
        let avg = errs.iter().sum::<f64>() / errs.len() as f64;
        points.push((n as f64, avg));
        group *= 2;
    }
    let slope = log_slope(&points);
    let desc: Vec<String> = points.iter().map(|(n, e)| format!("{n}:{e:.4}")).collect();
    c.check(
        (slope - QSD_SLOPE.0).abs() <= QSD_SLOPE.1,
        format!(
            "Monte-Carlo scaling slope {slope:.3} within {} +- {} (n:error {})",
            QSD_SLOPE.0,
            QSD_SLOPE.1,
            desc.join(" ")
        ),
    );
    c.finish();
}

/// fig1 model and cat state with the OU rate replaced, t in [0, 10].
fn fig1_short(gamma: f64) -> ResolvedScenario {
    let mut cfg = builtin("fig1").unwrap();
    cfg.bath.kernel = cavity_qsd::scenario::KernelConfig::Ou { gamma };
    cfg.run.t_max = 10.0;
    cfg.output.wigner_times.clear();
    resolve(&cfg).unwrap()
}

#[test]
fn criterion_05_markov_limit() {
    let _g = serial();
    let mut c = Criterion::new(5, "strong-damping OU master equation approaches Lindblad", 120.0);
    let r = fig1_short(MARKOV_GAMMA);
    let rate = matched_markov_rate(&r.bath.kernel1);
    let s = every(0.1, r.grid.dt());
    let exact = zero_t_series(&r, s);
    let lindblad = propagate_lindblad(&r.model, rate, 0.0, &r.psi0.projector(), &r.grid, opts(s)).unwrap();
    let d = exact
        .states
        .iter()
        .zip(&lindblad.states)
        .map(|(a, b)| trace_distance(a, b))
        .fold(0.0, f64::max);
    c.check(
        d < MARKOV_TRACE_DISTANCE,
        format!("gamma={MARKOV_GAMMA}, matched rate {rate}: max trace distance {d:.4} < {MARKOV_TRACE_DISTANCE} on [0,10]"),
    );
    c.finish();
}

/// Largest cavity-2 cat fidelity for ωt in (5, 35) and the state there.
fn cavity2_peak(series: &RhoSeries) -> (f64, f64, Rho) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0);
    for (k, &t) in series.times.iter().enumerate() {
        if t <= 5.0 || t >= 35.0 {
            continue;
        }
        let f = cavity_cat_fidelity(&series.rho(k), 1, ONE).unwrap().fidelity;
        if f > best.0 {
            best = (f, t, k);
        }
    }
    (best.0, best.1, series.rho(best.2))
}

#[test]
fn criterion_06_memory_assisted_cat_transfer() {
    let _g = serial();
    let mut c = Criterion::new(6, "memory-assisted cat transfer between uncoupled cavities", 300.0);
    let r = resolve(&builtin("fig1").unwrap()).unwrap();
    let s = every(0.1, r.grid.dt());
    let exact = zero_t_series(&r, s);
    let (f, t, rho) = cavity2_peak(&exact);
    let w = cavity_wigner(&rho, 1, &PhaseSpaceGrid::default()).unwrap();
    let n0 = mode_occupations(&exact.rho(0)).unwrap()[0];
    let n_peak = mode_occupations(&rho).unwrap()[0];
    c.check(
        f > TRANSFER_FIDELITY,
        format!("cavity-2 fidelity peak {f:.4} at t={t:.1} > {TRANSFER_FIDELITY} (cavity-1 occupation {n0:.3} -> {n_peak:.3})"),
    );
    c.check(
        w.min() < TRANSFER_WIGNER_MIN,
        format!("cavity-2 Wigner minimum at t={t:.1}: {:.4} < {TRANSFER_WIGNER_MIN}", w.min()),
    );
    let rate = matched_markov_rate(&r.bath.kernel1);
    let markov = propagate_lindblad(&r.model, rate, 0.0, &r.psi0.projector(), &r.grid, opts(s)).unwrap();
    let (fm, tm, _) = cavity2_peak(&markov);
    c.check(
        fm < MARKOV_TRANSFER_CEILING,
        format!("Lindblad (rate {rate}) cavity-2 fidelity peak {fm:.4} at t={tm:.1} < {MARKOV_TRANSFER_CEILING}"),
    );
    c.finish();
}

#[test]
fn criterion_07_three_cavity_transfer_and_revival() {
    let _g = serial();
    let mut c = Criterion::new(7, "three-cavity cat transfer (open) and revival (ring)", 600.0);
    let b = builtin_runs();

    let obc = &b.runs["fig2_obc"];
    let t = &obc.observables.times;
    let f2 = channel(obc, "fidelity_2");
    let f3 = channel(obc, "fidelity_3");
    let k = argmax(&f3);
    c.check(
        f3[k] >= OBC_PEAK_FIDELITY && in_window(t[k], OBC_PEAK_WINDOW),
        format!(
            "open: cavity-3 fidelity peak {:.4} >= {OBC_PEAK_FIDELITY} at t={:.2} in {OBC_PEAK_WINDOW:?}",
            f3[k], t[k]
        ),
    );
    let m2 = f2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    c.check(m2 < f3[k], format!("open: cavity-2 fidelity max {m2:.4} < {:.4}", f3[k]));

    let pbc = &b.runs["fig2_pbc"];
    let t = &pbc.observables.times;
    let f1 = channel(pbc, "fidelity_1");
    let revival = (1..t.len() - 1)
        .filter(|&k| f1[k] > f1[k - 1] && f1[k] >= f1[k + 1] && in_window(t[k], PBC_REVIVAL_WINDOW))
        .max_by(|&a, &b| f1[a].total_cmp(&f1[b]));
    match revival {
        Some(k) => {
            c.check(
                true,
                format!("ring: cavity-1 fidelity local maximum {:.4} at t={:.2} in {PBC_REVIVAL_WINDOW:?}", f1[k], t[k]),
            );
            for ch in ["fidelity_2", "fidelity_3"] {
                let m = channel(pbc, ch).into_iter().fold(f64::NEG_INFINITY, f64::max);
                c.check(m <= f1[k], format!("ring: {ch} max {m:.4} <= revival {:.4}", f1[k]));
            }
        }
        None => c.check(false, format!("ring: no cavity-1 fidelity local maximum in {PBC_REVIVAL_WINDOW:?}")),
    }
    c.finish();
}

#[test]
fn criterion_08_entanglement_transfer() {
    let _g = serial();
    let mut c = Criterion::new(8, "entanglement transfer along the chain", 600.0);
    let b = builtin_runs();
    let obc = &b.runs["fig5_obc"];
    let n12 = channel(obc, "negativity_1_2");
    let n13 = channel(obc, "negativity_1_3");
    let n23 = channel(obc, "negativity_2_3");
    let t = &obc.observables.times;
    c.check(
        (n12[0] - BELL_NEGATIVITY).abs() < ORACLE_TOL,
        format!("negativity(1,2) at t=0: {:.9} = {BELL_NEGATIVITY}", n12[0]),
    );
    let k = argmax(&n23);
    c.check(
        in_window(t[k], NEGATIVITY_PEAK_WINDOW),
        format!("open: negativity(2,3) global maximum {:.4} at t={:.2} in {NEGATIVITY_PEAK_WINDOW:?}", n23[k], t[k]),
    );
    c.check(
        n12[k] < SEPARABLE_BELOW && n13[k] < SEPARABLE_BELOW,
        format!(
            "open: at that time negativity(1,2) {:.4} and negativity(1,3) {:.4} < {SEPARABLE_BELOW}",
            n12[k], n13[k]
        ),
    );
    let pbc_max = channel(&b.runs["fig5_pbc"], "negativity_2_3")
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    c.check(
        pbc_max < n23[k],
        format!("ring: negativity(2,3) max {pbc_max:.4} < open max {:.4}", n23[k]),
    );
    c.finish();
}

#[test]
fn criterion_09_pseudomode_equivalence() {
    let _g = serial();
    let mut c = Criterion::new(9, "pseudomode Lindblad model reproduces the OU cavity", 120.0);
    // pseudomode at zero frequency (the OU kernel is real), damped at rate
    // gamma_pm and coupled by hopping lam; the matching OU bath has
    // gamma = gamma_pm / 2 and coupling l = 2 lam / sqrt(gamma_pm), so that
    // l^2 gamma / 2 = lam^2
    let (gamma_pm, lam) = (1.0, 0.5);
    let grid = TimeGrid::with_step(10.0, 0.01).unwrap();
    let d = 10;

    let two = CavityChainModel::new(vec![1.0, 0.0], vec![lam, 0.0], Boundary::Open, vec![ZERO, ONE]).unwrap();
    let spec2 = HilbertSpec::new(vec![d, d]).unwrap();
    let psi2 = Ket::product(&spec2, &[cat_vector(d, ONE).unwrap().0, coherent_vector(d, ZERO).unwrap()]).unwrap();
    let a = propagate_lindblad(&two, gamma_pm, 0.0, &psi2.projector(), &grid, opts(10)).unwrap();

    let l = 2.0 * lam / gamma_pm.sqrt();
    let one = CavityChainModel::new(vec![1.0], vec![0.0], Boundary::Open, vec![C64::new(l, 0.0)]).unwrap();
    let spec1 = HilbertSpec::uniform(1, d).unwrap();
    let bath = BathSpec::zero_t(ou(gamma_pm / 2.0));
    let coeffs = solve_zero_t_ou_fast(&one, &bath, &grid.refined(2)).unwrap();
    let psi1 = cat_ket(&spec1, 0, ONE).unwrap();
    let b = propagate_zero_t(&one, &coeffs, &psi1.projector(), &grid, opts(10)).unwrap();

    let mut worst = (0.0, 0.0);
    for k in 0..a.states.len() {
        let na = mode_occupations(&partial_trace(&a.rho(k), &[0]).unwrap()).unwrap()[0];
        let nb = mode_occupations(&b.rho(k)).unwrap()[0];
        let rel = (na - nb).abs() / nb;
        if rel > worst.0 {
            worst = (rel, a.times[k]);
        }
    }
    c.check(
        worst.0 < PSEUDOMODE_REL_TOL,
        format!(
            "pseudomode rate {gamma_pm}, hopping {lam} vs OU gamma {}, l {l}: max relative occupation error {:.2e} (t={:.1}) < {PSEUDOMODE_REL_TOL}",
            gamma_pm / 2.0,
            worst.0,
            worst.1
        ),
    );
    c.finish();
}

#[test]
fn criterion_10_observable_oracles() {
    let _g = serial();
    let mut c = Criterion::new(10, "observables against closed forms", 60.0);
    let e = std::f64::consts::E;
    let d = 40;
    let spec = HilbertSpec::uniform(1, d).unwrap();

    let z = cat_vector(d, ONE).unwrap().1;
    let z_exact = 2.0 * (1.0 + e.powi(-2));
    c.check((z - z_exact).abs() < ORACLE_TOL, format!("cat normalization {z:.9} vs 2(1+e^-2) = {z_exact:.9}"));

    let vac = Ket::vacuum(&spec).projector();
    let f = cat_fidelity(&vac, ONE).unwrap().fidelity;
    let f_exact = 2.0 / e / (1.0 + e.powi(-2));
    c.check((f - f_exact).abs() < ORACLE_TOL, format!("vacuum-cat fidelity {f:.9} vs 2e^-1/(1+e^-2) = {f_exact:.9}"));

    let n = mode_occupations(&cat_ket(&spec, 0, ONE).unwrap().projector()).unwrap()[0];
    let n_exact = 1f64.tanh();
    c.check((n - n_exact).abs() < ORACLE_TOL, format!("even-cat photon number {n:.9} vs tanh 1 = {n_exact:.9}"));

    let spec2 = HilbertSpec::uniform(2, 2).unwrap();
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let bell = Ket::fock_superposition(&spec2, &[(vec![0, 1], h), (vec![1, 0], h)]).unwrap().projector();
    let neg = negativity(&bell, &[0], &[1]).unwrap();
    c.check((neg - 0.5).abs() < ORACLE_TOL, format!("Bell-state negativity {neg:.9} vs 1/2"));

    let w0 = wigner_point(vac.matrix(), ZERO);
    let w_exact = 2.0 / std::f64::consts::PI;
    c.check((w0 - w_exact).abs() < ORACLE_TOL, format!("vacuum Wigner peak {w0:.9} vs 2/pi = {w_exact:.9}"));
    c.finish();
}
