//! Executes a scenario and writes its data files.

use super::config::*;
use crate::coeffs::{
    solve_finite_t, solve_master_coeffs_ft, solve_zero_t, solve_zero_t_ou_fast, FiniteTOptions, MasterFtOptions,
    ZeroTCoeffs, ZeroTOptions,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hilbert::{cat_ket, coherent_vector, HilbertSpec, Ket, Rho};
use crate::linalg::CMat;
use crate::model::{BathSpec, Boundary, CavityChainModel, TemperatureMode};
use crate::observables::{cavity_wigner, ObservableSeries, ObservableSpec, PhaseSpaceGrid, WignerGrid};
use crate::propagators::{
    propagate, write_rho_csv, FiniteTGenerator, LindbladGenerator, PropagateOptions, PropagationDiagnostics,
    ZeroTGenerator,
};
use crate::qsd::{qsd_ensemble_finite_t, qsd_ensemble_zero_t, EnsembleOptions, EnsembleResult};
use serde_json::json;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const TOOL_NAME: &str = "cavity-qsd";

/// Library objects built from a validated config.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub model: CavityChainModel,
    pub bath: BathSpec,
    pub spec: HilbertSpec,
    pub psi0: Ket,
    pub grid: TimeGrid,
    pub observables: ObservableSpec,
}

pub fn resolve(cfg: &ScenarioConfig) -> Result<ResolvedScenario> {
    validate(cfg).into_result()?;
    let m = &cfg.model;
    let model = CavityChainModel::new(
        m.omegas.clone(),
        m.lambdas.clone(),
        match m.boundary {
            BoundaryConfig::Open => Boundary::Open,
            BoundaryConfig::Periodic => Boundary::Periodic,
        },
        m.couplings.iter().map(|c| c.0).collect(),
    )
    .map_err(|e| Error::Config(format!("model: {e}")))?;
    let thermal = match cfg.run.method {
        Method::MasterZeroT => None,
        _ => cfg.bath.nbar,
    };
    let bath = BathSpec {
        kernel1: to_kernel(&cfg.bath.kernel),
        kernel2: thermal.and(cfg.bath.kernel2.as_ref().map(to_kernel)),
        temperature: match thermal {
            Some(nbar) => TemperatureMode::Finite { nbar },
            None => TemperatureMode::Zero,
        },
    };
    bath.validate().map_err(|e| Error::Config(format!("bath: {e}")))?;
    let spec = HilbertSpec::new(cfg.truncation.dims(m.n_cavities)).map_err(|e| Error::Config(format!("truncation: {e}")))?;
    let psi0 = initial_ket(&cfg.initial_state, &spec).map_err(|e| Error::Config(format!("initial_state: {e}")))?;
    let grid = TimeGrid::with_step(cfg.run.t_max, cfg.run.dt).map_err(|e| Error::Config(format!("run: {e}")))?;
    let observables = ObservableSpec {
        cat_alpha: cfg.fidelity_alpha(),
        negativity_pairs: cfg
            .output
            .channels
            .negativity_pairs
            .iter()
            .map(|[a, b]| (a - 1, b - 1))
            .collect(),
        occupations: cfg.output.channels.occupations,
        purity: cfg.output.channels.purity,
    };
    Ok(ResolvedScenario {
        model,
        bath,
        spec,
        psi0,
        grid,
        observables,
    })
}

fn initial_ket(state: &InitialState, spec: &HilbertSpec) -> Result<Ket> {
    match state {
        InitialState::CatVacuum { alpha, cavity } => cat_ket(spec, cavity - 1, alpha.0),
        InitialState::Fock { occupations } => Ket::fock(spec, occupations),
        InitialState::FockSuperposition { terms } => Ket::fock_superposition(
            spec,
            &terms.iter().map(|t| (t.occupations.clone(), t.amplitude.0)).collect::<Vec<_>>(),
        ),
        InitialState::Coherent { amplitudes } => {
            let factors = amplitudes
                .iter()
                .zip(spec.dims())
                .map(|(a, &d)| coherent_vector(d, a.0))
                .collect::<Result<Vec<_>>>()?;
            Ket::product(spec, &factors)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSummary {
    /// 1-based.
    pub cavity: usize,
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub integral: f64,
    pub file: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSummary {
    pub n_traj: usize,
    pub min_mean_norm_sqr: f64,
    pub max_mean_norm_sqr: f64,
    pub drift_flagged: bool,
}

/// What one (sub-)run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub directory: PathBuf,
    pub method: Method,
    pub observables: ObservableSeries,
    pub propagation: Option<PropagationDiagnostics>,
    pub ensemble: Option<EnsembleSummary>,
    pub wigner: Vec<WignerSummary>,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub wall_time_seconds: f64,
}

/// Collects everything written at sample times.
struct Recorder<'a> {
    spec: &'a HilbertSpec,
    obs: &'a ObservableSpec,
    dt: f64,
    wigner_steps: BTreeSet<usize>,
    wigner_cavities: Vec<usize>,
    wigner_grid: PhaseSpaceGrid,
    rho_steps: BTreeSet<usize>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rho: Vec<(f64, CMat)>,
    wigners: Vec<(usize, f64, WignerGrid)>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &ScenarioConfig, r: &'a ResolvedScenario) -> Self {
        let dt = cfg.run.dt;
        let steps = |t: f64| grid_index(t, dt).unwrap_or_else(|| r.grid.n_steps());
        let mut rho_steps: BTreeSet<usize> = cfg.output.rho_times.iter().map(|&t| steps(t)).collect();
        if let Some(every) = cfg.output.rho_every {
            let stride = grid_index(every, dt).unwrap_or(1).max(1);
            rho_steps.extend((0..=r.grid.n_steps()).step_by(stride));
        }
        let g = &cfg.output.wigner_grid;
        Recorder {
            spec: &r.spec,
            obs: &r.observables,
            dt,
            wigner_steps: cfg.output.wigner_times.iter().map(|&t| steps(t)).collect(),
            wigner_cavities: cfg
                .output
                .wigner_cavities
                .clone()
                .unwrap_or_else(|| (1..=cfg.model.n_cavities).collect()),
            wigner_grid: PhaseSpaceGrid {
                x_range: (g.x_min, g.x_max),
                p_range: (g.p_min, g.p_max),
                nx: g.nx,
                np: g.np,
            },
            rho_steps,
            times: Vec::new(),
            rows: Vec::new(),
            rho: Vec::new(),
            wigners: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, m: &CMat) -> Result<()> {
        let step = grid_index(t, self.dt).unwrap_or(usize::MAX);
        let rho = Rho::new(self.spec.clone(), m.clone())?;
        self.times.push(t);
        self.rows.push(self.obs.evaluate(&rho)?);
        if self.wigner_steps.contains(&step) {
            for &c in &self.wigner_cavities {
                self.wigners.push((c, t, cavity_wigner(&rho, c - 1, &self.wigner_grid)?));
            }
        }
        if self.rho_steps.contains(&step) {
            self.rho.push((t, m.clone()));
        }
        Ok(())
    }
}

enum Numerics {
    Propagation(PropagationDiagnostics),
    Ensemble(EnsembleResult),
}

fn zero_t_coeffs(cfg: &ScenarioConfig, r: &ResolvedScenario, cgrid: &TimeGrid) -> Result<ZeroTCoeffs> {
    let zt_bath = BathSpec::zero_t(r.bath.kernel1.clone());
    let fast = match cfg.run.backend {
        Backend::OuFast => true,
        Backend::Volterra => false,
        Backend::Auto => zt_bath.alpha1().exp_terms().is_some(),
    };
    if fast {
        solve_zero_t_ou_fast(&r.model, &zt_bath, cgrid)
    } else {
        solve_zero_t(&r.model, &zt_bath, cgrid, ZeroTOptions::default())
    }
    .map_err(|e| e.context("zero-temperature memory coefficients"))
}

fn simulate(cfg: &ScenarioConfig, r: &ResolvedScenario, dir: &Path, rec: &mut Recorder, files: &mut Vec<String>) -> Result<Numerics> {
    let sample_every = grid_index(cfg.sample_dt(), cfg.run.dt).unwrap_or(1).max(1);
    let opts = PropagateOptions {
        sample_every,
        check_positivity: cfg.run.check_positivity,
    };
    let rho0 = r.psi0.projector();
    let cgrid = r.grid.refined(2);
    let write_coeffs = |files: &mut Vec<String>, save: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        if cfg.output.coefficients {
            save(&dir.join("coefficients.csv"))?;
            files.push("coefficients.csv".into());
        }
        Ok(())
    };
    let diag = match cfg.run.method {
        Method::MasterZeroT => {
            let coeffs = zero_t_coeffs(cfg, r, &cgrid)?;
            write_coeffs(files, &|p| coeffs.save_csv(p))?;
            let generator = ZeroTGenerator::new(&r.model, &r.spec, &coeffs)?;
            propagate(&generator, &rho0, &r.grid, opts, |_, t, m| rec.record(t, m))
        }
        Method::MasterFiniteT => {
            let coeffs = solve_master_coeffs_ft(&r.model, &r.bath, &cgrid, r.grid.t_max(), MasterFtOptions::default())
                .map_err(|e| e.context("finite-temperature master coefficients"))?;
            write_coeffs(files, &|p| coeffs.save_csv(p))?;
            let generator = FiniteTGenerator::new(&r.model, &r.spec, &coeffs)?;
            propagate(&generator, &rho0, &r.grid, opts, |_, t, m| rec.record(t, m))
        }
        Method::Lindblad => {
            let rate = cfg.run.markov_rate.unwrap_or_else(|| default_markov_rate(&cfg.bath.kernel));
            let generator = LindbladGenerator::new(&r.model, &r.spec, rate, r.bath.nbar())?;
            propagate(&generator, &rho0, &r.grid, opts, |_, t, m| rec.record(t, m))
        }
        Method::Qsd => {
            let ens_opts = EnsembleOptions {
                n_traj: cfg.run.n_traj.unwrap_or(1),
                seed: cfg.run.seed,
                batch_size: cfg.run.batch_size.unwrap_or(EnsembleOptions::default().batch_size),
                checkpoints: Vec::new(),
                sample_every,
                keep_norms: cfg.output.norms,
            };
            let ens = if r.bath.alpha2().is_some() {
                let coeffs = solve_finite_t(&r.model, &r.bath, &cgrid, FiniteTOptions::default())
                    .map_err(|e| e.context("finite-temperature QSD coefficients"))?;
                write_coeffs(files, &|p| coeffs.save_csv(p))?;
                qsd_ensemble_finite_t(&r.model, &r.bath, &coeffs, &r.psi0, &r.grid, &ens_opts)
            } else {
                let coeffs = zero_t_coeffs(cfg, r, &cgrid)?;
                write_coeffs(files, &|p| coeffs.save_csv(p))?;
                qsd_ensemble_zero_t(&r.model, &r.bath, &coeffs, &r.psi0, &r.grid, &ens_opts)
            }
            .map_err(|e| e.context("trajectory ensemble"))?;
            for (t, m) in ens.times.iter().zip(&ens.mean) {
                rec.record(*t, m)?;
            }
            if cfg.output.norms {
                ens.write_norms_csv(std::fs::File::create(dir.join("norms.csv"))?)?;
                files.push("norms.csv".into());
            }
            return Ok(Numerics::Ensemble(ens));
        }
    };
    Ok(Numerics::Propagation(diag.map_err(|e| e.context("propagation"))?))
}

fn time_label(t: f64) -> String {
    let s = format!("{t}");
    s.replace('-', "m")
}

fn run_single(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let warnings: Vec<String> = validate(cfg).into_result()?.iter().map(|w| w.to_string()).collect();
    let resolved = resolve(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let mut files = Vec::new();
    let mut rec = Recorder::new(cfg, &resolved);
    let numerics = simulate(cfg, &resolved, dir, &mut rec, &mut files)?;

    let observables = ObservableSeries {
        times: rec.times,
        names: resolved.observables.channel_names(resolved.spec.n_cavities()),
        rows: rec.rows,
    };
    observables.save_csv(&dir.join("observables.csv"))?;
    files.push("observables.csv".into());

    if !rec.rho.is_empty() {
        write_rho_csv(
            std::fs::File::create(dir.join("rho.csv"))?,
            &resolved.spec,
            rec.rho.iter().map(|(t, m)| (*t, m)),
            None,
        )?;
        files.push("rho.csv".into());
    }

    let mut wigner = Vec::new();
    for (c, t, w) in &rec.wigners {
        let file = format!("wigner_cavity{c}_t{}.csv", time_label(*t));
        w.save_csv(&dir.join(&file), *t)?;
        wigner.push(WignerSummary {
            cavity: *c,
            t: *t,
            min: w.min(),
            max: w.max(),
            integral: w.integral(),
            file: file.clone(),
        });
        files.push(file);
    }

    let (propagation, ensemble) = match numerics {
        Numerics::Propagation(d) => (Some(d), None),
        Numerics::Ensemble(e) => {
            let lo = e.mean_norm_sqr.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = e.mean_norm_sqr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                None,
                Some(EnsembleSummary {
                    n_traj: e.n_traj,
                    min_mean_norm_sqr: lo,
                    max_mean_norm_sqr: hi,
                    drift_flagged: e.norm_drift_flagged(),
                }),
            )
        }
    };
    let mut warnings = warnings;
    if let Some(d) = &propagation {
        if d.min_eigenvalue.is_some_and(|ev| ev < crate::propagators::POSITIVITY_WARN) {
            warnings.push(format!(
                "smallest eigenvalue {:.3e} below {:e}: truncation may be too small",
                d.min_eigenvalue.unwrap(),
                crate::propagators::POSITIVITY_WARN
            ));
        }
    }
    if ensemble.is_some_and(|e| e.drift_flagged) {
        warnings.push("mean squared trajectory norm drifted; consider a smaller dt".into());
    }

    let wall = start.elapsed().as_secs_f64();
    files.push("manifest.json".into());
    let manifest = json!({
        "tool": TOOL_NAME,
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.name,
        "method": cfg.run.method.as_str(),
        "seed": cfg.run.seed,
        "wall_time_seconds": wall,
        "config": cfg.resolved(),
        "diagnostics": match (&propagation, &ensemble) {
            (Some(d), _) => json!({
                "steps": d.steps,
                "max_trace_error": d.max_trace_error,
                "max_hermiticity_error": d.max_hermiticity_error,
                "min_eigenvalue": d.min_eigenvalue,
            }),
            (_, Some(e)) => json!({
                "n_traj": e.n_traj,
                "min_mean_norm_sqr": e.min_mean_norm_sqr,
                "max_mean_norm_sqr": e.max_mean_norm_sqr,
                "norm_drift_flagged": e.drift_flagged,
            }),
            _ => json!(null),
        },
        "files": files,
        "warnings": warnings,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    Ok(RunOutcome {
        name: cfg.name.clone(),
        directory: dir.to_path_buf(),
        method: cfg.run.method,
        observables,
        propagation,
        ensemble,
        wigner,
        files,
        warnings,
        wall_time_seconds: wall,
    })
}

/// Runs `cfg` into `dir`. A config with variants runs each variant into
/// `dir/<variant>` and writes a top-level manifest listing them.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<RunOutcome>> {
    if cfg.variants.is_empty() {
        return Ok(vec![run_single(cfg, dir)?]);
    }
    validate(cfg).into_result()?;
    let start = Instant::now();
    let mut outcomes = Vec::new();
    for v in &cfg.variants {
        let sub = cfg.with_variant(v);
        outcomes.push(run_single(&sub, &dir.join(&v.name)).map_err(|e| {
            if e.is_config() {
                e
            } else {
                e.context(format!("variant {}", v.name))
            }
        })?);
    }
    let manifest = json!({
        "tool": TOOL_NAME,
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.name,
        "method": cfg.run.method.as_str(),
        "seed": cfg.run.seed,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "config": cfg.resolved(),
        "variants": cfg.variants.iter().map(|v| v.name.clone()).collect::<Vec<_>>(),
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(outcomes)
}
