//! JSON scenario configuration and its validation.
//!
//! Cavity indices are 1-based here (they are 0-based everywhere else in the
//! library). Complex numbers are written either as a plain number or as a
//! `[re, im]` pair.

use crate::error::{Error, Result};
use crate::linalg::C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexValue(pub C64);

impl ComplexValue {
    pub fn real(x: f64) -> Self {
        ComplexValue(C64::new(x, 0.0))
    }
}

impl Serialize for ComplexValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for ComplexValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Pair([f64; 2]),
        }
        match Repr::deserialize(d).map_err(|_| {
            serde::de::Error::custom("expected a number or a [re, im] pair")
        })? {
            Repr::Real(x) => Ok(ComplexValue::real(x)),
            Repr::Pair([re, im]) => Ok(ComplexValue(C64::new(re, im))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelConfig,
    pub bath: BathConfig,
    pub initial_state: InitialState,
    /// Fock dimension per cavity: one number for all, or a list.
    pub truncation: Truncation,
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Sub-runs that patch the model; when present only the variants run,
    /// each into its own subdirectory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_cavities: usize,
    pub omegas: Vec<f64>,
    /// `lambdas[i]` couples cavity i+1 to i+2; the last entry closes the
    /// ring under periodic boundaries and is ignored otherwise.
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub couplings: Vec<ComplexValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    /// (γ/2) e^{−γ|τ|}
    Ou { gamma: f64 },
    /// Γ δ(τ); only usable with the Lindblad method.
    Markov { rate: f64 },
    /// α(k·dt) for k = 0, 1, ...
    Tabulated { dt: f64, values: Vec<ComplexValue> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub kernel: KernelConfig,
    /// Mean thermal occupation; absent means zero temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    /// Explicit α₂ kernel at finite temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel2: Option<KernelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockTerm {
    pub occupations: Vec<usize>,
    pub amplitude: ComplexValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Even cat (|α⟩ + |−α⟩)/√Z in one cavity, vacuum elsewhere.
    CatVacuum {
        alpha: ComplexValue,
        #[serde(default = "first_cavity")]
        cavity: usize,
    },
    Fock { occupations: Vec<usize> },
    /// Normalized Σ c_k |n_k⟩.
    FockSuperposition { terms: Vec<FockTerm> },
    /// Product of coherent states.
    Coherent { amplitudes: Vec<ComplexValue> },
}

fn first_cavity() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truncation {
    Uniform(usize),
    PerCavity(Vec<usize>),
}

impl Truncation {
    pub fn dims(&self, n: usize) -> Vec<usize> {
        match self {
            Truncation::Uniform(d) => vec![*d; n],
            Truncation::PerCavity(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MasterZeroT,
    MasterFiniteT,
    Lindblad,
    Qsd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MasterZeroT => "master_zero_t",
            Method::MasterFiniteT => "master_finite_t",
            Method::Lindblad => "lindblad",
            Method::Qsd => "qsd",
        }
    }
}

/// Zero-temperature coefficient solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Closed ODE for OU kernels, Volterra solver otherwise.
    #[default]
    Auto,
    OuFast,
    Volterra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_max: f64,
    pub dt: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: Backend,
    /// Lindblad rate; defaults to the rate matched to the bath kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Worker threads; the CLI flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Smallest-eigenvalue diagnostics at every sample time.
    #[serde(default = "yes")]
    pub check_positivity: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channels {
    #[serde(default = "yes")]
    pub fidelity: bool,
    /// Cat amplitude for the fidelity channels; defaults to the initial
    /// cat's amplitude, else 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cat_alpha: Option<ComplexValue>,
    #[serde(default)]
    pub negativity_pairs: Vec<[usize; 2]>,
    #[serde(default = "yes")]
    pub occupations: bool,
    #[serde(default)]
    pub purity: bool,
}

impl Default for Channels {
    fn default() -> Self {
        Channels {
            fidelity: true,
            cat_alpha: None,
            negativity_pairs: Vec::new(),
            occupations: true,
            purity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerGridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl Default for WignerGridConfig {
    fn default() -> Self {
        WignerGridConfig {
            x_min: -2.5,
            x_max: 2.5,
            p_min: -2.5,
            p_max: 2.5,
            nx: 101,
            np: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Spacing of the observable rows; a multiple of run.dt (default run.dt).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default)]
    pub channels: Channels,
    /// Times (on the sample grid) at which Wigner grids are written.
    #[serde(default)]
    pub wigner_times: Vec<f64>,
    /// Cavities for the Wigner grids (default: all).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner_cavities: Option<Vec<usize>>,
    #[serde(default)]
    pub wigner_grid: WignerGridConfig,
    /// Times at which full ρ snapshots go to rho.csv.
    #[serde(default)]
    pub rho_times: Vec<f64>,
    /// Also snapshot ρ every this many time units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_every: Option<f64>,
    /// Write the memory-coefficient tables.
    #[serde(default)]
    pub coefficients: bool,
    /// Write per-trajectory squared norms (qsd only).
    #[serde(default)]
    pub norms: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<ComplexValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub model: ModelPatch,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Copy with the model patched by `variant`, named `<name>/<variant>`.
    pub fn with_variant(&self, variant: &Variant) -> ScenarioConfig {
        let mut out = self.clone();
        out.variants.clear();
        out.name = if self.name.is_empty() {
            variant.name.clone()
        } else {
            format!("{}/{}", self.name, variant.name)
        };
        let p = &variant.model;
        if let Some(v) = &p.omegas {
            out.model.omegas = v.clone();
        }
        if let Some(v) = &p.lambdas {
            out.model.lambdas = v.clone();
        }
        if let Some(v) = &p.couplings {
            out.model.couplings = v.clone();
        }
        if let Some(b) = p.boundary {
            out.model.boundary = b;
        }
        out
    }

    /// Sample spacing actually used.
    pub fn sample_dt(&self) -> f64 {
        self.output.sample_dt.unwrap_or(self.run.dt)
    }

    /// Cat amplitude for the fidelity channels, if they are enabled.
    pub fn fidelity_alpha(&self) -> Option<C64> {
        if !self.output.channels.fidelity {
            return None;
        }
        Some(match (&self.output.channels.cat_alpha, &self.initial_state) {
            (Some(a), _) => a.0,
            (None, InitialState::CatVacuum { alpha, .. }) => alpha.0,
            (None, _) => C64::new(1.0, 0.0),
        })
    }

    /// The config with every defaulted field written out, as recorded in
    /// run manifests.
    pub fn resolved(&self) -> ScenarioConfig {
        let mut out = self.clone();
        out.output.sample_dt = Some(self.sample_dt());
        if let Some(a) = self.fidelity_alpha() {
            out.output.channels.cat_alpha = Some(ComplexValue(a));
        }
        if out.output.wigner_cavities.is_none() && !out.output.wigner_times.is_empty() {
            out.output.wigner_cavities = Some((1..=self.model.n_cavities).collect());
        }
        if self.run.method == Method::Qsd && out.run.batch_size.is_none() {
            out.run.batch_size = Some(crate::qsd::EnsembleOptions::default().batch_size);
        }
        if self.run.method == Method::Lindblad && out.run.markov_rate.is_none() {
            out.run.markov_rate = Some(default_markov_rate(&self.bath.kernel));
        }
        out
    }
}

pub(crate) fn default_markov_rate(kernel: &KernelConfig) -> f64 {
    match kernel {
        KernelConfig::Markov { rate } => *rate,
        k => crate::model::matched_markov_rate(&to_kernel(k)),
    }
}

pub(crate) fn to_kernel(k: &KernelConfig) -> crate::model::CorrelationKernel {
    use crate::model::CorrelationKernel;
    match k {
        KernelConfig::Ou { gamma } => CorrelationKernel::OrnsteinUhlenbeck { gamma: *gamma },
        KernelConfig::Markov { rate } => CorrelationKernel::MarkovDelta { rate: *rate },
        KernelConfig::Tabulated { dt, values } => CorrelationKernel::Tabulated {
            dt: *dt,
            values: values.iter().map(|v| v.0).collect(),
        },
    }
}

/// One finding, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    /// `Err(Error::Config)` listing every error.
    pub fn into_result(self) -> Result<Vec<Issue>> {
        if self.errors.is_empty() {
            return Ok(self.warnings);
        }
        let msg = self.errors.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ");
        Err(Error::Config(msg))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        if self.is_clean() {
            writeln!(f, "ok")?;
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

/// Index of `t` on a grid of spacing `h`, if it lies on it.
pub(crate) fn grid_index(t: f64, h: f64) -> Option<usize> {
    let x = t / h;
    let k = x.round();
    if k >= 0.0 && (x - k).abs() < 1e-6 {
        Some(k as usize)
    } else {
        None
    }
}

fn check_kernel(rep: &mut ValidationReport, path: &str, k: &KernelConfig) {
    match k {
        KernelConfig::Ou { gamma } if !positive(*gamma) => {
            rep.error(format!("{path}.gamma"), format!("must be positive, got {gamma}"))
        }
        KernelConfig::Markov { rate } if !(*rate >= 0.0 && rate.is_finite()) => {
            rep.error(format!("{path}.rate"), format!("must be non-negative, got {rate}"))
        }
        KernelConfig::Tabulated { dt, values } => {
            if !positive(*dt) {
                rep.error(format!("{path}.dt"), format!("must be positive, got {dt}"));
            }
            if values.is_empty() {
                rep.error(format!("{path}.values"), "needs at least one entry");
            } else if values[0].0.im.abs() > 1e-12 * values[0].0.norm().max(1.0) {
                rep.error(format!("{path}.values[0]"), "zero-lag value must be real");
            }
        }
        _ => {}
    }
}

fn check_model(rep: &mut ValidationReport, prefix: &str, m: &ModelConfig) {
    let n = m.n_cavities;
    if n == 0 {
        rep.error(format!("{prefix}.n_cavities"), "must be at least 1");
        return;
    }
    for (field, len) in [
        ("omegas", m.omegas.len()),
        ("lambdas", m.lambdas.len()),
        ("couplings", m.couplings.len()),
    ] {
        if len != n {
            rep.error(format!("{prefix}.{field}"), format!("has {len} entries, expected n_cavities = {n}"));
        }
    }
    for (i, w) in m.omegas.iter().enumerate() {
        if !w.is_finite() {
            rep.error(format!("{prefix}.omegas[{i}]"), "must be finite");
        }
    }
    for (i, l) in m.lambdas.iter().enumerate() {
        if !l.is_finite() {
            rep.error(format!("{prefix}.lambdas[{i}]"), "must be finite");
        }
    }
    for (i, c) in m.couplings.iter().enumerate() {
        if !c.0.is_finite() {
            rep.error(format!("{prefix}.couplings[{i}]"), "must be finite");
        }
    }
    if m.lambdas.len() == n {
        let last = m.lambdas[n - 1];
        match m.boundary {
            BoundaryConfig::Open if last != 0.0 => rep.warn(
                format!("{prefix}.lambdas[{}]", n - 1),
                format!("{last} is ignored under open boundaries"),
            ),
            BoundaryConfig::Periodic if n == 2 => rep.warn(
                format!("{prefix}.boundary"),
                "a periodic two-cavity ring couples the same pair twice",
            ),
            _ => {}
        }
    }
    if m.couplings.len() == n && m.couplings.iter().all(|c| c.0.norm() == 0.0) {
        rep.warn(format!("{prefix}.couplings"), "all zero: the bath is decoupled");
    }
}

/// Full consistency report without running anything.
pub fn validate(cfg: &ScenarioConfig) -> ValidationReport {
    let mut rep = ValidationReport::default();
    check_model(&mut rep, "model", &cfg.model);
    let n = cfg.model.n_cavities;

    check_kernel(&mut rep, "bath.kernel", &cfg.bath.kernel);
    if let Some(k2) = &cfg.bath.kernel2 {
        check_kernel(&mut rep, "bath.kernel2", k2);
        if cfg.bath.nbar.is_none() {
            rep.error("bath.kernel2", "only meaningful at finite temperature (set bath.nbar)");
        }
    }
    if let Some(nbar) = cfg.bath.nbar {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            rep.error("bath.nbar", format!("must be non-negative, got {nbar}"));
        }
    }

    // truncation
    let dims = cfg.truncation.dims(n);
    if dims.len() != n {
        rep.error("truncation", format!("has {} entries, expected n_cavities = {n}", dims.len()));
    } else if let Some(i) = dims.iter().position(|&d| d < 2) {
        rep.error(format!("truncation[{i}]"), "every Fock dimension must be at least 2");
    } else if n > 0 {
        if let Err(e) = crate::hilbert::HilbertSpec::new(dims.clone()) {
            rep.error("truncation", e.to_string());
        }
    }

    // initial state
    let dims_ok = dims.len() == n && dims.iter().all(|&d| d >= 2);
    let check_occ = |rep: &mut ValidationReport, path: String, occ: &[usize]| {
        if occ.len() != n {
            rep.error(path, format!("has {} entries, expected n_cavities = {n}", occ.len()));
        } else if dims_ok {
            for (i, (&k, &d)) in occ.iter().zip(&dims).enumerate() {
                if k >= d {
                    rep.error(format!("{path}[{i}]"), format!("occupation {k} does not fit truncation {d}"));
                }
            }
        }
    };
    match &cfg.initial_state {
        InitialState::CatVacuum { alpha, cavity } => {
            if alpha.0.norm() == 0.0 {
                rep.error("initial_state.alpha", "must be nonzero");
            }
            if *cavity == 0 || *cavity > n {
                rep.error("initial_state.cavity", format!("must be in 1..={n}, got {cavity}"));
            }
        }
        InitialState::Fock { occupations } => check_occ(&mut rep, "initial_state.occupations".into(), occupations),
        InitialState::FockSuperposition { terms } => {
            if terms.is_empty() {
                rep.error("initial_state.terms", "needs at least one term");
            }
            for (k, t) in terms.iter().enumerate() {
                check_occ(&mut rep, format!("initial_state.terms[{k}].occupations"), &t.occupations);
            }
            if !terms.is_empty() && terms.iter().all(|t| t.amplitude.0.norm() == 0.0) {
                rep.error("initial_state.terms", "all amplitudes are zero");
            }
        }
        InitialState::Coherent { amplitudes } => {
            if amplitudes.len() != n {
                rep.error(
                    "initial_state.amplitudes",
                    format!("has {} entries, expected n_cavities = {n}", amplitudes.len()),
                );
            }
        }
    }

    // run
    let run = &cfg.run;
    let mut grid_ok = true;
    if !positive(run.t_max) {
        rep.error("run.t_max", format!("must be positive, got {}", run.t_max));
        grid_ok = false;
    }
    if !positive(run.dt) {
        rep.error("run.dt", format!("must be positive, got {}", run.dt));
        grid_ok = false;
    }
    if grid_ok && grid_index(run.t_max, run.dt).is_none() {
        rep.error("run.dt", format!("t_max = {} is not a multiple of dt = {}", run.t_max, run.dt));
        grid_ok = false;
    }
    let markov = matches!(cfg.bath.kernel, KernelConfig::Markov { .. });
    let thermal = cfg.bath.nbar.is_some_and(|x| x > 0.0);
    match run.method {
        Method::MasterZeroT => {
            if thermal {
                rep.error("run.method", "master_zero_t needs a zero-temperature bath (bath.nbar absent or 0)");
            }
        }
        Method::MasterFiniteT => {
            if cfg.bath.nbar.is_none() {
                rep.error("bath.nbar", "required when run.method is \"master_finite_t\"");
            }
            if !matches!(cfg.bath.kernel, KernelConfig::Ou { .. }) {
                rep.error("bath.kernel", "master_finite_t supports exponential (ou) kernels only");
            }
            if cfg.bath.kernel2.as_ref().is_some_and(|k| !matches!(k, KernelConfig::Ou { .. })) {
                rep.error("bath.kernel2", "master_finite_t supports exponential (ou) kernels only");
            }
        }
        Method::Lindblad => {}
        Method::Qsd => match run.n_traj {
            None => rep.error("run.n_traj", "required when run.method is \"qsd\""),
            Some(0) => rep.error("run.n_traj", "must be at least 1"),
            _ => {}
        },
    }
    if markov && run.method != Method::Lindblad {
        rep.error(
            "bath.kernel",
            format!("a markov kernel is only usable with method \"lindblad\", not \"{}\"", run.method.as_str()),
        );
    }
    if let Some(rate) = run.markov_rate {
        if run.method != Method::Lindblad {
            rep.warn("run.markov_rate", "ignored unless run.method is \"lindblad\"");
        } else if !(rate >= 0.0 && rate.is_finite()) {
            rep.error("run.markov_rate", format!("must be non-negative, got {rate}"));
        }
    }
    if run.n_traj.is_some() && run.method != Method::Qsd {
        rep.warn("run.n_traj", "ignored unless run.method is \"qsd\"");
    }
    match run.backend {
        Backend::OuFast if !matches!(cfg.bath.kernel, KernelConfig::Ou { .. }) => {
            rep.error("run.backend", "ou_fast needs an ou kernel")
        }
        Backend::Volterra if run.method == Method::MasterFiniteT => {
            rep.warn("run.backend", "ignored by master_finite_t")
        }
        _ => {}
    }
    if run.batch_size == Some(0) {
        rep.error("run.batch_size", "must be at least 1");
    }
    if run.threads == Some(0) {
        rep.error("run.threads", "must be at least 1");
    }

    // output
    let out = &cfg.output;
    let sample_dt = cfg.sample_dt();
    let mut sample_ok = grid_ok;
    if let Some(s) = out.sample_dt {
        if !positive(s) {
            rep.error("output.sample_dt", format!("must be positive, got {s}"));
            sample_ok = false;
        } else if grid_ok && grid_index(s, run.dt).is_none() {
            rep.error("output.sample_dt", format!("must be a multiple of run.dt = {}", run.dt));
            sample_ok = false;
        }
    }
    let on_samples = |rep: &mut ValidationReport, path: String, t: f64| {
        if !(t >= 0.0 && t <= run.t_max * (1.0 + 1e-12)) {
            rep.error(path, format!("time {t} outside [0, {}]", run.t_max));
        } else if sample_ok && grid_index(t, sample_dt).is_none() && (t - run.t_max).abs() > 1e-9 {
            rep.error(path, format!("time {t} is not on the sample grid (spacing {sample_dt})"));
        }
    };
    for (k, &t) in out.wigner_times.iter().enumerate() {
        on_samples(&mut rep, format!("output.wigner_times[{k}]"), t);
    }
    for (k, &t) in out.rho_times.iter().enumerate() {
        on_samples(&mut rep, format!("output.rho_times[{k}]"), t);
    }
    if let Some(every) = out.rho_every {
        if !positive(every) {
            rep.error("output.rho_every", format!("must be positive, got {every}"));
        } else if sample_ok && grid_index(every, sample_dt).is_none() {
            rep.error("output.rho_every", format!("must be a multiple of the sample spacing {sample_dt}"));
        }
    }
    if let Some(cav) = &out.wigner_cavities {
        for (k, &c) in cav.iter().enumerate() {
            if c == 0 || c > n {
                rep.error(format!("output.wigner_cavities[{k}]"), format!("must be in 1..={n}, got {c}"));
            }
        }
    }
    let g = &out.wigner_grid;
    if !(g.x_min < g.x_max && g.p_min < g.p_max && g.x_min.is_finite() && g.x_max.is_finite()
        && g.p_min.is_finite() && g.p_max.is_finite())
    {
        rep.error("output.wigner_grid", "ranges must be finite with min < max");
    }
    if g.nx < 2 || g.np < 2 {
        rep.error("output.wigner_grid", "nx and np must be at least 2");
    }
    for (k, [a, b]) in out.channels.negativity_pairs.iter().enumerate() {
        let path = format!("output.channels.negativity_pairs[{k}]");
        if *a == 0 || *a > n || *b == 0 || *b > n {
            rep.error(path, format!("cavities must be in 1..={n}"));
        } else if a == b {
            rep.error(path, "a pair needs two different cavities");
        }
    }
    if let Some(a) = &out.channels.cat_alpha {
        if a.0.norm() == 0.0 {
            rep.error("output.channels.cat_alpha", "must be nonzero");
        }
    }
    if out.norms && run.method != Method::Qsd {
        rep.warn("output.norms", "ignored unless run.method is \"qsd\"");
    }
    if out.coefficients && run.method == Method::Lindblad {
        rep.warn("output.coefficients", "the lindblad method has no memory coefficients");
    }

    // variants
    let mut seen = std::collections::BTreeSet::new();
    for (k, v) in cfg.variants.iter().enumerate() {
        let path = format!("variants[{k}]");
        let safe = !v.name.is_empty()
            && v.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !safe {
            rep.error(format!("{path}.name"), "must be non-empty and use only [A-Za-z0-9_-]");
        }
        if !seen.insert(v.name.clone()) {
            rep.error(format!("{path}.name"), format!("duplicate variant \"{}\"", v.name));
        }
        let patched = cfg.with_variant(v);
        let mut sub = ValidationReport::default();
        check_model(&mut sub, &format!("{path}.model"), &patched.model);
        rep.errors.extend(sub.errors);
        for w in sub.warnings {
            if !rep.warnings.iter().any(|x| x.message == w.message) {
                rep.warnings.push(w);
            }
        }
    }
    rep
}

/// Parses and validates a config file.
pub fn validate_config(path: &Path) -> Result<ValidationReport> {
    Ok(validate(&ScenarioConfig::load(path)?))
}
