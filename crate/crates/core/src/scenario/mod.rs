//! Scenario configs, the builtin scenarios, the runner that turns a
//! config into data files, and run comparison.

mod builtins;
mod compare;
mod config;
mod run;

pub use builtins::{builtin, BUILTIN_NAMES};
pub use compare::{compare_runs, ChannelDeviation, CompareMetric, CompareReport};
pub use config::{
    validate, validate_config, Backend, BathConfig, BoundaryConfig, Channels, ComplexValue, FockTerm,
    InitialState, Issue, KernelConfig, Method, ModelConfig, ModelPatch, OutputConfig, RunConfig, ScenarioConfig,
    Truncation, ValidationReport, Variant, WignerGridConfig,
};
pub use run::{resolve, run_scenario, EnsembleSummary, ResolvedScenario, RunOutcome, WignerSummary, TOOL_NAME};

/// A builtin name or a path to a JSON config.
pub fn load_config(name_or_path: &str) -> crate::Result<ScenarioConfig> {
    let path = std::path::Path::new(name_or_path);
    if !path.exists() {
        if let Some(cfg) = builtin(name_or_path) {
            return Ok(cfg);
        }
    }
    ScenarioConfig::load(path)
}
