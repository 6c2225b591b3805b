//! `cavity-qsd`: run, validate and compare cavity-array scenarios.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure.

use cavity_qsd::scenario::{
    compare_runs, load_config, run_scenario, validate, CompareMetric, ScenarioConfig, BUILTIN_NAMES,
};
use cavity_qsd::Error;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Default output root when neither --out nor output.directory is given.
const OUT_ENV: &str = "CAVITY_QSD_OUT";

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "cavity-qsd", version, about = "Non-Markovian dynamics of coupled cavity arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a JSON config path or a builtin name).
    Simulate {
        config: String,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides run.threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: String },
    /// Compare two run directories.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        #[arg(long, value_enum, default_value = "channel")]
        metric: Metric,
    },
    /// List the builtin scenarios, or print one as JSON.
    Builtin { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    #[value(name = "trace_distance")]
    TraceDistance,
    Channel,
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERICAL })
}

fn output_dir(cfg: &ScenarioConfig, config_arg: &str) -> PathBuf {
    if let Some(d) = &cfg.output.directory {
        return PathBuf::from(d);
    }
    let name = if cfg.name.is_empty() {
        Path::new(config_arg)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    } else {
        cfg.name.clone()
    };
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

fn simulate(config: &str, seed: Option<u64>, threads: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(t) = threads {
        cfg.run.threads = Some(t);
    }
    if let Some(o) = out {
        cfg.output.directory = Some(o.to_string_lossy().into_owned());
    }
    let report = validate(&cfg);
    if !report.is_ok() {
        eprint!("{report}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(k) = cfg.run.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let dir = output_dir(&cfg, config);
    match run_scenario(&cfg, &dir) {
        Ok(runs) => {
            for r in &runs {
                println!("{} ({}) -> {}", r.name, r.method.as_str(), r.directory.display());
                for f in &r.files {
                    println!("  {f}");
                }
                for w in &r.warnings {
                    println!("  warning: {w}");
                }
                println!("  wall time {:.2} s", r.wall_time_seconds);
            }
            ExitCode::SUCCESS
        }
        Err(e) => exit_for(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            seed,
            threads,
            out,
        } => simulate(&config, seed, threads, out),
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                let report = validate(&cfg);
                print!("{report}");
                if report.is_ok() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_CONFIG)
                }
            }
            Err(e) => exit_for(&e),
        },
        Command::Compare { dir_a, dir_b, metric } => {
            let metric = match metric {
                Metric::TraceDistance => CompareMetric::TraceDistance,
                Metric::Channel => CompareMetric::Channel,
            };
            match compare_runs(&dir_a, &dir_b, metric) {
                Ok(report) => {
                    print!("{report}");
                    ExitCode::SUCCESS
                }
                Err(e) => exit_for(&e),
            }
        }
        Command::Builtin { name: None } => {
            for n in BUILTIN_NAMES {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::Builtin { name: Some(n) } => match cavity_qsd::scenario::builtin(&n) {
            Some(cfg) => {
                println!("{}", cfg.to_json_pretty());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no builtin scenario named \"{n}\"");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
