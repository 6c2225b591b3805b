//! Named scenarios for the two- and three-cavity studies.
//!
//! fig1: two cavities, λ=0, γ=0.1, cat(α=1)⊗vacuum, Wigner grids at
//! ωt = 0, 11, 22, 33. fig2–fig4: three cavities with λ=1, γ=0.2 and a cat
//! in cavity 1 (fig3/fig4 add Wigner grids around the transfer and revival
//! times). fig5: (|100⟩+|010⟩)/√2 with pairwise negativities. fig6: the
//! periodic fig5 run with ω₂, λ₂ and l₂ doubled in turn.

use super::config::*;

pub const BUILTIN_NAMES: [&str; 8] = [
    "fig1", "fig2_obc", "fig2_pbc", "fig3", "fig4", "fig5_obc", "fig5_pbc", "fig6",
];

fn ones(n: usize) -> Vec<ComplexValue> {
    vec![ComplexValue::real(1.0); n]
}

fn three_cavity(name: &str, boundary: BoundaryConfig) -> ScenarioConfig {
    let lambdas = match boundary {
        BoundaryConfig::Open => vec![1.0, 1.0, 0.0],
        BoundaryConfig::Periodic => vec![1.0, 1.0, 1.0],
    };
    ScenarioConfig {
        name: name.into(),
        model: ModelConfig {
            n_cavities: 3,
            omegas: vec![1.0; 3],
            lambdas,
            boundary,
            couplings: ones(3),
        },
        bath: BathConfig {
            kernel: KernelConfig::Ou { gamma: 0.2 },
            nbar: None,
            kernel2: None,
        },
        initial_state: InitialState::CatVacuum {
            alpha: ComplexValue::real(1.0),
            cavity: 1,
        },
        // the even cat's first dropped level is n=8, population 1.6e-5
        truncation: Truncation::Uniform(7),
        run: RunConfig {
            t_max: 5.0,
            dt: 0.01,
            method: Method::MasterZeroT,
            n_traj: None,
            seed: 0,
            backend: Backend::Auto,
            markov_rate: None,
            batch_size: None,
            threads: None,
            check_positivity: true,
        },
        output: OutputConfig {
            sample_dt: Some(0.02),
            ..OutputConfig::default()
        },
        variants: Vec::new(),
    }
}

fn negativity_run(name: &str, boundary: BoundaryConfig) -> ScenarioConfig {
    let mut cfg = three_cavity(name, boundary);
    let term = |occ: [usize; 3]| FockTerm {
        occupations: occ.to_vec(),
        amplitude: ComplexValue::real(std::f64::consts::FRAC_1_SQRT_2),
    };
    cfg.initial_state = InitialState::FockSuperposition {
        terms: vec![term([1, 0, 0]), term([0, 1, 0])],
    };
    // one excitation never grows at zero temperature; d=2 is exact
    cfg.truncation = Truncation::Uniform(2);
    cfg.run.t_max = 10.0;
    cfg.output.channels = Channels {
        fidelity: false,
        cat_alpha: None,
        negativity_pairs: vec![[1, 2], [1, 3], [2, 3]],
        occupations: true,
        purity: false,
    };
    cfg
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    let cfg = match name {
        "fig1" => ScenarioConfig {
            name: "fig1".into(),
            model: ModelConfig {
                n_cavities: 2,
                omegas: vec![1.0, 1.0],
                lambdas: vec![0.0, 0.0],
                boundary: BoundaryConfig::Open,
                couplings: ones(2),
            },
            bath: BathConfig {
                kernel: KernelConfig::Ou { gamma: 0.1 },
                nbar: None,
                kernel2: None,
            },
            initial_state: InitialState::CatVacuum {
                alpha: ComplexValue::real(1.0),
                cavity: 1,
            },
            truncation: Truncation::Uniform(8),
            run: RunConfig {
                t_max: 35.0,
                // RK4 at dt = 0.02 dips to −1.6e-6 in the smallest eigenvalue
                dt: 0.01,
                method: Method::MasterZeroT,
                n_traj: None,
                seed: 0,
                backend: Backend::Auto,
                markov_rate: None,
                batch_size: None,
                threads: None,
                check_positivity: true,
            },
            output: OutputConfig {
                sample_dt: Some(0.1),
                wigner_times: vec![0.0, 11.0, 22.0, 33.0],
                rho_every: Some(1.0),
                channels: Channels {
                    purity: true,
                    ..Channels::default()
                },
                ..OutputConfig::default()
            },
            variants: Vec::new(),
        },
        "fig2_obc" => three_cavity("fig2_obc", BoundaryConfig::Open),
        "fig2_pbc" => three_cavity("fig2_pbc", BoundaryConfig::Periodic),
        "fig3" => {
            let mut c = three_cavity("fig3", BoundaryConfig::Open);
            c.output.wigner_times = vec![0.0, 1.1, 2.2, 3.3];
            c
        }
        "fig4" => {
            let mut c = three_cavity("fig4", BoundaryConfig::Periodic);
            c.output.wigner_times = vec![0.0, 1.02, 2.04, 3.06];
            c
        }
        "fig5_obc" => negativity_run("fig5_obc", BoundaryConfig::Open),
        "fig5_pbc" => negativity_run("fig5_pbc", BoundaryConfig::Periodic),
        "fig6" => {
            let mut c = negativity_run("fig6", BoundaryConfig::Periodic);
            c.variants = vec![
                Variant {
                    name: "omega2_doubled".into(),
                    model: ModelPatch {
                        omegas: Some(vec![1.0, 2.0, 1.0]),
                        ..ModelPatch::default()
                    },
                },
                Variant {
                    name: "lambda2_doubled".into(),
                    model: ModelPatch {
                        lambdas: Some(vec![1.0, 2.0, 1.0]),
                        ..ModelPatch::default()
                    },
                },
                Variant {
                    name: "l2_doubled".into(),
                    model: ModelPatch {
                        couplings: Some(vec![
                            ComplexValue::real(1.0),
                            ComplexValue::real(2.0),
                            ComplexValue::real(1.0),
                        ]),
                        ..ModelPatch::default()
                    },
                },
            ];
            c
        }
        _ => return None,
    };
    Some(cfg)
}
