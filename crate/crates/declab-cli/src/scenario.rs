//! Builds models, decompositions and observables from configs and runs the
//! requested engine(s).

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use declab_core::analysis::{classify_dynamics, AnalysisThresholds, DynamicsVerdict};
use declab_core::closedform;
use declab_core::model::{
    embed_observable, make_spin_factor, pauli_x, pauli_y, pauli_z, Decomposition, ExpectationSeries,
    LocalObservable, ModelSpec, RelevantObservable, SpinFactor,
};
use declab_core::oracle;

use crate::config::{
    AmplitudeMode, AnalysisConfig, CouplingMode, DecompositionConfig, ModelConfig,
    ObservableConfig, ScenarioConfig, TimeGridConfig,
};
use crate::error::CliError;

/// Engine selection; `Auto` prefers the closed form when it applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineChoice {
    Auto,
    Oracle,
    Closedform,
    Both,
}

/// Max |closed form - oracle| allowed when both engines run.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

pub fn time_grid(grid: &TimeGridConfig) -> Result<Vec<f64>, CliError> {
    if grid.t_max <= 0.0 || !grid.t_max.is_finite() {
        return Err(CliError::other(format!(
            "time_grid.t_max = {} must be a positive finite number",
            grid.t_max
        )));
    }
    if grid.points < 2 {
        return Err(CliError::other("time_grid.points must be at least 2"));
    }
    Ok((0..grid.points)
        .map(|i| grid.t_max * i as f64 / (grid.points - 1) as f64)
        .collect())
}

fn random_factor(rng: &mut ChaCha8Rng) -> SpinFactor {
    loop {
        let f = make_spin_factor(
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        );
        if let Ok(f) = f {
            return f;
        }
    }
}

/// Builds the model; returns the effective seed when generation used one.
/// Draw order is fixed: A-side factors, B-side factors, couplings.
pub fn build_model(
    config: &ModelConfig,
    seed_override: Option<u64>,
) -> Result<(ModelSpec, Option<u64>), CliError> {
    match (&config.generate, &config.explicit) {
        (Some(gen), None) => {
            let seed = seed_override.or(gen.seed);
            if gen.needs_seed() && seed.is_none() {
                return Err(CliError::other(
                    "model.generate uses a random mode but declares no seed",
                ));
            }
            if gen.m == 0 || gen.n == 0 {
                return Err(CliError::other("model.generate needs m >= 1 and n >= 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            let mut side = |count: usize| -> Vec<SpinFactor> {
                (0..count)
                    .map(|_| match gen.amplitudes {
                        AmplitudeMode::Balanced => SpinFactor::balanced(),
                        AmplitudeMode::Random => random_factor(&mut rng),
                    })
                    .collect()
            };
            let a_side = side(gen.m);
            let b_side = side(gen.n);
            let couplings: Vec<f64> = match &gen.couplings {
                CouplingMode::Uniform(g) => vec![*g; gen.n],
                CouplingMode::Random([lo, hi]) => {
                    if hi <= lo || hi.is_nan() || lo.is_nan() {
                        return Err(CliError::other(format!(
                            "coupling range [{lo}, {hi}] is empty"
                        )));
                    }
                    (0..gen.n).map(|_| rng.gen_range(*lo..*hi)).collect()
                }
            };
            let model = ModelSpec::new(a_side, b_side, couplings)?;
            Ok((model, seed))
        }
        (None, Some(explicit)) => {
            let factor = |raw: &[f64; 4]| {
                make_spin_factor(
                    Complex64::new(raw[0], raw[1]),
                    Complex64::new(raw[2], raw[3]),
                )
            };
            let a_side: Result<Vec<SpinFactor>, _> = explicit.a_side.iter().map(factor).collect();
            let b_side: Result<Vec<SpinFactor>, _> = explicit.b_side.iter().map(factor).collect();
            let model = ModelSpec::new(a_side?, b_side?, explicit.couplings.clone())?;
            Ok((model, None))
        }
        _ => Err(CliError::other(
            "model must declare exactly one of `generate` or `explicit`",
        )),
    }
}

pub fn build_decomposition(
    config: &DecompositionConfig,
    model: &ModelSpec,
) -> Result<Decomposition, CliError> {
    let sites: Vec<usize> = match (&config.preset, &config.system_sites) {
        (Some(preset), None) => match preset.as_str() {
            "traditional-dec1" => {
                if model.m() != 1 {
                    return Err(CliError::other(format!(
                        "preset traditional-dec1 needs m = 1, model has m = {}",
                        model.m()
                    )));
                }
                vec![0]
            }
            "traditional-dec2" => {
                if model.m() != 1 {
                    return Err(CliError::other(format!(
                        "preset traditional-dec2 needs m = 1, model has m = {}",
                        model.m()
                    )));
                }
                let j = config.index.ok_or_else(|| {
                    CliError::other("preset traditional-dec2 needs `index` (a B-side index)")
                })?;
                if j >= model.n() {
                    return Err(CliError::other(format!(
                        "traditional-dec2 index {j} out of range for n = {}",
                        model.n()
                    )));
                }
                vec![model.m() + j]
            }
            "generalized-dec1" => (0..model.m()).collect(),
            "generalized-dec2" => {
                let site = config
                    .site
                    .ok_or_else(|| CliError::other("preset generalized-dec2 needs `site`"))?;
                vec![site]
            }
            other => {
                return Err(CliError::other(format!(
                    "unknown decomposition preset `{other}`"
                )))
            }
        },
        (None, Some(sites)) => sites.clone(),
        _ => {
            return Err(CliError::other(
                "decomposition must declare exactly one of `preset` or `system_sites`",
            ))
        }
    };
    Ok(Decomposition::new(sites, model.num_sites())?)
}

pub fn build_observable(
    config: &ObservableConfig,
    model: &ModelSpec,
    decomposition: &Decomposition,
) -> Result<RelevantObservable, CliError> {
    if let Some(matrix) = &config.matrix {
        if config.pauli.is_some() || config.sites.is_some() {
            return Err(CliError::other(
                "observable.matrix excludes `pauli` and `sites`",
            ));
        }
        let e = &matrix.entries;
        let m2 = Matrix2::new(
            Complex64::new(e[0][0][0], e[0][0][1]),
            Complex64::new(e[0][1][0], e[0][1][1]),
            Complex64::new(e[1][0][0], e[1][0][1]),
            Complex64::new(e[1][1][0], e[1][1][1]),
        );
        let local = LocalObservable::new(matrix.site, m2)
            .map_err(|e| CliError::other(format!("observable.matrix: {e}")))?;
        return Ok(embed_observable(model, &[local])?);
    }
    let axis = config.pauli.as_deref().unwrap_or("x");
    let factor = match axis {
        "x" => pauli_x(),
        "y" => pauli_y(),
        "z" => pauli_z(),
        other => {
            return Err(CliError::other(format!(
                "observable.pauli must be x, y or z, got `{other}`"
            )))
        }
    };
    let sites: Vec<usize> = match &config.sites {
        Some(sites) => sites.clone(),
        None => decomposition.system_sites().iter().copied().collect(),
    };
    let locals: Vec<LocalObservable> = sites
        .iter()
        .map(|&s| LocalObservable::new(s, factor))
        .collect::<Result<_, _>>()?;
    Ok(embed_observable(model, &locals)?)
}

/// Whether the closed-form engine covers this observable/decomposition.
pub fn closedform_supported(
    model: &ModelSpec,
    decomposition: &Decomposition,
    obs: &RelevantObservable,
) -> bool {
    let support: Vec<usize> = obs.support().collect();
    if support
        .iter()
        .any(|s| !decomposition.system_sites().contains(s))
    {
        return false;
    }
    if obs.is_identity() || support.len() == 1 {
        return true;
    }
    support.iter().all(|&s| model.is_a_site(s))
        && model.m() <= closedform::MAX_GENERALIZED_A_SITES
}

fn oracle_feasible(model: &ModelSpec, decomposition: &Decomposition) -> Result<(), CliError> {
    if model.num_sites() > oracle::MAX_DENSE_SITES {
        return Err(CliError::TooLarge(format!(
            "{} sites exceeds the dense-engine cap of {}",
            model.num_sites(),
            oracle::MAX_DENSE_SITES
        )));
    }
    if decomposition.system_sites().len() > oracle::MAX_REDUCED_SITES {
        return Err(CliError::TooLarge(format!(
            "system of {} sites exceeds the reduced-state cap of {}",
            decomposition.system_sites().len(),
            oracle::MAX_REDUCED_SITES
        )));
    }
    Ok(())
}

/// Computed series plus provenance.
pub struct EngineRun {
    pub series: ExpectationSeries,
    pub engine: &'static str,
    pub cross_check_err: Option<f64>,
}

pub fn run_engine(
    model: &ModelSpec,
    decomposition: &Decomposition,
    obs: &RelevantObservable,
    times: &[f64],
    choice: EngineChoice,
) -> Result<EngineRun, CliError> {
    let closed = |()| -> Result<ExpectationSeries, CliError> {
        Ok(closedform::expectation_series(model, decomposition, obs, times)?)
    };
    let dense = |()| -> Result<ExpectationSeries, CliError> {
        oracle_feasible(model, decomposition)?;
        Ok(oracle::expectation_series(model, decomposition, obs, times)?)
    };
    match choice {
        EngineChoice::Auto => {
            if closedform_supported(model, decomposition, obs) {
                Ok(EngineRun {
                    series: closed(())?,
                    engine: "closedform",
                    cross_check_err: None,
                })
            } else {
                Ok(EngineRun {
                    series: dense(())?,
                    engine: "oracle",
                    cross_check_err: None,
                })
            }
        }
        EngineChoice::Closedform => Ok(EngineRun {
            series: closed(())?,
            engine: "closedform",
            cross_check_err: None,
        }),
        EngineChoice::Oracle => Ok(EngineRun {
            series: dense(())?,
            engine: "oracle",
            cross_check_err: None,
        }),
        EngineChoice::Both => {
            let fast = closed(())?;
            let exact = dense(())?;
            let mut err = 0.0f64;
            for i in 0..times.len() {
                err = err.max((fast.total[i] - exact.total[i]).abs());
                err = err.max((fast.nondiag_part[i] - exact.nondiag_part[i]).norm());
            }
            if err >= CROSS_CHECK_TOL {
                return Err(CliError::other(format!(
                    "engine cross-check failed: max |closedform - oracle| = {err:e}"
                )));
            }
            Ok(EngineRun {
                series: fast,
                engine: "closedform",
                cross_check_err: Some(err),
            })
        }
    }
}

pub fn thresholds_from(config: &AnalysisConfig) -> AnalysisThresholds {
    AnalysisThresholds {
        decoherence_threshold: config.decoherence_threshold,
        tol_dec: config.tol_dec,
        tol_osc: config.tol_osc,
    }
}

/// Everything a scenario run produces before serialization.
pub struct ScenarioOutcome {
    pub model: ModelSpec,
    pub series: ExpectationSeries,
    pub verdict: DynamicsVerdict,
    pub engine: &'static str,
    pub cross_check_err: Option<f64>,
    pub seed: Option<u64>,
}

pub fn run_scenario(
    config: &ScenarioConfig,
    engine: EngineChoice,
    seed_override: Option<u64>,
) -> Result<ScenarioOutcome, CliError> {
    let (model, seed) = build_model(&config.model, seed_override)?;
    let decomposition = build_decomposition(&config.decomposition, &model)?;
    let obs = build_observable(&config.observable, &model, &decomposition)?;
    let times = time_grid(&config.time_grid)?;
    let run = run_engine(&model, &decomposition, &obs, &times, engine)?;
    let verdict = classify_dynamics(
        &run.series,
        (0.0, config.time_grid.t_max),
        &thresholds_from(&config.analysis),
    )?;
    Ok(ScenarioOutcome {
        model,
        series: run.series,
        verdict,
        engine: run.engine,
        cross_check_err: run.cross_check_err,
        seed,
    })
}
