//! The `rates`, `simulate` and `zeno` commands.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use jumplab_core::ensemble::{run_qy_ensemble, run_sme_ensemble, EnsembleConfig, EnsembleOutcome};
use jumplab_core::sde::{check_stability, SimulationError};
use jumplab_core::{
    collapse_frequencies, decompose, jump_rates, stationary, validate_scaling, DensityMatrix, JumpStats,
    LindbladModel, ModelFile, PhaseTable, RateGenerator, ScalingReport, SimulationParams, ValidatedModel,
};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, ModelSource};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write_file(path, &text)
}

/// Writes the config with the model inlined, so a run directory is
/// self-contained.
fn echo_config(cfg: &ExperimentConfig, model: &ValidatedModel) -> Result<(), CliError> {
    let mut echo = cfg.clone();
    echo.model = ModelSource::Inline(ModelFile::from_model(model.model()));
    write_json(&cfg.outputs.dir.join("config.json"), &echo)
}

/// Analytic block shared by `rates.json` and `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesReport {
    pub schema_version: u32,
    pub dim: usize,
    pub gamma: f64,
    pub eta: f64,
    pub generator: Vec<Vec<f64>>,
    pub stationary: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary_error: Option<String>,
    pub mechanisms: ScalingReport,
}

impl RatesReport {
    pub fn generator(&self) -> RateGenerator {
        RateGenerator::from_rates(self.generator.clone())
    }
}

pub fn analytic_rates(model: &ValidatedModel) -> Result<RatesReport, CliError> {
    let tensors = decompose(model);
    let mechanisms = validate_scaling(model);
    let gen = jump_rates(&tensors, model.setup())?;
    let (stationary, stationary_error) = match stationary(&gen) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.code().to_string())),
    };
    Ok(RatesReport {
        schema_version: SCHEMA_VERSION,
        dim: model.dim(),
        gamma: model.gamma(),
        eta: model.eta(),
        generator: gen.m,
        stationary,
        stationary_error,
        mechanisms,
    })
}

/// `jumplab rates`: writes `rates.json`.
pub fn cmd_rates(cfg: &ExperimentConfig) -> Result<RatesReport, CliError> {
    let model = cfg.validated_model()?;
    let report = analytic_rates(&model)?;
    write_json(&cfg.outputs.dir.join("rates.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub index: usize,
    pub seed: u64,
    pub stream: u64,
    pub time: f64,
    pub code: &'static str,
    pub message: String,
}

impl FailureRecord {
    fn new(index: usize, e: &SimulationError) -> Self {
        Self {
            index,
            seed: e.seed,
            stream: e.stream,
            time: e.time,
            code: e.source.code(),
            message: e.source.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub state: usize,
    pub table: Option<PhaseTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub generated_at: u64,
    pub dim: usize,
    pub gamma: f64,
    pub eta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub epsilon: f64,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub n_failed: usize,
    pub failures: Vec<FailureRecord>,
    pub n_no_collapse: usize,
    pub transit_fraction: f64,
    pub jump_stats: Option<JumpStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_stats_error: Option<&'static str>,
    pub mean_dwell_time: Option<f64>,
    pub occupation: Option<Vec<f64>>,
    pub analytic: RatesReport,
    pub z_scores: Option<Vec<Vec<Option<f64>>>>,
    pub collapse_frequencies: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_means: Option<Vec<PhaseSummary>>,
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn ensemble_config(exp: &Experiment, cfg: &ExperimentConfig, keep: bool) -> EnsembleConfig {
    let params = SimulationParams::new(exp.dt, cfg.run.horizon).with_decimation(cfg.run.decimation);
    EnsembleConfig::new(params, cfg.run.n_trajectories, cfg.run.master_seed)
        .with_epsilon(cfg.run.epsilon)
        .keep_trajectories(keep)
}

fn stability(exp: &Experiment, seed: u64) -> Result<(), CliError> {
    check_stability(exp.dt, exp.model.gamma()).map_err(|source| {
        CliError::Simulation(SimulationError {
            time: 0.0,
            seed,
            stream: 0,
            source,
        })
    })
}

fn first_failure<'a>(errors: impl Iterator<Item = &'a SimulationError>, total: usize) -> Result<(), CliError> {
    let errors: Vec<_> = errors.collect();
    match errors.first() {
        None => Ok(()),
        Some(first) => Err(CliError::Trajectories {
            failed: errors.len(),
            total,
            first: (*first).clone(),
        }),
    }
}

/// Jump statistics of an ensemble, with the reason when there are none.
fn jump_summary(out: &EnsembleOutcome) -> (Option<JumpStats>, Option<&'static str>) {
    match out.jump_stats() {
        Ok(s) if s.n_trajectories > 0 => (Some(s), None),
        Ok(_) => (None, Some("no_collapse")),
        Err(e) => (None, Some(e.code())),
    }
}

/// `jumplab simulate`: runs the ensemble and writes `summary.json`,
/// `meanq.csv` and the optional per-trajectory files. Any trajectory
/// failure is returned as an error after everything else is written.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let exp = cfg.resolve()?;
    let analytic = analytic_rates(&exp.model)?;
    stability(&exp, cfg.run.master_seed)?;
    let dir = &cfg.outputs.dir;
    echo_config(cfg, &exp.model)?;
    write_json(&dir.join("rates.json"), &analytic)?;

    let rho0 = DensityMatrix::from_populations(&exp.initial)?;
    let ens = ensemble_config(&exp, cfg, true);
    let out = run_sme_ensemble(&exp.model, &rho0, &ens);

    let (jump_stats, jump_stats_error) = jump_summary(&out);
    let paths = out.paths();
    let collapse = collapse_frequencies(&paths, cfg.run.horizon).ok().filter(|_| !paths.is_empty());
    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        generated_at: timestamp(),
        dim: exp.model.dim(),
        gamma: exp.model.gamma(),
        eta: exp.model.eta(),
        dt: exp.dt,
        horizon: cfg.run.horizon,
        burn_in: exp.burn_in,
        epsilon: cfg.run.epsilon,
        n_trajectories: cfg.run.n_trajectories,
        master_seed: cfg.run.master_seed,
        n_failed: out.failures().count(),
        failures: out
            .reports
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| FailureRecord::new(r.index, e)))
            .collect(),
        n_no_collapse: out.no_collapse_count(),
        transit_fraction: out.transit_fraction(),
        mean_dwell_time: jump_stats.as_ref().map(|s| s.mean_dwell_time()).filter(|d| d.is_finite()),
        occupation: jump_stats.as_ref().map(|s| s.occupation_fractions()),
        z_scores: jump_stats.as_ref().map(|s| s.z_scores(&analytic.generator())),
        jump_stats,
        jump_stats_error,
        analytic,
        collapse_frequencies: collapse,
        phase_means: None,
    };

    if let Some(mean) = out.mean_q() {
        write_file(&dir.join("meanq.csv"), &mean.to_csv())?;
    }
    if cfg.outputs.save_trajectories {
        for r in &out.reports {
            if let Some(tr) = &r.trajectory {
                write_file(&dir.join(format!("trajectories/traj_{:05}.csv", r.index)), &tr.to_csv())?;
            }
        }
    }

    let mut qy_errors = Vec::new();
    if cfg.outputs.save_qy {
        let tensors = decompose(&exp.model);
        let qy = run_qy_ensemble(
            &tensors,
            exp.model.setup(),
            &exp.initial,
            exp.burn_in,
            &ensemble_config(&exp, cfg, cfg.outputs.save_trajectories),
        )?;
        summary.phase_means = Some(
            (0..exp.model.dim())
                .map(|state| match qy.phase(state).map(|p| p.table()) {
                    Some(Ok(table)) => PhaseSummary {
                        state,
                        table: Some(table),
                        error: None,
                    },
                    Some(Err(e)) => PhaseSummary {
                        state,
                        table: None,
                        error: Some(e.code()),
                    },
                    None => PhaseSummary {
                        state,
                        table: None,
                        error: Some("empty_ensemble"),
                    },
                })
                .collect(),
        );
        for r in &qy.reports {
            if let Some(tr) = &r.trajectory {
                write_file(&dir.join(format!("qy/qy_{:05}.csv", r.index)), &tr.to_csv())?;
            }
            if let Some(e) = &r.error {
                summary.failures.push(FailureRecord::new(r.index, e));
                qy_errors.push(e.clone());
            }
        }
        summary.n_failed += qy_errors.len();
    }

    write_json(&dir.join("summary.json"), &summary)?;
    let sme_errors = out.reports.iter().filter_map(|r| r.error.as_ref());
    first_failure(sme_errors.chain(qy_errors.iter()), summary.n_trajectories)?;
    Ok(summary)
}

/// One `sweep.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub dt: f64,
    /// Fixed Hamiltonian `γ_ref·H1` from the config.
    pub fixed_jumps: u64,
    pub fixed_mean_dwell_time: f64,
    pub fixed_predicted_dwell_time: f64,
    /// Rescaled Hamiltonian `γ·H1`.
    pub rescaled_jumps: u64,
    pub rescaled_rate: f64,
    pub rescaled_predicted_rate: f64,
    pub n_failed: usize,
}

const SWEEP_HEADER: &str = "gamma,dt,fixed_jumps,fixed_mean_dwell_time,fixed_predicted_dwell_time,rescaled_jumps,rescaled_rate,rescaled_predicted_rate,n_failed";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.12e},{},{:.12e},{:.12e},{},{:.12e},{:.12e},{}",
            r.gamma,
            r.dt,
            r.fixed_jumps,
            r.fixed_mean_dwell_time,
            r.fixed_predicted_dwell_time,
            r.rescaled_jumps,
            r.rescaled_rate,
            r.rescaled_predicted_rate,
            r.n_failed
        );
    }
    s
}

/// Stationary-weighted exit rate, the long-run jump frequency.
fn mean_exit_rate(gen: &RateGenerator) -> f64 {
    let n = gen.dim;
    match stationary(gen) {
        Ok(p) => (0..n).map(|i| p[i] * gen.exit_rate(i)).sum(),
        Err(_) => (0..n).map(|i| gen.exit_rate(i)).sum::<f64>() / n as f64,
    }
}

fn total_jumps(s: &Option<JumpStats>) -> u64 {
    s.as_ref().map_or(0, |s| s.transition_counts.iter().flatten().sum())
}

fn empirical_rate(s: &Option<JumpStats>) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| {
        let dwell: f64 = s.dwell_time_totals.iter().sum();
        total_jumps(&Some(s.clone())) as f64 / dwell
    })
}

/// `jumplab zeno`: one ensemble per γ for the fixed and for the rescaled
/// Hamiltonian; writes `sweep.csv`.
pub fn cmd_zeno(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if gammas.len() < 2 {
        return Err(CliError::Usage(format!("zeno needs at least two gammas, got {}", gammas.len())));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(CliError::Usage(format!("gamma {g} must be positive")));
    }
    let base = cfg.validated_model()?;
    let g_ref = base.gamma();
    if g_ref <= 0.0 {
        return Err(CliError::Config("zeno needs the config model at gamma > 0 to fix the Hamiltonian".into()));
    }
    echo_config(cfg, &base)?;

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &gamma in gammas {
        let rescaled = base.model().clone().with_gamma(gamma);
        let mut fixed = rescaled.clone();
        fixed.h1 = fixed.h1.scale_real(g_ref / gamma);
        let failed_before = errors.len();
        let mut one = |model: LindbladModel| -> Result<(Option<JumpStats>, RateGenerator, f64), CliError> {
            let model = model.validate()?;
            let mut run_cfg = cfg.clone();
            run_cfg.model = ModelSource::Inline(ModelFile::from_model(model.model()));
            let exp = run_cfg.resolve()?;
            stability(&exp, cfg.run.master_seed)?;
            let gen = jump_rates(&decompose(&model), model.setup())?;
            let rho0 = DensityMatrix::from_populations(&exp.initial)?;
            let out = run_sme_ensemble(&model, &rho0, &ensemble_config(&exp, &run_cfg, false));
            errors.extend(out.failures().filter_map(|r| r.error.clone()));
            Ok((jump_summary(&out).0, gen, exp.dt))
        };
        let (fixed_stats, fixed_gen, dt) = one(fixed)?;
        let (rescaled_stats, rescaled_gen, _) = one(rescaled)?;
        rows.push(SweepRow {
            gamma,
            dt,
            fixed_jumps: total_jumps(&fixed_stats),
            fixed_mean_dwell_time: 1.0 / empirical_rate(&fixed_stats),
            fixed_predicted_dwell_time: 1.0 / mean_exit_rate(&fixed_gen),
            rescaled_jumps: total_jumps(&rescaled_stats),
            rescaled_rate: empirical_rate(&rescaled_stats),
            rescaled_predicted_rate: mean_exit_rate(&rescaled_gen),
            n_failed: errors.len() - failed_before,
        });
    }
    write_file(&cfg.outputs.dir.join("sweep.csv"), &sweep_csv(&rows))?;
    first_failure(errors.iter(), 2 * gammas.len() * cfg.run.n_trajectories)?;
    Ok(rows)
}
