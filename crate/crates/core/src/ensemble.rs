//! Parallel trajectory ensembles.
//!
//! Trajectory `n` draws its noise from stream `n` of the master seed and
//! results are returned in index order, so every number produced here is
//! independent of the worker count.

use rayon::prelude::*;

use crate::analyze::{
    JumpDetector, JumpStats, MeanQ, MeanQAccumulator, PhaseAccumulator, TransitionTally,
};
use crate::decompose::SuperoperatorTensors;
use crate::matrix::{C64, MAX_DIM};
use crate::model::{DensityMatrix, MeasurementSetup, ValidatedModel};
use crate::rates::StatePath;
use crate::sde::{
    simulate_qy_observed, simulate_sme_observed, QYTrajectory, SimulationError, SimulationParams,
    Trajectory,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "JUMPLAB_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub params: SimulationParams,
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Threshold of the jump detector.
    pub epsilon: f64,
    /// Keep the decimated trajectories in the outcome.
    pub keep_trajectories: bool,
    /// Worker count; `None` reads [`THREADS_ENV`], then uses all cores.
    pub threads: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(params: SimulationParams, n_trajectories: usize, master_seed: u64) -> Self {
        Self {
            params,
            n_trajectories,
            master_seed,
            epsilon: crate::analyze::DEFAULT_EPSILON,
            keep_trajectories: true,
            threads: None,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn keep_trajectories(mut self, keep: bool) -> Self {
        self.keep_trajectories = keep;
        self
    }
}

fn thread_count(requested: Option<usize>) -> Option<usize> {
    requested
        .or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok())
        .filter(|&n| n > 0)
}

fn run_indexed<T: Send>(threads: Option<usize>, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let work = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    match thread_count(threads) {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

/// Result of one trajectory of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub index: usize,
    pub stream: u64,
    /// Telegraph path from full-rate detection; `None` if no pointer state
    /// was ever reached.
    pub path: Option<StatePath>,
    pub transits: Vec<f64>,
    pub trajectory: Option<Trajectory>,
    pub error: Option<SimulationError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub master_seed: u64,
    /// Sorted by trajectory index.
    pub reports: Vec<TrajectoryReport>,
}

impl EnsembleOutcome {
    pub fn paths(&self) -> Vec<StatePath> {
        self.reports.iter().filter_map(|r| r.path.clone()).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrajectoryReport> {
        self.reports.iter().filter(|r| r.error.is_some())
    }

    pub fn no_collapse_count(&self) -> usize {
        self.reports
            .iter()
            .filter(|r| r.error.is_none() && r.path.is_none())
            .count()
    }

    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.reports.iter().filter_map(|r| r.trajectory.as_ref()).collect()
    }

    pub fn tally(&self) -> TransitionTally {
        let dim = self.reports.iter().find_map(|r| r.path.as_ref().map(|p| p.dim)).unwrap_or(0);
        let mut t = TransitionTally::new(dim);
        for p in self.reports.iter().filter_map(|r| r.path.as_ref()) {
            t.add_path(p);
        }
        t
    }

    pub fn jump_stats(&self) -> Result<JumpStats, crate::analyze::AnalyzeError> {
        JumpStats::from_tally(&self.tally())
    }

    /// Mean populations over the successful trajectories.
    pub fn mean_q(&self) -> Option<MeanQ> {
        let trs = self.trajectories();
        let first = trs.first()?;
        let mut acc = MeanQAccumulator::new(&first.times, first.dim());
        for tr in trs {
            acc.add(&tr.times, &tr.q);
        }
        Some(acc.finish())
    }

    /// Fraction of elapsed time spent between pointer states, over paths
    /// with at least one assignment.
    pub fn transit_fraction(&self) -> f64 {
        let transit: f64 = self.reports.iter().flat_map(|r| r.transits.iter()).sum();
        let total: f64 = self.reports.iter().filter_map(|r| r.path.as_ref()).map(|p| p.horizon).sum();
        if total > 0.0 {
            transit / total
        } else {
            0.0
        }
    }
}

/// Runs `n_trajectories` stochastic master equation trajectories from `rho0`
/// with full-rate jump detection.
pub fn run_sme_ensemble(model: &ValidatedModel, rho0: &DensityMatrix, cfg: &EnsembleConfig) -> EnsembleOutcome {
    let dim = model.dim();
    let reports = run_indexed(cfg.threads, cfg.n_trajectories, |index| {
        let stream = index as u64;
        let mut detector = JumpDetector::new(dim, cfg.epsilon).expect("epsilon checked by caller");
        let mut diag = [0.0; MAX_DIM];
        let result = simulate_sme_observed(model, rho0, &cfg.params, cfg.master_seed, stream, |t, rho| {
            for (k, d) in diag.iter_mut().enumerate().take(dim) {
                *d = rho[(k, k)].re;
            }
            detector.push(t, &diag[..dim]);
        });
        let transits = detector.transit_durations().to_vec();
        match result {
            Ok(tr) => TrajectoryReport {
                index,
                stream,
                path: detector.finish(cfg.params.horizon).ok(),
                transits,
                trajectory: cfg.keep_trajectories.then_some(tr),
                error: None,
            },
            Err(e) => TrajectoryReport {
                index,
                stream,
                path: None,
                transits,
                trajectory: None,
                error: Some(e),
            },
        }
    });
    EnsembleOutcome {
        master_seed: cfg.master_seed,
        reports,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QyReport {
    pub index: usize,
    pub path: Option<StatePath>,
    /// One accumulator per pointer state.
    pub phases: Vec<PhaseAccumulator>,
    pub trajectory: Option<QYTrajectory>,
    pub error: Option<SimulationError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QyEnsembleOutcome {
    pub reports: Vec<QyReport>,
}

impl QyEnsembleOutcome {
    /// Conditional phase accumulator for `state`, merged in index order.
    pub fn phase(&self, state: usize) -> Option<PhaseAccumulator> {
        let mut it = self.reports.iter().filter(|r| r.error.is_none());
        let mut acc = it.next()?.phases.get(state)?.clone();
        for r in it {
            acc.merge(r.phases[state].clone());
        }
        Some(acc)
    }

    pub fn paths(&self) -> Vec<StatePath> {
        self.reports.iter().filter_map(|r| r.path.clone()).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &QyReport> {
        self.reports.iter().filter(|r| r.error.is_some())
    }
}

/// Runs the `(Q, Y)` system for every trajectory index, accumulating the
/// conditional phase means of every state at full rate.
pub fn run_qy_ensemble(
    tensors: &SuperoperatorTensors,
    setup: &MeasurementSetup,
    q0: &[f64],
    burn_in: f64,
    cfg: &EnsembleConfig,
) -> Result<QyEnsembleOutcome, crate::analyze::AnalyzeError> {
    let dim = tensors.dim();
    // validate once so the workers can unwrap
    for s in 0..dim {
        PhaseAccumulator::new(dim, s, cfg.epsilon, burn_in)?;
    }
    let reports = run_indexed(cfg.threads, cfg.n_trajectories, |index| {
        let mut detector = JumpDetector::new(dim, cfg.epsilon).expect("checked");
        let mut phases: Vec<PhaseAccumulator> = (0..dim)
            .map(|s| PhaseAccumulator::new(dim, s, cfg.epsilon, burn_in).expect("checked"))
            .collect();
        let mut upper = vec![C64::new(0.0, 0.0); dim * (dim - 1) / 2];
        let result = simulate_qy_observed(
            tensors,
            setup,
            q0,
            &cfg.params,
            cfg.master_seed,
            index as u64,
            |t, q, y| {
                let mut p = 0;
                for k in 0..dim {
                    for l in (k + 1)..dim {
                        upper[p] = y[k * dim + l];
                        p += 1;
                    }
                }
                detector.push(t, q);
                for acc in phases.iter_mut() {
                    acc.push(t, q, &upper);
                }
            },
        );
        match result {
            Ok(tr) => QyReport {
                index,
                path: detector.finish(cfg.params.horizon).ok(),
                phases: phases.into_iter().map(|p| p.finish()).collect(),
                trajectory: cfg.keep_trajectories.then_some(tr),
                error: None,
            },
            Err(e) => QyReport {
                index,
                path: None,
                phases: Vec::new(),
                trajectory: None,
                error: Some(e),
            },
        }
    });
    Ok(QyEnsembleOutcome { reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;

    #[test]
    fn outcome_does_not_depend_on_thread_count() {
        let m = rabi(1.0, 5.0, 1.0).validate().unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let p = SimulationParams::new(5e-4, 2.0).with_decimation(50);
        let cfg = EnsembleConfig::new(p, 6, 11);
        let a = run_sme_ensemble(&m, &rho, &cfg.clone().with_threads(1));
        let b = run_sme_ensemble(&m, &rho, &cfg.with_threads(3));
        assert_eq!(a, b);
        assert_eq!(a.reports.iter().map(|r| r.index).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn failures_are_reported_per_trajectory() {
        let m = rabi(1.0, 10.0, 1.0).validate().unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let p = SimulationParams::new(1e-3, 1.0);
        let out = run_sme_ensemble(&m, &rho, &EnsembleConfig::new(p, 2, 1));
        assert_eq!(out.failures().count(), 2);
        assert_eq!(out.reports[1].error.as_ref().unwrap().stream, 1);
    }
}
