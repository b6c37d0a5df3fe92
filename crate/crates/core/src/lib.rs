//! Jump-rate generators for continuously measured open quantum systems.
//!
//! In the strong-measurement limit the pointer-state populations of a
//! measured system perform a finite-state Markov jump process. This crate
//! computes that generator from the model (the `decompose` and `rates`
//! modules) and checks it against simulated quantum trajectories
//! (`sde`, `ensemble`, `analyze`).

pub mod analyze;
pub mod decompose;
pub mod ensemble;
pub mod matrix;
pub mod model;
pub mod rates;
pub mod sde;

pub use decompose::{decompose, validate_scaling, Mechanism, ScalingReport, SuperoperatorTensors};

pub use matrix::{CMatrix, MatrixError, C64};
pub use model::{
    presets, validate_model, DensityMatrix, LindbladModel, MeasurementSetup, ModelError,
    ModelFile, ValidatedModel,
};
pub use rates::{delta, jump_rates, markov_sample, stationary, RateError, RateGenerator, StatePath};
pub use sde::{
    integrate_lindblad, simulate_qy, simulate_sme, step_sme, QYTrajectory, Scheme,
    SimulationParams, StepError, Trajectory,
};
pub use analyze::{
    collapse_frequencies, conditional_phase_mean, detect_jumps, ensemble_mean_q,
    estimate_generator, AnalyzeError, JumpDetector, JumpStats, MeanQ, PhaseTable,
};
pub use ensemble::{run_qy_ensemble, run_sme_ensemble, EnsembleConfig, EnsembleOutcome};
