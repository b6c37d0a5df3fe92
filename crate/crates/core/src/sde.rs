//! Integrators for the conditioned evolution.
//!
//! * [`simulate_sme`] integrates the stochastic master equation for `ρ`
//!   and accumulates the measurement record.
//! * [`simulate_qy`] integrates the rescaled population/phase system
//!   `(Q, Y = γU)` driven by the tensors of [`crate::decompose`].
//! * [`integrate_lindblad`] solves the noise-averaged equation.
//!
//! Noise for trajectory `n` of an ensemble seeded with `master` comes from
//! ChaCha8 stream `n` of key `master`, so results do not depend on the
//! order in which trajectories are run.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::SuperoperatorTensors;
use crate::matrix::{mul_adj_into, mul_into, CMatrix, C64};
use crate::model::{DensityMatrix, MeasurementSetup, ValidatedModel};
use crate::rates::delta;

/// Largest admissible `dt · γ²`.
pub const STABILITY_LIMIT: f64 = 0.05;
/// `ρ + margin·I` must stay positive definite after every step.
pub const POSITIVITY_MARGIN: f64 = 1e-6;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("dt·γ² = {product} exceeds {STABILITY_LIMIT} (dt = {dt}, γ = {gamma})")]
    StabilityGuard { dt: f64, gamma: f64, product: f64 },
    #[error("state lost positivity (smallest eigenvalue {min_eigenvalue:e})")]
    PositivityBreach { min_eigenvalue: f64 },
    #[error("state became non-finite")]
    NonFinite,
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("horizon/dt = {0} steps exceeds 1e9")]
    TooManySteps(f64),
}

impl StepError {
    pub fn code(&self) -> &'static str {
        match self {
            StepError::StabilityGuard { .. } => "stability_guard",
            StepError::PositivityBreach { .. } => "positivity_breach",
            StepError::NonFinite => "non_finite",
            StepError::InvalidStep(_) => "invalid_step",
            StepError::TooManySteps(_) => "too_many_steps",
        }
    }
}

/// A step failure tagged with where it happened.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("trajectory (seed {seed}, stream {stream}) failed at t = {time}: {source}")]
pub struct SimulationError {
    pub time: f64,
    pub seed: u64,
    pub stream: u64,
    #[source]
    pub source: StepError,
}

pub fn check_stability(dt: f64, gamma: f64) -> Result<(), StepError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::InvalidStep(dt));
    }
    let product = dt * gamma * gamma;
    // slack so that dt = 0.05/γ² itself is accepted
    if product > STABILITY_LIMIT * (1.0 + 1e-12) {
        return Err(StepError::StabilityGuard { dt, gamma, product });
    }
    Ok(())
}

/// Default step: `0.02/γ²`, shortened when another term of the generator is
/// faster than the measurement.
pub fn auto_dt(model: &ValidatedModel) -> f64 {
    let g = model.gamma();
    let m = model.model();
    let jumps: f64 = m.na.iter().map(|n| n.frobenius_norm().powi(2)).sum();
    let scale = [
        g * g,
        g * m.h1.frobenius_norm(),
        g * g * m.h2_diag.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        jumps,
        1.0,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    0.02 / scale
}

/// Time-stepping rule for the density matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `ρ' ∝ MρM† + dt Σ JρJ†` with `M = I + K dt + γ√η N dy`: the first
    /// order Euler step written as a completely positive map, so the state
    /// stays a density matrix whatever the noise draw.
    #[default]
    Kraus,
    /// Plain `ρ' = ρ + drift·dt + γ√η D_N(ρ) dW`, hermitized and
    /// renormalized.
    EulerMaruyama,
}

/// Allocation-free stepper for one trajectory.
pub struct SmeStepper<'a> {
    model: &'a ValidatedModel,
    scheme: Scheme,
    m: CMatrix,
    t1: CMatrix,
    t2: CMatrix,
    out: CMatrix,
    scratch: [CMatrix; 2],
    /// Largest `|tr ρ − 1|` seen before renormalization.
    pub max_trace_defect: f64,
}

impl<'a> SmeStepper<'a> {
    pub fn new(model: &'a ValidatedModel, scheme: Scheme) -> Self {
        let n = model.dim();
        Self {
            model,
            scheme,
            m: CMatrix::zeros(n),
            t1: CMatrix::zeros(n),
            t2: CMatrix::zeros(n),
            out: CMatrix::zeros(n),
            scratch: [CMatrix::zeros(n), CMatrix::zeros(n)],
            max_trace_defect: 0.0,
        }
    }

    /// Advances `rho` in place by `dt` with Wiener increment `dw`.
    pub fn step(&mut self, rho: &mut CMatrix, dt: f64, dw: f64) -> Result<(), StepError> {
        let n = self.model.dim();
        let gamma = self.model.gamma();
        let eta = self.model.eta();
        let nu = self.model.nu();
        match self.scheme {
            Scheme::EulerMaruyama => {
                self.model.drift_into(rho, &mut self.out, &mut self.scratch);
                self.model.innovation_into(rho, &mut self.t1);
                let c = gamma * eta.sqrt() * dw;
                for ((o, d), r) in self
                    .out
                    .as_mut_slice()
                    .iter_mut()
                    .zip(self.t1.as_slice())
                    .zip(rho.as_slice())
                {
                    *o = r + *o * dt + d * c;
                }
            }
            Scheme::Kraus => {
                let dy = gamma * eta.sqrt() * self.model.mean_observable(rho) * dt + dw;
                let k = self.model.effective_generator();
                for i in 0..n {
                    for j in 0..n {
                        self.m[(i, j)] = k[(i, j)] * dt;
                    }
                    self.m[(i, i)] += 1.0 + nu[i] * (gamma * eta.sqrt() * dy);
                }
                mul_into(&self.m, rho, &mut self.t1);
                mul_adj_into(&self.t1, &self.m, &mut self.out);
                for jump in self.model.jump_operators() {
                    mul_into(jump, rho, &mut self.t1);
                    mul_adj_into(&self.t1, jump, &mut self.t2);
                    for (o, x) in self.out.as_mut_slice().iter_mut().zip(self.t2.as_slice()) {
                        *o += x * dt;
                    }
                }
                let lost = (1.0 - eta) * gamma * gamma * dt;
                if lost > 0.0 {
                    for i in 0..n {
                        for j in 0..n {
                            self.out[(i, j)] += rho[(i, j)] * nu[i] * nu[j].conj() * lost;
                        }
                    }
                }
            }
        }
        let tr = self.out.trace().re;
        if !tr.is_finite() || tr <= 0.0 {
            return Err(StepError::NonFinite);
        }
        if self.scheme == Scheme::EulerMaruyama {
            self.max_trace_defect = self.max_trace_defect.max((tr - 1.0).abs());
        }
        let inv = 1.0 / tr;
        for (r, o) in rho.as_mut_slice().iter_mut().zip(self.out.as_slice()) {
            *r = o * inv;
        }
        rho.hermitize_in_place();
        if !rho.is_positive_with_margin(POSITIVITY_MARGIN) {
            let min_eigenvalue = rho.min_eigenvalue().unwrap_or(f64::NAN);
            return Err(StepError::PositivityBreach { min_eigenvalue });
        }
        Ok(())
    }
}

/// One plain Euler–Maruyama step of the stochastic master equation,
/// followed by hermitization and renormalization.
pub fn step_sme(
    rho: &DensityMatrix,
    model: &ValidatedModel,
    dt: f64,
    dw: f64,
) -> Result<DensityMatrix, StepError> {
    check_stability(dt, model.gamma())?;
    let mut next = rho.as_matrix().clone();
    SmeStepper::new(model, Scheme::EulerMaruyama).step(&mut next, dt, dw)?;
    Ok(DensityMatrix::new_unchecked(next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub dt: f64,
    pub horizon: f64,
    /// Store every `decimation`-th step.
    pub decimation: usize,
    pub scheme: Scheme,
    /// Keep the off-diagonal part of the stored states.
    pub store_coherences: bool,
    /// Number of most recent full-rate samples retained.
    pub recent_window: usize,
}

impl SimulationParams {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            decimation: 100,
            scheme: Scheme::Kraus,
            store_coherences: false,
            recent_window: 256,
        }
    }

    pub fn with_decimation(mut self, decimation: usize) -> Self {
        self.decimation = decimation.max(1);
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_coherences(mut self, on: bool) -> Self {
        self.store_coherences = on;
        self
    }

    pub fn with_recent_window(mut self, n: usize) -> Self {
        self.recent_window = n;
        self
    }

    pub fn steps(&self) -> Result<u64, StepError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StepError::InvalidStep(self.dt));
        }
        let n = (self.horizon / self.dt).round();
        if n > 1e9 {
            return Err(StepError::TooManySteps(n));
        }
        Ok(n.max(0.0) as u64)
    }
}

/// Fixed-capacity buffer of the latest full-rate `(t, Q)` samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecentWindow {
    capacity: usize,
    dim: usize,
    times: VecDeque<f64>,
    q: VecDeque<f64>,
}

impl RecentWindow {
    pub fn new(capacity: usize, dim: usize) -> Self {
        Self {
            capacity,
            dim,
            times: VecDeque::with_capacity(capacity),
            q: VecDeque::with_capacity(capacity * dim),
        }
    }

    #[inline]
    pub fn push(&mut self, t: f64, rho: &CMatrix) {
        if self.capacity == 0 {
            return;
        }
        if self.times.len() == self.capacity {
            self.times.pop_front();
            self.q.drain(..self.dim);
        }
        self.times.push_back(t);
        self.q.extend((0..self.dim).map(|k| rho[(k, k)].re));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn samples(&self) -> Vec<(f64, Vec<f64>)> {
        self.times
            .iter()
            .enumerate()
            .map(|(n, &t)| (t, self.q.range(n * self.dim..(n + 1) * self.dim).copied().collect()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Populations `Q_i` at each stored time.
    pub q: Vec<Vec<f64>>,
    /// Coherences `U_ij`, `i < j` in lexicographic order, when requested.
    pub u: Option<Vec<Vec<C64>>>,
    /// Cumulative measurement signal `x_t`.
    pub record: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub gamma: f64,
    pub dt: f64,
    pub final_state: CMatrix,
    pub recent: RecentWindow,
    pub max_trace_defect: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.final_state.dim()
    }

    /// CSV with header `t,Q_0,...,Q_{d-1},x`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::from("t");
        for k in 0..d {
            let _ = write!(s, ",Q_{k}");
        }
        s.push_str(",x\n");
        for (n, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t:.12e}");
            for q in &self.q[n] {
                let _ = write!(s, ",{q:.12e}");
            }
            let _ = writeln!(s, ",{:.12e}", self.record[n]);
        }
        s
    }
}

/// Integrates the stochastic master equation from `rho0`.
pub fn simulate_sme(
    model: &ValidatedModel,
    rho0: &DensityMatrix,
    params: &SimulationParams,
    seed: u64,
) -> Result<Trajectory, SimulationError> {
    simulate_sme_observed(model, rho0, params, seed, 0, |_, _| {})
}

/// [`simulate_sme`] on stream `stream`, calling `observer(t, ρ_t)` at
/// `t = 0` and after every step.
pub fn simulate_sme_observed(
    model: &ValidatedModel,
    rho0: &DensityMatrix,
    params: &SimulationParams,
    seed: u64,
    stream: u64,
    mut observer: impl FnMut(f64, &CMatrix),
) -> Result<Trajectory, SimulationError> {
    let fail = |time: f64, source: StepError| SimulationError {
        time,
        seed,
        stream,
        source,
    };
    check_stability(params.dt, model.gamma()).map_err(|e| fail(0.0, e))?;
    let steps = params.steps().map_err(|e| fail(0.0, e))?;
    let dec = params.decimation.max(1) as u64;
    let dim = model.dim();
    let dt = params.dt;
    let sqrt_dt = dt.sqrt();
    let inv_sqrt_eta = 1.0 / model.eta().sqrt();
    let gamma = model.gamma();

    let mut rng = stream_rng(seed, stream);
    let mut stepper = SmeStepper::new(model, params.scheme);
    let mut rho = rho0.as_matrix().clone();
    let mut x = 0.0;
    let capacity = (steps / dec + 1) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut q = Vec::with_capacity(capacity);
    let mut record = Vec::with_capacity(capacity);
    let mut u = params.store_coherences.then(|| Vec::with_capacity(capacity));
    let mut recent = RecentWindow::new(params.recent_window, dim);

    let mut store = |t: f64, rho: &CMatrix, x: f64| {
        times.push(t);
        q.push(rho.real_diagonal());
        record.push(x);
        if let Some(u) = u.as_mut() {
            let mut row = Vec::with_capacity(dim * (dim - 1) / 2);
            for i in 0..dim {
                for j in (i + 1)..dim {
                    row.push(rho[(i, j)]);
                }
            }
            u.push(row);
        }
    };
    store(0.0, &rho, 0.0);
    observer(0.0, &rho);
    recent.push(0.0, &rho);

    for n in 1..=steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let dw = sqrt_dt * xi;
        x += gamma * model.mean_observable(&rho) * dt + dw * inv_sqrt_eta;
        let t = n as f64 * dt;
        stepper.step(&mut rho, dt, dw).map_err(|e| fail(t, e))?;
        observer(t, &rho);
        recent.push(t, &rho);
        if n % dec == 0 {
            store(t, &rho, x);
        }
    }
    Ok(Trajectory {
        times,
        q,
        u,
        record,
        seed,
        stream,
        gamma,
        dt,
        final_state: rho,
        recent,
        max_trace_defect: stepper.max_trace_defect,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QYTrajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    /// `Y_ij` for `i < j` in lexicographic order; `Y_ji` is its conjugate.
    pub y: Vec<Vec<C64>>,
    pub seed: u64,
    pub stream: u64,
}

impl QYTrajectory {
    /// Position of `(i, j)`, `i < j`, in each row of [`y`](Self::y).
    pub fn pair_index(dim: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < dim);
        i * (2 * dim - i - 1) / 2 + (j - i - 1)
    }

    pub fn y_at(&self, n: usize, i: usize, j: usize) -> C64 {
        if i < j {
            self.y[n][Self::pair_index(self.dim, i, j)]
        } else {
            self.y[n][Self::pair_index(self.dim, j, i)].conj()
        }
    }

    /// CSV with header `t,Q_0,...,ReY_01,ImY_01,...`.
    pub fn to_csv(&self) -> String {
        let d = self.dim;
        let mut s = String::from("t");
        for k in 0..d {
            let _ = write!(s, ",Q_{k}");
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let _ = write!(s, ",ReY_{i}{j},ImY_{i}{j}");
            }
        }
        s.push('\n');
        for (n, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t:.12e}");
            for q in &self.q[n] {
                let _ = write!(s, ",{q:.12e}");
            }
            for y in &self.y[n] {
                let _ = write!(s, ",{:.12e},{:.12e}", y.re, y.im);
            }
            s.push('\n');
        }
        s
    }
}

/// Integrates the rescaled `(Q, Y)` system from the diagonal state `q0`
/// (so `Y(0) = 0`).
///
/// The multiplicative noise factors are applied in exponential form,
/// `Q_i ← Q_i exp(a_i dW − a_i² dt / 2)`, which matches Euler–Maruyama to
/// first order and keeps minority populations from changing sign on large
/// noise draws.
pub fn simulate_qy(
    tensors: &SuperoperatorTensors,
    setup: &MeasurementSetup,
    q0: &[f64],
    params: &SimulationParams,
    seed: u64,
) -> Result<QYTrajectory, SimulationError> {
    simulate_qy_observed(tensors, setup, q0, params, seed, 0, |_, _, _| {})
}

/// [`simulate_qy`] on stream `stream` with a per-step observer receiving
/// `(t, Q, Y)`, `Y` as a full row-major `dim × dim` table.
#[allow(clippy::too_many_arguments)]
pub fn simulate_qy_observed(
    tensors: &SuperoperatorTensors,
    setup: &MeasurementSetup,
    q0: &[f64],
    params: &SimulationParams,
    seed: u64,
    stream: u64,
    mut observer: impl FnMut(f64, &[f64], &[C64]),
) -> Result<QYTrajectory, SimulationError> {
    let fail = |time: f64, source: StepError| SimulationError {
        time,
        seed,
        stream,
        source,
    };
    let gamma = setup.gamma;
    check_stability(params.dt, gamma).map_err(|e| fail(0.0, e))?;
    let steps = params.steps().map_err(|e| fail(0.0, e))?;
    let dec = params.decimation.max(1) as u64;
    let n = tensors.dim();
    let dt = params.dt;
    let sqrt_dt = dt.sqrt();
    let g2 = gamma * gamma;
    let noise = gamma * setup.eta.sqrt();
    let lambda = setup.lambdas();
    let nu = &setup.nu;
    let mut deltas = vec![C64::new(0.0, 0.0); n * n];
    for k in 0..n {
        for l in 0..n {
            if k != l {
                deltas[k * n + l] = delta(k, l, tensors, setup).expect("k != l");
            }
        }
    }

    let mut rng = stream_rng(seed, stream);
    let mut q = q0.to_vec();
    let mut y = vec![C64::new(0.0, 0.0); n * n];
    let mut aq = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut dy = vec![C64::new(0.0, 0.0); n * n];

    let mut times = Vec::new();
    let mut qs = Vec::new();
    let mut ys = Vec::new();
    let mut store = |t: f64, q: &[f64], y: &[C64]| {
        times.push(t);
        qs.push(q.to_vec());
        let mut row = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                row.push(y[i * n + j]);
            }
        }
        ys.push(row);
    };
    store(0.0, &q, &y);
    observer(0.0, &q, &y);

    for step in 1..=steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let dw = sqrt_dt * xi;
        let t = step as f64 * dt;
        let mean: f64 = q.iter().zip(&lambda).map(|(a, b)| a * b).sum();

        tensors.apply_a(&q, &mut aq);
        tensors.apply_b(&y, &mut by);
        for k in 0..n {
            for l in (k + 1)..n {
                dy[k * n + l] =
                    (tensors.apply_c(&q, k, l) - deltas[k * n + l] * y[k * n + l]) * (g2 * dt);
            }
        }
        for i in 0..n {
            let a = noise * (lambda[i] - mean);
            let carried = q[i] * (a * dw - 0.5 * a * a * dt).exp();
            let drift = aq[i] + by[i];
            q[i] = if drift >= 0.0 {
                carried + drift * dt
            } else {
                // Patankar weighting: losses act in proportion to what is left
                let denom = q[i] - drift * dt;
                if denom > 0.0 {
                    carried * q[i] / denom
                } else {
                    0.0
                }
            };
        }
        for k in 0..n {
            for l in (k + 1)..n {
                let b = (nu[k] + nu[l].conj() - mean) * noise;
                let v = y[k * n + l] * (b * dw - 0.5 * b * b * dt).exp() + dy[k * n + l];
                y[k * n + l] = v;
                y[l * n + k] = v.conj();
            }
        }
        let total: f64 = q.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(fail(t, StepError::NonFinite));
        }
        q.iter_mut().for_each(|x| *x /= total);
        y.iter_mut().for_each(|x| *x /= total);
        if let Some(&min) = q.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -POSITIVITY_MARGIN {
                return Err(fail(t, StepError::PositivityBreach { min_eigenvalue: min }));
            }
        }
        observer(t, &q, &y);
        if step % dec == 0 {
            store(t, &q, &y);
        }
    }
    Ok(QYTrajectory {
        dim: n,
        times,
        q: qs,
        y: ys,
        seed,
        stream,
    })
}

/// Noise-averaged evolution sampled every `record_every` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladPath {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

/// Fourth-order Runge–Kutta on `dρ = (L(ρ) + γ² L_N(ρ)) dt`.
pub fn integrate_lindblad(
    model: &ValidatedModel,
    rho0: &DensityMatrix,
    dt: f64,
    horizon: f64,
    record_every: usize,
) -> Result<LindbladPath, StepError> {
    check_stability(dt, model.gamma())?;
    let steps = SimulationParams::new(dt, horizon).steps()?;
    let every = record_every.max(1) as u64;
    let n = model.dim();
    let mut scratch = [CMatrix::zeros(n), CMatrix::zeros(n)];
    let mut k = [CMatrix::zeros(n), CMatrix::zeros(n), CMatrix::zeros(n), CMatrix::zeros(n)];
    let mut tmp = CMatrix::zeros(n);
    let mut rho = rho0.as_matrix().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    let stage = |base: &CMatrix, inc: &CMatrix, h: f64, out: &mut CMatrix| {
        for ((o, b), d) in out.as_mut_slice().iter_mut().zip(base.as_slice()).zip(inc.as_slice()) {
            *o = b + d * h;
        }
    };
    for step in 1..=steps {
        model.drift_into(&rho, &mut k[0], &mut scratch);
        stage(&rho, &k[0], 0.5 * dt, &mut tmp);
        model.drift_into(&tmp, &mut k[1], &mut scratch);
        stage(&rho, &k[1], 0.5 * dt, &mut tmp);
        model.drift_into(&tmp, &mut k[2], &mut scratch);
        stage(&rho, &k[2], dt, &mut tmp);
        model.drift_into(&tmp, &mut k[3], &mut scratch);
        for idx in 0..n * n {
            let inc = k[0].as_slice()[idx]
                + 2.0 * k[1].as_slice()[idx]
                + 2.0 * k[2].as_slice()[idx]
                + k[3].as_slice()[idx];
            rho.as_mut_slice()[idx] += inc * (dt / 6.0);
        }
        if !rho.trace().re.is_finite() {
            return Err(StepError::NonFinite);
        }
        if step % every == 0 {
            times.push(step as f64 * dt);
            states.push(rho.clone());
        }
    }
    Ok(LindbladPath { times, states })
}
