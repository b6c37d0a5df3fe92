//! The limiting jump process: its generator, stationary law, transient
//! solution and an exact sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::SuperoperatorTensors;
use crate::matrix::C64;
use crate::model::MeasurementSetup;
use crate::sde::stream_rng;

pub const NEGATIVE_RATE_TOL: f64 = 1e-9;
pub const VANISHING_DELTA_TOL: f64 = 1e-12;
const DIAGONAL_CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("delta is undefined on the diagonal (k = l = {0})")]
    DiagonalPair(usize),
    #[error("Re Δ_{k}{l} = {re:e} vanishes on an active pair")]
    VanishingDelta { k: usize, l: usize, re: f64 },
    #[error("rate m^{from}_{to} = {rate:e} is negative")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("diagonal m^{state}_{state}: row sum gives {from_rows:e}, direct formula {direct:e}")]
    InconsistentDiagonal {
        state: usize,
        from_rows: f64,
        direct: f64,
    },
    #[error("generator has {0} closed classes and no unique stationary distribution")]
    Reducible(usize),
    #[error("stationary solve failed: residual {0:e}")]
    Singular(f64),
}

impl RateError {
    pub fn code(&self) -> &'static str {
        match self {
            RateError::DiagonalPair(_) => "diagonal_pair",
            RateError::VanishingDelta { .. } => "vanishing_delta",
            RateError::NegativeRate { .. } => "negative_rate",
            RateError::InconsistentDiagonal { .. } => "inconsistent_diagonal",
            RateError::Reducible(_) => "reducible",
            RateError::Singular(_) => "singular",
        }
    }
}

/// `Δ_kl = ½(|ν_k|² + |ν_l|² − 2 ν_k ν̄_l) + d_kl`.
pub fn delta(
    k: usize,
    l: usize,
    tensors: &SuperoperatorTensors,
    setup: &MeasurementSetup,
) -> Result<C64, RateError> {
    if k == l {
        return Err(RateError::DiagonalPair(k));
    }
    let nu = &setup.nu;
    Ok(0.5 * (nu[k].norm_sqr() + nu[l].norm_sqr()) - nu[k] * nu[l].conj() + tensors.d(k, l))
}

/// `2 Re Σ_{k<l} 𝒞^i_{kl} ℬ^{kl}_j / Δ_kl` for an arbitrary `Δ`.
pub fn hamiltonian_rate(
    tensors: &SuperoperatorTensors,
    i: usize,
    j: usize,
    delta: impl Fn(usize, usize) -> C64,
) -> f64 {
    let n = tensors.dim();
    let mut s = C64::new(0.0, 0.0);
    for k in 0..n {
        for l in (k + 1)..n {
            let cb = tensors.c(i, k, l) * tensors.b(k, l, j);
            if cb.norm() != 0.0 {
                s += cb / delta(k, l);
            }
        }
    }
    2.0 * s.re
}

/// Same quantity summed over all ordered pairs, without the explicit `2 Re`.
pub fn hamiltonian_rate_ordered(
    tensors: &SuperoperatorTensors,
    i: usize,
    j: usize,
    delta: impl Fn(usize, usize) -> C64,
) -> C64 {
    let n = tensors.dim();
    let mut s = C64::new(0.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            let cb = tensors.c(i, k, l) * tensors.b(k, l, j);
            if k != l && cb.norm() != 0.0 {
                s += cb / delta(k, l);
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGenerator {
    pub dim: usize,
    /// Row `i` holds the rates out of state `i`.
    pub m: Vec<Vec<f64>>,
}

impl RateGenerator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            m: vec![vec![0.0; dim]; dim],
        }
    }

    /// Builds a generator from its off-diagonal rates; the diagonal is
    /// overwritten with the negative row sums.
    pub fn from_rates(rates: Vec<Vec<f64>>) -> Self {
        let dim = rates.len();
        let mut m = rates;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 0.0;
            let s: f64 = row.iter().sum();
            row[i] = -s;
        }
        Self { dim, m }
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Total escape rate `-m^i_i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.m[i][i]
    }

    pub fn max_row_sum(&self) -> f64 {
        self.m
            .iter()
            .map(|r| r.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// `q · exp(tM)`, by scaling and squaring a Taylor series.
    pub fn propagate(&self, q0: &[f64], t: f64) -> Vec<f64> {
        let n = self.dim;
        let norm = self
            .m
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            * t.abs();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scale = t / 2f64.powi(squarings as i32);
        let a: Vec<Vec<f64>> = self.m.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
        let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect())
                .collect()
        };
        let mut e: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut term = e.clone();
        for k in 1..=18 {
            term = mul(&term, &a);
            for row in term.iter_mut() {
                for x in row.iter_mut() {
                    *x /= k as f64;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    e[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            e = mul(&e, &e);
        }
        (0..n).map(|j| (0..n).map(|i| q0[i] * e[i][j]).sum()).collect()
    }
}

/// The generator of the limiting jump process:
/// `m^i_j = 𝒜^i_j + 2 Re Σ_{k<l} 𝒞^i_{kl} ℬ^{kl}_j / Δ_kl`.
pub fn jump_rates(
    tensors: &SuperoperatorTensors,
    setup: &MeasurementSetup,
) -> Result<RateGenerator, RateError> {
    let n = tensors.dim();
    let mut deltas = vec![C64::new(0.0, 0.0); n * n];
    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            let d = delta(k, l, tensors, setup)?;
            if tensors.pair_active(k, l) && d.re <= VANISHING_DELTA_TOL {
                return Err(RateError::VanishingDelta { k, l, re: d.re });
            }
            deltas[k * n + l] = d;
        }
    }
    let delta_of = |k: usize, l: usize| deltas[k * n + l];

    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let r = tensors.a(i, j) + hamiltonian_rate(tensors, i, j, delta_of);
            if r < -NEGATIVE_RATE_TOL {
                return Err(RateError::NegativeRate { from: i, to: j, rate: r });
            }
            *x = r.max(0.0);
        }
    }
    let gen = RateGenerator::from_rates(m);
    for i in 0..n {
        let direct = tensors.a(i, i) + hamiltonian_rate(tensors, i, i, delta_of);
        let scale = 1.0 + gen.exit_rate(i);
        if (direct - gen.m[i][i]).abs() > DIAGONAL_CONSISTENCY_TOL * scale {
            return Err(RateError::InconsistentDiagonal {
                state: i,
                from_rows: gen.m[i][i],
                direct,
            });
        }
    }
    Ok(gen)
}

fn reachability(gen: &RateGenerator) -> Vec<Vec<bool>> {
    let n = gen.dim;
    let mut reach = vec![vec![false; n]; n];
    for (s, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![s];
        row[s] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !row[j] && i != j && gen.m[i][j] > 0.0 {
                    row[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    reach
}

/// The unique `π` with `π M = 0`, `Σ π = 1`.
pub fn stationary(gen: &RateGenerator) -> Result<Vec<f64>, RateError> {
    let n = gen.dim;
    let reach = reachability(gen);
    // a state is recurrent iff everything it reaches leads back to it
    let recurrent: Vec<bool> = (0..n)
        .map(|i| (0..n).all(|j| !reach[i][j] || reach[j][i]))
        .collect();
    let mut classes: Vec<usize> = Vec::new();
    for i in (0..n).filter(|&i| recurrent[i]) {
        if !classes.iter().any(|&c| reach[c][i]) {
            classes.push(i);
        }
    }
    if classes.len() != 1 {
        return Err(RateError::Reducible(classes.len()));
    }

    // Solve Mᵀ π = 0 with the last equation replaced by normalization.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row: Vec<f64> = (0..n).map(|c| gen.m[c][r]).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(RateError::Singular(f64::INFINITY));
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let scale = 1.0 + (0..n).map(|i| gen.exit_rate(i)).fold(0.0, f64::max);
    let residual = (0..n)
        .map(|j| (0..n).map(|i| pi[i] * gen.m[i][j]).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 * scale {
        return Err(RateError::Singular(residual));
    }
    Ok(pi)
}

/// Piecewise-constant path on the pointer states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePath {
    pub dim: usize,
    /// `(entry time, state)`, strictly increasing times, first entry at 0
    /// for sampled paths.
    pub states: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl StatePath {
    pub fn transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Iterates `(state, start, end)` over the dwell intervals.
    pub fn intervals(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.states.iter().enumerate().map(move |(n, &(t, s))| {
            let end = self.states.get(n + 1).map_or(self.horizon, |e| e.0);
            (s, t, end)
        })
    }

    /// Total time spent in each state.
    pub fn occupation(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.dim];
        for (s, a, b) in self.intervals() {
            occ[s] += b - a;
        }
        occ
    }

    /// Path with every time multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> StatePath {
        StatePath {
            dim: self.dim,
            states: self.states.iter().map(|&(t, s)| (t * c, s)).collect(),
            horizon: self.horizon * c,
        }
    }
}

fn categorical(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

/// Exact sample of the jump process over `[0, horizon]`.
pub fn markov_sample(gen: &RateGenerator, q0: &[f64], horizon: f64, seed: u64) -> StatePath {
    markov_sample_stream(gen, q0, horizon, seed, 0)
}

/// [`markov_sample`] drawing from stream `stream` of `seed`.
pub fn markov_sample_stream(
    gen: &RateGenerator,
    q0: &[f64],
    horizon: f64,
    seed: u64,
    stream: u64,
) -> StatePath {
    let mut rng = stream_rng(seed, stream);
    let mut state = categorical(&mut rng, q0.iter().copied());
    let mut t = 0.0;
    let mut states = vec![(0.0, state)];
    loop {
        let exit = gen.exit_rate(state);
        if exit <= 0.0 {
            break;
        }
        t += Exp::new(exit).expect("positive rate").sample(&mut rng);
        if t >= horizon {
            break;
        }
        let row = &gen.m[state];
        let from = state;
        state = categorical(
            &mut rng,
            row.iter().enumerate().map(move |(j, &r)| if j == from { 0.0 } else { r }),
        );
        states.push((t, state));
    }
    StatePath {
        dim: gen.dim,
        states,
        horizon,
    }
}
