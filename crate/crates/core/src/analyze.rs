//! Jump statistics extracted from trajectory ensembles.

use serde::Serialize;
use thiserror::Error;

use crate::matrix::C64;
use crate::rates::{RateGenerator, StatePath};
use crate::sde::{QYTrajectory, Trajectory};

pub const DEFAULT_EPSILON: f64 = 0.1;
/// Fewest qualifying samples accepted by [`conditional_phase_mean`].
pub const MIN_PHASE_SAMPLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzeError {
    #[error("no pointer state was ever reached")]
    NoCollapse,
    #[error("the ensemble contains no transitions")]
    EmptyEnsemble,
    #[error("only {count} qualifying samples (need {MIN_PHASE_SAMPLES})")]
    InsufficientSamples { count: usize },
    #[error("trajectory {index} has a different time grid")]
    GridMismatch { index: usize },
    #[error("epsilon = {0} outside (0, 0.5)")]
    InvalidEpsilon(f64),
    #[error("{0}")]
    InvalidInput(String),
}

impl AnalyzeError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalyzeError::NoCollapse => "no_collapse",
            AnalyzeError::EmptyEnsemble => "empty_ensemble",
            AnalyzeError::InsufficientSamples { .. } => "insufficient_samples",
            AnalyzeError::GridMismatch { .. } => "grid_mismatch",
            AnalyzeError::InvalidEpsilon(_) => "invalid_epsilon",
            AnalyzeError::InvalidInput(_) => "invalid_input",
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), AnalyzeError> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(AnalyzeError::InvalidEpsilon(epsilon))
    }
}

#[inline]
fn assigned(q: &[f64], epsilon: f64) -> Option<usize> {
    q.iter().position(|&p| p >= 1.0 - epsilon)
}

/// Streaming threshold detector.
///
/// A sample is assigned to state `i` when `Q_i ≥ 1 − ε`. Unassigned
/// stretches count towards the last assigned state; a transition is
/// recorded at the first sample assigned to a different state.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDetector {
    dim: usize,
    epsilon: f64,
    states: Vec<(f64, usize)>,
    last_assigned: f64,
    transits: Vec<f64>,
}

impl JumpDetector {
    pub fn new(dim: usize, epsilon: f64) -> Result<Self, AnalyzeError> {
        check_epsilon(epsilon)?;
        Ok(Self {
            dim,
            epsilon,
            states: Vec::new(),
            last_assigned: 0.0,
            transits: Vec::new(),
        })
    }

    #[inline]
    pub fn push(&mut self, t: f64, q: &[f64]) {
        if let Some(i) = assigned(q, self.epsilon) {
            match self.states.last() {
                Some(&(_, cur)) if cur == i => {}
                Some(_) => {
                    self.transits.push(t - self.last_assigned);
                    self.states.push((t, i));
                }
                None => self.states.push((t, i)),
            }
            self.last_assigned = t;
        }
    }

    pub fn current(&self) -> Option<usize> {
        self.states.last().map(|s| s.1)
    }

    /// Durations between leaving one state's region and entering the next.
    pub fn transit_durations(&self) -> &[f64] {
        &self.transits
    }

    pub fn finish(self, horizon: f64) -> Result<StatePath, AnalyzeError> {
        if self.states.is_empty() {
            return Err(AnalyzeError::NoCollapse);
        }
        Ok(StatePath {
            dim: self.dim,
            states: self.states,
            horizon,
        })
    }
}

/// Telegraph path of a sampled population series; the horizon is the last
/// sample time.
pub fn detect_jumps(times: &[f64], q: &[Vec<f64>], epsilon: f64) -> Result<StatePath, AnalyzeError> {
    if times.len() != q.len() {
        return Err(AnalyzeError::InvalidInput(format!(
            "{} times for {} samples",
            times.len(),
            q.len()
        )));
    }
    let dim = q.first().map_or(0, |r| r.len());
    let mut det = JumpDetector::new(dim, epsilon)?;
    for (t, row) in times.iter().zip(q) {
        det.push(*t, row);
    }
    det.finish(times.last().copied().unwrap_or(0.0))
}

/// Transition counts and dwell times; merging is a plain sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTally {
    pub dim: usize,
    pub counts: Vec<Vec<u64>>,
    pub dwell: Vec<f64>,
    pub n_paths: usize,
}

impl TransitionTally {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            counts: vec![vec![0; dim]; dim],
            dwell: vec![0.0; dim],
            n_paths: 0,
        }
    }

    pub fn add_path(&mut self, path: &StatePath) {
        for w in path.states.windows(2) {
            self.counts[w[0].1][w[1].1] += 1;
        }
        for (s, a, b) in path.intervals() {
            self.dwell[s] += b - a;
        }
        self.n_paths += 1;
    }

    pub fn merge(&mut self, other: &TransitionTally) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.counts[i][j] += other.counts[i][j];
            }
            self.dwell[i] += other.dwell[i];
        }
        self.n_paths += other.n_paths;
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpStats {
    pub dim: usize,
    pub transition_counts: Vec<Vec<u64>>,
    pub dwell_time_totals: Vec<f64>,
    pub m_hat: Vec<Vec<f64>>,
    /// Half-width of the 95% interval, `1.96 √N_ij / T_i`.
    pub ci_halfwidth: Vec<Vec<f64>>,
    pub n_trajectories: usize,
}

impl JumpStats {
    pub fn from_tally(t: &TransitionTally) -> Result<Self, AnalyzeError> {
        if t.total_transitions() == 0 {
            return Err(AnalyzeError::EmptyEnsemble);
        }
        let n = t.dim;
        let mut m_hat = vec![vec![0.0; n]; n];
        let mut ci = vec![vec![0.0; n]; n];
        for i in 0..n {
            if t.dwell[i] > 0.0 {
                for j in 0..n {
                    if i != j {
                        let c = t.counts[i][j] as f64;
                        m_hat[i][j] = c / t.dwell[i];
                        ci[i][j] = 1.96 * c.sqrt() / t.dwell[i];
                    }
                }
            }
            m_hat[i][i] = -(0..n).filter(|&j| j != i).map(|j| m_hat[i][j]).sum::<f64>();
        }
        Ok(Self {
            dim: n,
            transition_counts: t.counts.clone(),
            dwell_time_totals: t.dwell.clone(),
            m_hat,
            ci_halfwidth: ci,
            n_trajectories: t.n_paths,
        })
    }

    pub fn generator(&self) -> RateGenerator {
        RateGenerator::from_rates(self.m_hat.clone())
    }

    /// `(m̂ − m) / SE` for the off-diagonal entries with at least one count.
    pub fn z_scores(&self, analytic: &RateGenerator) -> Vec<Vec<Option<f64>>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let se = self.ci_halfwidth[i][j] / 1.96;
                        (i != j && se > 0.0).then(|| (self.m_hat[i][j] - analytic.rate(i, j)) / se)
                    })
                    .collect()
            })
            .collect()
    }

    /// Whether `truth` lies inside the reported interval of entry `(i, j)`.
    pub fn covers(&self, i: usize, j: usize, truth: f64) -> bool {
        (self.m_hat[i][j] - truth).abs() <= self.ci_halfwidth[i][j]
    }

    /// Fraction of observed time spent in each state.
    pub fn occupation_fractions(&self) -> Vec<f64> {
        let total: f64 = self.dwell_time_totals.iter().sum();
        self.dwell_time_totals.iter().map(|t| t / total).collect()
    }

    /// Observed time per transition, over all states.
    pub fn mean_dwell_time(&self) -> f64 {
        let total: f64 = self.dwell_time_totals.iter().sum();
        let jumps: u64 = self.transition_counts.iter().flatten().sum();
        total / jumps as f64
    }

    /// Mean stay in state `i`, `T_i / N_i`.
    pub fn mean_dwell_in(&self, i: usize) -> f64 {
        let exits: u64 = self.transition_counts[i].iter().sum();
        self.dwell_time_totals[i] / exits as f64
    }
}

/// Count/time estimator of the generator over an ensemble of paths.
pub fn estimate_generator(paths: &[StatePath]) -> Result<JumpStats, AnalyzeError> {
    let dim = paths.first().ok_or(AnalyzeError::EmptyEnsemble)?.dim;
    let mut tally = TransitionTally::new(dim);
    for p in paths {
        if p.dim != dim {
            return Err(AnalyzeError::InvalidInput("paths of different dimension".into()));
        }
        tally.add_path(p);
    }
    JumpStats::from_tally(&tally)
}

/// Frequency of the first state reached, over paths that reach one by
/// `window`.
pub fn collapse_frequencies(paths: &[StatePath], window: f64) -> Result<Vec<f64>, AnalyzeError> {
    let dim = paths.first().ok_or(AnalyzeError::EmptyEnsemble)?.dim;
    let mut counts = vec![0usize; dim];
    for p in paths {
        match p.states.first() {
            Some(&(t, s)) if t <= window => counts[s] += 1,
            _ => return Err(AnalyzeError::NoCollapse),
        }
    }
    let n = paths.len() as f64;
    let mut freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    // the last nonzero entry absorbs the rounding residue of the running sum
    if let Some(last) = (0..dim).rev().find(|&i| counts[i] > 0) {
        let before: f64 = freq[..last].iter().sum();
        freq[last] = 1.0 - before;
    }
    Ok(freq)
}

/// Running sums for the conditional average of `Y` in one pointer state.
///
/// Each uninterrupted run of qualifying samples forms one cluster; standard
/// errors are computed across clusters, which absorbs the correlation of
/// neighbouring samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAccumulator {
    dim: usize,
    state: usize,
    epsilon: f64,
    burn_in: f64,
    current: Option<usize>,
    entered: f64,
    in_run: bool,
    run_n: f64,
    run_sum: Vec<C64>,
    /// Per finished cluster: `(n, Σ Y)` for every pair.
    clusters: Vec<(f64, Vec<C64>)>,
}

impl PhaseAccumulator {
    pub fn new(dim: usize, state: usize, epsilon: f64, burn_in: f64) -> Result<Self, AnalyzeError> {
        check_epsilon(epsilon)?;
        if !(burn_in > 0.0) {
            return Err(AnalyzeError::InvalidInput(format!("burn_in = {burn_in}")));
        }
        if state >= dim {
            return Err(AnalyzeError::InvalidInput(format!("state {state} >= dim {dim}")));
        }
        let pairs = dim * (dim - 1) / 2;
        Ok(Self {
            dim,
            state,
            epsilon,
            burn_in,
            current: None,
            entered: 0.0,
            in_run: false,
            run_n: 0.0,
            run_sum: vec![C64::new(0.0, 0.0); pairs],
            clusters: Vec::new(),
        })
    }

    fn close_run(&mut self) {
        if self.in_run && self.run_n > 0.0 {
            let zero = vec![C64::new(0.0, 0.0); self.run_sum.len()];
            let sum = std::mem::replace(&mut self.run_sum, zero);
            self.clusters.push((self.run_n, sum));
        }
        self.in_run = false;
        self.run_n = 0.0;
    }

    /// Adds one sample; `y` holds `Y_kl` for `k < l` in lexicographic order.
    #[inline]
    pub fn push(&mut self, t: f64, q: &[f64], y: &[C64]) {
        if let Some(i) = assigned(q, self.epsilon) {
            if self.current != Some(i) {
                self.current = Some(i);
                self.entered = t;
            }
        }
        let ok = self.current == Some(self.state)
            && q[self.state] >= 1.0 - self.epsilon
            && t - self.entered >= self.burn_in;
        if ok {
            self.in_run = true;
            self.run_n += 1.0;
            for (s, v) in self.run_sum.iter_mut().zip(y) {
                *s += v;
            }
        } else if self.in_run {
            self.close_run();
        }
    }

    pub fn finish(mut self) -> Self {
        self.close_run();
        self
    }

    pub fn merge(&mut self, mut other: PhaseAccumulator) {
        other.close_run();
        self.clusters.extend(other.clusters);
    }

    pub fn samples(&self) -> usize {
        self.clusters.iter().map(|c| c.0).sum::<f64>() as usize + self.run_n as usize
    }

    pub fn table(&self) -> Result<PhaseTable, AnalyzeError> {
        let mut me = self.clone();
        me.close_run();
        let total: f64 = me.clusters.iter().map(|c| c.0).sum();
        let count = total as usize;
        if count < MIN_PHASE_SAMPLES {
            return Err(AnalyzeError::InsufficientSamples { count });
        }
        let g = me.clusters.len() as f64;
        let mut entries = Vec::new();
        let mut p = 0;
        for k in 0..self.dim {
            for l in (k + 1)..self.dim {
                let sum: C64 = me.clusters.iter().map(|c| c.1[p]).sum();
                let mean = sum / total;
                let (mut vr, mut vi) = (0.0, 0.0);
                for (n, s) in &me.clusters {
                    let r = s[p] - mean * *n;
                    vr += r.re * r.re;
                    vi += r.im * r.im;
                }
                let f = if g > 1.0 { g / (g - 1.0) } else { f64::INFINITY };
                entries.push(PhaseEntry {
                    k,
                    l,
                    mean: [mean.re, mean.im],
                    se: [(vr * f).sqrt() / total, (vi * f).sqrt() / total],
                });
                p += 1;
            }
        }
        Ok(PhaseTable {
            dim: self.dim,
            state: self.state,
            samples: count,
            clusters: me.clusters.len(),
            entries,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseEntry {
    pub k: usize,
    pub l: usize,
    /// `[re, im]` of the conditional mean of `Y_kl`.
    pub mean: [f64; 2],
    /// Standard errors of the real and imaginary parts.
    pub se: [f64; 2],
}

impl PhaseEntry {
    pub fn mean_c(&self) -> C64 {
        C64::new(self.mean[0], self.mean[1])
    }

    /// Largest of the per-component deviations from `target`, in standard
    /// errors.
    pub fn z(&self, target: C64) -> f64 {
        let zr = (self.mean[0] - target.re).abs() / self.se[0];
        let zi = (self.mean[1] - target.im).abs() / self.se[1];
        let fix = |z: f64| if z.is_nan() { 0.0 } else { z };
        fix(zr).max(fix(zi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTable {
    pub dim: usize,
    pub state: usize,
    pub samples: usize,
    pub clusters: usize,
    pub entries: Vec<PhaseEntry>,
}

impl PhaseTable {
    /// Entry for `Y_kl`, `k < l`.
    pub fn get(&self, k: usize, l: usize) -> Option<&PhaseEntry> {
        self.entries.iter().find(|e| e.k == k && e.l == l)
    }
}

/// Mean of `Y_kl` over samples with `Q_state ≥ 1 − ε` taken at least
/// `burn_in` after the path entered `state`.
pub fn conditional_phase_mean(
    qy: &[QYTrajectory],
    state: usize,
    epsilon: f64,
    burn_in: f64,
) -> Result<PhaseTable, AnalyzeError> {
    let dim = qy.first().map_or(state + 1, |t| t.dim);
    let mut total = PhaseAccumulator::new(dim, state, epsilon, burn_in)?;
    for tr in qy {
        let mut acc = PhaseAccumulator::new(dim, state, epsilon, burn_in)?;
        for ((t, q), y) in tr.times.iter().zip(&tr.q).zip(&tr.y) {
            acc.push(*t, q, y);
        }
        total.merge(acc);
    }
    total.table()
}

/// Pointwise ensemble mean and standard error of the populations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanQ {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub n: usize,
}

impl MeanQ {
    /// CSV with header `t,mean_Q_0,...,se_Q_0,...`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let d = self.mean.first().map_or(0, |r| r.len());
        let mut s = String::from("t");
        for k in 0..d {
            let _ = write!(s, ",mean_Q_{k}");
        }
        for k in 0..d {
            let _ = write!(s, ",se_Q_{k}");
        }
        s.push('\n');
        for (n, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t:.12e}");
            for v in self.mean[n].iter().chain(&self.se[n]) {
                let _ = write!(s, ",{v:.12e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Running population sums on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanQAccumulator {
    times: Vec<f64>,
    /// First trajectory, subtracted before squaring.
    shift: Option<Vec<Vec<f64>>>,
    sum: Vec<Vec<f64>>,
    sumsq: Vec<Vec<f64>>,
    n: usize,
}

impl MeanQAccumulator {
    pub fn new(times: &[f64], dim: usize) -> Self {
        Self {
            times: times.to_vec(),
            shift: None,
            sum: vec![vec![0.0; dim]; times.len()],
            sumsq: vec![vec![0.0; dim]; times.len()],
            n: 0,
        }
    }

    pub fn add(&mut self, times: &[f64], q: &[Vec<f64>]) -> bool {
        if times != self.times.as_slice() || q.len() != times.len() {
            return false;
        }
        let shift = self.shift.get_or_insert_with(|| q.to_vec());
        for (n, row) in q.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let d = v - shift[n][k];
                self.sum[n][k] += d;
                self.sumsq[n][k] += d * d;
            }
        }
        self.n += 1;
        true
    }

    pub fn finish(&self) -> MeanQ {
        let n = self.n as f64;
        let dim = self.sum.first().map_or(0, |r| r.len());
        let mut mean = vec![vec![0.0; dim]; self.times.len()];
        let mut se = vec![vec![0.0; dim]; self.times.len()];
        if let Some(shift) = &self.shift {
            for t in 0..self.times.len() {
                for k in 0..dim {
                    let mu = self.sum[t][k] / n;
                    mean[t][k] = shift[t][k] + mu;
                    if self.n > 1 {
                        let var = (self.sumsq[t][k] - n * mu * mu).max(0.0) / (n - 1.0);
                        se[t][k] = (var / n).sqrt();
                    }
                }
            }
        }
        MeanQ {
            times: self.times.clone(),
            mean,
            se,
            n: self.n,
        }
    }
}

pub fn ensemble_mean_q(trajectories: &[Trajectory]) -> Result<MeanQ, AnalyzeError> {
    let first = trajectories.first().ok_or(AnalyzeError::EmptyEnsemble)?;
    let mut acc = MeanQAccumulator::new(&first.times, first.dim());
    for (index, tr) in trajectories.iter().enumerate() {
        if !acc.add(&tr.times, &tr.q) {
            return Err(AnalyzeError::GridMismatch { index });
        }
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::markov_sample_stream;
    use proptest::prelude::*;

    fn square_wave() -> (Vec<f64>, Vec<Vec<f64>>) {
        let q0 = [1.0, 1.0, 0.5, 0.0, 0.0, 0.5, 1.0, 1.0];
        let times: Vec<f64> = (0..q0.len()).map(|n| n as f64 * 0.5).collect();
        (times, q0.iter().map(|&x| vec![x, 1.0 - x]).collect())
    }

    #[test]
    fn square_wave_has_two_transitions() {
        let (t, q) = square_wave();
        let p = detect_jumps(&t, &q, 0.1).unwrap();
        assert_eq!(p.states, vec![(0.0, 0), (1.5, 1), (3.0, 0)]);
        assert_eq!(p.horizon, 3.5);
    }

    #[test]
    fn constant_path_and_no_collapse() {
        let t = [0.0, 1.0, 2.0];
        let q = vec![vec![1.0, 0.0]; 3];
        let p = detect_jumps(&t, &q, 0.1).unwrap();
        assert_eq!(p.states, vec![(0.0, 0)]);
        let q = vec![vec![0.5, 0.5]; 3];
        assert_eq!(detect_jumps(&t, &q, 0.1), Err(AnalyzeError::NoCollapse));
        assert!(matches!(detect_jumps(&t, &q, 0.5), Err(AnalyzeError::InvalidEpsilon(_))));
    }

    #[test]
    fn transit_time_stays_with_previous_state() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let q = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0], vec![0.0, 1.0]];
        let mut det = JumpDetector::new(2, 0.1).unwrap();
        for (a, b) in t.iter().zip(&q) {
            det.push(*a, b);
        }
        assert_eq!(det.transit_durations(), &[3.0]);
        let p = det.finish(4.0).unwrap();
        assert_eq!(p.occupation(), vec![3.0, 1.0]);
    }

    #[test]
    fn single_transition_estimate() {
        let p = StatePath {
            dim: 2,
            states: vec![(0.0, 0), (2.0, 1)],
            horizon: 2.0,
        };
        let s = estimate_generator(&[p]).unwrap();
        assert_eq!(s.m_hat[0][1], 0.5);
        assert_eq!(s.m_hat[0][0], -0.5);
        let empty = StatePath {
            dim: 2,
            states: vec![(0.0, 0)],
            horizon: 2.0,
        };
        assert_eq!(estimate_generator(&[empty]), Err(AnalyzeError::EmptyEnsemble));
        assert_eq!(estimate_generator(&[]), Err(AnalyzeError::EmptyEnsemble));
    }

    #[test]
    fn estimate_recovers_gillespie_generator() {
        let g = RateGenerator::from_rates(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let paths: Vec<StatePath> = (0..20)
            .map(|n| markov_sample_stream(&g, &[0.5, 0.5], 1000.0, 9, n))
            .collect();
        let s = estimate_generator(&paths).unwrap();
        for (i, j) in [(0, 1), (1, 0)] {
            assert!(s.dwell_time_totals[i] >= 9e3);
            assert!(s.ci_halfwidth[i][j] <= 0.06);
            assert!(s.covers(i, j, 1.0), "{:?}", s.m_hat);
        }
    }

    #[test]
    fn tally_merge_is_order_independent() {
        let g = RateGenerator::from_rates(vec![vec![0.0, 1.0, 0.5], vec![0.2, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        let paths: Vec<StatePath> = (0..6)
            .map(|n| markov_sample_stream(&g, &[1.0, 0.0, 0.0], 50.0, 1, n))
            .collect();
        let mut a = TransitionTally::new(3);
        let mut b = TransitionTally::new(3);
        for p in &paths[..3] {
            a.add_path(p);
        }
        for p in &paths[3..] {
            b.add_path(p);
        }
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab.counts, ba.counts);
        assert!((ab.dwell[0] - ba.dwell[0]).abs() < 1e-12);
        assert_eq!(ab.n_paths, 6);
    }

    #[test]
    fn collapse_frequency_examples() {
        let at = |s: usize| StatePath {
            dim: 2,
            states: vec![(0.1, s)],
            horizon: 1.0,
        };
        let f = collapse_frequencies(&[at(0), at(0)], 0.5).unwrap();
        assert_eq!(f, vec![1.0, 0.0]);
        let paths: Vec<StatePath> = (0..7).map(|n| at(n % 3 % 2)).collect();
        let f = collapse_frequencies(&paths, 0.5).unwrap();
        assert_eq!(f.iter().sum::<f64>(), 1.0);
        assert_eq!(collapse_frequencies(&[at(0)], 0.05), Err(AnalyzeError::NoCollapse));
    }

    #[test]
    fn phase_mean_needs_samples() {
        let tr = QYTrajectory {
            dim: 2,
            times: vec![0.0, 1.0],
            q: vec![vec![0.5, 0.5]; 2],
            y: vec![vec![C64::new(0.0, 0.0)]; 2],
            seed: 0,
            stream: 0,
        };
        assert_eq!(
            conditional_phase_mean(&[tr], 0, 0.1, 0.1),
            Err(AnalyzeError::InsufficientSamples { count: 0 })
        );
    }

    #[test]
    fn phase_mean_on_synthetic_clusters() {
        // state 0 throughout, constant Y = 2 + i after burn-in
        let n = 400;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.01).collect();
        let tr = QYTrajectory {
            dim: 2,
            times,
            q: vec![vec![1.0, 0.0]; n],
            y: vec![vec![C64::new(2.0, 1.0)]; n],
            seed: 0,
            stream: 0,
        };
        let table = conditional_phase_mean(&[tr.clone(), tr], 0, 0.1, 0.5).unwrap();
        let e = table.get(0, 1).unwrap();
        assert_eq!(e.mean, [2.0, 1.0]);
        assert_eq!(e.se, [0.0, 0.0]);
        assert_eq!(table.clusters, 2);
        assert_eq!(table.samples, 2 * 350);
    }

    #[test]
    fn mean_q_of_identical_trajectories() {
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            q: vec![vec![0.2, 0.8], vec![0.6, 0.4]],
            u: None,
            record: vec![0.0, 0.1],
            seed: 0,
            stream: 0,
            gamma: 1.0,
            dt: 1.0,
            final_state: crate::matrix::CMatrix::zeros(2),
            recent: Default::default(),
            max_trace_defect: 0.0,
        };
        let m = ensemble_mean_q(&[tr.clone(), tr.clone(), tr.clone()]).unwrap();
        for (a, b) in m.mean.iter().flatten().zip(tr.q.iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(m.se.iter().flatten().all(|&s| s < 1e-9));
        let mut other = tr.clone();
        other.times = vec![0.0, 2.0];
        assert_eq!(ensemble_mean_q(&[tr, other]), Err(AnalyzeError::GridMismatch { index: 1 }));
    }

    proptest! {
        #[test]
        fn detection_commutes_with_time_rescaling(
            q in proptest::collection::vec(0.0f64..1.0, 2..60),
            c in 0.1f64..10.0,
            eps in 0.01f64..0.49,
        ) {
            let times: Vec<f64> = (0..q.len()).map(|n| n as f64 * 0.25).collect();
            let rows: Vec<Vec<f64>> = q.iter().map(|&x| vec![x, 1.0 - x]).collect();
            let scaled: Vec<f64> = times.iter().map(|t| t * c).collect();
            match (detect_jumps(&times, &rows, eps), detect_jumps(&scaled, &rows, eps)) {
                (Ok(a), Ok(b)) => {
                    let r = a.rescaled(c);
                    prop_assert_eq!(r.states.len(), b.states.len());
                    for (x, y) in r.states.iter().zip(&b.states) {
                        prop_assert_eq!(x.1, y.1);
                        prop_assert!((x.0 - y.0).abs() <= 1e-12 * (1.0 + y.0));
                    }
                    for (x, y) in r.occupation().iter().zip(b.occupation()) {
                        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y));
                    }
                }
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn collapse_frequencies_sum_to_one(states in proptest::collection::vec(0usize..3, 1..200)) {
            let paths: Vec<StatePath> = states.iter().map(|&s| StatePath { dim: 3, states: vec![(0.0, s)], horizon: 1.0 }).collect();
            let f = collapse_frequencies(&paths, 1.0).unwrap();
            prop_assert_eq!(f.iter().sum::<f64>(), 1.0);
        }
    }
}
