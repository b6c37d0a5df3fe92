//! Block decomposition of the scaled generator in the pointer basis.
//!
//! Writing `ρ` as populations `Q_i` and coherences `U_kl`, the slow part of
//! the generator splits into four maps:
//!
//! * `𝒜`: populations to populations (order one),
//! * `ℬ`: coherences to populations (order `γ`),
//! * `𝒞`: populations to coherences (order `γ`),
//! * `d`: damping and rotation of each coherence (order `γ²`).

use serde::Serialize;

use crate::matrix::C64;
use crate::model::ValidatedModel;

const ACTIVE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SuperoperatorTensors {
    dim: usize,
    a: Vec<f64>,
    b: Vec<C64>,
    c: Vec<C64>,
    d: Vec<C64>,
}

impl SuperoperatorTensors {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            a: vec![0.0; dim * dim],
            b: vec![C64::new(0.0, 0.0); dim * dim * dim],
            c: vec![C64::new(0.0, 0.0); dim * dim * dim],
            d: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `𝒜^i_j`: weight of `Q_i` in `dQ_j`.
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    /// `ℬ^{kl}_i`: weight of `U_kl` in `dQ_i`. Zero when `k == l`.
    #[inline]
    pub fn b(&self, k: usize, l: usize, i: usize) -> C64 {
        self.b[(k * self.dim + l) * self.dim + i]
    }

    /// `𝒞^i_{kl}`: weight of `Q_i` in `dU_kl`. Zero when `k == l`.
    #[inline]
    pub fn c(&self, i: usize, k: usize, l: usize) -> C64 {
        self.c[(i * self.dim + k) * self.dim + l]
    }

    /// `d_kl`: order-`γ²` damping of `U_kl` beyond the measurement itself.
    #[inline]
    pub fn d(&self, k: usize, l: usize) -> C64 {
        self.d[k * self.dim + l]
    }

    /// `𝒜(Q)_j = Σ_i 𝒜^i_j Q_i`.
    pub fn apply_a(&self, q: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (j, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|i| self.a(i, j) * q[i]).sum();
        }
    }

    /// `ℬ(Y)_i = Σ_{k≠l} ℬ^{kl}_i Y_kl`, real for Hermitian `Y`.
    pub fn apply_b(&self, y: &[C64], out: &mut [f64]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    if k != l {
                        s += self.b(k, l, i) * y[k * n + l];
                    }
                }
            }
            *o = s.re;
        }
    }

    /// `𝒞(Q)_kl = Σ_i 𝒞^i_{kl} Q_i`.
    pub fn apply_c(&self, q: &[f64], k: usize, l: usize) -> C64 {
        (0..self.dim).map(|i| self.c(i, k, l) * q[i]).sum()
    }

    pub fn norms(&self) -> TensorNorms {
        let max = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        TensorNorms {
            a: self.a.iter().map(|x| x.abs()).fold(0.0, f64::max),
            b: max(&self.b),
            c: max(&self.c),
            d: max(&self.d),
        }
    }

    /// Whether the pair `(k,l)` couples to the populations at all.
    pub fn pair_active(&self, k: usize, l: usize) -> bool {
        (0..self.dim).any(|i| {
            self.c(i, k, l).norm() > ACTIVE_TOL
                || self.c(i, l, k).norm() > ACTIVE_TOL
                || self.b(k, l, i).norm() > ACTIVE_TOL
                || self.b(l, k, i).norm() > ACTIVE_TOL
        })
    }
}

/// Largest absolute entry of each tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorNorms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Computes `𝒜, ℬ, 𝒞, d` for a validated model.
///
/// Diagonal entries of the order-one collapse operators only generate
/// order-one phase couplings, which do not survive the limit, so they do
/// not enter any tensor.
pub fn decompose(model: &ValidatedModel) -> SuperoperatorTensors {
    let m = model.model();
    let n = m.dim;
    let mut t = SuperoperatorTensors::zeros(n);
    let i_unit = C64::new(0.0, 1.0);

    for na in &m.na {
        for i in 0..n {
            for j in 0..n {
                let mut v = na[(j, i)].norm_sqr();
                if i == j {
                    v -= (0..n).map(|r| na[(r, j)].norm_sqr()).sum::<f64>();
                }
                t.a[i * n + j] += v;
            }
        }
    }

    let h = &m.h1;
    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            // -i[H, ρ] restricted to the U_kl -> Q_i and Q_i -> U_kl blocks
            t.b[(k * n + l) * n + l] += -i_unit * h[(l, k)];
            t.b[(k * n + l) * n + k] += i_unit * h[(l, k)];
            t.c[(l * n + k) * n + l] += -i_unit * h[(k, l)];
            t.c[(k * n + k) * n + l] += i_unit * h[(k, l)];
        }
    }

    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            let mut v = C64::new(0.0, 0.0);
            for nb in &m.nb_diag {
                v += 0.5 * (nb[k].norm_sqr() + nb[l].norm_sqr()) - nb[k] * nb[l].conj();
            }
            v += i_unit * (m.h2_diag[k] - m.h2_diag[l]);
            t.d[k * n + l] = v;
        }
    }
    t
}

/// Which term of the generator drives a given transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Dissipative,
    Hamiltonian,
    Both,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMechanism {
    pub from: usize,
    pub to: usize,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub dim: usize,
    /// The order-`γ²` pieces are diagonal. Always true for a validated model,
    /// since the input format only admits diagonals there.
    pub fast_terms_diagonal: bool,
    pub pairs: Vec<PairMechanism>,
    pub norms: TensorNorms,
    /// No transition has an active channel.
    pub zeno_frozen: bool,
}

impl ScalingReport {
    pub fn mechanism(&self, from: usize, to: usize) -> Mechanism {
        self.pairs
            .iter()
            .find(|p| p.from == from && p.to == to)
            .map_or(Mechanism::None, |p| p.mechanism)
    }
}

/// Reports which channel drives each `i → j` rate.
///
/// A full matrix in an order-`γ²` slot is refused earlier, when the model
/// document is read ([`crate::model::ModelError::NonDiagonalFastTerm`]).
pub fn validate_scaling(model: &ValidatedModel) -> ScalingReport {
    report_for(&decompose(model))
}

pub fn report_for(t: &SuperoperatorTensors) -> ScalingReport {
    let n = t.dim();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dissipative = t.a(i, j).abs() > ACTIVE_TOL;
            let mut hamiltonian = false;
            for k in 0..n {
                for l in (k + 1)..n {
                    if (t.c(i, k, l) * t.b(k, l, j)).norm() > ACTIVE_TOL {
                        hamiltonian = true;
                    }
                }
            }
            let mechanism = match (dissipative, hamiltonian) {
                (true, true) => Mechanism::Both,
                (true, false) => Mechanism::Dissipative,
                (false, true) => Mechanism::Hamiltonian,
                (false, false) => Mechanism::None,
            };
            pairs.push(PairMechanism {
                from: i,
                to: j,
                mechanism,
            });
        }
    }
    let zeno_frozen = pairs.iter().all(|p| p.mechanism == Mechanism::None);
    ScalingReport {
        dim: n,
        fast_terms_diagonal: true,
        pairs,
        norms: t.norms(),
        zeno_frozen,
    }
}

/// Closed form of `𝒞^i_{kl} ℬ^{kl}_j` for Hamiltonian `h` (no summation).
pub fn hamiltonian_product(h: &crate::matrix::CMatrix, i: usize, j: usize, k: usize, l: usize) -> C64 {
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    (h[(i, l)] * delta(i, k) - h[(k, i)] * delta(i, l))
        * (h[(j, k)] * delta(j, l) - h[(l, j)] * delta(j, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{CMatrix, C64};
    use crate::model::presets::*;
    use crate::model::{DensityMatrix, LindbladModel, MeasurementSetup};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn rabi_tensors() {
        let t = decompose(&rabi(1.0, 1.0, 1.0).validate().unwrap());
        let h = c(0.0, 0.5);
        assert!(t.norms().a == 0.0);
        assert!(close(t.b(1, 0, 0), -h));
        assert!(close(t.b(0, 1, 1), -h));
        assert!(close(t.b(0, 1, 0), h));
        assert!(close(t.b(1, 0, 1), h));
        assert!(close(t.c(0, 0, 1), h));
        assert!(close(t.c(1, 1, 0), h));
        assert!(close(t.c(1, 0, 1), -h));
        assert!(close(t.c(0, 1, 0), -h));
    }

    #[test]
    fn thermal_tensors() {
        let t = decompose(&thermal(1.0, 0.7, 1.0, 1.0).validate().unwrap());
        assert!((t.a(1, 0) - 0.7).abs() < 1e-15);
        assert!((t.a(0, 1) - 0.3).abs() < 1e-15);
        assert!((t.a(0, 0) + 0.3).abs() < 1e-15);
        assert!((t.a(1, 1) + 0.7).abs() < 1e-15);
        assert_eq!(t.norms().b, 0.0);
        assert_eq!(t.norms().c, 0.0);
    }

    #[test]
    fn empty_model_has_zero_tensors() {
        let t = decompose(&pure_measurement(&[0.5, -0.5], 2.0, 1.0).validate().unwrap());
        assert_eq!(t, SuperoperatorTensors::zeros(2));
    }

    #[test]
    fn scaling_reports() {
        let r = validate_scaling(&rabi(1.0, 1.0, 1.0).validate().unwrap());
        assert_eq!(r.mechanism(0, 1), Mechanism::Hamiltonian);
        assert_eq!(r.mechanism(1, 0), Mechanism::Hamiltonian);
        assert!(!r.zeno_frozen);

        let r = validate_scaling(&thermal(1.0, 0.7, 1.0, 1.0).validate().unwrap());
        assert_eq!(r.mechanism(0, 1), Mechanism::Dissipative);
        assert_eq!(r.mechanism(1, 0), Mechanism::Dissipative);

        let mut m = pure_measurement(&[0.5, -0.5], 1.0, 1.0);
        m.h2_diag = vec![0.3, -0.2];
        let r = validate_scaling(&m.validate().unwrap());
        assert!(r.zeno_frozen);
        assert!(r.norms.d > 0.0);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["pairs"][0]["mechanism"], "none");
    }

    fn random_model(dim: usize, seed: &[f64], with_na: bool) -> LindbladModel {
        let mut it = seed.iter().cycle().copied();
        let mut next = move || it.next().unwrap();
        let mut h = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                h[(i, j)] = c(next(), next());
            }
        }
        let mut na = Vec::new();
        if with_na {
            let mut m = CMatrix::zeros(dim);
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] = c(next(), next());
                }
            }
            na.push(m);
        }
        let nb = vec![(0..dim).map(|_| c(next(), next())).collect()];
        LindbladModel {
            dim,
            h1: h.hermitize(),
            h2_diag: (0..dim).map(|_| next()).collect(),
            na,
            nb_diag: nb,
            setup: MeasurementSetup {
                nu: (0..dim).map(|k| c(k as f64 + 0.3 * next(), next())).collect(),
                gamma: 1.0,
                eta: 1.0,
            },
        }
    }

    fn random_state(dim: usize, seed: &[f64]) -> DensityMatrix {
        let mut a = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = c(seed[(2 * (i * dim + j)) % seed.len()], seed[(2 * (i * dim + j) + 1) % seed.len()]);
            }
        }
        let mut rho = &a * &a.adjoint();
        rho = rho.scale_real(1.0 / rho.trace().re).hermitize();
        DensityMatrix::new(rho).unwrap()
    }

    fn seeds() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (
            2usize..=4,
            proptest::collection::vec(-1.0f64..1.0, 64),
            proptest::collection::vec(-1.0f64..1.0, 32),
        )
    }

    proptest! {
        #[test]
        fn tensor_symmetries((dim, s, _) in seeds()) {
            let t = decompose(&random_model(dim, &s, true).validate().unwrap());
            for i in 0..dim {
                let row: f64 = (0..dim).map(|j| t.a(i, j)).sum();
                prop_assert!(row.abs() < 1e-12);
                for k in 0..dim {
                    for l in 0..dim {
                        if k == l { continue; }
                        prop_assert!((t.b(k, l, i) - t.b(l, k, i).conj()).norm() < 1e-15);
                        prop_assert!((t.c(i, k, l) - t.c(i, l, k).conj()).norm() < 1e-15);
                        prop_assert!(t.d(k, l).re >= -1e-15);
                        prop_assert!((t.d(k, l) - t.d(l, k).conj()).norm() < 1e-15);
                    }
                }
            }
        }

        #[test]
        fn contraction_matches_closed_form((dim, s, _) in seeds()) {
            let model = random_model(dim, &s, false).validate().unwrap();
            let t = decompose(&model);
            let h = &model.model().h1;
            for i in 0..dim { for j in 0..dim { for k in 0..dim { for l in (k + 1)..dim {
                let got = t.c(i, k, l) * t.b(k, l, j);
                prop_assert!((got - hamiltonian_product(h, i, j, k, l)).norm() < 1e-12);
            }}}}
        }

        #[test]
        fn blocks_reproduce_generator((dim, s, r) in seeds()) {
            // Without order-one collapse operators every block is exact.
            let model = random_model(dim, &s, false).validate().unwrap();
            let t = decompose(&model);
            let rho = random_state(dim, &r);
            let full = model.drift(&rho);
            let nu = model.nu();
            let mut expect = CMatrix::zeros(dim);
            let q = rho.populations();
            let u = rho.as_matrix().as_slice();
            let mut dq = vec![0.0; dim];
            let mut bq = vec![0.0; dim];
            t.apply_a(&q, &mut dq);
            t.apply_b(u, &mut bq);
            for j in 0..dim {
                expect[(j, j)] = C64::new(dq[j] + bq[j], 0.0);
            }
            let h = &model.model().h1;
            for k in 0..dim {
                for l in 0..dim {
                    if k == l { continue; }
                    // coherence-to-coherence part of -i[H1, ρ]
                    let mut cc = C64::new(0.0, 0.0);
                    for m in 0..dim {
                        if m != l { cc += h[(k, m)] * rho.coherence(m, l); }
                        if m != k { cc -= rho.coherence(k, m) * h[(m, l)]; }
                    }
                    let meas = 0.5 * (nu[k].norm_sqr() + nu[l].norm_sqr()) - nu[k] * nu[l].conj();
                    expect[(k, l)] = t.apply_c(&q, k, l) - C64::new(0.0, 1.0) * cc
                        - (t.d(k, l) + meas) * rho.coherence(k, l);
                }
            }
            prop_assert!((&full - &expect).max_abs() < 1e-10);
        }

        #[test]
        fn populations_with_collapse_operators((dim, s, r) in seeds()) {
            let model = random_model(dim, &s, true).validate().unwrap();
            let t = decompose(&model);
            let rho = random_state(dim, &r);
            let full = model.drift(&rho);
            let mut dq = vec![0.0; dim];
            let mut bq = vec![0.0; dim];
            t.apply_a(&rho.populations(), &mut dq);
            // Na also moves populations through coherences; drop them here.
            let diag = DensityMatrix::from_populations(&rho.populations()).unwrap();
            let full_diag = model.drift(&diag);
            t.apply_b(diag.as_matrix().as_slice(), &mut bq);
            for j in 0..dim {
                prop_assert!((full_diag[(j, j)].re - dq[j] - bq[j]).abs() < 1e-10);
            }
            prop_assert!(full.trace().norm() < 1e-10);
        }
    }
}
