//! The measured open-system model: a Lindbladian split by its order in the
//! measurement strength `γ`, plus the diagonal measurement operator `N`.
//!
//! Everything is written in the pointer basis (the eigenbasis of the
//! measured observable `O = N + N†`), so `N` is given by its diagonal `ν`.
//! The finite-`γ` generator is
//!
//! ```text
//! L(ρ) = -i[γ H1 + γ² diag(h2), ρ] + Σ_a L_{N_a}(ρ) + γ² Σ_b L_{diag(n_b)}(ρ)
//! ```
//!
//! and the conditioned state obeys
//! `dρ = L(ρ) dt + γ² L_N(ρ) dt + γ √η D_N(ρ) dW`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{mul_adj_into, mul_into, CMatrix, MatrixError, C64, HERMITIAN_TOL, MAX_DIM};

/// Minimal separation between two eigenvalues `λ_k = 2 Re ν_k`.
pub const SPECTRAL_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("measurement eigenvalues λ_{k} and λ_{l} coincide (gap {gap:e})")]
    DegenerateSpectrum { k: usize, l: usize, gap: f64 },
    #[error("H1 is not Hermitian: ({row},{col}) defect {defect:e}")]
    NonHermitianH { row: usize, col: usize, defect: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{what} must be diagonal but entry ({row},{col}) is {value}")]
    NonDiagonalFastTerm {
        what: String,
        row: usize,
        col: usize,
        value: C64,
    },
    #[error("efficiency eta = {0} outside (0, 1]")]
    InvalidEfficiency(f64),
    #[error("measurement strength gamma = {0} must be finite and non-negative")]
    InvalidGamma(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
}

impl ModelError {
    /// Stable machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::DegenerateSpectrum { .. } => "degenerate_spectrum",
            ModelError::NonHermitianH { .. } => "non_hermitian_h",
            ModelError::DimensionMismatch { .. } => "dimension_mismatch",
            ModelError::NonDiagonalFastTerm { .. } => "non_diagonal_fast_term",
            ModelError::InvalidEfficiency(_) => "invalid_efficiency",
            ModelError::InvalidGamma(_) => "invalid_gamma",
            ModelError::InvalidDensityMatrix(_) => "invalid_density_matrix",
        }
    }
}

impl From<MatrixError> for ModelError {
    fn from(e: MatrixError) -> Self {
        match e {
            MatrixError::DimensionMismatch { left, right } => ModelError::DimensionMismatch {
                what: "matrix".into(),
                expected: left,
                found: right,
            },
            MatrixError::NotHermitian { row, col, defect } => {
                ModelError::NonHermitianH { row, col, defect }
            }
            MatrixError::Ragged { row, len, dim } => ModelError::DimensionMismatch {
                what: format!("matrix row {row}"),
                expected: dim,
                found: len,
            },
            MatrixError::BadDimension(d) => ModelError::DimensionMismatch {
                what: "matrix dimension".into(),
                expected: MAX_DIM,
                found: d,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetup {
    /// Diagonal of the measurement operator `N`.
    pub nu: Vec<C64>,
    /// Square root of the measurement rate.
    pub gamma: f64,
    pub eta: f64,
}

impl MeasurementSetup {
    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    /// Eigenvalue `λ_k = 2 Re ν_k` of the measured observable.
    #[inline]
    pub fn lambda(&self, k: usize) -> f64 {
        2.0 * self.nu[k].re
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.lambda(k)).collect()
    }

    pub fn measurement_operator(&self) -> CMatrix {
        CMatrix::from_diag(&self.nu)
    }

    pub fn observable(&self) -> CMatrix {
        CMatrix::from_real_diag(&self.lambdas())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    pub dim: usize,
    /// Hamiltonian entering at order `γ`.
    pub h1: CMatrix,
    /// Diagonal Hamiltonian entering at order `γ²`.
    pub h2_diag: Vec<f64>,
    /// Order-one collapse operators.
    pub na: Vec<CMatrix>,
    /// Diagonals of the order-`γ²` collapse operators.
    pub nb_diag: Vec<Vec<C64>>,
    pub setup: MeasurementSetup,
}

impl LindbladModel {
    /// A model with only the measurement term.
    pub fn measurement_only(nu: Vec<C64>, gamma: f64, eta: f64) -> Self {
        let dim = nu.len();
        Self {
            dim,
            h1: CMatrix::zeros(dim.max(1)),
            h2_diag: vec![0.0; dim],
            na: Vec::new(),
            nb_diag: Vec::new(),
            setup: MeasurementSetup { nu, gamma, eta },
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.setup.gamma = gamma;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.setup.eta = eta;
        self
    }

    pub fn validate(self) -> Result<ValidatedModel, ModelError> {
        validate_model(self)
    }
}

/// A model that passed [`validate_model`], together with the operators the
/// integrators need at its measurement strength.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    model: LindbladModel,
    /// `γ H1 + γ² diag(h2)`.
    hamiltonian: CMatrix,
    /// `N_a` followed by `γ · diag(n_b)`.
    jumps: Vec<CMatrix>,
    /// `-i H - ½ Σ J†J - ½ γ² N†N`.
    effective: CMatrix,
}

fn mismatch(what: impl Into<String>, expected: usize, found: usize) -> ModelError {
    ModelError::DimensionMismatch {
        what: what.into(),
        expected,
        found,
    }
}

/// Checks a model and precomputes its finite-`γ` operators.
pub fn validate_model(model: LindbladModel) -> Result<ValidatedModel, ModelError> {
    let dim = model.dim;
    if dim == 0 || dim > MAX_DIM {
        return Err(mismatch("dim (supported 1..=16)", MAX_DIM, dim));
    }
    if model.setup.nu.len() != dim {
        return Err(mismatch("nu", dim, model.setup.nu.len()));
    }
    if model.h1.dim() != dim {
        return Err(mismatch("H1", dim, model.h1.dim()));
    }
    if model.h2_diag.len() != dim {
        return Err(mismatch("H2diag", dim, model.h2_diag.len()));
    }
    for (a, n) in model.na.iter().enumerate() {
        if n.dim() != dim {
            return Err(mismatch(format!("Na[{a}]"), dim, n.dim()));
        }
    }
    for (b, n) in model.nb_diag.iter().enumerate() {
        if n.len() != dim {
            return Err(mismatch(format!("Nbdiag[{b}]"), dim, n.len()));
        }
    }
    let gamma = model.setup.gamma;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(ModelError::InvalidGamma(gamma));
    }
    let eta = model.setup.eta;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ModelError::InvalidEfficiency(eta));
    }
    let (defect, row, col) = model.h1.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(ModelError::NonHermitianH { row, col, defect });
    }
    if let Some(x) = model.h2_diag.iter().find(|x| !x.is_finite()) {
        return Err(ModelError::InvalidDensityMatrix(format!(
            "H2diag entry {x} is not finite"
        )));
    }
    let lambdas = model.setup.lambdas();
    for k in 0..dim {
        for l in (k + 1)..dim {
            let gap = (lambdas[k] - lambdas[l]).abs();
            if gap <= SPECTRAL_GAP_TOL {
                return Err(ModelError::DegenerateSpectrum { k, l, gap });
            }
        }
    }
    Ok(ValidatedModel::build(model))
}

impl ValidatedModel {
    fn build(model: LindbladModel) -> Self {
        let dim = model.dim;
        let gamma = model.setup.gamma;
        let g2 = gamma * gamma;
        let mut hamiltonian = model.h1.scale_real(gamma);
        for (k, h) in model.h2_diag.iter().enumerate() {
            hamiltonian[(k, k)] += C64::new(g2 * h, 0.0);
        }
        let mut jumps = model.na.clone();
        for nb in &model.nb_diag {
            let scaled: Vec<C64> = nb.iter().map(|&z| z * gamma).collect();
            jumps.push(CMatrix::from_diag(&scaled));
        }
        let mut effective = hamiltonian.scale(C64::new(0.0, -1.0));
        for j in &jumps {
            let jdj = &j.adjoint() * j;
            crate::matrix::add_scaled(&mut effective, &jdj, C64::new(-0.5, 0.0));
        }
        for k in 0..dim {
            effective[(k, k)] -= C64::new(0.5 * g2 * model.setup.nu[k].norm_sqr(), 0.0);
        }
        Self {
            model,
            hamiltonian,
            jumps,
            effective,
        }
    }

    pub fn model(&self) -> &LindbladModel {
        &self.model
    }

    pub fn into_model(self) -> LindbladModel {
        self.model
    }

    pub fn setup(&self) -> &MeasurementSetup {
        &self.model.setup
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn gamma(&self) -> f64 {
        self.model.setup.gamma
    }

    pub fn eta(&self) -> f64 {
        self.model.setup.eta
    }

    pub fn nu(&self) -> &[C64] {
        &self.model.setup.nu
    }

    /// The same model at another measurement strength.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ModelError> {
        validate_model(self.model.clone().with_gamma(gamma))
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self, ModelError> {
        validate_model(self.model.clone().with_eta(eta))
    }

    /// Full Hamiltonian at the configured `γ`.
    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// Collapse operators at the configured `γ` (order-one ones first).
    pub fn jump_operators(&self) -> &[CMatrix] {
        &self.jumps
    }

    /// Non-Hermitian effective generator `K` with `L(ρ) = Kρ + ρK† + Σ JρJ† + γ² NρN†`.
    pub fn effective_generator(&self) -> &CMatrix {
        &self.effective
    }

    /// `tr(O ρ)`.
    #[inline]
    pub fn mean_observable(&self, rho: &CMatrix) -> f64 {
        self.model
            .setup
            .nu
            .iter()
            .enumerate()
            .map(|(k, nu)| 2.0 * nu.re * rho[(k, k)].re)
            .sum()
    }

    /// Deterministic part of the conditioned evolution at finite `γ`,
    /// including the measurement dissipator `γ² L_N`.
    pub fn drift(&self, rho: &DensityMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim());
        let mut scratch = [CMatrix::zeros(self.dim()), CMatrix::zeros(self.dim())];
        self.drift_into(rho.as_matrix(), &mut out, &mut scratch);
        out
    }

    /// Allocation-free form of [`drift`](Self::drift).
    pub fn drift_into(&self, rho: &CMatrix, out: &mut CMatrix, scratch: &mut [CMatrix; 2]) {
        let n = self.dim();
        let [t1, t2] = scratch;
        // Kρ + ρK†
        mul_into(&self.effective, rho, t1);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = t1[(i, j)] + t1[(j, i)].conj();
            }
        }
        for jump in &self.jumps {
            mul_into(jump, rho, t1);
            mul_adj_into(t1, jump, t2);
            for (o, x) in out.as_mut_slice().iter_mut().zip(t2.as_slice()) {
                *o += x;
            }
        }
        let g2 = self.gamma() * self.gamma();
        let nu = &self.model.setup.nu;
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += rho[(i, j)] * nu[i] * nu[j].conj() * g2;
            }
        }
    }

    /// Innovation `D_N(ρ) = Nρ + ρN† - ρ tr(Oρ)`.
    pub fn innovation(&self, rho: &DensityMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim());
        self.innovation_into(rho.as_matrix(), &mut out);
        out
    }

    pub fn innovation_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        let n = self.dim();
        let mean = self.mean_observable(rho);
        let nu = &self.model.setup.nu;
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = rho[(i, j)] * (nu[i] + nu[j].conj() - mean);
            }
        }
    }

    /// Increment of the measurement record: `γ tr(Oρ) dt + η^{-1/2} dW`.
    pub fn record_increment(&self, rho: &DensityMatrix, dw: f64, dt: f64) -> f64 {
        self.gamma() * self.mean_observable(rho.as_matrix()) * dt + dw / self.eta().sqrt()
    }
}

/// A density matrix in the pointer basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    pub fn new(rho: CMatrix) -> Result<Self, ModelError> {
        let (defect, row, col) = rho.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(ModelError::InvalidDensityMatrix(format!(
                "not Hermitian at ({row},{col}), defect {defect:e}"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).norm() > Self::TRACE_TOL {
            return Err(ModelError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = rho
            .min_eigenvalue()
            .map_err(|e| ModelError::InvalidDensityMatrix(e.to_string()))?;
        if min < -Self::POSITIVITY_TOL {
            return Err(ModelError::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min:e}"
            )));
        }
        Ok(Self(rho))
    }

    pub(crate) fn new_unchecked(rho: CMatrix) -> Self {
        Self(rho)
    }

    /// `|k><k|`.
    pub fn pointer(dim: usize, k: usize) -> Self {
        Self(CMatrix::projector(dim, k))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::from_real_diag(&vec![1.0 / dim as f64; dim]))
    }

    /// Diagonal state with the given populations.
    pub fn from_populations(q: &[f64]) -> Result<Self, ModelError> {
        if q.iter().any(|&p| p < 0.0) || (q.iter().sum::<f64>() - 1.0).abs() > Self::TRACE_TOL {
            return Err(ModelError::InvalidDensityMatrix(format!(
                "{q:?} is not a probability vector"
            )));
        }
        Ok(Self(CMatrix::from_real_diag(q)))
    }

    /// Pure state `|ψ><ψ|` for a normalized `ψ`.
    pub fn pure(psi: &[C64]) -> Result<Self, ModelError> {
        let n = psi.len();
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `Q_i = <i|ρ|i>`.
    pub fn populations(&self) -> Vec<f64> {
        self.0.real_diagonal()
    }

    /// `U_ij = <i|ρ|j>`.
    pub fn coherence(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }
}

/// Ready-made models used by the CLI examples and the test suites.
pub mod presets {
    use super::*;
    use crate::matrix::pauli;

    /// Spin driven by `H1 = u σx / 2` and measured through `N = σz / 2`.
    pub fn rabi(u: f64, gamma: f64, eta: f64) -> LindbladModel {
        let mut m = LindbladModel::measurement_only(
            vec![C64::new(0.5, 0.0), C64::new(-0.5, 0.0)],
            gamma,
            eta,
        );
        m.h1 = pauli::x().scale_real(0.5 * u);
        m
    }

    /// Two-level system coupled to a thermal bath with rate `λ` and ground
    /// state population `p`, energy measured through `N = σz / 2`.
    pub fn thermal(lambda: f64, p: f64, gamma: f64, eta: f64) -> LindbladModel {
        let mut m = LindbladModel::measurement_only(
            vec![C64::new(0.5, 0.0), C64::new(-0.5, 0.0)],
            gamma,
            eta,
        );
        m.na = vec![
            pauli::lowering().scale_real((lambda * p).sqrt()),
            pauli::raising().scale_real((lambda * (1.0 - p)).sqrt()),
        ];
        m
    }

    /// Measurement of `N = diag(ν)` with no other dynamics.
    pub fn pure_measurement(nu: &[f64], gamma: f64, eta: f64) -> LindbladModel {
        LindbladModel::measurement_only(
            nu.iter().map(|&x| C64::new(x, 0.0)).collect(),
            gamma,
            eta,
        )
    }
}

/// `[re, im]` pair used for complex numbers in every JSON document.
pub type JsonComplex = [f64; 2];

fn to_c(z: &JsonComplex) -> C64 {
    Complex64::new(z[0], z[1])
}

fn from_c(z: C64) -> JsonComplex {
    [z.re, z.im]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ComplexDiagonalEntry {
    Diagonal(Vec<JsonComplex>),
    Matrix(Vec<Vec<JsonComplex>>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RealDiagonalEntry {
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<JsonComplex>>),
}

/// On-disk model document.
///
/// The fast (order `γ²`) pieces `H2diag` and `Nbdiag` are diagonal by
/// construction. A full matrix is accepted in their place only if its
/// off-diagonal part vanishes; anything else is rejected with
/// [`ModelError::NonDiagonalFastTerm`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub dim: usize,
    pub gamma: f64,
    pub eta: f64,
    pub nu: Vec<JsonComplex>,
    #[serde(rename = "H1", default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<Vec<Vec<JsonComplex>>>,
    #[serde(rename = "H2diag", default, skip_serializing_if = "Option::is_none")]
    pub h2_diag: Option<RealDiagonalEntry>,
    #[serde(rename = "Na", default)]
    pub na: Vec<Vec<Vec<JsonComplex>>>,
    #[serde(rename = "Nbdiag", default)]
    pub nb_diag: Vec<ComplexDiagonalEntry>,
}

const OFFDIAG_TOL: f64 = 1e-14;

fn json_matrix(rows: &[Vec<JsonComplex>], dim: usize, what: &str) -> Result<CMatrix, ModelError> {
    if rows.len() != dim {
        return Err(mismatch(what, dim, rows.len()));
    }
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != dim {
                Err(mismatch(format!("{what} row {i}"), dim, r.len()))
            } else {
                Ok(r.iter().map(to_c).collect())
            }
        })
        .collect::<Result<Vec<Vec<C64>>, _>>()?;
    Ok(CMatrix::from_rows(rows)?)
}

fn diagonal_of(m: &CMatrix, what: &str) -> Result<Vec<C64>, ModelError> {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > OFFDIAG_TOL {
                return Err(ModelError::NonDiagonalFastTerm {
                    what: what.into(),
                    row: i,
                    col: j,
                    value: m[(i, j)],
                });
            }
        }
    }
    Ok(m.diagonal())
}

impl ModelFile {
    pub fn into_model(self) -> Result<LindbladModel, ModelError> {
        let dim = self.dim;
        if dim == 0 || dim > MAX_DIM {
            return Err(mismatch("dim (supported 1..=16)", MAX_DIM, dim));
        }
        let h1 = match &self.h1 {
            Some(rows) => json_matrix(rows, dim, "H1")?,
            None => CMatrix::zeros(dim),
        };
        let h2_diag = match &self.h2_diag {
            None => vec![0.0; dim],
            Some(RealDiagonalEntry::Diagonal(v)) => v.clone(),
            Some(RealDiagonalEntry::Matrix(rows)) => {
                let m = json_matrix(rows, dim, "H2diag")?;
                let d = diagonal_of(&m, "H2diag")?;
                if let Some((k, z)) = d.iter().enumerate().find(|(_, z)| z.im.abs() > HERMITIAN_TOL) {
                    return Err(ModelError::NonHermitianH {
                        row: k,
                        col: k,
                        defect: 2.0 * z.im.abs(),
                    });
                }
                d.iter().map(|z| z.re).collect()
            }
        };
        let na = self
            .na
            .iter()
            .enumerate()
            .map(|(a, rows)| json_matrix(rows, dim, &format!("Na[{a}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let nb_diag = self
            .nb_diag
            .iter()
            .enumerate()
            .map(|(b, entry)| match entry {
                ComplexDiagonalEntry::Diagonal(v) => Ok(v.iter().map(to_c).collect()),
                ComplexDiagonalEntry::Matrix(rows) => {
                    let what = format!("Nbdiag[{b}]");
                    diagonal_of(&json_matrix(rows, dim, &what)?, &what)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LindbladModel {
            dim,
            h1,
            h2_diag,
            na,
            nb_diag,
            setup: MeasurementSetup {
                nu: self.nu.iter().map(to_c).collect(),
                gamma: self.gamma,
                eta: self.eta,
            },
        })
    }

    pub fn from_model(model: &LindbladModel) -> Self {
        let matrix = |m: &CMatrix| -> Vec<Vec<JsonComplex>> {
            (0..m.dim())
                .map(|i| m.row(i).iter().map(|&z| from_c(z)).collect())
                .collect()
        };
        Self {
            dim: model.dim,
            gamma: model.setup.gamma,
            eta: model.setup.eta,
            nu: model.setup.nu.iter().map(|&z| from_c(z)).collect(),
            h1: Some(matrix(&model.h1)),
            h2_diag: Some(RealDiagonalEntry::Diagonal(model.h2_diag.clone())),
            na: model.na.iter().map(matrix).collect(),
            nb_diag: model
                .nb_diag
                .iter()
                .map(|d| ComplexDiagonalEntry::Diagonal(d.iter().map(|&z| from_c(z)).collect()))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
