//! Lindblad master equations: Liouvillian assembly, steady states and
//! steady-state expectation values.
//!
//! Vectorization is column stacking, `vec(ρ)[i + d·j] = ρ[i, j]`, so that
//! `vec(A·ρ·B) = (Bᵀ ⊗ A)·vec(ρ)`.

use std::collections::HashSet;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::LuFactor;
use crate::opalg::{kron, trace_of_product, HilbertSpace, OperatorMatrix, ONE, ZERO};

/// One dissipation channel `(rate/2)·(2CρC† − C†Cρ − ρC†C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseTerm {
    pub operator: OperatorMatrix,
    pub rate: f64,
    pub label: String,
}

impl CollapseTerm {
    pub fn new(operator: OperatorMatrix, rate: f64, label: impl Into<String>) -> Self {
        Self { operator, rate, label: label.into() }
    }
}

/// Hamiltonian plus collapse channels; frequencies and rates in units of γ_σ.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    hamiltonian: OperatorMatrix,
    collapse: Vec<CollapseTerm>,
}

impl LindbladModel {
    pub fn new(hamiltonian: OperatorMatrix, collapse: Vec<CollapseTerm>) -> Result<Self> {
        let scale = hamiltonian.data().iter().map(|z| z.norm()).fold(1.0, f64::max);
        let herm = hamiltonian.hermiticity_error();
        if herm > 1e-12 * scale {
            return Err(Error::InvalidModel(format!("Hamiltonian is not Hermitian (deviation {herm:e})")));
        }
        let mut labels = HashSet::new();
        for term in &collapse {
            if term.operator.space() != hamiltonian.space() {
                return Err(Error::DimensionMismatch {
                    expected: hamiltonian.dim(),
                    found: term.operator.dim(),
                });
            }
            if !(term.rate >= 0.0 && term.rate.is_finite()) {
                return Err(Error::InvalidModel(format!("rate of '{}' must be finite and nonnegative", term.label)));
            }
            if !labels.insert(term.label.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate channel label '{}'", term.label)));
            }
        }
        Ok(Self { hamiltonian, collapse })
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn collapse_terms(&self) -> &[CollapseTerm] {
        &self.collapse
    }

    pub fn space(&self) -> &HilbertSpace {
        self.hamiltonian.space()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn channel(&self, label: &str) -> Option<&CollapseTerm> {
        self.collapse.iter().find(|t| t.label == label)
    }

    /// Right-hand side of the master equation evaluated directly on `rho`.
    pub fn rhs(&self, rho: &Array2<Complex64>) -> Array2<Complex64> {
        let h = self.hamiltonian.data();
        let i = Complex64::new(0.0, 1.0);
        let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| -i * z);
        for term in &self.collapse {
            if term.rate == 0.0 {
                continue;
            }
            let c = term.operator.data();
            let cd = term.operator.dagger().into_data();
            let cdc = cd.dot(c);
            let jump = c.dot(rho).dot(&cd);
            let half = 0.5 * term.rate;
            out = out + jump.mapv(|z| z * term.rate) - (cdc.dot(rho) + rho.dot(&cdc)).mapv(|z| z * half);
        }
        out
    }
}

/// Generator of `ρ̇` acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    data: Array2<Complex64>,
    space: HilbertSpace,
}

impl Superoperator {
    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    /// `L(X)` for a `d×d` matrix `X`.
    pub fn apply(&self, x: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        let d = self.space.total_dim();
        if x.dim() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: x.nrows() });
        }
        Ok(unvec(&self.data.dot(&vec_col(x)), d))
    }
}

/// Column-stacking `vec`.
pub fn vec_col(x: &Array2<Complex64>) -> Array1<Complex64> {
    x.t().iter().copied().collect()
}

/// Inverse of [`vec_col`].
pub fn unvec(v: &Array1<Complex64>, d: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j])
}

/// Density matrix on a tagged space. Construction does not enforce
/// positivity; use [`DensityMatrix::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: Array2<Complex64>,
    space: HilbertSpace,
}

impl DensityMatrix {
    pub fn from_array(data: Array2<Complex64>, space: HilbertSpace) -> Result<Self> {
        let d = space.total_dim();
        if data.dim() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: data.nrows() });
        }
        Ok(Self { data, space })
    }

    /// `|k⟩⟨k|` for the flattened basis index `k`.
    pub fn pure_basis_state(space: &HilbertSpace, k: usize) -> Result<Self> {
        let d = space.total_dim();
        if k >= d {
            return Err(Error::DimensionMismatch { expected: d, found: k + 1 });
        }
        let mut data = Array2::zeros((d, d));
        data[[k, k]] = ONE;
        Ok(Self { data, space: space.clone() })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().sum()
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-10) and a minimum
    /// eigenvalue of at least −1e-8.
    pub fn validate(&self) -> Result<()> {
        let d = self.data.nrows();
        for i in 0..d {
            for j in i..d {
                let dev = (self.data[[i, j]] - self.data[[j, i]].conj()).norm();
                if dev > 1e-10 {
                    return Err(Error::InvalidModel(format!("density matrix not Hermitian at ({i},{j}): {dev:e}")));
                }
            }
        }
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::InvalidModel(format!("density matrix trace {tr} ≠ 1")));
        }
        if !is_positive_definite(&self.data, 1e-8) {
            return Err(Error::InvalidModel("density matrix has an eigenvalue below -1e-8".into()));
        }
        Ok(())
    }
}

/// Cholesky test of `a + shift·I` (Hermitian part of `a` only).
fn is_positive_definite(a: &Array2<Complex64>, shift: f64) -> bool {
    let n = a.nrows();
    let mut l = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]].re + shift;
        for k in 0..j {
            diag -= l[[j, k]].norm_sqr();
        }
        if diag <= 0.0 {
            return false;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = 0.5 * (a[[i, j]] + a[[j, i]].conj());
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = s / ljj;
        }
    }
    true
}

/// Builds `L(ρ) = −i[H,ρ] + Σ (rate/2)(2CρC† − C†Cρ − ρC†C)` in matrix form.
pub fn build_liouvillian(model: &LindbladModel) -> Superoperator {
    let d = model.dim();
    let i = Complex64::new(0.0, 1.0);
    // With G = −iH − ½ Σ rate·C†C the coherent and anticommutator parts are
    // G·ρ + ρ·G†, i.e. I⊗G + conj(G)⊗I.
    let mut g = model.hamiltonian.data().mapv(|z| -i * z);
    let mut jumps = Array2::<Complex64>::zeros((d * d, d * d));
    for term in &model.collapse {
        if term.rate == 0.0 {
            continue;
        }
        let c = term.operator.data();
        let cdc = term.operator.dagger().data().dot(c);
        g = g - cdc.mapv(|z| z * (0.5 * term.rate));
        jumps = jumps + kron(&c.mapv(|z| z.conj() * term.rate), c);
    }
    let eye = Array2::<Complex64>::eye(d);
    let data = kron(&eye, &g) + kron(&g.mapv(|z| z.conj()), &eye) + jumps;
    Superoperator { data, space: model.space().clone() }
}

/// Null vector of `L` normalized to unit trace.
///
/// The row of the linear system belonging to `ρ[0,0]` is replaced by the
/// trace constraint and the resulting square system is solved by LU.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let d = l.space.total_dim();
    let mut a = l.data.clone();
    a.row_mut(0).fill(ZERO);
    for k in 0..d {
        a[[0, k + d * k]] = ONE;
    }
    let mut b = Array1::<Complex64>::zeros(d * d);
    b[0] = ONE;
    let x = LuFactor::new(&a)?.solve(&b)?;
    Ok(DensityMatrix { data: unvec(&x, d), space: l.space.clone() })
}

/// `‖L(ρ)‖∞` over all entries.
pub fn residual(l: &Superoperator, rho: &DensityMatrix) -> f64 {
    l.data.dot(&vec_col(&rho.data)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Steady-state `Tr(O·ρ_ss)` for each observable.
pub fn expectation_ss(model: &LindbladModel, observables: &[OperatorMatrix]) -> Result<Vec<Complex64>> {
    let rho = steady_state(&build_liouvillian(model))?;
    observables
        .iter()
        .map(|o| {
            if o.space() != model.space() {
                return Err(Error::DimensionMismatch { expected: model.dim(), found: o.dim() });
            }
            Ok(trace_of_product(o.data(), rho.data()))
        })
        .collect()
}
