//! Dense operators on composite Hilbert spaces.
//!
//! Subsystems are ordered `[emitter, sensor₁, sensor₂]` throughout the crate,
//! and tensor products follow that order: the first slot is the most
//! significant index of the flattened basis.

use std::fmt;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::DensityMatrix;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ordered list of subsystem dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(bad));
        }
        Ok(Self { dims })
    }

    /// Single-subsystem space.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("⊗"))
    }
}

/// Square complex matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    data: Array2<Complex64>,
    space: HilbertSpace,
}

impl OperatorMatrix {
    pub fn from_array(data: Array2<Complex64>, space: HilbertSpace) -> Result<Self> {
        let d = space.total_dim();
        if data.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, found: data.nrows() });
        }
        if data.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: data.ncols() });
        }
        Ok(Self { data, space })
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { data: Array2::zeros((d, d)), space: space.clone() }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        Self { data: Array2::eye(space.total_dim()), space: space.clone() }
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { data: self.data.dot(&other.data), space: self.space.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { data: &self.data + &other.data, space: self.space.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { data: &self.data - &other.data, space: self.space.clone() })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self { data: self.data.mapv(|z| z * factor), space: self.space.clone() }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self { data: self.data.t().mapv(|z| z.conj()), space: self.space.clone() }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().sum()
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Integer power by repeated multiplication.
    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::identity(&self.space);
        for _ in 0..n {
            out.data = out.data.dot(&self.data);
        }
        out
    }

    /// `Tr(A·ρ)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<Complex64> {
        if rho.space() != &self.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rho.data().nrows() });
        }
        Ok(trace_of_product(&self.data, rho.data()))
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }
}

/// `Tr(A·B)` without forming the product.
pub fn trace_of_product(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    let mut acc = ZERO;
    for (row, col) in a.axis_iter(Axis(0)).zip(b.axis_iter(Axis(1))) {
        for (x, y) in row.iter().zip(col.iter()) {
            acc += x * y;
        }
    }
    acc
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
        block.zip_mut_with(b, |o, &y| *o = x * y);
    }
    out
}

/// Bosonic lowering operator on the Fock levels `0..dim`.
pub fn annihilation(dim: usize) -> Result<OperatorMatrix> {
    let space = HilbertSpace::single(dim)?;
    let mut data = Array2::zeros((dim, dim));
    for n in 1..dim {
        data[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::from_array(data, space)
}

pub fn creation(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator `diag(0, 1, …, dim−1)`, built directly so its entries are
/// exact integers.
pub fn number(dim: usize) -> Result<OperatorMatrix> {
    let space = HilbertSpace::single(dim)?;
    let data = Array2::from_diag(&(0..dim).map(|n| Complex64::new(n as f64, 0.0)).collect::<ndarray::Array1<_>>());
    OperatorMatrix::from_array(data, space)
}

/// Two-level lowering operator `|g⟩⟨e|` with basis order `(|g⟩, |e⟩)`.
pub fn sigma_minus() -> OperatorMatrix {
    let mut data = Array2::zeros((2, 2));
    data[[0, 1]] = ONE;
    OperatorMatrix { data, space: HilbertSpace { dims: vec![2] } }
}

/// Places a single-subsystem operator at `slot`, identities elsewhere.
pub fn embed(op: &OperatorMatrix, slot: usize, space: &HilbertSpace) -> Result<OperatorMatrix> {
    let dims = space.dims();
    if slot >= dims.len() {
        return Err(Error::SlotOutOfRange { slot, len: dims.len() });
    }
    if op.dim() != dims[slot] {
        return Err(Error::DimensionMismatch { expected: dims[slot], found: op.dim() });
    }
    let mut data = Array2::<Complex64>::eye(1);
    for (k, &d) in dims.iter().enumerate() {
        let factor = if k == slot { op.data.clone() } else { Array2::eye(d) };
        data = kron(&data, &factor);
    }
    OperatorMatrix::from_array(data, space.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_op(space: &HilbertSpace, seed: &[f64]) -> OperatorMatrix {
        let d = space.total_dim();
        let data = Array2::from_shape_fn((d, d), |(i, j)| {
            let k = (i * d + j) % seed.len();
            Complex64::new(seed[k] * (1.0 + i as f64), seed[(k + 1) % seed.len()] - j as f64 * 0.1)
        });
        OperatorMatrix::from_array(data, space.clone()).unwrap()
    }

    fn max_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
        a.data().iter().zip(b.data().iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn space_validation() {
        assert_eq!(HilbertSpace::new(vec![2, 3, 3]).unwrap().total_dim(), 18);
        assert_eq!(HilbertSpace::new(vec![]), Err(Error::InvalidDimension(0)));
        assert_eq!(HilbertSpace::new(vec![2, 1]), Err(Error::InvalidDimension(1)));
    }

    #[test]
    fn annihilation_entries() {
        let a2 = annihilation(2).unwrap();
        assert_eq!(a2.data(), &ndarray::array![[c(0.0), c(1.0)], [c(0.0), c(0.0)]]);

        let a3 = annihilation(3).unwrap();
        assert_eq!(a3.data()[[0, 1]], c(1.0));
        assert_eq!(a3.data()[[1, 2]], c(2f64.sqrt()));
        assert_eq!(a3.data().iter().filter(|z| **z != ZERO).count(), 2);

        assert_eq!(annihilation(1), Err(Error::InvalidDimension(1)));
    }

    #[test]
    fn number_operator_is_diagonal() {
        for dim in 2..7 {
            let a = annihilation(dim).unwrap();
            let n = a.dagger().matmul(&a).unwrap();
            let exact = number(dim).unwrap();
            for i in 0..dim {
                assert_eq!(exact.data()[[i, i]], c(i as f64));
                for j in 0..dim {
                    // √n·√n rounds to within one ulp of n.
                    let tol = if i == j { 2.0 * f64::EPSILON * i as f64 } else { 0.0 };
                    assert!((n.data()[[i, j]] - exact.data()[[i, j]]).norm() <= tol);
                }
            }
        }
    }

    #[test]
    fn canonical_commutator_below_truncation() {
        let dim = 5;
        let a = annihilation(dim).unwrap();
        let comm = a.commutator(&a.dagger()).unwrap();
        for i in 0..dim - 1 {
            for j in 0..dim - 1 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((comm.data()[[i, j]] - c(expected)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn two_level_algebra() {
        let s = sigma_minus();
        let sd = s.dagger();
        assert!(s.matmul(&s).unwrap().data().iter().all(|z| *z == ZERO));

        // σ|e⟩ = |g⟩
        let excited = ndarray::array![ZERO, ONE];
        assert_eq!(s.data().dot(&excited), ndarray::array![ONE, ZERO]);

        let proj = sd.matmul(&s).unwrap();
        assert_eq!(proj.data(), &ndarray::array![[ZERO, ZERO], [ZERO, ONE]]);

        let sum = s.matmul(&sd).unwrap().add(&proj).unwrap();
        assert_eq!(sum, OperatorMatrix::identity(s.space()));
    }

    #[test]
    fn embedding() {
        let space = HilbertSpace::new(vec![2, 3, 3]).unwrap();
        let s = embed(&sigma_minus(), 0, &space).unwrap();
        assert_eq!(s.dim(), 18);

        let id3 = OperatorMatrix::identity(&HilbertSpace::single(3).unwrap());
        assert_eq!(embed(&id3, 2, &space).unwrap(), OperatorMatrix::identity(&space));

        assert_eq!(embed(&sigma_minus(), 3, &space), Err(Error::SlotOutOfRange { slot: 3, len: 3 }));
        assert!(matches!(embed(&sigma_minus(), 1, &space), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn disjoint_embeddings_commute() {
        let space = HilbertSpace::new(vec![2, 3, 3]).unwrap();
        let x = random_op(&HilbertSpace::single(2).unwrap(), &[0.3, -1.2, 0.7]);
        let y = random_op(&HilbertSpace::single(3).unwrap(), &[1.1, 0.4, -0.5, 2.0]);
        let ex = embed(&x, 0, &space).unwrap();
        let ey = embed(&y, 1, &space).unwrap();
        let lhs = ex.matmul(&ey).unwrap();
        let rhs = ey.matmul(&ex).unwrap();
        assert!(max_diff(&lhs, &rhs) < 1e-13);
    }

    #[test]
    fn embedding_repeats_spectrum() {
        let space = HilbertSpace::new(vec![2, 3, 3]).unwrap();
        let emb = embed(&number(3).unwrap(), 1, &space).unwrap();
        let mut counts = [0usize; 3];
        for i in 0..18 {
            let v = emb.data()[[i, i]].re;
            counts[v as usize] += 1;
            assert_eq!(v.fract(), 0.0);
        }
        assert_eq!(counts, [6, 6, 6]);
    }

    #[test]
    fn trace_and_expectation() {
        let space = HilbertSpace::new(vec![2, 3, 3]).unwrap();
        assert_eq!(OperatorMatrix::identity(&space).trace(), c(18.0));

        let s = sigma_minus();
        let n = s.dagger().matmul(&s).unwrap();
        let rho = DensityMatrix::pure_basis_state(s.space(), 1).unwrap();
        assert_eq!(n.expectation(&rho).unwrap(), ONE);
    }

    proptest! {
        #[test]
        fn dagger_of_product(seed_a in prop::collection::vec(-2.0f64..2.0, 4), seed_b in prop::collection::vec(-2.0f64..2.0, 5)) {
            let space = HilbertSpace::new(vec![2, 3]).unwrap();
            let a = random_op(&space, &seed_a);
            let b = random_op(&space, &seed_b);
            let lhs = a.matmul(&b).unwrap().dagger();
            let rhs = b.dagger().matmul(&a.dagger()).unwrap();
            prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
            prop_assert_eq!(a.dagger().dagger(), a.clone());
            let tab = a.matmul(&b).unwrap().trace();
            let tba = b.matmul(&a).unwrap().trace();
            prop_assert!((tab - tba).norm() < 1e-10);
        }
    }
}
