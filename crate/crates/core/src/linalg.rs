//! Small dense complex linear algebra for qubit and two-qubit operators.
//!
//! Everything here is fixed at dimension 2 (single qubit) or 4 (qubit pair).
//! [`ComplexMatrix`] is the general container; [`Observable`] and
//! [`TwoQubitState`] are the 4×4 Hermitian types the solver works with.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

/// Entrywise tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("value {0} outside the probability range [0, 1]")]
    NotAProbability(f64),
    #[error("not a density matrix: {0}")]
    NotAState(String),
}

/// One of the three Pauli directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        })
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "X" | "x" => Ok(Axis::X),
            "Y" | "y" => Ok(Axis::Y),
            "Z" | "z" => Ok(Axis::Z),
            other => Err(format!("unknown basis '{other}' (expected X, Y or Z)")),
        }
    }
}

/// Square complex matrix of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    /// Builds a matrix from row-major entries. Panics if `entries.len()` is not a square.
    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim²");
        Self(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    /// Largest entrywise |M - M†|.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Eigenvalues in ascending order. Requires a Hermitian matrix.
    pub fn eigenvalues_hermitian(&self) -> Result<Vec<f64>, LinalgError> {
        let dev = self.hermitian_deviation();
        if dev > 1e-9 {
            return Err(LinalgError::NotHermitian(dev));
        }
        let eig = SymmetricEigen::new(self.0.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    fn check_dim(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

/// Normalized single-qubit state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KetVector {
    amplitudes: [C64; 2],
}

impl KetVector {
    /// Normalizes the given amplitudes. Returns `None` for the zero vector.
    pub fn new(a0: C64, a1: C64) -> Option<Self> {
        let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        if norm < 1e-300 {
            return None;
        }
        Some(Self {
            amplitudes: [a0 / norm, a1 / norm],
        })
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        self.amplitudes
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &KetVector) -> C64 {
        self.amplitudes[0].conj() * other.amplitudes[0]
            + self.amplitudes[1].conj() * other.amplitudes[1]
    }

    /// |⟨self|other⟩|²
    pub fn overlap(&self, other: &KetVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Applies diag(1, e^{iφ}), a rotation of the Bloch vector about Z by φ.
    pub fn rotated_about_z(&self, phi: f64) -> KetVector {
        let [a0, a1] = self.amplitudes;
        KetVector {
            amplitudes: [a0, a1 * C64::from_polar(1.0, phi)],
        }
    }

    /// |ψ⟩⟨ψ|
    pub fn projector(&self) -> ComplexMatrix {
        let [a0, a1] = self.amplitudes;
        ComplexMatrix::from_row_slice(
            2,
            &[a0 * a0.conj(), a0 * a1.conj(), a1 * a0.conj(), a1 * a1.conj()],
        )
    }
}

/// The standard Pauli matrix for `axis`, with Y = [[0, -i], [i, 0]].
pub fn pauli(axis: Axis) -> ComplexMatrix {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        Axis::X => ComplexMatrix::from_row_slice(2, &[o, l, l, o]),
        Axis::Y => ComplexMatrix::from_row_slice(2, &[o, -i, i, o]),
        Axis::Z => ComplexMatrix::from_row_slice(2, &[l, o, o, -l]),
    }
}

/// Eigenvector of `pauli(axis)` with eigenvalue +1 for bit 0 and -1 for bit 1.
pub fn eigenstate(axis: Axis, bit: u8) -> KetVector {
    let sign = if bit == 0 { 1.0 } else { -1.0 };
    let (a0, a1) = match axis {
        Axis::Z if bit == 0 => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        Axis::Z => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        Axis::X => (C64::new(1.0, 0.0), C64::new(sign, 0.0)),
        Axis::Y => (C64::new(1.0, 0.0), C64::new(0.0, sign)),
    };
    KetVector::new(a0, a1).expect("basis states are nonzero")
}

/// Kronecker product of two single-qubit operators.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    for m in [a, b] {
        if m.dim() != 2 {
            return Err(LinalgError::DimensionMismatch {
                expected: 2,
                got: m.dim(),
            });
        }
    }
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}

/// Binary Shannon entropy in bits, with 0·log 0 = 0.
pub fn binary_entropy(x: f64) -> Result<f64, LinalgError> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(LinalgError::NotAProbability(x));
    }
    Ok(entropy_term(x) + entropy_term(1.0 - x))
}

/// [`binary_entropy`] with the argument clamped into [0, 1]. For use on
/// quantities that are probabilities up to rounding.
pub fn binary_entropy_clamped(x: f64) -> f64 {
    let x = if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) };
    entropy_term(x) + entropy_term(1.0 - x)
}

fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// A 4×4 Hermitian operator on the qubit pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable(Matrix4<C64>);

impl Observable {
    /// Wraps a 4×4 matrix after checking Hermiticity.
    pub fn new(matrix: &ComplexMatrix) -> Result<Self, LinalgError> {
        if matrix.dim() != 4 {
            return Err(LinalgError::DimensionMismatch {
                expected: 4,
                got: matrix.dim(),
            });
        }
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(dev));
        }
        let m = &matrix.0;
        Ok(Self(Matrix4::from_fn(|i, j| m[(i, j)])))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// σ_a ⊗ σ_b.
    pub fn pauli_product(a: Axis, b: Axis) -> Self {
        Self::kron(&pauli(a), &pauli(b))
    }

    /// |α⟩⟨α| ⊗ |χ⟩⟨χ|.
    pub fn projector_product(alice: &KetVector, bob: &KetVector) -> Self {
        Self::kron(&alice.projector(), &bob.projector())
    }

    fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let k = tensor(a, b).expect("single-qubit factors");
        Self(Matrix4::from_fn(|i, j| k.0[(i, j)]))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn to_complex_matrix(&self) -> ComplexMatrix {
        ComplexMatrix(DMatrix::from_fn(4, 4, |i, j| self.0[(i, j)]))
    }

    /// a·self + b·𝟙
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self(self.0.map(|z| z * a) + Matrix4::identity().map(|z: C64| z * b))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Tr(self · ρ).
    pub fn expectation(&self, state: &TwoQubitState) -> f64 {
        trace_product(&self.0, &state.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = SymmetricEigen::new(self.0).eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }
}

/// Re Tr(A·B) without forming the product.
pub(crate) fn trace_product(a: &Matrix4<C64>, b: &Matrix4<C64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for k in 0..4 {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Two-qubit density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState(Matrix4<C64>);

impl TwoQubitState {
    /// Validates a candidate density matrix with eigenvalue tolerance `tol`.
    pub fn new(matrix: &ComplexMatrix, tol: f64) -> Result<Self, LinalgError> {
        let obs = Observable::new(matrix)?;
        let state = Self(obs.0);
        let tr = state.0.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(LinalgError::NotAState(format!("trace {tr}")));
        }
        let min = state.min_eigenvalue();
        if min < -tol {
            return Err(LinalgError::NotAState(format!("minimum eigenvalue {min:e}")));
        }
        Ok(state)
    }

    pub(crate) fn from_matrix4_unchecked(m: Matrix4<C64>) -> Self {
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix4::identity().map(|z: C64| z * 0.25))
    }

    /// (|00⟩ + |11⟩)/√2.
    pub fn phi_plus() -> Self {
        let h = C64::new(0.5, 0.0);
        let o = C64::new(0.0, 0.0);
        Self(Matrix4::new(h, o, o, h, o, o, o, o, o, o, o, o, h, o, o, h))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn to_complex_matrix(&self) -> ComplexMatrix {
        ComplexMatrix(DMatrix::from_fn(4, 4, |i, j| self.0[(i, j)]))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pauli_conventions() {
        let z = pauli(Axis::Z);
        assert_eq!(z.get(0, 0), C64::new(1.0, 0.0));
        assert_eq!(z.get(1, 1), C64::new(-1.0, 0.0));
        let y = pauli(Axis::Y);
        assert_eq!(y.get(0, 1), C64::new(0.0, -1.0));
        for axis in Axis::ALL {
            let p = pauli(axis);
            assert!(p.is_hermitian(HERMITIAN_TOL));
            assert!(p.trace().norm() < 1e-15);
            let sq = p.mul(&p).unwrap();
            assert_eq!(sq, ComplexMatrix::identity(2));
        }
        let xy = pauli(Axis::X).mul(&pauli(Axis::Y)).unwrap();
        assert!(xy.trace().norm() < 1e-15);
    }

    #[test]
    fn eigenstates_are_eigenvectors() {
        for axis in Axis::ALL {
            for bit in 0..2u8 {
                let ket = eigenstate(axis, bit);
                let sign = if bit == 0 { 1.0 } else { -1.0 };
                let p = pauli(axis);
                let [a0, a1] = ket.amplitudes();
                let r0 = p.get(0, 0) * a0 + p.get(0, 1) * a1;
                let r1 = p.get(1, 0) * a0 + p.get(1, 1) * a1;
                assert!((r0 - a0 * sign).norm() < 1e-14);
                assert!((r1 - a1 * sign).norm() < 1e-14);
            }
        }
        assert_eq!(eigenstate(Axis::Z, 0).amplitudes()[0], C64::new(1.0, 0.0));
        assert!(close(eigenstate(Axis::X, 0).overlap(&eigenstate(Axis::Z, 0)), 0.5, 1e-15));
        assert!(eigenstate(Axis::Y, 0).overlap(&eigenstate(Axis::Y, 1)) < 1e-30);
    }

    #[test]
    fn completeness_over_every_basis_pair() {
        for a in Axis::ALL {
            for i in 0..2u8 {
                for b in Axis::ALL {
                    let total: f64 = (0..2u8)
                        .map(|j| eigenstate(a, i).overlap(&eigenstate(b, j)))
                        .sum();
                    assert!(close(total, 1.0, 1e-12));
                }
            }
        }
    }

    #[test]
    fn bell_correlations() {
        let phi = TwoQubitState::phi_plus();
        let id = Observable::new(&tensor(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap()).unwrap();
        assert_eq!(id, Observable::identity());
        assert!(close(Observable::pauli_product(Axis::Z, Axis::Z).expectation(&phi), 1.0, 1e-15));
        assert!(close(Observable::pauli_product(Axis::X, Axis::X).expectation(&phi), 1.0, 1e-15));
        assert!(close(Observable::pauli_product(Axis::Y, Axis::Y).expectation(&phi), -1.0, 1e-15));
        assert!(close(Observable::pauli_product(Axis::X, Axis::Y).expectation(&phi), 0.0, 1e-15));
    }

    #[test]
    fn tensor_rejects_wrong_dimension() {
        let big = ComplexMatrix::identity(4);
        assert!(matches!(
            tensor(&big, &ComplexMatrix::identity(2)),
            Err(LinalgError::DimensionMismatch { expected: 2, got: 4 })
        ));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // -0.11 log2 0.11 - 0.89 log2 0.89 evaluated at 30 digits (mpmath).
        assert!(close(binary_entropy(0.11).unwrap(), 0.499_915_958_164_528_8, 1e-15));
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn entropy_is_symmetric() {
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            let d = binary_entropy(x).unwrap() - binary_entropy(1.0 - x).unwrap();
            assert!(d.abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn state_validation() {
        assert!(TwoQubitState::new(&TwoQubitState::phi_plus().to_complex_matrix(), 1e-12).is_ok());
        let not_unit = ComplexMatrix::identity(4);
        assert!(TwoQubitState::new(&not_unit, 1e-9).is_err());
        let neg = Observable::pauli_product(Axis::Z, Axis::Z).affine(0.5, 0.25);
        assert!(TwoQubitState::new(&neg.to_complex_matrix(), 1e-9).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn hermitian2() -> impl Strategy<Value = ComplexMatrix> {
            prop::array::uniform4(-2.0f64..2.0).prop_map(|[a, b, c, d]| {
                ComplexMatrix::from_row_slice(
                    2,
                    &[C64::new(a, 0.0), C64::new(c, d), C64::new(c, -d), C64::new(b, 0.0)],
                )
            })
        }

        proptest! {
            #[test]
            fn tensor_preserves_hermiticity_and_multiplies_traces(a in hermitian2(), b in hermitian2()) {
                let k = tensor(&a, &b).unwrap();
                prop_assert!(k.is_hermitian(1e-12));
                let lhs = k.trace();
                let rhs = a.trace() * b.trace();
                prop_assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }
}
