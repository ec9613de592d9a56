//! Dense complex matrix and superoperator algebra for small open systems.
//!
//! # Vectorization convention
//!
//! Superoperators act on *column-stacked* matrices. For a 2×2 matrix
//!
//! ```text
//!     ρ = | a  b |        vec(ρ) = (a, c, b, d)ᵀ
//!         | c  d |
//! ```
//!
//! i.e. `vec(ρ)[i + d·j] = ρ[i, j]`, which is exactly nalgebra's column-major
//! storage. With this convention `vec(A·X·B) = (Bᵀ ⊗ A)·vec(X)`, so the
//! conjugation `ρ ↦ UρU†` is represented by `conj(U) ⊗ U`.
//!
//! Choi matrices are built as `C = Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)` with the input
//! (ancilla) factor first and no `1/d` normalization, so the identity map has
//! a rank-one Choi matrix of trace `d` and a trace-preserving map satisfies
//! `Tr_out C = 𝟙`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance for operators and states.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Eigenvalues above this are treated as non-negative.
pub const PSD_TOL: f64 = -1e-10;
/// Default condition-number bound for [`Superoperator::invert`].
pub const DEFAULT_CONDITION_BOUND: f64 = 1e12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Largest entrywise deviation between `m` and `m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Maximum absolute entry of `a − b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Column-stacking vectorization.
pub fn vec(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a `d×d` matrix.
pub fn unvec(v: &DVector<Complex64>, d: usize) -> CMatrix {
    assert_eq!(v.len(), d * d, "vector length is not d²");
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Real eigenvalues (ascending) of the Hermitian part of `m`.
fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * c(0.5);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return invalid(format!("matrix is not square: {}x{}", m.nrows(), m.ncols()));
    }
    Ok(m.nrows())
}

/// A Hermitian operator, e.g. an observable or a non-Markovianity witness.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return invalid(format!("operator is not Hermitian (defect {defect:e})"));
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(identity(d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * c(s))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.norm() == 0.0)
    }
}

/// Pauli matrix σ_α with σ_0 = 𝟙, σ_1 = σ_x, σ_2 = σ_y, σ_3 = σ_z.
pub fn pauli(alpha: usize) -> Result<HermitianOperator> {
    let m = match alpha {
        0 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => return invalid(format!("Pauli index {alpha} out of range 0..=3")),
    };
    Ok(HermitianOperator(m))
}

/// Pauli matrix for an index already known to be valid.
pub(crate) fn sigma(alpha: usize) -> CMatrix {
    pauli(alpha).expect("Pauli index in range").into_matrix()
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(m: &HermitianOperator) -> f64 {
    m.eigenvalues().iter().map(|x| x.abs()).sum()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// A physical state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return invalid(format!("state is not Hermitian (defect {defect:e})"));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return invalid(format!("state trace is {tr}, expected 1"));
        }
        let lo = min_eigenvalue(&m);
        if lo < PSD_TOL {
            return invalid(format!("state has negative eigenvalue {lo:e}"));
        }
        Ok(Self(m))
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) vector ψ.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return invalid("zero state vector");
        }
        let v = DVector::from_column_slice(psi) / c(norm2.sqrt());
        let m = &v * v.adjoint();
        Self::new(m)
    }

    /// Qubit state with Bloch vector (x, y, z), |r| ≤ 1.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        if x * x + y * y + z * z > 1.0 + 1e-12 {
            return invalid("Bloch vector outside the unit ball");
        }
        let m = (sigma(0) + sigma(1) * c(x) + sigma(2) * c(y) + sigma(3) * c(z)) * c(0.5);
        Self::new(m)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(identity(d) / c(d as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// Linear map on d×d matrices stored as a d²×d² matrix acting on
/// column-stacked vectors (see the module docs).
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: matrix.nrows(),
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// ρ ↦ A ρ B.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Self {
        Self {
            dim: a.nrows(),
            matrix: kron(&b.transpose(), a),
        }
    }

    /// Generator of ρ ↦ −i[H, ρ] (ħ = 1).
    pub fn commutator_generator(h: &HermitianOperator) -> Self {
        let d = h.dim();
        let hm = h.matrix();
        let m = (kron(&identity(d), hm) - kron(&hm.transpose(), &identity(d))) * (-I);
        Self { dim: d, matrix: m }
    }

    /// Generator of ρ ↦ rate·(LρL† − ½{L†L, ρ}).
    pub fn dissipator(l: &CMatrix, rate: f64) -> Self {
        let d = l.nrows();
        let ldl = l.adjoint() * l;
        let m = kron(&l.conjugate(), l)
            - kron(&identity(d), &ldl) * c(0.5)
            - kron(&ldl.transpose(), &identity(d)) * c(0.5);
        Self {
            dim: d,
            matrix: m * c(rate),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(rho.nrows(), self.dim, "state dimension mismatch");
        unvec(&(&self.matrix * vec(rho)), self.dim)
    }

    /// `self ∘ other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn scale(&self, s: f64) -> Superoperator {
        Self {
            dim: self.dim,
            matrix: &self.matrix * c(s),
        }
    }

    /// Matrix exponential `exp(t·self)`, for generators.
    pub fn exp(&self, t: f64) -> Superoperator {
        Self {
            dim: self.dim,
            matrix: (&self.matrix * c(t)).exp(),
        }
    }

    /// Ratio of extreme singular values.
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn invert(&self) -> Result<Superoperator> {
        self.invert_with_bound(DEFAULT_CONDITION_BOUND)
    }

    /// Inverse, refusing matrices whose condition number exceeds `bound`.
    pub fn invert_with_bound(&self, bound: f64) -> Result<Superoperator> {
        let condition = self.condition_number();
        if !(condition <= bound) {
            return Err(Error::SingularPropagator { condition });
        }
        let inv = self
            .matrix
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::SingularPropagator { condition })?;
        Ok(Self {
            dim: self.dim,
            matrix: inv,
        })
    }

    /// Largest deviation of `vec(𝟙)ᵀ·M` from `vec(𝟙)ᵀ`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let id = vec(&identity(self.dim)).transpose();
        let row = &id * &self.matrix;
        row.iter()
            .zip(id.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `vec(𝟙)ᵀ·M`; zero for generators of trace-preserving
    /// dynamics.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let id = vec(&identity(self.dim)).transpose();
        (&id * &self.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_defect() <= tol
    }

    /// Checks that the images of the matrix units' Hermitian combinations
    /// are Hermitian.
    pub fn is_hermiticity_preserving(&self, tol: f64) -> bool {
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                let mut x = CMatrix::zeros(d, d);
                let mut y = CMatrix::zeros(d, d);
                x[(i, j)] += ONE;
                x[(j, i)] += ONE;
                y[(i, j)] += -I;
                y[(j, i)] += I;
                if i == j {
                    y = CMatrix::zeros(d, d);
                }
                if hermiticity_defect(&self.apply(&x)) > tol
                    || hermiticity_defect(&self.apply(&y)) > tol
                {
                    return false;
                }
            }
        }
        true
    }

    pub fn choi(&self) -> ChoiMatrix {
        choi_of(self)
    }

    /// Superoperator norm-style distance: maximum entry difference.
    pub fn max_abs_diff(&self, other: &Superoperator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }
}

/// ρ ↦ UρU† for unitary U.
pub fn conjugation_superop(u: &CMatrix) -> Result<Superoperator> {
    let d = check_square(u)?;
    let defect = max_abs_diff(&(u * u.adjoint()), &identity(d));
    if defect > HERMITIAN_TOL {
        return invalid(format!("operator is not unitary (defect {defect:e})"));
    }
    Ok(Superoperator::sandwich(u, &u.adjoint()))
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)` of a superoperator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Dimension of the system the underlying map acts on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the ancilla used to build the matrix (equal to `dim`).
    pub fn ancilla_dim(&self) -> usize {
        self.dim
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= PSD_TOL
    }

    /// Trace over the output factor; equals 𝟙 for trace-preserving maps.
    pub fn partial_trace_output(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d, d, |i, j| {
            (0..d).map(|a| self.matrix[(i * d + a, j * d + a)]).sum()
        })
    }

    /// Kraus operators from the spectral decomposition, dropping weights
    /// below `cutoff`. Fails if the matrix is not PSD.
    pub fn kraus_operators(&self, cutoff: f64) -> Result<Vec<CMatrix>> {
        let d = self.dim;
        let herm = (&self.matrix + self.matrix.adjoint()) * c(0.5);
        let eig = herm.symmetric_eigen();
        let mut ops = Vec::new();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < PSD_TOL {
                return invalid(format!(
                    "map is not completely positive (eigenvalue {lam:e})"
                ));
            }
            if lam <= cutoff {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            let scale = c(lam.sqrt());
            ops.push(CMatrix::from_fn(d, d, |a, i| v[i * d + a] * scale));
        }
        Ok(ops)
    }
}

pub fn choi_of(s: &Superoperator) -> ChoiMatrix {
    let d = s.dim();
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(i, j)] = ONE;
            let img = s.apply(&unit);
            m.view_mut((i * d, j * d), (d, d)).copy_from(&img);
        }
    }
    ChoiMatrix { dim: d, matrix: m }
}

/// Apply `I_k ⊗ S` to an operator on the `k·d` dimensional space with the
/// ancilla as the first tensor factor.
pub fn apply_extended(s: &Superoperator, k: usize, x: &CMatrix) -> Result<CMatrix> {
    let d = s.dim();
    if x.nrows() != k * d || x.ncols() != k * d {
        return Err(Error::DimensionMismatch {
            expected: k * d,
            found: x.nrows(),
        });
    }
    let mut out = CMatrix::zeros(k * d, k * d);
    for i in 0..k {
        for j in 0..k {
            let block = x.view((i * d, j * d), (d, d)).into_owned();
            out.view_mut((i * d, j * d), (d, d))
                .copy_from(&s.apply(&block));
        }
    }
    Ok(out)
}
