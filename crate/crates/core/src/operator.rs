//! Dense complex-matrix primitives for multi-qubit operators.
//!
//! Qubit ordering: site 1 is the most significant (leftmost) tensor factor.
//! Ancillas are always appended as the least significant factor.

use std::ops::Mul;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use crate::tolerance::TOLERANCES;
use crate::{CMatrix, Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Structural hints carried alongside an operator. They are validated when set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OperatorHints {
    pub hermitian: bool,
    pub unitary: bool,
}

impl OperatorHints {
    pub const NONE: OperatorHints = OperatorHints { hermitian: false, unitary: false };
    pub const HERMITIAN: OperatorHints = OperatorHints { hermitian: true, unitary: false };
    pub const UNITARY: OperatorHints = OperatorHints { hermitian: false, unitary: true };
    pub const HERMITIAN_UNITARY: OperatorHints = OperatorHints { hermitian: true, unitary: true };

    fn and(self, other: OperatorHints) -> OperatorHints {
        OperatorHints { hermitian: self.hermitian && other.hermitian, unitary: self.unitary && other.unitary }
    }
}

/// A dense operator on `2^k` dimensional Hilbert space, `k >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitOperator {
    matrix: CMatrix,
    hints: OperatorHints,
}

fn check_shape(m: &CMatrix) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows != cols || rows < 2 || !rows.is_power_of_two() {
        return Err(Error::BadShape { rows, cols });
    }
    Ok(())
}

impl QubitOperator {
    /// Wraps a matrix without hints.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_shape(&matrix)?;
        Ok(Self { matrix, hints: OperatorHints::NONE })
    }

    /// Wraps a matrix and validates the requested hints.
    pub fn with_hints(matrix: CMatrix, hints: OperatorHints) -> Result<Self> {
        check_shape(&matrix)?;
        let op = Self { matrix, hints };
        if hints.hermitian {
            let dev = op.hermiticity_error();
            if dev > TOLERANCES.hermitian {
                return Err(Error::HintViolated { hint: "hermitian", deviation: dev });
            }
        }
        if hints.unitary {
            let dev = op.unitarity_error();
            if dev > TOLERANCES.unitary {
                return Err(Error::HintViolated { hint: "unitary", deviation: dev });
            }
        }
        Ok(op)
    }

    pub(crate) fn from_parts_unchecked(matrix: CMatrix, hints: OperatorHints) -> Self {
        debug_assert!(check_shape(&matrix).is_ok());
        Self { matrix, hints }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let m = Array2::from_diag_elem(dim, ONE);
        check_shape(&m)?;
        Ok(Self { matrix: m, hints: OperatorHints::HERMITIAN_UNITARY })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of qubits the operator acts on.
    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn hints(&self) -> OperatorHints {
        self.hints
    }

    pub fn adjoint(&self) -> QubitOperator {
        Self { matrix: adjoint(&self.matrix), hints: self.hints }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    /// Matrix product with a dimension check.
    pub fn dot(&self, other: &QubitOperator) -> Result<QubitOperator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let hints = OperatorHints { hermitian: false, unitary: self.hints.unitary && other.hints.unitary };
        Ok(Self { matrix: self.matrix.dot(&other.matrix), hints })
    }

    /// Largest entrywise |M - M^dagger|.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// Frobenius norm of M M^dagger - I.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.dot(&adjoint(&self.matrix));
        let id = Array2::<C64>::eye(self.dim());
        frobenius(&(prod - id))
    }

    /// True when every entry has a zero imaginary part (within `TOLERANCES.real`).
    pub fn is_real(&self) -> bool {
        is_real(&self.matrix)
    }
}

impl Mul for &QubitOperator {
    type Output = QubitOperator;

    /// Panics on a dimension mismatch; use [`QubitOperator::dot`] for a checked product.
    fn mul(self, rhs: &QubitOperator) -> QubitOperator {
        self.dot(rhs).expect("operator dimensions must match")
    }
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().sum()
}

/// Trace of a product without forming it: sum_ij a_ij b_ji.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub(crate) fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im.abs() <= TOLERANCES.real)
}

/// Kronecker product with `a` as the more significant factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Kronecker product of two operators; hints survive when both factors carry them.
pub fn tensor(a: &QubitOperator, b: &QubitOperator) -> QubitOperator {
    QubitOperator::from_parts_unchecked(kron(&a.matrix, &b.matrix), a.hints.and(b.hints))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: PauliAxis) -> QubitOperator {
    let i = C64::new(0.0, 1.0);
    let m = match axis {
        PauliAxis::X => ndarray::arr2(&[[ZERO, ONE], [ONE, ZERO]]),
        PauliAxis::Y => ndarray::arr2(&[[ZERO, -i], [i, ZERO]]),
        PauliAxis::Z => ndarray::arr2(&[[ONE, ZERO], [ZERO, -ONE]]),
    };
    QubitOperator::from_parts_unchecked(m, OperatorHints::HERMITIAN_UNITARY)
}

/// Single-qubit projector |bit><bit| in the computational basis.
pub fn basis_projector(bit: u8) -> QubitOperator {
    let mut m = Array2::<C64>::zeros((2, 2));
    m[[bit as usize & 1, bit as usize & 1]] = ONE;
    QubitOperator::from_parts_unchecked(m, OperatorHints::HERMITIAN)
}

/// Places a single-qubit operator on `site` (1-based) of an `n`-qubit register.
pub fn embed_at_site(op: &QubitOperator, site: usize, n: usize) -> Result<QubitOperator> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: op.dim() });
    }
    if site == 0 || site > n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    let left = Array2::<C64>::eye(1 << (site - 1));
    let right = Array2::<C64>::eye(1 << (n - site));
    let m = kron(&kron(&left, &op.matrix), &right);
    Ok(QubitOperator::from_parts_unchecked(m, op.hints))
}

/// Outcome of a two-valued measurement; eigenvalue +1 or -1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Binary label with eigenvalue (-1)^bit.
    pub fn bit(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Sign {
        if bit & 1 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn from_value(v: i32) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(Error::param("eigenvalue", format!("must be +1 or -1, got {v}"))),
        }
    }
}

/// Projector (I +/- P)/2 onto an eigenspace of an operator whose spectrum lies in {+1, -1}.
pub fn eigen_projector(op: &QubitOperator, eigenvalue: Sign) -> Result<QubitOperator> {
    let herm = op.hermiticity_error();
    if herm > TOLERANCES.hermitian {
        return Err(Error::NotHermitian(herm));
    }
    // Hermitian with P^2 = I is equivalent to spectrum in {+1, -1}.
    let sq = op.matrix.dot(&op.matrix) - Array2::<C64>::eye(op.dim());
    let dev = sq.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if dev > TOLERANCES.involution {
        return Err(Error::SpectrumNotPlusMinusOne(dev));
    }
    let s = eigenvalue.value();
    let id = Array2::<C64>::eye(op.dim());
    let m = (&id + &op.matrix.mapv(|z| z * s)).mapv(|z| z * 0.5);
    Ok(QubitOperator::from_parts_unchecked(m, OperatorHints::HERMITIAN))
}

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: CMatrix,
    real: bool,
}

pub fn hermitian_eigendecompose(op: &QubitOperator) -> Result<EigenDecomposition> {
    let herm = op.hermiticity_error();
    if herm > TOLERANCES.hermitian {
        return Err(Error::NotHermitian(herm));
    }
    let n = op.dim();
    // Symmetrize so the solver sees an exactly Hermitian input.
    let m = DMatrix::from_fn(n, n, |i, j| (op.matrix[[i, j]] + op.matrix[[j, i]].conj()) * 0.5);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors, real: op.is_real() })
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// True when the decomposed operator was real in the computational basis,
    /// i.e. the dynamics it generates is time-reversal symmetric.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// V f(diag(lambda)) V^dagger for a scalar function of the eigenvalues.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
            let s = f(self.eigenvalues[j]);
            col.mapv_inplace(|z| z * s);
        }
        scaled.dot(&adjoint(&self.eigenvectors))
    }

    /// V diag(lambda) V^dagger.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply_function(|l| C64::new(l, 0.0))
    }

    /// Exact propagator U(t) = exp(-i H t); negative `t` gives the backward propagator.
    pub fn propagator(&self, t: f64) -> QubitOperator {
        let m = self.apply_function(|l| C64::from_polar(1.0, -l * t));
        QubitOperator::from_parts_unchecked(m, OperatorHints::UNITARY)
    }

    /// Heisenberg-picture operator U(t)^dagger A U(t).
    pub fn heisenberg(&self, op: &CMatrix, t: f64) -> CMatrix {
        let u = self.propagator(t).into_matrix();
        adjoint(&u).dot(op).dot(&u)
    }

    /// Decomposition of H (x) diag(d0, d1), built from this one without re-diagonalizing.
    /// `[1, 1]` gives H (x) I and `[1, -1]` gives H (x) sigma_z.
    pub fn tensor_diagonal(&self, factor: [f64; 2]) -> EigenDecomposition {
        let n = self.dim();
        let vecs = kron(&self.eigenvectors, &Array2::<C64>::eye(2));
        let vals: Vec<f64> = (0..2 * n).map(|k| self.eigenvalues[k / 2] * factor[k % 2]).collect();
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        EigenDecomposition {
            eigenvalues: Array1::from_iter(order.iter().map(|&k| vals[k])),
            eigenvectors: Array2::from_shape_fn((2 * n, 2 * n), |(i, j)| vecs[[i, order[j]]]),
            real: self.real,
        }
    }
}
