//! Numerical tolerances shared by validation code and tests.

/// One record holding every tolerance used to validate operators and states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Entrywise |M - M^dagger| bound for Hermitian operators.
    pub hermitian: f64,
    /// Frobenius bound on M M^dagger - I for unitary operators.
    pub unitary: f64,
    /// Frobenius bound on V diag(lambda) V^dagger - H.
    pub reconstruction: f64,
    /// Entrywise bound on P^2 - I when checking a {+1, -1} spectrum.
    pub involution: f64,
    /// Hermiticity of a density matrix.
    pub state_hermitian: f64,
    /// |trace(rho) - 1| for a density matrix.
    pub state_trace: f64,
    /// Smallest eigenvalue a density matrix may have.
    pub state_min_eigenvalue: f64,
    /// Largest imaginary part still considered real.
    pub real: f64,
    /// Grid commensurability (durations vs integration steps).
    pub grid: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    hermitian: 1e-12,
    unitary: 1e-10,
    reconstruction: 1e-10,
    involution: 1e-12,
    state_hermitian: 1e-10,
    state_trace: 1e-10,
    state_min_eigenvalue: -1e-8,
    real: 1e-14,
    grid: 1e-9,
};
