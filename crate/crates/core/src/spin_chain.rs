//! Ising-chain Hamiltonian, butterfly operators, initial states and the dephasing model.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::operator::{
    embed_at_site, hermitian_eigendecompose, pauli, EigenDecomposition, OperatorHints, PauliAxis, QubitOperator,
};
use crate::state::DensityMatrix;
use crate::{CMatrix, Error, Result, C64};

/// Coupling J in rad/us. With this value J*t is the dimensionless time and the
/// published timescales (onset near 10 us, first maximum near 20 us) are reproduced.
pub const PAPER_J: f64 = 1.0 / (2.0 * PI);

/// Dephasing time in us matching an optimistic 130 in units of 1/J.
pub const PAPER_T2_STAR_US: f64 = 130.0 * 2.0 * PI;

/// The literal laboratory dephasing time, used for single-qubit calibration.
pub const LAB_T2_STAR_US: f64 = 130.0;

pub const PAPER_N_QUBITS: usize = 5;
pub const PAPER_G_OVER_J: f64 = 1.05;
pub const PAPER_TEMPERATURE_OVER_J: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinChainParams {
    pub n_qubits: usize,
    /// Coupling J in rad/us.
    pub j_coupling: f64,
    pub h_over_j: f64,
    pub g_over_j: f64,
}

impl SpinChainParams {
    pub fn new(n_qubits: usize, j_coupling: f64, h_over_j: f64, g_over_j: f64) -> Result<Self> {
        let p = Self { n_qubits, j_coupling, h_over_j, g_over_j };
        p.validate()?;
        Ok(p)
    }

    /// Five-qubit chain with g/J = 1.05 and the given longitudinal field.
    pub fn paper(h_over_j: f64) -> Self {
        Self { n_qubits: PAPER_N_QUBITS, j_coupling: PAPER_J, h_over_j, g_over_j: PAPER_G_OVER_J }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 {
            return Err(Error::param("n_qubits", format!("must be at least 2, got {}", self.n_qubits)));
        }
        if self.n_qubits > 10 {
            return Err(Error::param(
                "n_qubits",
                format!("dense simulation supports at most 10, got {}", self.n_qubits),
            ));
        }
        if !(self.j_coupling > 0.0 && self.j_coupling.is_finite()) {
            return Err(Error::param("j_coupling", format!("must be positive, got {}", self.j_coupling)));
        }
        if !self.h_over_j.is_finite() {
            return Err(Error::param("h_over_j", "must be finite"));
        }
        if !self.g_over_j.is_finite() {
            return Err(Error::param("g_over_j", "must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}

/// H = -J sum sz_i sz_{i+1} - h sum sz_i - g sum sx_i on an open chain of `n` sites.
/// Absolute energies; `n = 1` leaves only the field terms.
pub fn ising_hamiltonian(n: usize, j: f64, h: f64, g: f64) -> Result<QubitOperator> {
    if n == 0 {
        return Err(Error::param("n_qubits", "must be at least 1"));
    }
    let dim = 1usize << n;
    let mut m = Array2::<C64>::zeros((dim, dim));
    // Diagonal part from the z terms, with site 1 as the most significant bit.
    for r in 0..dim {
        let s = |i: usize| if (r >> (n - 1 - i)) & 1 == 0 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for i in 0..n.saturating_sub(1) {
            e -= j * s(i) * s(i + 1);
        }
        for i in 0..n {
            e -= h * s(i);
        }
        m[[r, r]] = C64::new(e, 0.0);
    }
    // Transverse field flips one bit.
    for r in 0..dim {
        for i in 0..n {
            let c = r ^ (1 << (n - 1 - i));
            m[[r, c]] -= C64::new(g, 0.0);
        }
    }
    QubitOperator::with_hints(m, OperatorHints::HERMITIAN)
}

pub fn build_hamiltonian(params: &SpinChainParams) -> Result<QubitOperator> {
    params.validate()?;
    let j = params.j_coupling;
    ising_hamiltonian(params.n_qubits, j, params.h_over_j * j, params.g_over_j * j)
}

/// W = sz on site 1 and V = sz on site N.
pub fn butterfly_operators(params: &SpinChainParams) -> Result<(QubitOperator, QubitOperator)> {
    params.validate()?;
    let z = pauli(PauliAxis::Z);
    Ok((embed_at_site(&z, 1, params.n_qubits)?, embed_at_site(&z, params.n_qubits, params.n_qubits)?))
}

/// exp(-H/T)/Z with T in absolute energy units.
pub fn gibbs_state(h: &QubitOperator, temperature: f64) -> Result<DensityMatrix> {
    let eig = hermitian_eigendecompose(h)?;
    gibbs_state_from_eig(&eig, temperature)
}

/// Gibbs state from a precomputed decomposition; energies are shifted by the ground
/// energy so the weights never overflow.
pub fn gibbs_state_from_eig(eig: &EigenDecomposition, temperature: f64) -> Result<DensityMatrix> {
    if !(temperature > 0.0) || temperature.is_nan() {
        return Err(Error::param("temperature", format!("must be positive, got {temperature}")));
    }
    let lam = eig.eigenvalues();
    let e0 = lam[0];
    let z: f64 = lam.iter().map(|&l| (-(l - e0) / temperature).exp()).sum();
    let m: CMatrix = eig.apply_function(|l| C64::new((-(l - e0) / temperature).exp() / z, 0.0));
    DensityMatrix::new(m)
}

/// The maximally mixed state I/2^n.
pub fn infinite_temperature_state(n: usize) -> Result<DensityMatrix> {
    if n == 0 || n > 16 {
        return Err(Error::param("n_qubits", format!("must be in 1..=16, got {n}")));
    }
    let dim = 1usize << n;
    DensityMatrix::new(Array2::from_diag_elem(dim, C64::new(1.0 / dim as f64, 0.0)))
}

/// Initial system state of an experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    /// Gibbs state of the system Hamiltonian at temperature T = (T/J) * J.
    Gibbs { temperature_over_j: f64 },
    /// The maximally mixed state.
    InfiniteTemperature,
}

impl InitialState {
    pub fn paper() -> Self {
        InitialState::Gibbs { temperature_over_j: PAPER_TEMPERATURE_OVER_J }
    }

    pub fn build(&self, params: &SpinChainParams, eig: &EigenDecomposition) -> Result<DensityMatrix> {
        match *self {
            InitialState::Gibbs { temperature_over_j } => {
                if !(temperature_over_j > 0.0) || !temperature_over_j.is_finite() {
                    return Err(Error::param(
                        "temperature_over_j",
                        format!("must be positive and finite, got {temperature_over_j}"),
                    ));
                }
                gibbs_state_from_eig(eig, temperature_over_j * params.j_coupling)
            }
            InitialState::InfiniteTemperature => infinite_temperature_state(params.n_qubits),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialState::Gibbs { temperature_over_j } => format!("gibbs(T/J={temperature_over_j})"),
            InitialState::InfiniteTemperature => "infinite".to_string(),
        }
    }
}

/// Uniform single-qubit dephasing with L_i = sz_i on every system and ancilla site.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    t2_star: f64,
    gamma: f64,
    n_system: usize,
    n_ancilla: usize,
    dephasing_sites: Vec<usize>,
    lindblad_ops: Vec<QubitOperator>,
}

/// gamma = 1/(2 T2*); an infinite T2* yields a zero rate.
pub fn build_noise_model(t2_star: f64, n_system: usize, n_ancilla: usize) -> Result<NoiseModel> {
    if !(t2_star > 0.0) {
        return Err(Error::param("t2_star_us", format!("must be positive, got {t2_star}")));
    }
    let total = n_system + n_ancilla;
    if n_system == 0 || total > 12 {
        return Err(Error::param("n_qubits", format!("unsupported register of {n_system}+{n_ancilla} qubits")));
    }
    let gamma = if t2_star.is_infinite() { 0.0 } else { 1.0 / (2.0 * t2_star) };
    let z = pauli(PauliAxis::Z);
    let dephasing_sites: Vec<usize> = (1..=total).collect();
    let lindblad_ops = dephasing_sites.iter().map(|&s| embed_at_site(&z, s, total)).collect::<Result<Vec<_>>>()?;
    Ok(NoiseModel { t2_star, gamma, n_system, n_ancilla, dephasing_sites, lindblad_ops })
}

impl NoiseModel {
    pub fn t2_star(&self) -> f64 {
        self.t2_star
    }

    /// Rate per site in 1/us.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_system(&self) -> usize {
        self.n_system
    }

    pub fn n_ancilla(&self) -> usize {
        self.n_ancilla
    }

    pub fn n_sites(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites()
    }

    /// 1-based sites, system first, ancillas last.
    pub fn dephasing_sites(&self) -> &[usize] {
        &self.dephasing_sites
    }

    pub fn lindblad_ops(&self) -> &[QubitOperator] {
        &self.lindblad_ops
    }

    pub fn rates(&self) -> Vec<f64> {
        vec![self.gamma; self.n_sites()]
    }

    pub fn is_closed(&self) -> bool {
        self.gamma == 0.0
    }

    /// Entrywise factor of one jump/no-jump step in the computational basis.
    ///
    /// With sz jumps the channel acts as X -> sum_k c_k L_k X L_k, which multiplies
    /// entry (r, c) by l0^2 + dt*gamma*sum_i s_i(r) s_i(c) = 1 - 2 gamma dt hamming(r, c).
    pub fn mask(&self, dt: f64) -> Array2<f64> {
        let dim = self.dim();
        let rate = 2.0 * self.gamma * dt;
        Array2::from_shape_fn((dim, dim), |(r, c)| 1.0 - rate * f64::from((r ^ c).count_ones()))
    }
}
