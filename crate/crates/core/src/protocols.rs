//! The ideal OTOC and its three measurement protocols.
//!
//! F(t) = Tr(W(t)^dagger V^dagger W(t) V rho) with W(t) = U(t)^dagger W U(t).
//!
//! Each protocol exists in a literal form that follows its step list on the full
//! register, and the ancilla-based protocols also have a blocked form. The blocked
//! form carries only the ancilla coherence block `X_10 = <1|X|0>` of the joint
//! state, on which every step acts in closed form:
//!
//! * a controlled operation `sum_a K_a (x) |a><a|` maps `X_10 -> K_1 X_10 K_0^dagger`;
//! * evolution with branch propagators `U_a` maps `X_10 -> U_1 X_10 U_0^dagger`;
//! * an ancilla flip maps `X_10 -> X_10^dagger`;
//! * dephasing multiplies entry (r, c) by `1 - 2 gamma dt (hamming(r, c) + 1)`;
//! * the readout is `<sx> + i <sy> = 2 Tr(X_10)`.
//!
//! This halves the matrix dimension and gives the same numbers to rounding.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::dynamics::{evolve, step_count, DephasingStepper, Direction, EvolutionConfig};
use crate::operator::{
    adjoint, basis_projector, frobenius, kron, pauli, tensor, trace, trace_of_product, EigenDecomposition,
    OperatorHints, PauliAxis, QubitOperator,
};
use crate::spin_chain::{build_noise_model, NoiseModel};
use crate::state::DensityMatrix;
use crate::{CMatrix, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Ideal,
    Weak,
    Interferometric,
    Clock,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] =
        [ProtocolKind::Ideal, ProtocolKind::Weak, ProtocolKind::Interferometric, ProtocolKind::Clock];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Ideal => "ideal",
            ProtocolKind::Weak => "weak",
            ProtocolKind::Interferometric => "interferometric",
            ProtocolKind::Clock => "clock",
        }
    }

    /// Lab time per unit of OTOC time; `None` for the ideal (unmeasured) OTOC.
    pub fn lab_time_factor(self) -> Option<u32> {
        match self {
            ProtocolKind::Ideal => None,
            ProtocolKind::Weak => Some(3),
            ProtocolKind::Interferometric => Some(2),
            ProtocolKind::Clock => Some(4),
        }
    }

    /// Ancillas that dephase during the protocol.
    pub fn n_ancilla(self) -> usize {
        match self {
            ProtocolKind::Ideal | ProtocolKind::Weak => 0,
            ProtocolKind::Interferometric | ProtocolKind::Clock => 1,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" => Ok(ProtocolKind::Ideal),
            "weak" => Ok(ProtocolKind::Weak),
            "interferometric" => Ok(ProtocolKind::Interferometric),
            "clock" => Ok(ProtocolKind::Clock),
            other => Err(Error::config("protocols", format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtocPoint {
    pub t: f64,
    pub value: C64,
    pub protocol: ProtocolKind,
    pub decoherent: bool,
}

/// Dephasing applied during a protocol: dephasing time and inner integration step, both in us.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decoherence {
    pub t2_star: f64,
    pub dt: f64,
}

impl Decoherence {
    pub fn new(t2_star: f64, dt: f64) -> Result<Self> {
        if !(t2_star > 0.0) {
            return Err(Error::param("t2_star_us", format!("must be positive, got {t2_star}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt_integration_us", format!("must be positive, got {dt}")));
        }
        Ok(Self { t2_star, dt })
    }

    pub fn noise_model(&self, n_system: usize, n_ancilla: usize) -> Result<NoiseModel> {
        build_noise_model(self.t2_star, n_system, n_ancilla)
    }

    pub fn is_closed(&self) -> bool {
        self.t2_star.is_infinite()
    }
}

/// Treats a zero-rate decoherence as closed evolution.
fn active(noise: Option<&Decoherence>) -> Option<&Decoherence> {
    noise.filter(|d| !d.is_closed())
}

fn check_dims(eig: &EigenDecomposition, ops: &[&CMatrix]) -> Result<()> {
    let dim = eig.dim();
    for m in ops {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
    }
    Ok(())
}

fn check_unitary(name: &'static str, op: &QubitOperator) -> Result<()> {
    let dev = op.unitarity_error();
    if dev > crate::tolerance::TOLERANCES.unitary {
        return Err(Error::param(name, format!("must be unitary (deviation {dev:.3e})")));
    }
    Ok(())
}

fn n_system(eig: &EigenDecomposition) -> usize {
    eig.dim().trailing_zeros() as usize
}

/// W(t) = U(t)^dagger W U(t).
pub fn heisenberg_w(eig: &EigenDecomposition, w: &QubitOperator, t: f64) -> CMatrix {
    eig.heisenberg(w.matrix(), t)
}

/// Closed-system OTOC evaluated from the exact propagator.
pub fn ideal_otoc(
    eig: &EigenDecomposition,
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    t: f64,
) -> Result<C64> {
    check_dims(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    let wt = heisenberg_w(eig, w, t);
    let left = adjoint(&wt).dot(&adjoint(v.matrix())).dot(&wt).dot(v.matrix());
    Ok(trace_of_product(&left, rho.matrix()))
}

/// C(t) = <[W(t), V]^dagger [W(t), V]> / 4, from the explicit commutator.
pub fn commutator_square(
    eig: &EigenDecomposition,
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    t: f64,
) -> Result<f64> {
    check_dims(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    let wt = heisenberg_w(eig, w, t);
    let comm = wt.dot(v.matrix()) - v.matrix().dot(&wt);
    let sq = adjoint(&comm).dot(&comm);
    Ok(trace_of_product(&sq, rho.matrix()).re / 4.0)
}

fn leg(
    x: &CMatrix,
    eig: &EigenDecomposition,
    t: f64,
    direction: Direction,
    noise: Option<(&Decoherence, &NoiseModel)>,
) -> Result<CMatrix> {
    match noise {
        Some((d, nm)) => evolve(x, eig, &EvolutionConfig::new(d.dt, direction, t)?, Some(nm)),
        None => {
            if t == 0.0 {
                return Ok(x.clone());
            }
            let u = eig.propagator(direction.sign() * t).into_matrix();
            Ok(u.dot(x).dot(&adjoint(&u)))
        }
    }
}

/// Weak-measurement protocol on the system register: prepare rho, left-multiply by
/// D, evolve forward t, by C, evolve backward t, by B, evolve forward t, by A, trace.
/// No measurement ancillas are simulated, so only the system qubits dephase.
#[allow(clippy::too_many_arguments)]
pub fn weak_protocol_trace(
    a: &QubitOperator,
    b: &QubitOperator,
    c: &QubitOperator,
    d: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<C64> {
    check_dims(eig, &[a.matrix(), b.matrix(), c.matrix(), d.matrix(), rho.matrix()])?;
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    let nm = match active(noise) {
        Some(dec) => Some((dec, dec.noise_model(n_system(eig), 0)?)),
        None => None,
    };
    let nm = nm.as_ref().map(|(d, m)| (*d, m));
    let mut x = d.matrix().dot(rho.matrix());
    x = leg(&x, eig, t, Direction::Forward, nm)?;
    x = c.matrix().dot(&x);
    x = leg(&x, eig, t, Direction::Backward, nm)?;
    x = b.matrix().dot(&x);
    x = leg(&x, eig, t, Direction::Forward, nm)?;
    Ok(trace_of_product(a.matrix(), &x))
}

/// OTOC through the weak-measurement protocol with A = W, B = V, C = W, D = V.
pub fn weak_otoc(
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<C64> {
    weak_protocol_trace(&w.adjoint(), &v.adjoint(), w, v, rho, eig, t, noise)
}

fn controlled(on_zero: &CMatrix, on_one: &CMatrix) -> CMatrix {
    kron(on_zero, basis_projector(0).matrix()) + kron(on_one, basis_projector(1).matrix())
}

fn conjugate(k: &CMatrix, x: &CMatrix) -> CMatrix {
    k.dot(x).dot(&adjoint(k))
}

/// <sx> + i <sy> of the last (ancilla) qubit.
fn ancilla_readout(x: &CMatrix) -> C64 {
    let sys = x.nrows() / 2;
    let id = Array2::<C64>::eye(sys);
    let sx = kron(&id, pauli(PauliAxis::X).matrix());
    let sy = kron(&id, pauli(PauliAxis::Y).matrix());
    trace_of_product(&sx, x) + C64::i() * trace_of_product(&sy, x)
}

fn ancilla_setup(
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    noise: Option<&Decoherence>,
) -> Result<(CMatrix, Option<NoiseModel>)> {
    let x = rho.tensor(&DensityMatrix::plus()).into_matrix();
    let nm = match active(noise) {
        Some(dec) => Some(dec.noise_model(n_system(eig), 1)?),
        None => None,
    };
    Ok((x, nm))
}

/// Interferometric protocol, literally on system (x) ancilla:
/// prepare rho (x) |+><+|; apply I (x) |0><0| + V (x) |1><1|; evolve forward t;
/// apply W (x) I; evolve backward t; apply V (x) |0><0| + I (x) |1><1|; read the
/// ancilla. The ancilla dephases with the system.
pub fn interferometric_otoc(
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<C64> {
    check_dims(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    check_unitary("w", w)?;
    check_unitary("v", v)?;
    let (mut x, nm) = ancilla_setup(rho, eig, noise)?;
    let ext = eig.tensor_diagonal([1.0, 1.0]);
    let noisy = active(noise).zip(nm.as_ref());
    let id = Array2::<C64>::eye(eig.dim());
    x = conjugate(&controlled(&id, v.matrix()), &x);
    x = leg(&x, &ext, t, Direction::Forward, noisy)?;
    x = conjugate(&kron(w.matrix(), &Array2::<C64>::eye(2)), &x);
    x = leg(&x, &ext, t, Direction::Backward, noisy)?;
    x = conjugate(&controlled(v.matrix(), &id), &x);
    Ok(ancilla_readout(&x))
}

/// U_T(t) = U(t) (x) |0><0| + U(-t) (x) |1><1|, the evolution generated by H (x) sz.
pub fn clock_propagator(eig: &EigenDecomposition, t: f64) -> QubitOperator {
    let m = controlled(eig.propagator(t).matrix(), eig.propagator(-t).matrix());
    QubitOperator::from_parts_unchecked(m, OperatorHints::UNITARY)
}

fn require_time_reversal(eig: &EigenDecomposition, mats: &[&CMatrix]) -> Result<()> {
    if !eig.is_real() || !mats.iter().all(|m| crate::operator::is_real(m)) {
        return Err(Error::NotTimeReversalSymmetric(
            "the clock protocol reads out F(-t); recovering F(t) requires a real Hamiltonian, state and observables",
        ));
    }
    Ok(())
}

/// Quantum-clock protocol, literally on system (x) clock qubit:
/// prepare rho (x) |+><+|; controlled-V on |1>; evolve t under H (x) sz;
/// controlled-W on |1>; flip the clock; evolve 2t; flip the clock;
/// controlled-W on |0>; evolve t; controlled-V on |0>; read the clock qubit.
///
/// The raw readout equals F(-t). For real H, rho, W and V that is the complex
/// conjugate of F(t), which is returned; other inputs are rejected.
pub fn clock_otoc(
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<C64> {
    check_dims(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    check_unitary("w", w)?;
    check_unitary("v", v)?;
    require_time_reversal(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    let (mut x, nm) = ancilla_setup(rho, eig, noise)?;
    let clock = eig.tensor_diagonal([1.0, -1.0]);
    let noisy = active(noise).zip(nm.as_ref());
    let id = Array2::<C64>::eye(eig.dim());
    let flip = kron(&id, pauli(PauliAxis::X).matrix());
    x = conjugate(&controlled(&id, v.matrix()), &x);
    x = leg(&x, &clock, t, Direction::Forward, noisy)?;
    x = conjugate(&controlled(&id, w.matrix()), &x);
    x = conjugate(&flip, &x);
    x = leg(&x, &clock, 2.0 * t, Direction::Forward, noisy)?;
    x = conjugate(&flip, &x);
    x = conjugate(&controlled(w.matrix(), &id), &x);
    x = leg(&x, &clock, t, Direction::Forward, noisy)?;
    x = conjugate(&controlled(v.matrix(), &id), &x);
    Ok(ancilla_readout(&x).conj())
}

/// Dephasing factors on the `|1><0|` ancilla block: the full mask restricted to
/// rows with ancilla bit 1 and columns with ancilla bit 0.
pub fn ancilla_block_mask(noise: &NoiseModel, dt: f64) -> Result<Array2<f64>> {
    if noise.n_ancilla() != 1 {
        return Err(Error::param(
            "n_ancilla",
            format!("block mask needs exactly one ancilla, got {}", noise.n_ancilla()),
        ));
    }
    let full = noise.mask(dt);
    let sys = noise.dim() / 2;
    Ok(Array2::from_shape_fn((sys, sys), |(r, c)| full[[2 * r + 1, 2 * c]]))
}

/// Evolves the ancilla block `X_10 -> U_1 X_10 U_0^dagger` over `t`.
struct BlockLeg {
    stepper: Option<(DephasingStepper, usize)>,
    exact: (CMatrix, CMatrix),
}

impl BlockLeg {
    /// `branch_sign[a]` is the time sign of the propagator on ancilla branch `a`.
    fn new(
        eig: &EigenDecomposition,
        t: f64,
        branch_sign: [f64; 2],
        noise: Option<(&Decoherence, &NoiseModel)>,
    ) -> Result<Self> {
        let exact = (
            eig.propagator(branch_sign[1] * t).into_matrix(),
            adjoint(&eig.propagator(branch_sign[0] * t).into_matrix()),
        );
        let stepper = match noise {
            Some((d, nm)) => {
                let steps = step_count(t, d.dt)?;
                let total_rate: f64 = nm.rates().iter().sum();
                if 1.0 - d.dt * total_rate < 0.0 {
                    return Err(Error::StepTooLarge(1.0 - d.dt * total_rate));
                }
                let left = eig.propagator(branch_sign[1] * d.dt).into_matrix();
                let right = adjoint(&eig.propagator(branch_sign[0] * d.dt).into_matrix());
                Some((DephasingStepper::from_parts(left, right, ancilla_block_mask(nm, d.dt)?)?, steps))
            }
            None => None,
        };
        Ok(Self { stepper, exact })
    }

    fn apply(&mut self, x: &mut CMatrix) {
        match &mut self.stepper {
            Some((st, steps)) => st.run(x, *steps),
            None => *x = self.exact.0.dot(&*x).dot(&self.exact.1),
        }
    }
}

fn block_noise(eig: &EigenDecomposition, noise: Option<&Decoherence>) -> Result<Option<(Decoherence, NoiseModel)>> {
    match active(noise) {
        Some(d) => Ok(Some((*d, d.noise_model(n_system(eig), 1)?))),
        None => Ok(None),
    }
}

/// [`interferometric_otoc`] on the ancilla coherence block only.
pub fn interferometric_otoc_blocked(
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<C64> {
    check_dims(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    let bn = block_noise(eig, noise)?;
    let bn = bn.as_ref().map(|(d, m)| (d, m));
    let mut fwd = BlockLeg::new(eig, t, [1.0, 1.0], bn)?;
    let mut bwd = BlockLeg::new(eig, t, [-1.0, -1.0], bn)?;
    // X_10 of rho (x) |+><+| after controlled-V on |1>.
    let mut x = v.matrix().dot(rho.matrix()).mapv(|z| z * 0.5);
    fwd.apply(&mut x);
    x = w.matrix().dot(&x).dot(&adjoint(w.matrix()));
    bwd.apply(&mut x);
    x = x.dot(&adjoint(v.matrix()));
    Ok(trace(&x) * 2.0)
}

/// [`clock_otoc`] on the clock coherence block only.
pub fn clock_otoc_blocked(
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<C64> {
    check_dims(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    require_time_reversal(eig, &[w.matrix(), v.matrix(), rho.matrix()])?;
    let bn = block_noise(eig, noise)?;
    let bn = bn.as_ref().map(|(d, m)| (d, m));
    // Branch |0> runs forward and branch |1> backward under H (x) sz.
    let mut single = BlockLeg::new(eig, t, [1.0, -1.0], bn)?;
    let mut double = BlockLeg::new(eig, 2.0 * t, [1.0, -1.0], bn)?;
    let mut x = v.matrix().dot(rho.matrix()).mapv(|z| z * 0.5);
    single.apply(&mut x);
    x = w.matrix().dot(&x);
    x = adjoint(&x);
    double.apply(&mut x);
    x = adjoint(&x);
    x = x.dot(&adjoint(w.matrix()));
    single.apply(&mut x);
    x = x.dot(&adjoint(v.matrix()));
    Ok((trace(&x) * 2.0).conj())
}

/// Dispatches to the ideal OTOC or to a protocol; ancilla protocols use the blocked form.
pub fn protocol_otoc(
    kind: ProtocolKind,
    w: &QubitOperator,
    v: &QubitOperator,
    rho: &DensityMatrix,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<OtocPoint> {
    let value = match kind {
        ProtocolKind::Ideal => ideal_otoc(eig, w, v, rho, t)?,
        ProtocolKind::Weak => weak_otoc(w, v, rho, eig, t, noise)?,
        ProtocolKind::Interferometric => interferometric_otoc_blocked(w, v, rho, eig, t, noise)?,
        ProtocolKind::Clock => clock_otoc_blocked(w, v, rho, eig, t, noise)?,
    };
    let decoherent = kind != ProtocolKind::Ideal && active(noise).is_some();
    Ok(OtocPoint { t, value, protocol: kind, decoherent })
}

/// H (x) sz built explicitly; used to cross-check [`clock_propagator`].
pub fn clock_hamiltonian(h: &QubitOperator) -> QubitOperator {
    tensor(h, &pauli(PauliAxis::Z))
}

/// Frobenius distance between two operators of equal dimension.
pub fn operator_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius(&(a - b))
}
