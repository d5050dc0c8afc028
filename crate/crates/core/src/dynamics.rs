//! Exact unitary legs and the jump/no-jump dephasing map.
//!
//! One step of the open-system map sends a carried matrix `X` to
//! `dt * sum_i gamma_i L_i X' L_i^dagger + L_0 X' L_0^dagger` with `X' = u X u^dagger`.
//! The map is linear, so it applies equally to density matrices and to the
//! non-Hermitian intermediates that appear inside OTOC protocols.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis, Zip};

use crate::operator::{adjoint, EigenDecomposition, OperatorHints, QubitOperator};
use crate::spin_chain::NoiseModel;
use crate::state::{min_eigenvalue, DensityMatrix};
use crate::tolerance::TOLERANCES;
use crate::{CMatrix, Error, Result, C64};

/// Matrices carried through protocol legs; not necessarily Hermitian.
pub type GeneralMatrix = CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// Sign applied to the time argument of the unitary only.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    /// Inner step in us.
    pub dt_integration: f64,
    pub direction: Direction,
    /// Leg duration in us.
    pub duration: f64,
}

impl EvolutionConfig {
    pub fn new(dt_integration: f64, direction: Direction, duration: f64) -> Result<Self> {
        let c = Self { dt_integration, direction, duration };
        c.steps()?;
        Ok(c)
    }

    /// Number of inner steps; errors unless duration is a multiple of the step.
    pub fn steps(&self) -> Result<usize> {
        step_count(self.duration, self.dt_integration)
    }
}

/// round(duration / dt) after checking commensurability within the grid tolerance.
pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt_integration_us", format!("must be positive, got {dt}")));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", format!("must be non-negative, got {duration}")));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > TOLERANCES.grid {
        return Err(Error::param(
            "duration",
            format!("{duration} us is not a multiple of the integration step {dt} us"),
        ));
    }
    Ok(n as usize)
}

/// L_0 = sqrt(I - dt sum_i gamma_i L_i^dagger L_i).
pub fn no_jump_operator(noise: &NoiseModel, dt: f64) -> Result<QubitOperator> {
    if !(dt >= 0.0) {
        return Err(Error::param("dt_integration_us", format!("must be non-negative, got {dt}")));
    }
    let dim = noise.dim();
    let mut arg = Array2::<C64>::eye(dim);
    for (l, g) in noise.lindblad_ops().iter().zip(noise.rates()) {
        let ll = adjoint(l.matrix()).dot(l.matrix());
        arg = arg - ll.mapv(|z| z * (dt * g));
    }
    let herm = QubitOperator::with_hints(arg, OperatorHints::HERMITIAN)?;
    let eig = crate::operator::hermitian_eigendecompose(&herm)?;
    let min = eig.eigenvalues()[0];
    if min < 0.0 {
        return Err(Error::StepTooLarge(min));
    }
    let m = eig.apply_function(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    QubitOperator::with_hints(m, OperatorHints::HERMITIAN)
}

fn check_dim(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    Ok(())
}

/// One literal jump/no-jump step, summing every Lindblad term explicitly.
pub fn decoherent_step(m: &GeneralMatrix, u_dt: &QubitOperator, noise: &NoiseModel, dt: f64) -> Result<GeneralMatrix> {
    let dim = noise.dim();
    check_dim(m, dim)?;
    check_dim(u_dt.matrix(), dim)?;
    let l0 = no_jump_operator(noise, dt)?;
    let u = u_dt.matrix();
    let x = u.dot(m).dot(&adjoint(u));
    let mut out = l0.matrix().dot(&x).dot(&adjoint(l0.matrix()));
    for (l, g) in noise.lindblad_ops().iter().zip(noise.rates()) {
        let term = l.matrix().dot(&x).dot(&adjoint(l.matrix()));
        out.scaled_add(C64::new(dt * g, 0.0), &term);
    }
    Ok(out)
}

/// Fast repeated steps for the dephasing model.
///
/// Because every L_i is a diagonal sz, a step reduces to `X -> M o (u X u^dagger)`
/// with a real entrywise mask `M` (see [`NoiseModel::mask`]). The stepper owns
/// scratch space so each step costs two matrix products and one entrywise scaling.
#[derive(Clone, Debug)]
pub struct DephasingStepper {
    dim: usize,
    mask: Array2<f64>,
    // Products run on real and imaginary planes: one real product of
    // [A_re; A_im] (2d x d) with [B_re B_im] (d x 2d) yields all four partial
    // products, which is much faster than a complex product at these sizes.
    u_stack: Array2<f64>,
    u_wide: Array2<f64>,
    u_dag_stack: Array2<f64>,
    u_dag_wide: Array2<f64>,
    wide: Array2<f64>,
    stack: Array2<f64>,
    prod: Array2<f64>,
}

/// [re im], d x 2d.
fn fill_wide(m: &CMatrix, out: &mut Array2<f64>) {
    let d = m.ncols();
    let (mut re, mut im) = out.view_mut().split_at(Axis(1), d);
    Zip::from(&mut re).and(&mut im).and(m).for_each(|r, i, z| {
        *r = z.re;
        *i = z.im;
    });
}

/// [re; im], 2d x d.
fn fill_stack(m: &CMatrix, out: &mut Array2<f64>) {
    let d = m.nrows();
    let (mut re, mut im) = out.view_mut().split_at(Axis(0), d);
    Zip::from(&mut re).and(&mut im).and(m).for_each(|r, i, z| {
        *r = z.re;
        *i = z.im;
    });
}

fn wide_of(m: &CMatrix) -> Array2<f64> {
    let mut out = Array2::zeros((m.nrows(), 2 * m.ncols()));
    fill_wide(m, &mut out);
    out
}

fn stack_of(m: &CMatrix) -> Array2<f64> {
    let mut out = Array2::zeros((2 * m.nrows(), m.ncols()));
    fill_stack(m, &mut out);
    out
}

/// Splits the 2d x 2d block product of [A_re; A_im] and [B_re B_im] into the
/// real and imaginary parts of A B: (re re - im im, re im + im re).
fn quadrants(prod: &Array2<f64>) -> [ArrayView2<'_, f64>; 4] {
    let d = prod.nrows() / 2;
    [prod.slice(s![..d, ..d]), prod.slice(s![d.., d..]), prod.slice(s![..d, d..]), prod.slice(s![d.., ..d])]
}

impl DephasingStepper {
    /// Stepper for the block `X -> M o (left X right)` with arbitrary unitaries.
    pub fn from_parts(left: CMatrix, right: CMatrix, mask: Array2<f64>) -> Result<Self> {
        let dim = left.nrows();
        check_dim(&left, dim)?;
        check_dim(&right, dim)?;
        if mask.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: mask.nrows() });
        }
        Ok(Self {
            u_stack: stack_of(&left),
            u_wide: wide_of(&left),
            u_dag_stack: stack_of(&right),
            u_dag_wide: wide_of(&right),
            dim,
            mask,
            wide: Array2::zeros((dim, 2 * dim)),
            stack: Array2::zeros((2 * dim, dim)),
            prod: Array2::zeros((2 * dim, 2 * dim)),
        })
    }

    /// Stepper for `X -> M o (u(+-dt) X u(+-dt)^dagger)`.
    pub fn new(eig: &EigenDecomposition, noise: &NoiseModel, dt: f64, direction: Direction) -> Result<Self> {
        if eig.dim() != noise.dim() {
            return Err(Error::DimensionMismatch { expected: noise.dim(), found: eig.dim() });
        }
        let total_rate: f64 = noise.rates().iter().sum();
        let l0sq = 1.0 - dt * total_rate;
        if l0sq < 0.0 {
            return Err(Error::StepTooLarge(l0sq));
        }
        let u = eig.propagator(direction.sign() * dt).into_matrix();
        let u_dag = adjoint(&u);
        Self::from_parts(u, u_dag, noise.mask(dt))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// X <- M o (left X right).
    pub fn step(&mut self, x: &mut CMatrix) {
        fill_wide(x, &mut self.wide);
        general_mat_mul(1.0, &self.u_stack, &self.wide, 0.0, &mut self.prod);
        self.restack();
        general_mat_mul(1.0, &self.stack, &self.u_dag_wide, 0.0, &mut self.prod);
        let [rr, ii, ri, ir] = quadrants(&self.prod);
        Zip::from(x).and(&self.mask).and(rr).and(ii).and(ri).and(ir).for_each(|x, &m, &rr, &ii, &ri, &ir| {
            *x = C64::new((rr - ii) * m, (ri + ir) * m);
        });
    }

    /// Transpose of [`Self::step`] under the bilinear pairing Tr(A X):
    /// A <- right (M o A) left, so that Tr(A step(X)) = Tr(dual_step(A) X).
    pub fn dual_step(&mut self, a: &mut CMatrix) {
        let d = self.dim();
        {
            let (mut re, mut im) = self.wide.view_mut().split_at(Axis(1), d);
            Zip::from(&mut re).and(&mut im).and(&*a).and(&self.mask).for_each(|r, i, z, &m| {
                *r = z.re * m;
                *i = z.im * m;
            });
        }
        general_mat_mul(1.0, &self.u_dag_stack, &self.wide, 0.0, &mut self.prod);
        self.restack();
        general_mat_mul(1.0, &self.stack, &self.u_wide, 0.0, &mut self.prod);
        let [rr, ii, ri, ir] = quadrants(&self.prod);
        Zip::from(a).and(rr).and(ii).and(ri).and(ir).for_each(|a, &rr, &ii, &ri, &ir| {
            *a = C64::new(rr - ii, ri + ir);
        });
    }

    /// Moves the complex product held in `prod` into `stack` as [re; im].
    fn restack(&mut self) {
        let d = self.dim();
        let [rr, ii, ri, ir] = quadrants(&self.prod);
        let (mut re, mut im) = self.stack.view_mut().split_at(Axis(0), d);
        Zip::from(&mut re).and(&mut im).and(rr).and(ii).and(ri).and(ir).for_each(|re, im, &rr, &ii, &ri, &ir| {
            *re = rr - ii;
            *im = ri + ir;
        });
    }

    pub fn run(&mut self, x: &mut CMatrix, steps: usize) {
        for _ in 0..steps {
            self.step(x);
        }
    }

    pub fn run_dual(&mut self, a: &mut CMatrix, steps: usize) {
        for _ in 0..steps {
            self.dual_step(a);
        }
    }
}

/// Evolves `m` for one leg. With no noise (or a zero rate) a single exact
/// propagator covers the whole leg; otherwise `duration / dt` dephasing steps are
/// applied with the unitary's time sign taken from the direction. Decoherence
/// accrues in both directions.
pub fn evolve(
    m: &GeneralMatrix,
    eig: &EigenDecomposition,
    config: &EvolutionConfig,
    noise: Option<&NoiseModel>,
) -> Result<GeneralMatrix> {
    check_dim(m, eig.dim())?;
    let steps = config.steps()?;
    match noise {
        Some(nm) if !nm.is_closed() => {
            let mut stepper = DephasingStepper::new(eig, nm, config.dt_integration, config.direction)?;
            let mut x = m.clone();
            stepper.run(&mut x, steps);
            Ok(x)
        }
        _ => {
            if let Some(nm) = noise {
                check_dim(m, nm.dim())?;
            }
            if steps == 0 {
                return Ok(m.clone());
            }
            let u = eig.propagator(config.direction.sign() * config.duration).into_matrix();
            Ok(u.dot(m).dot(&adjoint(&u)))
        }
    }
}

/// Like [`evolve`] but applies [`decoherent_step`] literally at every step.
/// Slow; kept as an oracle for the masked fast path.
pub fn evolve_literal(
    m: &GeneralMatrix,
    eig: &EigenDecomposition,
    config: &EvolutionConfig,
    noise: &NoiseModel,
) -> Result<GeneralMatrix> {
    check_dim(m, eig.dim())?;
    let steps = config.steps()?;
    let u = eig.propagator(config.direction.sign() * config.dt_integration);
    let mut x = m.clone();
    for _ in 0..steps {
        x = decoherent_step(&x, &u, noise, config.dt_integration)?;
    }
    Ok(x)
}

/// Largest entrywise difference between forward evolution to `t` at step `dt`
/// and at step `dt / 2`.
pub fn convergence_probe(
    state: &DensityMatrix,
    eig: &EigenDecomposition,
    noise: Option<&NoiseModel>,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    let coarse = evolve(state.matrix(), eig, &EvolutionConfig::new(dt, Direction::Forward, t)?, noise)?;
    let fine = evolve(state.matrix(), eig, &EvolutionConfig::new(dt / 2.0, Direction::Forward, t)?, noise)?;
    Ok((coarse - fine).iter().fold(0.0f64, |a, z| a.max(z.norm())))
}

/// Smallest eigenvalue of the Hermitian part of an evolved state.
pub fn state_min_eigenvalue(m: &GeneralMatrix) -> f64 {
    min_eigenvalue(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{hermitian_eigendecompose, pauli, trace, PauliAxis};
    use crate::spin_chain::{build_hamiltonian, build_noise_model, gibbs_state_from_eig, SpinChainParams};

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    fn paper_setup(h: f64) -> (EigenDecomposition, DensityMatrix) {
        let p = SpinChainParams::paper(h);
        let eig = hermitian_eigendecompose(&build_hamiltonian(&p).unwrap()).unwrap();
        let rho = gibbs_state_from_eig(&eig, p.j_coupling).unwrap();
        (eig, rho)
    }

    #[test]
    fn no_jump_operator_values() {
        let nm = build_noise_model(130.0, 5, 1).unwrap();
        let l0 = no_jump_operator(&nm, 0.0).unwrap();
        assert!(max_abs(&(l0.matrix() - Array2::<C64>::eye(64))) < 1e-15);
        let l0 = no_jump_operator(&nm, 0.005).unwrap();
        let want = (1.0 - 0.005 * 6.0 / 260.0f64).sqrt();
        assert!(max_abs(&(l0.matrix() - Array2::<C64>::eye(64).mapv(|z| z * want))) < 1e-14);
        // L0^dagger L0 + dt sum gamma L^dagger L = I
        let mut sum = l0.matrix().dot(l0.matrix());
        for l in nm.lindblad_ops() {
            sum = sum + l.matrix().dot(l.matrix()).mapv(|z| z * 0.005 * nm.gamma());
        }
        assert!(max_abs(&(sum - Array2::<C64>::eye(64))) < 1e-15);
        assert!(matches!(no_jump_operator(&nm, 100.0), Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn zero_rate_step_is_unitary_conjugation() {
        let (eig, rho) = paper_setup(0.5);
        let nm = build_noise_model(f64::INFINITY, 5, 0).unwrap();
        let u = eig.propagator(0.1);
        let out = decoherent_step(rho.matrix(), &u, &nm, 0.1).unwrap();
        let want = u.matrix().dot(rho.matrix()).dot(&adjoint(u.matrix()));
        assert!(max_abs(&(out - want)) < 1e-15);
    }

    #[test]
    fn masked_step_matches_literal_step() {
        let (eig, rho) = paper_setup(0.5);
        let nm = build_noise_model(3.0, 5, 0).unwrap();
        let x0 = pauli(PauliAxis::X);
        let carrier = crate::operator::embed_at_site(&x0, 2, 5).unwrap().matrix().dot(rho.matrix());
        let cfg = EvolutionConfig::new(0.05, Direction::Backward, 1.0).unwrap();
        let fast = evolve(&carrier, &eig, &cfg, Some(&nm)).unwrap();
        let slow = evolve_literal(&carrier, &eig, &cfg, &nm).unwrap();
        assert!(max_abs(&(fast - slow)) < 1e-13);
    }

    #[test]
    fn dual_step_is_the_transpose() {
        let (eig, rho) = paper_setup(0.0);
        let nm = build_noise_model(5.0, 5, 0).unwrap();
        let mut st = DephasingStepper::new(&eig, &nm, 0.1, Direction::Forward).unwrap();
        let a = crate::operator::embed_at_site(&pauli(PauliAxis::Y), 3, 5).unwrap().into_matrix();
        let mut x = rho.matrix().clone();
        st.step(&mut x);
        let mut ad = a.clone();
        st.dual_step(&mut ad);
        let lhs = crate::operator::trace_of_product(&a, &x);
        let rhs = crate::operator::trace_of_product(&ad, rho.matrix());
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn trace_preserved_per_step() {
        let (eig, rho) = paper_setup(0.5);
        let nm = build_noise_model(1.0, 5, 0).unwrap();
        let u = eig.propagator(0.01);
        let mut x = rho.matrix().clone();
        for _ in 0..20 {
            let next = decoherent_step(&x, &u, &nm, 0.01).unwrap();
            assert!((trace(&next) - trace(&x)).norm() < 1e-12);
            x = next;
        }
    }

    #[test]
    fn single_qubit_dephasing_matches_analytic_decay() {
        let h = QubitOperator::new(CMatrix::zeros((2, 2))).unwrap();
        let eig = hermitian_eigendecompose(&h).unwrap();
        let nm = build_noise_model(130.0, 1, 0).unwrap();
        let c = C64::new(0.3, 0.2);
        let rho =
            DensityMatrix::new(ndarray::arr2(&[[C64::new(0.5, 0.0), c], [c.conj(), C64::new(0.5, 0.0)]])).unwrap();
        let t = 50.0;
        let out =
            evolve(rho.matrix(), &eig, &EvolutionConfig::new(0.01, Direction::Forward, t).unwrap(), Some(&nm)).unwrap();
        let want = c * (-t / 130.0f64).exp();
        assert!((out[[0, 1]] - want).norm() / want.norm() < 0.01);
    }

    #[test]
    fn closed_round_trip_is_identity() {
        let (eig, rho) = paper_setup(0.5);
        let fwd =
            evolve(rho.matrix(), &eig, &EvolutionConfig::new(0.1, Direction::Forward, 7.3).unwrap(), None).unwrap();
        let back = evolve(&fwd, &eig, &EvolutionConfig::new(0.1, Direction::Backward, 7.3).unwrap(), None).unwrap();
        assert!(max_abs(&(back - rho.matrix())) < 1e-10);
    }

    #[test]
    fn open_round_trip_loses_purity() {
        let (eig, _) = paper_setup(0.5);
        let mut psi = vec![C64::new(0.0, 0.0); 32];
        psi[5] = C64::new(1.0, 0.0);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let nm = build_noise_model(50.0, 5, 0).unwrap();
        let fwd = evolve(rho.matrix(), &eig, &EvolutionConfig::new(0.1, Direction::Forward, 5.0).unwrap(), Some(&nm))
            .unwrap();
        let back =
            evolve(&fwd, &eig, &EvolutionConfig::new(0.1, Direction::Backward, 5.0).unwrap(), Some(&nm)).unwrap();
        let purity = crate::operator::trace_of_product(&back, &back).re;
        assert!(purity < 1.0 - 1e-3);
    }

    #[test]
    fn zero_duration_leaves_state_unchanged() {
        let (eig, rho) = paper_setup(0.0);
        let nm = build_noise_model(130.0, 5, 0).unwrap();
        let cfg = EvolutionConfig::new(0.1, Direction::Forward, 0.0).unwrap();
        assert_eq!(&evolve(rho.matrix(), &eig, &cfg, Some(&nm)).unwrap(), rho.matrix());
        assert_eq!(&evolve(rho.matrix(), &eig, &cfg, None).unwrap(), rho.matrix());
    }

    #[test]
    fn config_rejects_incommensurate_duration() {
        assert!(EvolutionConfig::new(0.1, Direction::Forward, 0.25).is_err());
        assert!(EvolutionConfig::new(0.0, Direction::Forward, 1.0).is_err());
        assert!(EvolutionConfig::new(0.1, Direction::Forward, -1.0).is_err());
        assert_eq!(EvolutionConfig::new(0.005, Direction::Forward, 60.0).unwrap().steps().unwrap(), 12000);
    }

    #[test]
    fn convergence_probe_closed_is_exact() {
        let (eig, rho) = paper_setup(0.5);
        assert!(convergence_probe(&rho, &eig, None, 10.0, 0.1).unwrap() < 1e-12);
    }
}
