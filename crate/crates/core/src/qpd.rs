//! Coarse-grained Kirkwood-Dirac quasiprobabilities, total nonclassicality and
//! the scrambling timescales extracted from it.
//!
//! Keys `(v1, w2, v2, w3)` are labelled `abcd` with `v1 = (-1)^a`, `w2 = (-1)^b`,
//! `v2 = (-1)^c`, `w3 = (-1)^d` and stored in binary order 0000 ... 1111.
//!
//! Expanding each projector as `(I +- P)/2` writes every quasiprobability as
//! `p(v1, w2, v2, w3) = 1/16 sum v1^a w2^b v2^c w3^d T(a, b, c, d)` where
//! `T(a, b, c, d)` is the weak-protocol trace with `A = W^d`, `B = V^c`,
//! `C = W^b`, `D = V^a`. The series engine evaluates these 16 moments instead of
//! 16 projector runs.

use std::fmt;

use crate::dynamics::{step_count, DephasingStepper, Direction};
use crate::operator::{eigen_projector, trace_of_product, EigenDecomposition, QubitOperator, Sign};
use crate::parallel::{map_indexed, try_map_indexed};
use crate::protocols::{weak_protocol_trace, Decoherence};
use crate::spin_chain::{build_hamiltonian, butterfly_operators, InitialState, SpinChainParams};
use crate::state::DensityMatrix;
use crate::tolerance::TOLERANCES;
use crate::{CMatrix, Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QpdKey {
    pub v1: Sign,
    pub w2: Sign,
    pub v2: Sign,
    pub w3: Sign,
}

impl QpdKey {
    pub fn from_index(index: usize) -> QpdKey {
        QpdKey {
            v1: Sign::from_bit(index >> 3),
            w2: Sign::from_bit(index >> 2),
            v2: Sign::from_bit(index >> 1),
            w3: Sign::from_bit(index),
        }
    }

    /// Position in abcd binary order.
    pub fn index(self) -> usize {
        self.v1.bit() << 3 | self.w2.bit() << 2 | self.v2.bit() << 1 | self.w3.bit()
    }

    /// The four bits, e.g. "0110".
    pub fn label(self) -> String {
        format!("{:04b}", self.index())
    }

    pub fn all() -> impl Iterator<Item = QpdKey> {
        (0..16).map(QpdKey::from_index)
    }

    /// Product of the four eigenvalues.
    pub fn weight(self) -> f64 {
        self.v1.value() * self.w2.value() * self.v2.value() * self.w3.value()
    }

    /// (v1, w2, v2, w3) -> (v1, w3, v2, w2); maps a value to its complex conjugate.
    pub fn conjugate_partner(self) -> QpdKey {
        QpdKey { v1: self.v1, w2: self.w3, v2: self.v2, w3: self.w2 }
    }
}

impl fmt::Display for QpdKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The 16 quasiprobabilities at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Qpd {
    pub values: [C64; 16],
    pub t: f64,
    pub decoherent: bool,
}

impl Qpd {
    pub fn get(&self, key: QpdKey) -> C64 {
        self.values[key.index()]
    }

    pub fn sum(&self) -> C64 {
        self.values.iter().sum()
    }

    /// Builds the distribution from the 16 moments T(a, b, c, d), same index order.
    pub fn from_moments(moments: &[C64; 16], t: f64, decoherent: bool) -> Qpd {
        let mut values = [ZERO; 16];
        for (k, slot) in values.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (m, &tm) in moments.iter().enumerate() {
                // (-1)^(popcount of the bits shared by key and moment)
                let sign = if (k & m).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                acc += tm * sign;
            }
            *slot = acc / 16.0;
        }
        Qpd { values, t, decoherent }
    }
}

/// F = sum v1 w2 v2 w3 p(v1, w2, v2, w3).
pub fn otoc_from_qpd(qpd: &Qpd) -> C64 {
    QpdKey::all().map(|k| qpd.get(k) * k.weight()).sum()
}

/// N = sum |p| - 1, without clamping.
pub fn total_nonclassicality(qpd: &Qpd) -> f64 {
    qpd.values.iter().map(|z| z.norm()).sum::<f64>() - 1.0
}

struct Projectors {
    w: [QubitOperator; 2],
    v: [QubitOperator; 2],
}

fn projectors(w: &QubitOperator, v: &QubitOperator) -> Result<Projectors> {
    Ok(Projectors {
        w: [eigen_projector(w, Sign::Plus)?, eigen_projector(w, Sign::Minus)?],
        v: [eigen_projector(v, Sign::Plus)?, eigen_projector(v, Sign::Minus)?],
    })
}

/// Runs the weak-measurement protocol once per key with A = P_w3(W), B = P_v2(V),
/// C = P_w2(W), D = P_v1(V).
pub fn compute_qpd(
    rho: &DensityMatrix,
    w: &QubitOperator,
    v: &QubitOperator,
    eig: &EigenDecomposition,
    t: f64,
    noise: Option<&Decoherence>,
) -> Result<Qpd> {
    let p = projectors(w, v)?;
    let mut values = [ZERO; 16];
    for key in QpdKey::all() {
        values[key.index()] = weak_protocol_trace(
            &p.w[key.w3.bit()],
            &p.v[key.v2.bit()],
            &p.w[key.w2.bit()],
            &p.v[key.v1.bit()],
            rho,
            eig,
            t,
            noise,
        )?;
    }
    Ok(Qpd { values, t, decoherent: noise.is_some_and(|d| !d.is_closed()) })
}

/// Tr(P_w3(W(t)) P_v2(V) P_w2(W(t)) P_v1(V) rho) with Heisenberg-evolved projectors.
pub fn direct_qpd(
    rho: &DensityMatrix,
    w: &QubitOperator,
    v: &QubitOperator,
    eig: &EigenDecomposition,
    t: f64,
) -> Result<Qpd> {
    let p = projectors(w, v)?;
    let pw: Vec<CMatrix> = p.w.iter().map(|x| eig.heisenberg(x.matrix(), t)).collect();
    let mut values = [ZERO; 16];
    for key in QpdKey::all() {
        let prod =
            pw[key.w3.bit()].dot(p.v[key.v2.bit()].matrix()).dot(&pw[key.w2.bit()]).dot(p.v[key.v1.bit()].matrix());
        values[key.index()] = trace_of_product(&prod, rho.matrix());
    }
    Ok(Qpd { values, t, decoherent: false })
}

/// The 16 moments Tr(Z_cd W^b Y_a), index a b c d. `y[a]`, `z[c][d]` as in the module docs.
fn moments(w: &CMatrix, y: &[CMatrix; 2], z: &[[&CMatrix; 2]; 2]) -> [C64; 16] {
    let wy = [y[0].clone(), w.dot(&y[0]), y[1].clone(), w.dot(&y[1])];
    let mut out = [ZERO; 16];
    for (idx, slot) in out.iter_mut().enumerate() {
        let (a, b, c, d) = (idx >> 3 & 1, idx >> 2 & 1, idx >> 1 & 1, idx & 1);
        *slot = trace_of_product(z[c][d], &wy[2 * a + b]);
    }
    out
}

/// Closed-system moments: Y_a = V^a rho, Z_cd = W(t)^d V^c.
fn closed_qpd(rho: &CMatrix, w: &CMatrix, v: &CMatrix, eig: &EigenDecomposition, t: f64) -> Qpd {
    let wt = eig.heisenberg(w, t);
    let id = CMatrix::eye(rho.nrows());
    let wtv = wt.dot(v);
    let y = [rho.clone(), v.dot(rho)];
    let z = [[&id, &wt], [v, &wtv]];
    Qpd::from_moments(&moments(&wt, &y, &z), t, false)
}

/// Uniform time grid t_k = k * dt, k = 0 ... n_points - 1, in us.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_points: usize,
}

impl TimeGrid {
    /// Grid over [0, t_max]; `t_max` must be a multiple of `dt`.
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt_grid_us", format!("must be positive, got {dt}")));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::param("t_max_us", format!("must be positive, got {t_max}")));
        }
        let n = step_count(t_max, dt)
            .map_err(|_| Error::param("t_max_us", format!("{t_max} is not a multiple of dt_grid_us = {dt}")))?;
        Ok(Self { dt, n_points: n + 1 })
    }

    pub fn with_points(dt: f64, n_points: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || n_points == 0 {
            return Err(Error::param("dt_grid_us", "grid needs a positive step and at least one point"));
        }
        Ok(Self { dt, n_points })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n_points - 1)
    }

    /// k * dt, computed as k / (1/dt) when 1/dt is an integer so that decimal
    /// grids print cleanly (0.3 rather than 0.30000000000000004).
    pub fn time(&self, k: usize) -> f64 {
        let inv = 1.0 / self.dt;
        if (inv - inv.round()).abs() < 1e-9 && inv.round() >= 1.0 {
            k as f64 / inv.round()
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.time(k)).collect()
    }
}

/// When the series engine may stop before the grid horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Evaluate every grid point.
    Horizon,
    /// Stop once the nonclassicality has returned to `threshold` after its first
    /// maximum, but not before `min_t`.
    AfterZeroReturn { threshold: f64, min_t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesOptions {
    pub workers: usize,
    pub stop: StopRule,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { workers: 1, stop: StopRule::Horizon }
    }
}

/// Grid points evaluated between stop checks. Fixed so results never depend on the worker count.
const CHUNK: usize = 64;

/// Quasiprobabilities on a grid, measured through the weak protocol.
///
/// Closed systems use the exact propagator at each point. Under dephasing the
/// moments are split into legs that start from fixed matrices (advanced
/// incrementally along the grid with the same steps a fresh integration would
/// take) and two legs per point that are integrated afresh through the
/// transposed map.
pub fn qpd_series(
    rho: &DensityMatrix,
    w: &QubitOperator,
    v: &QubitOperator,
    eig: &EigenDecomposition,
    grid: &TimeGrid,
    noise: Option<&Decoherence>,
    options: &SeriesOptions,
) -> Result<Vec<Qpd>> {
    let dim = eig.dim();
    for m in [w.matrix(), v.matrix(), rho.matrix()] {
        if m.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
    }
    projectors(w, v)?;
    match noise.filter(|d| !d.is_closed()) {
        None => chunked(grid, options, |range| {
            map_indexed(options.workers, range.len(), |i| {
                let k = range.start + i;
                closed_qpd(rho.matrix(), w.matrix(), v.matrix(), eig, grid.time(k))
            })
        }),
        Some(dec) => open_series(rho, w, v, eig, grid, dec, options),
    }
}

fn chunked(
    grid: &TimeGrid,
    options: &SeriesOptions,
    mut eval: impl FnMut(std::ops::Range<usize>) -> Result<Vec<Qpd>>,
) -> Result<Vec<Qpd>> {
    let mut out: Vec<Qpd> = Vec::with_capacity(grid.len());
    let mut start = 0;
    while start < grid.len() {
        let end = (start + CHUNK).min(grid.len());
        out.extend(eval(start..end)?);
        start = end;
        if let StopRule::AfterZeroReturn { threshold, min_t } = options.stop {
            let values: Vec<f64> = out.iter().map(total_nonclassicality).collect();
            let (_, _, kz) = scan(&values, threshold);
            if kz.is_some() && grid.time(out.len() - 1) >= min_t - TOLERANCES.grid {
                break;
            }
        }
    }
    Ok(out)
}

struct Snapshot {
    k: usize,
    y: [CMatrix; 2],
    a1: CMatrix,
    z10: CMatrix,
}

fn open_series(
    rho: &DensityMatrix,
    w: &QubitOperator,
    v: &QubitOperator,
    eig: &EigenDecomposition,
    grid: &TimeGrid,
    dec: &Decoherence,
    options: &SeriesOptions,
) -> Result<Vec<Qpd>> {
    let per_point = step_count(grid.dt(), dec.dt).map_err(|_| {
        Error::param("dt_integration_us", format!("{} does not divide dt_grid_us = {}", dec.dt, grid.dt()))
    })?;
    let nm = dec.noise_model(eig.dim().trailing_zeros() as usize, 0)?;
    let mut fwd = DephasingStepper::new(eig, &nm, dec.dt, Direction::Forward)?;
    let mut bwd = DephasingStepper::new(eig, &nm, dec.dt, Direction::Backward)?;
    let (wm, vm) = (w.matrix(), v.matrix());
    let id = CMatrix::eye(eig.dim());

    // Legs that start from fixed matrices: Y_a = Phi^n(V^a rho), A1 = Phi^T^n(W), Z_10 = Phi_b^T^n(V).
    let mut y = [rho.matrix().clone(), vm.dot(rho.matrix())];
    let mut a1 = wm.clone();
    let mut z10 = vm.clone();
    let mut next_k = 0usize;

    chunked(grid, options, |range| {
        let mut snaps = Vec::with_capacity(range.len());
        for k in range.clone() {
            while next_k < k {
                fwd.run(&mut y[0], per_point);
                fwd.run(&mut y[1], per_point);
                fwd.run_dual(&mut a1, per_point);
                bwd.run_dual(&mut z10, per_point);
                next_k += 1;
            }
            snaps.push(Snapshot { k, y: y.clone(), a1: a1.clone(), z10: z10.clone() });
        }
        let bwd = &bwd;
        try_map_indexed(options.workers, snaps.len(), |i| {
            let s = &snaps[i];
            let mut st = bwd.clone();
            let n = s.k * per_point;
            let mut z01 = s.a1.clone();
            let mut z11 = s.a1.dot(vm);
            st.run_dual(&mut z01, n);
            st.run_dual(&mut z11, n);
            let z = [[&id, &z01], [&s.z10, &z11]];
            Ok(Qpd::from_moments(&moments(wm, &s.y, &z), grid.time(s.k), true))
        })
    })
}

/// Total nonclassicality on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NonclassicalitySeries {
    dt: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl NonclassicalitySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptySeries);
        }
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        if times.len() > 1 {
            if !(dt > 0.0) {
                return Err(Error::param("times", "must be strictly ascending"));
            }
            for (k, pair) in times.windows(2).enumerate() {
                if ((pair[1] - pair[0]) - dt).abs() > 1e-6 * dt.max(1.0) {
                    return Err(Error::param("times", format!("spacing is not uniform at index {}", k + 1)));
                }
            }
        }
        Ok(Self { dt, times, values })
    }

    pub fn from_qpds(qpds: &[Qpd]) -> Result<Self> {
        Self::new(qpds.iter().map(|q| q.t).collect(), qpds.iter().map(total_nonclassicality).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoidal integral over [0, t_end], limited to the computed range.
    pub fn integral(&self, t_end: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.len() {
            if self.times[k] > t_end + TOLERANCES.grid {
                break;
            }
            acc += 0.5 * (self.values[k] + self.values[k - 1]) * (self.times[k] - self.times[k - 1]);
        }
        acc
    }
}

/// Ñ(t) at every grid point.
pub fn nonclassicality_series(
    rho: &DensityMatrix,
    w: &QubitOperator,
    v: &QubitOperator,
    eig: &EigenDecomposition,
    grid: &TimeGrid,
    noise: Option<&Decoherence>,
    options: &SeriesOptions,
) -> Result<NonclassicalitySeries> {
    NonclassicalitySeries::from_qpds(&qpd_series(rho, w, v, eig, grid, noise, options)?)
}

/// Onset, first maximum and return to zero of the nonclassicality, in us.
/// `None` marks an event that does not occur before the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimescaleReport {
    pub t_star: Option<f64>,
    pub t_m: Option<f64>,
    pub t_z: Option<f64>,
    /// (t_z - t_m) / (t_m - t_star); `None` when any event is censored.
    pub ratio: Option<f64>,
    pub threshold: f64,
    pub h_over_j: Option<f64>,
}

impl TimescaleReport {
    pub fn censored_star(&self) -> bool {
        self.t_star.is_none()
    }

    pub fn censored_m(&self) -> bool {
        self.t_m.is_none()
    }

    pub fn censored_z(&self) -> bool {
        self.t_z.is_none()
    }
}

/// Grid indices of onset, first maximum and return; see [`extract_timescales_with_threshold`].
pub fn scan(values: &[f64], threshold: f64) -> (Option<usize>, Option<usize>, Option<usize>) {
    let Some(ks) = values.iter().position(|&x| x > threshold) else {
        return (None, None, None);
    };
    let mut km = None;
    for k in ks.max(1)..values.len() {
        if values[k] <= values[k - 1] {
            continue;
        }
        // First differing value to the right; a plateau counts at its earliest index.
        match values[k + 1..].iter().find(|&&x| x != values[k]) {
            Some(&next) if next < values[k] => {
                km = Some(k);
                break;
            }
            _ => {}
        }
    }
    let Some(km) = km else {
        return (Some(ks), None, None);
    };
    let kz = values[km + 1..].iter().position(|&x| x <= threshold).map(|i| km + 1 + i);
    (Some(ks), Some(km), kz)
}

/// Timescales with threshold Δt_grid².
pub fn extract_timescales(series: &NonclassicalitySeries) -> Result<TimescaleReport> {
    extract_timescales_with_threshold(series, series.dt() * series.dt())
}

/// t_star: first point above `threshold`. t_m: first strict local maximum at or
/// after t_star, a plateau counting at its earliest index. t_z: first point after
/// t_m at or below `threshold`.
pub fn extract_timescales_with_threshold(series: &NonclassicalitySeries, threshold: f64) -> Result<TimescaleReport> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let (ks, km, kz) = scan(series.values(), threshold);
    let at = |k: Option<usize>| k.map(|k| series.times()[k]);
    let (t_star, t_m, t_z) = (at(ks), at(km), at(kz));
    let ratio = match (t_star, t_m, t_z) {
        (Some(s), Some(m), Some(z)) if m > s => Some((z - m) / (m - s)),
        _ => None,
    };
    Ok(TimescaleReport { t_star, t_m, t_z, ratio, threshold, h_over_j: None })
}

/// One (h/J, decoherence, initial state) combination of a sweep.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub h_over_j: f64,
    pub decoherence: Option<Decoherence>,
    pub initial_state: InitialState,
    pub report: TimescaleReport,
    pub series: NonclassicalitySeries,
    /// Integral of Ñ over [0, cumulative_window].
    pub cumulative: f64,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Chain parameters; `h_over_j` is overridden per cell.
    pub base: SpinChainParams,
    pub h_values: Vec<f64>,
    pub decoherence: Vec<Option<Decoherence>>,
    pub initial_states: Vec<InitialState>,
    pub grid: TimeGrid,
    pub threshold: f64,
    /// Upper limit of the cumulative-nonclassicality integral, in us.
    pub cumulative_window: f64,
    /// Stop each series once t_z is found (and the window is covered).
    pub early_stop: bool,
    pub workers: usize,
}

/// `n` equally spaced values over [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Timescales for every (h/J, decoherence, initial state) combination, ordered by
/// h/J, then decoherence, then initial state.
pub fn sweep_h_over_j(config: &SweepConfig) -> Result<Vec<SweepCell>> {
    if config.h_values.is_empty() {
        return Err(Error::param("sweep_points", "needs at least one h/J value"));
    }
    let mut cells = Vec::new();
    for &h in &config.h_values {
        let params = SpinChainParams { h_over_j: h, ..config.base };
        let eig = crate::operator::hermitian_eigendecompose(&build_hamiltonian(&params)?)?;
        let (w, v) = butterfly_operators(&params)?;
        for dec in &config.decoherence {
            for init in &config.initial_states {
                let rho = init.build(&params, &eig)?;
                let stop = if config.early_stop {
                    StopRule::AfterZeroReturn { threshold: config.threshold, min_t: config.cumulative_window }
                } else {
                    StopRule::Horizon
                };
                let opts = SeriesOptions { workers: config.workers, stop };
                let series = nonclassicality_series(&rho, &w, &v, &eig, &config.grid, dec.as_ref(), &opts)?;
                let mut report = extract_timescales_with_threshold(&series, config.threshold)?;
                report.h_over_j = Some(h);
                let cumulative = series.integral(config.cumulative_window);
                cells.push(SweepCell {
                    h_over_j: h,
                    decoherence: *dec,
                    initial_state: *init,
                    report,
                    series,
                    cumulative,
                });
            }
        }
    }
    Ok(cells)
}
