//! Density-matrix propagation under pulsed control.
//!
//! Builds exact cycle propagators (cached free segments plus per-event pulse
//! unitaries), evolves states stroboscopically with periodic re-hermitization,
//! computes Uhlmann fidelities and free-induction decay times, and runs
//! deterministic disorder ensembles in parallel.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{AlgebraError, Axis, DenseOperator, OperatorSum};
use crate::sequence::{pulse_propagator, PulseErrorModel, Sequence, SequenceError};
use crate::system::{GeometrySpec, SpinSystem, SystemError};

/// Tolerance for density-matrix invariants (hermiticity, unit trace,
/// eigenvalue positivity) at construction time.
pub const STATE_TOL: f64 = 1e-10;

/// A state is treated as pure when `tr(rho^2)` is within this much of 1;
/// fidelity then uses the overlap-trace fast path.
const PURITY_TOL: f64 = 1e-8;

/// Evolution re-hermitizes and renormalizes the state after this many cycles.
const REHERMITIZE_EVERY: u64 = 256;

/// Accumulated hermiticity or trace drift beyond this aborts the evolution.
const DRIFT_TOL: f64 = 1e-8;

/// Default decay-time horizon: this many characteristic times `1/||H_in||`.
pub const DEFAULT_HORIZON_FACTOR: f64 = 1e3;

/// Default number of coarse samples when bracketing the decay crossing.
pub const DEFAULT_FID_SAMPLES: usize = 4096;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid state: {detail}")]
    InvalidState { detail: String },
    #[error("invalid parameter: {detail}")]
    InvalidParameter { detail: String },
    #[error("numerical drift at cycle {cycle}: defect {defect:.3e} exceeds {DRIFT_TOL:.1e}")]
    NumericalDrift { cycle: u64, defect: f64 },
    #[error("{failed} of {total} realizations failed, above the 10% limit")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// A validated density matrix: Hermitian, unit trace, nonnegative spectrum,
/// all within [`STATE_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateDensity {
    mat: DenseOperator,
}

impl StateDensity {
    pub fn new(mat: DenseOperator) -> Result<Self, DynamicsError> {
        let defect = mat.hermiticity_defect();
        if defect > STATE_TOL {
            return Err(DynamicsError::InvalidState {
                detail: format!("hermiticity defect {defect:.3e}"),
            });
        }
        let tr = mat.trace();
        let tr_err = (tr - Complex64::new(1.0, 0.0)).norm();
        if tr_err > STATE_TOL {
            return Err(DynamicsError::InvalidState { detail: format!("trace error {tr_err:.3e}") });
        }
        let eig = mat.hermitized().matrix().clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -STATE_TOL {
            return Err(DynamicsError::InvalidState {
                detail: format!("negative eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(StateDensity { mat })
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.mat
    }

    pub fn n_spins(&self) -> usize {
        self.mat.n_spins()
    }

    /// `Re tr(rho * op)`.
    pub fn expectation(&self, op: &DenseOperator) -> Result<f64, DynamicsError> {
        expectation_of(&self.mat, op)
    }

    /// `tr(rho^2)`, which for a Hermitian matrix is the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        let f = self.mat.frobenius_norm();
        f * f
    }

    /// Uhlmann fidelity `F(self, other)` in the squared convention, so
    /// `F = <psi| other |psi>` when `self` is the pure state `|psi><psi|`.
    pub fn fidelity(&self, other: &StateDensity) -> Result<f64, DynamicsError> {
        state_fidelity(&self.mat, &other.mat)
    }
}

/// Uhlmann fidelity between density matrices, squared convention:
/// `F = (tr sqrt(sqrt(a) b sqrt(a)))^2`. When either argument is pure this
/// reduces to `Re tr(a b)` and a cheap trace is used instead of matrix roots.
pub fn state_fidelity(a: &DenseOperator, b: &DenseOperator) -> Result<f64, DynamicsError> {
    if a.dim() != b.dim() {
        return Err(DynamicsError::Algebra(AlgebraError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        }));
    }
    let pure = |m: &DenseOperator| {
        let f = m.frobenius_norm();
        (f * f - 1.0).abs() <= PURITY_TOL
    };
    if pure(a) || pure(b) {
        return Ok(expectation_of(a, b)?.max(0.0));
    }
    let root = matrix_sqrt_psd(a);
    let inner = root.mul(b)?.mul(&root)?;
    let eig = inner.hermitized().matrix().clone().symmetric_eigen();
    let sum: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(sum * sum)
}

fn expectation_of(rho: &DenseOperator, op: &DenseOperator) -> Result<f64, DynamicsError> {
    if rho.dim() != op.dim() {
        return Err(DynamicsError::Algebra(AlgebraError::DimMismatch {
            left: rho.dim(),
            right: op.dim(),
        }));
    }
    let mut acc = 0.0;
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += (rho.entry(i, j) * op.entry(j, i)).re;
        }
    }
    Ok(acc)
}

/// `sqrt` of a positive-semidefinite Hermitian matrix via its eigensystem,
/// clamping small negative eigenvalues to zero.
fn matrix_sqrt_psd(m: &DenseOperator) -> DenseOperator {
    let eig = m.hermitized().matrix().clone().symmetric_eigen();
    let dim = eig.eigenvalues.len();
    let mut diag = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        diag[(k, k)] = Complex64::new(eig.eigenvalues[k].max(0.0).sqrt(), 0.0);
    }
    let v = &eig.eigenvectors;
    DenseOperator::from_matrix(v * diag * v.adjoint()).expect("square power-of-two matrix")
}

/// Initial-state recipes.
#[derive(Clone, Debug)]
pub enum InitialState {
    /// Product state with every spin along `+x`.
    AllTransverseX,
    /// One spin at the given Bloch vector, the rest along `+z`.
    SingleQubit { site: usize, bloch: [f64; 3] },
    /// An explicit density matrix, validated on use.
    Given(DenseOperator),
}

/// Builds the initial density matrix for `n_spins` spins.
pub fn initial_state(kind: &InitialState, n_spins: usize) -> Result<StateDensity, DynamicsError> {
    match kind {
        InitialState::AllTransverseX => {
            let site = single_site_density([1.0, 0.0, 0.0])?;
            product_density(n_spins, |_| site.clone())
        }
        InitialState::SingleQubit { site, bloch } => {
            if *site >= n_spins {
                return Err(DynamicsError::InvalidParameter {
                    detail: format!("site {site} out of range for {n_spins} spins"),
                });
            }
            let special = single_site_density(*bloch)?;
            let up = single_site_density([0.0, 0.0, 1.0])?;
            product_density(n_spins, |s| if s == *site { special.clone() } else { up.clone() })
        }
        InitialState::Given(mat) => {
            if mat.n_spins() != n_spins {
                return Err(DynamicsError::InvalidParameter {
                    detail: format!(
                        "given density is for {} spins, expected {n_spins}",
                        mat.n_spins()
                    ),
                });
            }
            StateDensity::new(mat.clone())
        }
    }
}

fn single_site_density(bloch: [f64; 3]) -> Result<DenseOperator, DynamicsError> {
    let norm2: f64 = bloch.iter().map(|c| c * c).sum();
    if !norm2.is_finite() || norm2 > 1.0 + 1e-12 {
        return Err(DynamicsError::InvalidParameter {
            detail: format!("Bloch vector {bloch:?} has length > 1"),
        });
    }
    let [bx, by, bz] = bloch;
    let mat = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new((1.0 + bz) / 2.0, 0.0),
            Complex64::new(bx / 2.0, -by / 2.0),
            Complex64::new(bx / 2.0, by / 2.0),
            Complex64::new((1.0 - bz) / 2.0, 0.0),
        ],
    );
    Ok(DenseOperator::from_matrix(mat)?)
}

fn product_density(
    n_spins: usize,
    site_density: impl Fn(usize) -> DenseOperator,
) -> Result<StateDensity, DynamicsError> {
    if n_spins == 0 {
        return Err(DynamicsError::InvalidParameter { detail: "zero spins".into() });
    }
    let mut rho = site_density(0);
    for s in 1..n_spins {
        rho = rho.kron(&site_density(s));
    }
    StateDensity::new(rho)
}

/// One multiplicative factor of a cycle propagator, tagged with the nominal
/// time at which it completes (pulse factors complete instantaneously).
#[derive(Clone, Debug)]
pub struct CycleFactor {
    pub end_time: f64,
    pub unitary: DenseOperator,
}

/// The chronological factors of one control cycle: free segments interleaved
/// with pulse unitaries, closing pulse (if any) last. Free factors for equal
/// durations are computed once and shared.
pub fn cycle_factors(
    seq: &Sequence,
    h_in: &DenseOperator,
    errors: &PulseErrorModel,
) -> Result<Vec<CycleFactor>, DynamicsError> {
    let n = h_in.n_spins();
    let tau = seq.tau();
    let events = seq.events();
    let mut free_cache: HashMap<u64, DenseOperator> = HashMap::new();
    let mut out = Vec::new();
    let mut applied = 0usize;
    for interval in seq.frame_intervals() {
        while applied < interval.pulses_applied.len() {
            let e = &events[applied];
            out.push(CycleFactor {
                end_time: mult_to_f64(e.time_mult()) * tau,
                unitary: pulse_propagator(e, n, errors, Some(h_in))?,
            });
            applied += 1;
        }
        let duration = mult_to_f64(&(&interval.end - &interval.start)) * tau;
        let unitary = match free_cache.get(&duration.to_bits()) {
            Some(u) => u.clone(),
            None => {
                let u = h_in.expm_hermitian(duration)?;
                free_cache.insert(duration.to_bits(), u.clone());
                u
            }
        };
        out.push(CycleFactor { end_time: mult_to_f64(&interval.end) * tau, unitary });
    }
    for e in &events[applied..] {
        out.push(CycleFactor {
            end_time: mult_to_f64(e.time_mult()) * tau,
            unitary: pulse_propagator(e, n, errors, Some(h_in))?,
        });
    }
    Ok(out)
}

/// One-cycle propagator for the system under the sequence and error model.
pub fn cycle_propagator(
    seq: &Sequence,
    sys: &SpinSystem,
    errors: &PulseErrorModel,
) -> Result<DenseOperator, DynamicsError> {
    let h = sys.hamiltonian_numeric().to_dense()?;
    cycle_propagator_with(seq, &h, errors)
}

/// Same as [`cycle_propagator`] but with a precomputed dense Hamiltonian.
pub fn cycle_propagator_with(
    seq: &Sequence,
    h_in: &DenseOperator,
    errors: &PulseErrorModel,
) -> Result<DenseOperator, DynamicsError> {
    let mut u = DenseOperator::identity(h_in.n_spins());
    for f in cycle_factors(seq, h_in, errors)? {
        u = f.unitary.mul(&u)?;
    }
    Ok(u)
}

fn mult_to_f64(m: &BigRational) -> f64 {
    m.to_f64().expect("event times are small rationals")
}

/// Sampled observables along an evolution: fidelity against the initial state
/// and the collective magnetizations `<Ia,total>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    pub mz: Vec<f64>,
}

impl ObservableSeries {
    fn with_capacity(cap: usize) -> Self {
        ObservableSeries {
            times: Vec::with_capacity(cap),
            fidelity: Vec::with_capacity(cap),
            mx: Vec::with_capacity(cap),
            my: Vec::with_capacity(cap),
            mz: Vec::with_capacity(cap),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelity.last().copied()
    }
}

struct Observables {
    ix: DenseOperator,
    iy: DenseOperator,
    iz: DenseOperator,
}

impl Observables {
    fn new(n_spins: usize) -> Result<Self, DynamicsError> {
        let dense = |axis| -> Result<DenseOperator, DynamicsError> {
            Ok(OperatorSum::<Complex64>::total_spin(axis, n_spins).to_dense()?)
        };
        Ok(Observables { ix: dense(Axis::X)?, iy: dense(Axis::Y)?, iz: dense(Axis::Z)? })
    }
}

struct EvolvingState {
    rho: DenseOperator,
    reference: StateDensity,
    obs: Observables,
    cycles_done: u64,
}

impl EvolvingState {
    fn new(initial: &StateDensity) -> Result<Self, DynamicsError> {
        Ok(EvolvingState {
            rho: initial.operator().clone(),
            reference: initial.clone(),
            obs: Observables::new(initial.n_spins())?,
            cycles_done: 0,
        })
    }

    fn sample(&self, time: f64, series: &mut ObservableSeries) -> Result<(), DynamicsError> {
        let fid = state_fidelity(self.reference.operator(), &self.rho)?;
        if !fid.is_finite() {
            return Err(DynamicsError::InvalidState {
                detail: format!("non-finite fidelity at t = {time}"),
            });
        }
        series.times.push(time);
        series.fidelity.push(fid);
        series.mx.push(expectation_of(&self.rho, &self.obs.ix)?);
        series.my.push(expectation_of(&self.rho, &self.obs.iy)?);
        series.mz.push(expectation_of(&self.rho, &self.obs.iz)?);
        Ok(())
    }

    fn conjugate(&mut self, u: &DenseOperator) -> Result<(), DynamicsError> {
        self.rho = u.mul(&self.rho)?.mul(&u.adjoint())?;
        Ok(())
    }

    /// Every [`REHERMITIZE_EVERY`] cycles, measure the accumulated hermiticity
    /// and trace drift, abort past [`DRIFT_TOL`], otherwise project back.
    fn end_cycle(&mut self) -> Result<(), DynamicsError> {
        self.cycles_done += 1;
        if !self.cycles_done.is_multiple_of(REHERMITIZE_EVERY) {
            return Ok(());
        }
        let tr = self.rho.trace();
        let defect =
            self.rho.hermiticity_defect().max((tr - Complex64::new(1.0, 0.0)).norm());
        if defect > DRIFT_TOL {
            return Err(DynamicsError::NumericalDrift { cycle: self.cycles_done, defect });
        }
        self.rho = self.rho.hermitized().scale(Complex64::new(1.0 / tr.re, 0.0));
        Ok(())
    }
}

/// Evolves by whole cycles of `u_cycle`, sampling after each cycle (and at
/// `t = 0`).
pub fn stroboscopic_evolution(
    initial: &StateDensity,
    u_cycle: &DenseOperator,
    cycle_time: f64,
    n_cycles: u64,
) -> Result<ObservableSeries, DynamicsError> {
    if cycle_time <= 0.0 || !cycle_time.is_finite() {
        return Err(DynamicsError::InvalidParameter {
            detail: format!("cycle time {cycle_time} must be positive and finite"),
        });
    }
    let mut state = EvolvingState::new(initial)?;
    let mut series = ObservableSeries::with_capacity(n_cycles as usize + 1);
    state.sample(0.0, &mut series)?;
    for k in 1..=n_cycles {
        state.conjugate(u_cycle)?;
        state.end_cycle()?;
        state.sample(k as f64 * cycle_time, &mut series)?;
    }
    Ok(series)
}

/// Debugging variant that also samples inside each cycle, after every factor
/// from [`cycle_factors`]. Pulse factors contribute samples at repeated times.
pub fn intra_cycle_evolution(
    initial: &StateDensity,
    factors: &[CycleFactor],
    cycle_time: f64,
    n_cycles: u64,
) -> Result<ObservableSeries, DynamicsError> {
    if cycle_time <= 0.0 || !cycle_time.is_finite() {
        return Err(DynamicsError::InvalidParameter {
            detail: format!("cycle time {cycle_time} must be positive and finite"),
        });
    }
    let mut state = EvolvingState::new(initial)?;
    let mut series = ObservableSeries::with_capacity(factors.len() * n_cycles as usize + 1);
    state.sample(0.0, &mut series)?;
    for k in 0..n_cycles {
        let start = k as f64 * cycle_time;
        for f in factors {
            state.conjugate(&f.unitary)?;
            state.sample(start + f.end_time, &mut series)?;
        }
        state.end_cycle()?;
    }
    Ok(series)
}

/// Linear ramp added to every detuning: `delta_i(t) = delta_i + rate * t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDetuningDrift {
    pub rate: f64,
}

/// Cycle propagator with the detunings evaluated at each segment's midpoint,
/// for a cycle starting at absolute time `cycle_start`.
pub fn drifted_cycle_propagator(
    seq: &Sequence,
    sys: &SpinSystem,
    errors: &PulseErrorModel,
    drift: LinearDetuningDrift,
    cycle_start: f64,
) -> Result<DenseOperator, DynamicsError> {
    if !drift.rate.is_finite() {
        return Err(DynamicsError::InvalidParameter {
            detail: format!("drift rate {} must be finite", drift.rate),
        });
    }
    let n = sys.n_spins();
    let tau = seq.tau();
    let events = seq.events();
    let base = sys.detunings().to_vec();
    let h_at = |t: f64| -> Result<DenseOperator, DynamicsError> {
        let shifted: Vec<f64> = base.iter().map(|d| d + drift.rate * t).collect();
        Ok(sys.with_detunings(shifted)?.hamiltonian_numeric().to_dense()?)
    };
    let mut u = DenseOperator::identity(n);
    let mut applied = 0usize;
    for interval in seq.frame_intervals() {
        while applied < interval.pulses_applied.len() {
            let e = &events[applied];
            let t_e = cycle_start + mult_to_f64(e.time_mult()) * tau;
            let h = h_at(t_e + 0.5 * errors.width)?;
            u = pulse_propagator(e, n, errors, Some(&h))?.mul(&u)?;
            applied += 1;
        }
        let start = mult_to_f64(&interval.start) * tau;
        let end = mult_to_f64(&interval.end) * tau;
        let h = h_at(cycle_start + 0.5 * (start + end))?;
        u = h.expm_hermitian(end - start)?.mul(&u)?;
    }
    for e in &events[applied..] {
        let t_e = cycle_start + mult_to_f64(e.time_mult()) * tau;
        let h = h_at(t_e + 0.5 * errors.width)?;
        u = pulse_propagator(e, n, errors, Some(&h))?.mul(&u)?;
    }
    Ok(u)
}

/// Stroboscopic evolution with a detuning ramp; the propagator is rebuilt
/// every cycle since the Hamiltonian is no longer periodic.
pub fn drifted_evolution(
    initial: &StateDensity,
    seq: &Sequence,
    sys: &SpinSystem,
    errors: &PulseErrorModel,
    drift: LinearDetuningDrift,
    n_cycles: u64,
) -> Result<ObservableSeries, DynamicsError> {
    let cycle_time = seq.cycle_time();
    let mut state = EvolvingState::new(initial)?;
    let mut series = ObservableSeries::with_capacity(n_cycles as usize + 1);
    state.sample(0.0, &mut series)?;
    for k in 0..n_cycles {
        let u = drifted_cycle_propagator(seq, sys, errors, drift, k as f64 * cycle_time)?;
        state.conjugate(&u)?;
        state.end_cycle()?;
        state.sample((k + 1) as f64 * cycle_time, &mut series)?;
    }
    Ok(series)
}

/// Free-induction decay classification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayTime {
    /// First time the normalized signal drops below `1/e`.
    Crossing(f64),
    /// No crossing up to the horizon searched.
    ExceedsHorizon { horizon: f64 },
}

impl DecayTime {
    pub fn value(&self) -> Option<f64> {
        match self {
            DecayTime::Crossing(t) => Some(*t),
            DecayTime::ExceedsHorizon { .. } => None,
        }
    }
}

/// The free-induction signal `<Ix,total>(t) / <Ix,total>(0)` from the
/// all-transverse state, synthesized in the eigenbasis of the internal
/// Hamiltonian so single time points cost `O(dim^2)`.
pub struct FreeInductionSignal {
    rho_eig: DMatrix<Complex64>,
    obs_eig: DMatrix<Complex64>,
    energies: DVector<f64>,
    norm: f64,
}

impl FreeInductionSignal {
    pub fn new(sys: &SpinSystem) -> Result<Self, DynamicsError> {
        let n = sys.n_spins();
        let h = sys.hamiltonian_numeric().to_dense()?;
        let eig = h.hermitized().matrix().clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let rho0 = initial_state(&InitialState::AllTransverseX, n)?;
        let obs = OperatorSum::<Complex64>::total_spin(Axis::X, n).to_dense()?;
        let rho_eig = v.adjoint() * rho0.operator().matrix() * v;
        let obs_eig = v.adjoint() * obs.matrix() * v;
        let norm = n as f64 / 2.0;
        Ok(FreeInductionSignal { rho_eig, obs_eig, energies: eig.eigenvalues, norm })
    }

    /// `<Ix,total>(t) / <Ix,total>(0)`; equals 1 at `t = 0`.
    pub fn normalized(&self, t: f64) -> f64 {
        let dim = self.energies.len();
        let mut acc = 0.0;
        for m in 0..dim {
            for n in 0..dim {
                let phase = Complex64::from_polar(1.0, -(self.energies[m] - self.energies[n]) * t);
                acc += (self.rho_eig[(m, n)] * self.obs_eig[(n, m)] * phase).re;
            }
        }
        acc / self.norm
    }
}

/// First `1/e` crossing of the normalized free-induction signal, located by
/// coarse sampling over the horizon and bisection inside the first bracketing
/// interval. Default horizon: [`DEFAULT_HORIZON_FACTOR`] `/ ||H_in||`.
pub fn fid_decay_time(
    sys: &SpinSystem,
    horizon: Option<f64>,
    n_samples: usize,
) -> Result<DecayTime, DynamicsError> {
    if n_samples < 2 {
        return Err(DynamicsError::InvalidParameter {
            detail: format!("need at least 2 samples, got {n_samples}"),
        });
    }
    let horizon = match horizon {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => {
            return Err(DynamicsError::InvalidParameter {
                detail: format!("horizon {h} must be positive and finite"),
            });
        }
        None => {
            let norm = sys.hamiltonian_norm();
            if norm == 0.0 {
                return Ok(DecayTime::ExceedsHorizon { horizon: f64::INFINITY });
            }
            DEFAULT_HORIZON_FACTOR / norm
        }
    };
    let signal = FreeInductionSignal::new(sys)?;
    let threshold = (-1.0f64).exp();
    let mut prev = 0.0;
    for k in 1..=n_samples {
        let t = horizon * k as f64 / n_samples as f64;
        if signal.normalized(t) < threshold {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if signal.normalized(mid) < threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(DecayTime::Crossing(0.5 * (lo + hi)));
        }
        prev = t;
    }
    Ok(DecayTime::ExceedsHorizon { horizon })
}

/// A disorder-ensemble run: each realization draws its own system from the
/// geometry, evolves it under the sequence, and estimates its free-induction
/// decay time.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub geometry: GeometrySpec,
    pub sequence: Sequence,
    pub errors: PulseErrorModel,
    pub initial: InitialState,
    pub n_realizations: u64,
    pub n_cycles: u64,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool. The results are identical
    /// for any worker count.
    pub n_workers: Option<usize>,
    /// Decay-time search horizon; `None` uses the default.
    pub decay_horizon: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RealizationResult {
    pub index: u64,
    pub series: ObservableSeries,
    pub decay_time: DecayTime,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub master_seed: u64,
    pub cycle_time: f64,
    /// Successful realizations in index order.
    pub realizations: Vec<RealizationResult>,
    /// Failed realization indices with error messages, in index order.
    pub failures: Vec<(u64, String)>,
}

impl EnsembleResult {
    pub fn n_attempted(&self) -> usize {
        self.realizations.len() + self.failures.len()
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.realizations.first().map(|r| r.series.times.as_slice())
    }

    fn mean_of(&self, get: impl Fn(&ObservableSeries) -> &[f64]) -> Vec<f64> {
        let n = self.realizations.len();
        if n == 0 {
            return Vec::new();
        }
        let len = get(&self.realizations[0].series).len();
        let mut mean = vec![0.0; len];
        for r in &self.realizations {
            for (m, v) in mean.iter_mut().zip(get(&r.series)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        mean
    }

    fn stderr_of(&self, get: impl Fn(&ObservableSeries) -> &[f64] + Copy) -> Vec<f64> {
        let n = self.realizations.len();
        let mean = self.mean_of(get);
        if n < 2 {
            return vec![0.0; mean.len()];
        }
        let mut var = vec![0.0; mean.len()];
        for r in &self.realizations {
            for ((v, x), m) in var.iter_mut().zip(get(&r.series)).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        var.iter().map(|v| (v / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt()).collect()
    }

    pub fn mean_fidelity(&self) -> Vec<f64> {
        self.mean_of(|s| &s.fidelity)
    }

    pub fn stderr_fidelity(&self) -> Vec<f64> {
        self.stderr_of(|s| &s.fidelity)
    }

    pub fn mean_magnetization(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::X => self.mean_of(|s| &s.mx),
            Axis::Y => self.mean_of(|s| &s.my),
            Axis::Z => self.mean_of(|s| &s.mz),
        }
    }
}

fn run_pool<T: Send>(
    n_workers: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, DynamicsError> {
    match n_workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().map_err(|e| {
                DynamicsError::InvalidParameter { detail: format!("worker pool: {e}") }
            })?;
            Ok(pool.install(job))
        }
    }
}

/// Per-index outcomes of a realization batch, each list in index order.
#[derive(Clone, Debug)]
pub struct RealizationSet<T> {
    pub outcomes: Vec<(u64, T)>,
    pub failures: Vec<(u64, String)>,
}

/// Runs one job per realization index, in parallel when workers are
/// available. Individual failures are recorded; the batch only fails once
/// more than 10% of the jobs have failed. Aggregation is in index order, so
/// results do not depend on scheduling.
pub fn run_realizations<T: Send>(
    n_realizations: u64,
    n_workers: Option<usize>,
    job: impl Fn(u64) -> Result<T, DynamicsError> + Sync,
) -> Result<RealizationSet<T>, DynamicsError> {
    if n_realizations == 0 {
        return Err(DynamicsError::InvalidParameter {
            detail: "need at least one realization".into(),
        });
    }
    let raw: Vec<(u64, Result<T, String>)> = run_pool(n_workers, || {
        (0..n_realizations)
            .into_par_iter()
            .map(|idx| (idx, job(idx).map_err(|e| e.to_string())))
            .collect()
    })?;
    let total = raw.len();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (idx, outcome) in raw {
        match outcome {
            Ok(v) => outcomes.push((idx, v)),
            Err(msg) => failures.push((idx, msg)),
        }
    }
    if failures.len() * 10 > total {
        return Err(DynamicsError::TooManyFailures { failed: failures.len(), total });
    }
    Ok(RealizationSet { outcomes, failures })
}

/// Evolves every realization of the geometry under the sequence.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult, DynamicsError> {
    spec.geometry.validate()?;
    let set = run_realizations(spec.n_realizations, spec.n_workers, |idx| {
        let sys = spec.geometry.realize(spec.master_seed, idx)?;
        let u = cycle_propagator(&spec.sequence, &sys, &spec.errors)?;
        let rho0 = initial_state(&spec.initial, sys.n_spins())?;
        let series =
            stroboscopic_evolution(&rho0, &u, spec.sequence.cycle_time(), spec.n_cycles)?;
        let decay_time = fid_decay_time(&sys, spec.decay_horizon, DEFAULT_FID_SAMPLES)?;
        Ok(RealizationResult { index: idx, series, decay_time })
    })?;
    Ok(EnsembleResult {
        master_seed: spec.master_seed,
        cycle_time: spec.sequence.cycle_time(),
        realizations: set.outcomes.into_iter().map(|(_, r)| r).collect(),
        failures: set.failures,
    })
}

/// Decay times only, without any pulsed evolution: one realization per index,
/// same failure policy as [`run_ensemble`].
pub struct DecayEnsemble {
    pub master_seed: u64,
    pub outcomes: Vec<(u64, DecayTime)>,
    pub failures: Vec<(u64, String)>,
}

pub fn decay_time_ensemble(
    geometry: &GeometrySpec,
    master_seed: u64,
    n_realizations: u64,
    horizon: Option<f64>,
    n_workers: Option<usize>,
) -> Result<DecayEnsemble, DynamicsError> {
    geometry.validate()?;
    let set = run_realizations(n_realizations, n_workers, |idx| {
        let sys = geometry.realize(master_seed, idx)?;
        fid_decay_time(&sys, horizon, DEFAULT_FID_SAMPLES)
    })?;
    Ok(DecayEnsemble { master_seed, outcomes: set.outcomes, failures: set.failures })
}
