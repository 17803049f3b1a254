//! Toggling-frame Hamiltonians, the zeroth-order average, and the
//! first-order Magnus correction.
//!
//! Over one cycle the internal Hamiltonian, seen from the frame of the
//! control rotations, is piecewise constant: one toggled operator per
//! inter-pulse interval. The zeroth average is the duration-weighted mean of
//! those operators; the first correction is the closed-form double-integral
//! reduction `(-i/2 t_c) sum_{k>j} d_k d_j [H_k, H_j]`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::algebra::{
    AlgebraError, Coeff, DenseOperator, Exact, NumericOp, OperatorSum, SymbolicOp,
};
use crate::sequence::{Sequence, SequenceError};
use crate::tol;

#[derive(Debug, Error)]
pub enum AveragingError {
    #[error("pulse at time multiple {time} is not a quarter-turn rotation; only the dense frame path supports it")]
    NonCliffordPulse { time: f64 },

    #[error("toggled Hamiltonian of segment {segment} is not Hermitian")]
    NonHermitianSegment { segment: usize },

    #[error("segment weights must be positive and sum to 1, got total {total}")]
    BadWeights { total: String },

    #[error("frame has no segments")]
    EmptyFrame,

    #[error(transparent)]
    Algebra(#[from] AlgebraError),

    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// One piece of the piecewise-constant toggled Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSegment<C: Coeff> {
    /// Fraction of the cycle this segment occupies, exact.
    pub weight: BigRational,
    pub hamiltonian: OperatorSum<C>,
}

/// The toggled Hamiltonian over one full cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct TogglingFrame<C: Coeff> {
    n_spins: usize,
    /// Cycle time as a multiple of tau (reporting only).
    cycle_mult: BigRational,
    /// Cycle time as a scalar of the backend: the symbol `tau` times the
    /// multiple in exact mode, the float value in numeric mode. It enters
    /// the first-order correction, which is proportional to `t_c`.
    cycle_time: C,
    segments: Vec<FrameSegment<C>>,
}

impl<C: Coeff> TogglingFrame<C> {
    pub fn new(
        n_spins: usize,
        cycle_mult: BigRational,
        cycle_time: C,
        segments: Vec<FrameSegment<C>>,
    ) -> Result<Self, AveragingError> {
        if segments.is_empty() {
            return Err(AveragingError::EmptyFrame);
        }
        let mut total = BigRational::zero();
        for (k, seg) in segments.iter().enumerate() {
            if !seg.weight.is_positive() {
                return Err(AveragingError::BadWeights { total: seg.weight.to_string() });
            }
            if !seg.hamiltonian.is_hermitian(tol::HERMITICITY) {
                return Err(AveragingError::NonHermitianSegment { segment: k });
            }
            total += &seg.weight;
        }
        if !total.is_one() {
            return Err(AveragingError::BadWeights { total: total.to_string() });
        }
        Ok(TogglingFrame { n_spins, cycle_mult, cycle_time, segments })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn cycle_mult(&self) -> &BigRational {
        &self.cycle_mult
    }

    pub fn segments(&self) -> &[FrameSegment<C>] {
        &self.segments
    }

    /// Same segments in reverse order (time-reversed cycle).
    pub fn reversed(&self) -> Self {
        let mut segments = self.segments.clone();
        segments.reverse();
        TogglingFrame {
            n_spins: self.n_spins,
            cycle_mult: self.cycle_mult.clone(),
            cycle_time: self.cycle_time.clone(),
            segments,
        }
    }

    /// Duration-weighted mean of the toggled Hamiltonians; exact in the
    /// symbolic backend.
    pub fn zeroth_average(&self) -> OperatorSum<C> {
        let mut acc = OperatorSum::zero(self.n_spins);
        for seg in &self.segments {
            acc = acc
                .add(&seg.hamiltonian.scale_rational(&seg.weight))
                .expect("segments share the system size");
        }
        acc
    }

    /// First-order correction `(-i/2) t_c sum_{k>j} w_k w_j [H_k, H_j]`
    /// (the double time integral collapsed over the piecewise-constant
    /// segments; within-segment contributions vanish).
    ///
    /// Summation runs in fixed `(k, j)` lexicographic order, so the float
    /// backend is bit-stable.
    pub fn first_magnus(&self) -> OperatorSum<C> {
        let mut acc = OperatorSum::zero(self.n_spins);
        for k in 1..self.segments.len() {
            for j in 0..k {
                let comm = self.segments[k]
                    .hamiltonian
                    .commutator(&self.segments[j].hamiltonian)
                    .expect("segments share the system size");
                let w = &self.segments[k].weight * &self.segments[j].weight;
                acc = acc.add(&comm.scale_rational(&w)).expect("same size");
            }
        }
        let half = BigRational::new(1.into(), 2.into());
        // times (-i/2) t_c
        acc.scale(&self.cycle_time.mul(&C::from_rational(&half)).mul_i_pow(3))
    }

    pub fn magnus(&self) -> MagnusTerms<C> {
        MagnusTerms { zeroth: self.zeroth_average(), first: self.first_magnus() }
    }
}

impl TogglingFrame<Complex64> {
    /// Exact cycle propagator implied by the frame: the chronological
    /// product of the segment exponentials (later segments on the left).
    pub fn propagator(&self, cycle_time: f64) -> Result<DenseOperator, AveragingError> {
        let mut u = DenseOperator::identity(self.n_spins);
        for seg in &self.segments {
            let duration = seg.weight.to_f64().expect("small rational") * cycle_time;
            let h = seg.hamiltonian.to_dense()?;
            u = h.expm_hermitian(duration)?.mul(&u)?;
        }
        Ok(u)
    }
}

/// Magnus expansion truncated after the first correction.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnusTerms<C: Coeff> {
    pub zeroth: OperatorSum<C>,
    pub first: OperatorSum<C>,
}

impl MagnusTerms<Complex64> {
    /// `exp(-i (H0 + H1) t_c)`. Fails if the sum is not Hermitian.
    pub fn effective_propagator(&self, cycle_time: f64) -> Result<DenseOperator, AveragingError> {
        let sum = self.zeroth.add(&self.first).expect("same size");
        Ok(sum.to_dense()?.expm_hermitian(cycle_time)?)
    }
}

/// Toggled Hamiltonians via exact letter permutations. Every pulse must be a
/// quarter-turn rotation; otherwise [`toggled_dense`] is the fallback.
fn clifford_frame<C: Coeff>(
    seq: &Sequence,
    h_in: &OperatorSum<C>,
    cycle_time: C,
) -> Result<TogglingFrame<C>, AveragingError> {
    let mut segments = Vec::new();
    for interval in seq.frame_intervals() {
        // U1^-1 H U1 with U1 = P_m ... P_1: conjugate by the latest pulse
        // first, the earliest last.
        let mut h = h_in.clone();
        for p in interval.pulses_applied.iter().rev() {
            let rot = p.clifford_rotation().ok_or_else(|| AveragingError::NonCliffordPulse {
                time: p.time_mult().to_f64().unwrap_or(f64::NAN),
            })?;
            h = h.clifford_conjugate(rot);
        }
        segments.push(FrameSegment { weight: interval.weight(seq.cycle_mult()), hamiltonian: h });
    }
    TogglingFrame::new(h_in.n_spins(), seq.cycle_mult().clone(), cycle_time, segments)
}

/// Symbolic toggling frame. The cycle time stays symbolic as
/// `cycle_mult * tau`.
pub fn toggled_symbolic(
    seq: &Sequence,
    h_in: &SymbolicOp,
) -> Result<TogglingFrame<Exact>, AveragingError> {
    let cycle_time = Exact::symbol("tau").mul(&Exact::from_rational(seq.cycle_mult().clone()));
    clifford_frame(seq, h_in, cycle_time)
}

/// Float toggling frame along the same exact-permutation path.
pub fn toggled_numeric(
    seq: &Sequence,
    h_in: &NumericOp,
) -> Result<TogglingFrame<Complex64>, AveragingError> {
    clifford_frame(seq, h_in, Complex64::new(seq.cycle_time(), 0.0))
}

/// Dense-conjugation frame: `U1^dag H U1` per interval, decomposed back into
/// Pauli words. Works for arbitrary pulse angles; used as the fallback and
/// as an independent cross-check of the exact path.
pub fn toggled_dense(
    seq: &Sequence,
    h_in: &NumericOp,
) -> Result<TogglingFrame<Complex64>, AveragingError> {
    let n = h_in.n_spins();
    let h = h_in.to_dense()?;
    let intervals = seq.frame_intervals();
    let props = seq.segment_propagators(n)?;
    debug_assert_eq!(intervals.len(), props.len());
    let mut segments = Vec::with_capacity(props.len());
    for (interval, (_, u1)) in intervals.iter().zip(props.iter()) {
        let toggled = u1.adjoint().mul(&h)?.mul(u1)?;
        segments.push(FrameSegment {
            weight: interval.weight(seq.cycle_mult()),
            hamiltonian: toggled.pauli_decompose(),
        });
    }
    TogglingFrame::new(n, seq.cycle_mult().clone(), Complex64::new(seq.cycle_time(), 0.0), segments)
}

/// Convenience: frame for whichever backend fits. Clifford pulses use the
/// exact path; anything else falls back to dense conjugation.
pub fn toggled_auto(
    seq: &Sequence,
    h_in: &NumericOp,
) -> Result<TogglingFrame<Complex64>, AveragingError> {
    match toggled_numeric(seq, h_in) {
        Ok(frame) => Ok(frame),
        Err(AveragingError::NonCliffordPulse { .. }) => toggled_dense(seq, h_in),
        Err(e) => Err(e),
    }
}

/// `cycle_mult` as an exact product with the tau symbol, shared by display
/// code.
pub fn symbolic_cycle_time(cycle_mult: &BigRational) -> Exact {
    Exact::symbol("tau").mul(&Exact::from_rational(cycle_mult.clone()))
}

fn _big(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}
