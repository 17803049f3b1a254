//! Pulse sequences as timed delta-pulse events, their segment propagators,
//! and pulse unitaries with imperfection models.
//!
//! Event times are stored as exact rational multiples of the inter-pulse
//! delay `tau`, so interval weights used by averaging are exact.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

use crate::algebra::{
    AlgebraError, Axis, CliffordRotation, DenseOperator, NumericOp, OperatorSum,
};

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: String, value: f64 },

    #[error("{what} must be finite, got {value}")]
    NonFinite { what: String, value: f64 },

    #[error("pulse gap fraction must lie in [0, 1), got {value}")]
    InvalidGap { value: f64 },

    #[error("event at time multiple {time} lies outside the cycle [0, {cycle}]")]
    EventOutOfCycle { time: f64, cycle: f64 },

    #[error("events at the same nominal time must carry distinct ordinals (time multiple {time})")]
    DuplicateOrdinal { time: f64 },

    #[error("finite-width pulse with internal field enabled needs the internal Hamiltonian")]
    MissingInternalField,

    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// One delta pulse: a global rotation about an axis in the x-y plane.
///
/// The applied unitary is `exp(-i * angle * (cos(azimuth) Ix,total +
/// sin(azimuth) Iy,total))`, so azimuth 0 is +x, pi/2 is +y, pi is -x and
/// 3pi/2 is -y.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseEvent {
    /// Nominal time as an exact multiple of tau.
    time_mult: BigRational,
    /// Application order among pulses sharing a nominal time.
    ordinal: u32,
    azimuth: f64,
    angle: f64,
}

impl PulseEvent {
    pub fn new(time_mult: BigRational, ordinal: u32, azimuth: f64, angle: f64) -> Self {
        PulseEvent { time_mult, ordinal, azimuth, angle }
    }

    fn at(mult: i64, ordinal: u32, azimuth: f64, angle: f64) -> Self {
        Self::new(BigRational::from(BigInt::from(mult)), ordinal, azimuth, angle)
    }

    pub fn time_mult(&self) -> &BigRational {
        &self.time_mult
    }

    pub fn ordinal(&self) -> u32 {
        self.ordinal
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Exact conjugation action, when both the azimuth and the angle are
    /// multiples of pi/2. `None` otherwise; callers then use the dense path.
    pub fn clifford_rotation(&self) -> Option<CliffordRotation> {
        let quarters = self.azimuth / FRAC_PI_2;
        let k = quarters.round();
        if !self.azimuth.is_finite() || (quarters - k).abs() > 1e-9 {
            return None;
        }
        let (axis, sign) = match (k as i64).rem_euclid(4) {
            0 => (Axis::X, 1.0),
            1 => (Axis::Y, 1.0),
            2 => (Axis::X, -1.0),
            3 => (Axis::Y, -1.0),
            _ => unreachable!(),
        };
        CliffordRotation::new(axis, sign * self.angle).ok()
    }

    /// Rotation generator `cos(azimuth) Ix,total + sin(azimuth) Iy,total`
    /// with an optional azimuth offset.
    pub fn generator(&self, n_spins: usize, azimuth_offset: f64) -> NumericOp {
        let phi = self.azimuth + azimuth_offset;
        let ix = OperatorSum::total_spin(Axis::X, n_spins);
        let iy = OperatorSum::total_spin(Axis::Y, n_spins);
        ix.scale(&Complex64::new(phi.cos(), 0.0))
            .add(&iy.scale(&Complex64::new(phi.sin(), 0.0)))
            .expect("same size")
    }

    /// Ideal delta-pulse unitary.
    pub fn ideal_unitary(&self, n_spins: usize) -> Result<DenseOperator, SequenceError> {
        let g = self.generator(n_spins, 0.0).to_dense()?;
        Ok(g.expm_hermitian(self.angle)?)
    }
}

/// Systematic pulse imperfections applied uniformly to every pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseErrorModel {
    /// Fractional flip-angle error: the applied angle is `angle * (1 + flip_fraction)`.
    pub flip_fraction: f64,
    /// Azimuth offset in radians.
    pub phase_offset: f64,
    /// Pulse duration; 0 means ideal delta pulses.
    pub width: f64,
    /// When true and `width > 0`, the internal Hamiltonian acts alongside the
    /// drive during the pulse.
    pub include_internal_during_pulse: bool,
}

impl PulseErrorModel {
    pub fn ideal() -> Self {
        PulseErrorModel {
            flip_fraction: 0.0,
            phase_offset: 0.0,
            width: 0.0,
            include_internal_during_pulse: false,
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.flip_fraction == 0.0
            && self.phase_offset == 0.0
            && (self.width == 0.0 || !self.include_internal_during_pulse)
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        for (what, v) in [
            ("flip-angle fraction", self.flip_fraction),
            ("phase offset", self.phase_offset),
            ("pulse width", self.width),
        ] {
            if !v.is_finite() {
                return Err(SequenceError::NonFinite { what: what.into(), value: v });
            }
        }
        if self.width < 0.0 {
            return Err(SequenceError::NonPositive { what: "pulse width".into(), value: self.width });
        }
        Ok(())
    }
}

impl Default for PulseErrorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Pulse unitary under an error model.
///
/// Ideal delta (or finite width without the internal field, which has the
/// same generator): `exp(-i * angle' * G(azimuth'))`. Finite width with the
/// internal field: `exp(-i * (rate * G + H_in) * width)` with
/// `rate = angle' / width`. The nominal schedule is unchanged either way;
/// width only contaminates the pulse unitary itself.
pub fn pulse_propagator(
    event: &PulseEvent,
    n_spins: usize,
    errors: &PulseErrorModel,
    h_in: Option<&DenseOperator>,
) -> Result<DenseOperator, SequenceError> {
    errors.validate()?;
    let angle = event.angle * (1.0 + errors.flip_fraction);
    let g = event.generator(n_spins, errors.phase_offset).to_dense()?;
    if errors.width == 0.0 || !errors.include_internal_during_pulse {
        return Ok(g.expm_hermitian(angle)?);
    }
    let h = h_in.ok_or(SequenceError::MissingInternalField)?;
    let rate = angle / errors.width;
    let generator = g.scale(Complex64::new(rate, 0.0)).add(h)?;
    Ok(generator.expm_hermitian(errors.width)?)
}

/// A pulse cycle: named event list over `[0, cycle_mult * tau]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    name: String,
    tau: f64,
    /// Cycle time as an exact multiple of tau.
    cycle_mult: BigRational,
    /// Sorted by (time, ordinal).
    events: Vec<PulseEvent>,
    /// Whether the final event sits exactly at the cycle end (it closes the
    /// control loop but bounds no segment).
    includes_closing_pulse: bool,
}

impl Sequence {
    /// The seven-pulse cycle, `t_c = 6 tau`:
    /// `(pi/2)+x` at `tau`, `(pi/2)-y` at `2tau`, `pi+y` at `3tau`,
    /// `(pi/2)-y` then `pi-x` back to back at `4tau`, `(pi/2)-x` at `5tau`,
    /// and the closing `pi-x` at `6tau`.
    pub fn proposed(tau: f64) -> Result<Self, SequenceError> {
        Self::proposed_with_gap(tau, 0.0)
    }

    /// Same cycle, but the fifth pulse (the `pi-x` of the back-to-back pair)
    /// is delayed by `gap_frac * tau`. The ideal cycle has `gap_frac = 0`.
    pub fn proposed_with_gap(tau: f64, gap_frac: f64) -> Result<Self, SequenceError> {
        if !(0.0..1.0).contains(&gap_frac) {
            return Err(SequenceError::InvalidGap { value: gap_frac });
        }
        let four = BigRational::from(BigInt::from(4));
        let gap = BigRational::from_float(gap_frac).ok_or(SequenceError::NonFinite {
            what: "gap fraction".into(),
            value: gap_frac,
        })?;
        let events = vec![
            PulseEvent::at(1, 0, 0.0, FRAC_PI_2),
            PulseEvent::at(2, 0, 3.0 * FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(3, 0, FRAC_PI_2, PI),
            PulseEvent::at(4, 0, 3.0 * FRAC_PI_2, FRAC_PI_2),
            PulseEvent::new(&four + &gap, 1, PI, PI),
            PulseEvent::at(5, 0, PI, FRAC_PI_2),
            PulseEvent::at(6, 0, PI, PI),
        ];
        let name = if gap_frac == 0.0 {
            "proposed".to_string()
        } else {
            format!("proposed(gap={gap_frac})")
        };
        Self::custom(name, tau, BigRational::from(BigInt::from(6)), events, true)
    }

    /// `tau - pi+y - 2tau - pi+y - tau`, `t_c = 4 tau`.
    pub fn cpmg(tau: f64) -> Result<Self, SequenceError> {
        let events = vec![
            PulseEvent::at(1, 0, FRAC_PI_2, PI),
            PulseEvent::at(3, 0, FRAC_PI_2, PI),
        ];
        Self::custom("cpmg".into(), tau, BigRational::from(BigInt::from(4)), events, false)
    }

    /// Four pi/2 pulses over `t_c = 6 tau`, phased so the collective
    /// detuning average comes out along `+x + y + z`:
    /// `tau - (pi/2)+x - tau - (pi/2)-y - 2tau - (pi/2)+y - tau - (pi/2)-x - tau`.
    pub fn wahuha(tau: f64) -> Result<Self, SequenceError> {
        let events = vec![
            PulseEvent::at(1, 0, 0.0, FRAC_PI_2),
            PulseEvent::at(2, 0, 3.0 * FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(4, 0, FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(5, 0, PI, FRAC_PI_2),
        ];
        Self::custom("wahuha".into(), tau, BigRational::from(BigInt::from(6)), events, false)
    }

    /// Two four-pulse halves with the x-pulse phases inverted in the second
    /// half, `t_c = 12 tau`.
    pub fn mrev8(tau: f64) -> Result<Self, SequenceError> {
        let events = vec![
            PulseEvent::at(1, 0, 0.0, FRAC_PI_2),
            PulseEvent::at(2, 0, 3.0 * FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(4, 0, FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(5, 0, PI, FRAC_PI_2),
            PulseEvent::at(7, 0, PI, FRAC_PI_2),
            PulseEvent::at(8, 0, 3.0 * FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(10, 0, FRAC_PI_2, FRAC_PI_2),
            PulseEvent::at(11, 0, 0.0, FRAC_PI_2),
        ];
        Self::custom("mrev8".into(), tau, BigRational::from(BigInt::from(12)), events, false)
    }

    /// No pulses; one "cycle" is simply a delay of `period`.
    pub fn free(period: f64) -> Result<Self, SequenceError> {
        Self::custom("free".into(), period, BigRational::from(BigInt::from(1)), vec![], false)
    }

    /// Fully general constructor, also used for config-defined sequences.
    pub fn custom(
        name: String,
        tau: f64,
        cycle_mult: BigRational,
        mut events: Vec<PulseEvent>,
        includes_closing_pulse: bool,
    ) -> Result<Self, SequenceError> {
        if !tau.is_finite() {
            return Err(SequenceError::NonFinite { what: "tau".into(), value: tau });
        }
        if tau <= 0.0 {
            return Err(SequenceError::NonPositive { what: "tau".into(), value: tau });
        }
        if cycle_mult <= BigRational::zero() {
            return Err(SequenceError::NonPositive {
                what: "cycle length".into(),
                value: cycle_mult.to_f64().unwrap_or(0.0),
            });
        }
        events.sort_by(|a, b| {
            a.time_mult
                .cmp(&b.time_mult)
                .then(a.ordinal.cmp(&b.ordinal))
        });
        for e in &events {
            if !e.azimuth.is_finite() {
                return Err(SequenceError::NonFinite { what: "azimuth".into(), value: e.azimuth });
            }
            if !e.angle.is_finite() {
                return Err(SequenceError::NonFinite { what: "angle".into(), value: e.angle });
            }
            if e.time_mult.is_negative() || e.time_mult > cycle_mult {
                return Err(SequenceError::EventOutOfCycle {
                    time: e.time_mult.to_f64().unwrap_or(f64::NAN),
                    cycle: cycle_mult.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        for pair in events.windows(2) {
            if pair[0].time_mult == pair[1].time_mult && pair[0].ordinal == pair[1].ordinal {
                return Err(SequenceError::DuplicateOrdinal {
                    time: pair[0].time_mult.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Sequence { name, tau, cycle_mult, events, includes_closing_pulse })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cycle_mult(&self) -> &BigRational {
        &self.cycle_mult
    }

    pub fn cycle_time(&self) -> f64 {
        self.cycle_mult.to_f64().expect("small rational") * self.tau
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn includes_closing_pulse(&self) -> bool {
        self.includes_closing_pulse
    }

    /// Copy with a different tau, keeping the event pattern.
    pub fn with_tau(&self, tau: f64) -> Result<Self, SequenceError> {
        Self::custom(
            self.name.clone(),
            tau,
            self.cycle_mult.clone(),
            self.events.clone(),
            self.includes_closing_pulse,
        )
    }

    /// Copy with any pulse scheduled at the cycle boundary dropped, so the
    /// effect of the closing rotation on the propagator can be isolated.
    pub fn without_closing_pulse(&self) -> Self {
        let events: Vec<PulseEvent> = self
            .events
            .iter()
            .filter(|e| e.time_mult < self.cycle_mult)
            .cloned()
            .collect();
        Sequence {
            name: self.name.clone(),
            tau: self.tau,
            cycle_mult: self.cycle_mult.clone(),
            events,
            includes_closing_pulse: false,
        }
    }

    /// Positive-width free-evolution intervals, each with the pulses applied
    /// strictly before it (events at the interval's start boundary included).
    pub fn frame_intervals(&self) -> Vec<FrameInterval<'_>> {
        let zero = BigRational::zero();
        let mut boundaries: Vec<BigRational> = vec![zero];
        for e in &self.events {
            if e.time_mult > BigRational::zero() && e.time_mult < self.cycle_mult {
                boundaries.push(e.time_mult.clone());
            }
        }
        boundaries.push(self.cycle_mult.clone());
        boundaries.dedup();

        let mut out = Vec::with_capacity(boundaries.len() - 1);
        for w in boundaries.windows(2) {
            let (start, end) = (&w[0], &w[1]);
            let pulses_end = self.events.partition_point(|e| e.time_mult <= *start);
            out.push(FrameInterval {
                start: start.clone(),
                end: end.clone(),
                pulses_applied: &self.events[..pulses_end],
            });
        }
        out
    }

    /// Per-interval (duration, cumulative ideal control propagator). The
    /// propagator for interval k is the chronological product of all pulse
    /// unitaries before it, later pulses multiplying from the left.
    pub fn segment_propagators(
        &self,
        n_spins: usize,
    ) -> Result<Vec<(f64, DenseOperator)>, SequenceError> {
        let mut out = Vec::new();
        let mut u = DenseOperator::identity(n_spins);
        let mut applied = 0usize;
        for interval in self.frame_intervals() {
            while applied < interval.pulses_applied.len() {
                let p = &interval.pulses_applied[applied];
                u = p.ideal_unitary(n_spins)?.mul(&u)?;
                applied += 1;
            }
            let duration = (&interval.end - &interval.start).to_f64().expect("small rational") * self.tau;
            out.push((duration, u.clone()));
        }
        Ok(out)
    }

    /// Full-cycle ideal control propagator, closing pulse included when the
    /// sequence has one.
    pub fn control_cycle_propagator(&self, n_spins: usize) -> Result<DenseOperator, SequenceError> {
        let mut u = DenseOperator::identity(n_spins);
        for e in &self.events {
            u = e.ideal_unitary(n_spins)?.mul(&u)?;
        }
        Ok(u)
    }
}

/// One free-evolution interval of a cycle, bounded by pulses.
#[derive(Clone, Debug)]
pub struct FrameInterval<'a> {
    /// Start time as a multiple of tau.
    pub start: BigRational,
    /// End time as a multiple of tau.
    pub end: BigRational,
    /// All events applied at or before `start`, in application order.
    pub pulses_applied: &'a [PulseEvent],
}

impl FrameInterval<'_> {
    /// Interval width as an exact fraction of the cycle.
    pub fn weight(&self, cycle_mult: &BigRational) -> BigRational {
        (&self.end - &self.start) / cycle_mult
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::SymbolicOp;

    fn expm_axis(axis: Axis, n: usize, angle: f64) -> DenseOperator {
        OperatorSum::<Complex64>::total_spin(axis, n)
            .to_dense()
            .unwrap()
            .expm_hermitian(angle)
            .unwrap()
    }

    #[test]
    fn proposed_has_seven_pulses_over_six_tau() {
        let seq = Sequence::proposed(0.1).unwrap();
        assert_eq!(seq.events().len(), 7);
        assert_eq!(seq.cycle_mult(), &BigRational::from(BigInt::from(6)));
        assert!((seq.cycle_time() - 0.6).abs() < 1e-15);
        assert!(seq.includes_closing_pulse());
        // six free-evolution intervals, each one tau wide
        let intervals = seq.frame_intervals();
        assert_eq!(intervals.len(), 6);
        for iv in &intervals {
            assert_eq!(
                iv.weight(seq.cycle_mult()),
                BigRational::new(1.into(), 6.into())
            );
        }
    }

    #[test]
    fn proposed_interval_propagators() {
        // The six cumulative control propagators, written as explicit
        // exponential products and compared dense entry by entry.
        let n = 2;
        let seq = Sequence::proposed(1.0).unwrap();
        let segs = seq.segment_propagators(n).unwrap();
        assert_eq!(segs.len(), 6);

        let expect: Vec<DenseOperator> = vec![
            DenseOperator::identity(n),
            expm_axis(Axis::X, n, FRAC_PI_2),
            expm_axis(Axis::Y, n, -FRAC_PI_2).mul(&expm_axis(Axis::X, n, FRAC_PI_2)).unwrap(),
            expm_axis(Axis::Y, n, FRAC_PI_2).mul(&expm_axis(Axis::X, n, FRAC_PI_2)).unwrap(),
            expm_axis(Axis::X, n, -FRAC_PI_2),
            expm_axis(Axis::X, n, -PI),
        ];
        for (k, ((duration, got), want)) in segs.iter().zip(expect.iter()).enumerate() {
            assert!((duration - 1.0).abs() < 1e-15);
            let d = got.max_abs_diff(want).unwrap();
            assert!(d < 1e-12, "interval {}: diff {d}", k + 1);
        }
    }

    #[test]
    fn cycles_close_up_to_global_phase() {
        for seq in [
            Sequence::proposed(0.3).unwrap(),
            Sequence::cpmg(0.3).unwrap(),
            Sequence::wahuha(0.3).unwrap(),
            Sequence::mrev8(0.3).unwrap(),
        ] {
            let u = seq.control_cycle_propagator(2).unwrap();
            let d = u.frobenius_distance_mod_phase(&DenseOperator::identity(2)).unwrap();
            assert!(d < 1e-12, "{}: distance {d}", seq.name());
        }
    }

    #[test]
    fn ideal_half_pi_pulse_closed_form() {
        // exp(-i (pi/2) Ix) on one spin: cos(pi/4) 1 - 2i sin(pi/4) Ix
        let e = PulseEvent::at(1, 0, 0.0, FRAC_PI_2);
        let u = e.ideal_unitary(1).unwrap();
        let c = (std::f64::consts::FRAC_PI_4).cos();
        let s = (std::f64::consts::FRAC_PI_4).sin();
        assert!((u.entry(0, 0) - Complex64::new(c, 0.0)).norm() < 1e-14);
        assert!((u.entry(0, 1) - Complex64::new(0.0, -s)).norm() < 1e-14);
        assert!((u.entry(1, 0) - Complex64::new(0.0, -s)).norm() < 1e-14);
        assert!((u.entry(1, 1) - Complex64::new(c, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn trivial_error_model_reproduces_ideal_exactly() {
        let e = PulseEvent::at(1, 0, 3.0 * FRAC_PI_2, FRAC_PI_2);
        let ideal = e.ideal_unitary(2).unwrap();
        let with_errors =
            pulse_propagator(&e, 2, &PulseErrorModel::ideal(), None).unwrap();
        assert_eq!(ideal.max_abs_diff(&with_errors).unwrap(), 0.0);

        // finite width without the internal field shares the ideal generator
        let wide = PulseErrorModel { width: 0.05, ..PulseErrorModel::ideal() };
        let u = pulse_propagator(&e, 2, &wide, None).unwrap();
        assert_eq!(ideal.max_abs_diff(&u).unwrap(), 0.0);
    }

    #[test]
    fn finite_width_with_internal_field_converges_linearly() {
        use crate::system::SpinSystem;
        let sys = SpinSystem::new(vec![0.8, -0.5], vec![1.1]).unwrap();
        let h = sys.hamiltonian_numeric().to_dense().unwrap();
        let e = PulseEvent::at(1, 0, 0.0, PI);
        let ideal = e.ideal_unitary(2).unwrap();

        let widths = [0.02, 0.01, 0.005, 0.0025];
        let errs: Vec<f64> = widths
            .iter()
            .map(|&w| {
                let m = PulseErrorModel {
                    width: w,
                    include_internal_during_pulse: true,
                    ..PulseErrorModel::ideal()
                };
                pulse_propagator(&e, 2, &m, Some(&h))
                    .unwrap()
                    .max_abs_diff(&ideal)
                    .unwrap()
            })
            .collect();
        // log-log slope ~ 1
        let slope = (errs[0] / errs[3]).ln() / (widths[0] / widths[3]).ln();
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}, errors {errs:?}");
        // and it needs the Hamiltonian
        let m = PulseErrorModel {
            width: 0.01,
            include_internal_during_pulse: true,
            ..PulseErrorModel::ideal()
        };
        assert!(matches!(
            pulse_propagator(&e, 2, &m, None),
            Err(SequenceError::MissingInternalField)
        ));
    }

    #[test]
    fn back_to_back_pair_order_is_pinned() {
        // Swapping the two pulses at 4tau changes the interval-5 control
        // propagator, hence the frame. Regression against the derived order.
        let seq = Sequence::proposed(1.0).unwrap();
        let mut swapped_events = seq.events().to_vec();
        // events 3 and 4 (0-based) are the back-to-back pair
        assert_eq!(swapped_events[3].time_mult(), &BigRational::from(BigInt::from(4)));
        assert_eq!(swapped_events[4].time_mult(), &BigRational::from(BigInt::from(4)));
        let (a, b) = (swapped_events[3].clone(), swapped_events[4].clone());
        swapped_events[3] = PulseEvent::new(b.time_mult().clone(), 0, b.azimuth(), b.angle());
        swapped_events[4] = PulseEvent::new(a.time_mult().clone(), 1, a.azimuth(), a.angle());
        let swapped = Sequence::custom(
            "swapped".into(),
            1.0,
            seq.cycle_mult().clone(),
            swapped_events,
            true,
        )
        .unwrap();

        let u5 = &seq.segment_propagators(1).unwrap()[4].1;
        let u5_swapped = &swapped.segment_propagators(1).unwrap()[4].1;
        let d = u5.frobenius_distance_mod_phase(u5_swapped).unwrap();
        assert!(d > 0.1, "swapped order should change interval 5, distance {d}");
    }

    #[test]
    fn gap_variant_inserts_an_interval() {
        let seq = Sequence::proposed_with_gap(1.0, 0.25).unwrap();
        let intervals = seq.frame_intervals();
        assert_eq!(intervals.len(), 7);
        let widths: Vec<f64> = intervals
            .iter()
            .map(|iv| (&iv.end - &iv.start).to_f64().unwrap())
            .collect();
        assert!((widths[4] - 0.25).abs() < 1e-15);
        assert!((widths[5] - 0.75).abs() < 1e-15);
        assert!(Sequence::proposed_with_gap(1.0, 1.0).is_err());
        assert!(Sequence::proposed_with_gap(1.0, -0.1).is_err());
    }

    #[test]
    fn clifford_mapping_of_events() {
        let e = PulseEvent::at(2, 0, 3.0 * FRAC_PI_2, FRAC_PI_2);
        let rot = e.clifford_rotation().unwrap();
        assert_eq!(rot.axis(), Axis::Y);
        assert_eq!(rot.quarter_turns(), 3);
        // odd azimuth: no exact action
        let skew = PulseEvent::at(1, 0, 0.3, FRAC_PI_2);
        assert!(skew.clifford_rotation().is_none());
        // conjugating Iz by the -y quarter turn sends z to +x
        let iz = SymbolicOp::total_spin(Axis::Z, 1);
        let ix = SymbolicOp::total_spin(Axis::X, 1);
        assert_eq!(iz.clifford_conjugate(rot), ix);
    }

    #[test]
    fn constructor_validation() {
        assert!(Sequence::proposed(0.0).is_err());
        assert!(Sequence::proposed(-1.0).is_err());
        assert!(Sequence::free(0.0).is_err());
        let bad = Sequence::custom(
            "dup".into(),
            1.0,
            BigRational::from(BigInt::from(2)),
            vec![PulseEvent::at(1, 0, 0.0, PI), PulseEvent::at(1, 0, PI, PI)],
            false,
        );
        assert!(matches!(bad, Err(SequenceError::DuplicateOrdinal { .. })));
        let outside = Sequence::custom(
            "out".into(),
            1.0,
            BigRational::from(BigInt::from(2)),
            vec![PulseEvent::at(3, 0, 0.0, PI)],
            false,
        );
        assert!(matches!(outside, Err(SequenceError::EventOutOfCycle { .. })));
    }
}
