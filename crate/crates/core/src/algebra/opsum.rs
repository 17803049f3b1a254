//! Sparse operators as linear combinations of Pauli words, generic over the
//! coefficient backend.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;

use super::dense::DenseOperator;
use super::exact::Exact;
use super::letter::Letter;
use super::scalar::Coeff;
use super::word::PauliWord;
use super::AlgebraError;

/// Spin component label. Spin operators follow the `I_a = sigma_a / 2`
/// convention throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn letter(self) -> Letter {
        match self {
            Axis::X => Letter::X,
            Axis::Y => Letter::Y,
            Axis::Z => Letter::Z,
        }
    }

    pub fn unit(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter().symbol())
    }
}

/// Global rotation `U = exp(-i * angle * I_axis,total)` restricted to angles
/// that are multiples of pi/2.
///
/// Conjugation `U^-1 A U` by such a rotation permutes Pauli letters up to
/// sign, so it is exact in both coefficient backends. Arbitrary angles have
/// no exact action on Pauli words and are rejected at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CliffordRotation {
    axis: Axis,
    /// Number of +pi/2 turns, normalized to `0..4`.
    quarter_turns: u8,
}

impl CliffordRotation {
    const ANGLE_TOL: f64 = 1e-9;

    /// Rotation by `angle` about `+axis`. Fails unless `angle` is an integer
    /// multiple of pi/2 within a small tolerance.
    pub fn new(axis: Axis, angle: f64) -> Result<Self, AlgebraError> {
        let turns = angle / FRAC_PI_2;
        let k = turns.round();
        if !angle.is_finite() || (turns - k).abs() > Self::ANGLE_TOL {
            return Err(AlgebraError::UnsupportedAngle { angle });
        }
        let quarter_turns = (k as i64).rem_euclid(4) as u8;
        Ok(CliffordRotation { axis, quarter_turns })
    }

    pub fn identity() -> Self {
        CliffordRotation { axis: Axis::Z, quarter_turns: 0 }
    }

    pub fn axis(self) -> Axis {
        self.axis
    }

    pub fn quarter_turns(self) -> u8 {
        self.quarter_turns
    }

    pub fn inverse(self) -> Self {
        CliffordRotation { axis: self.axis, quarter_turns: (4 - self.quarter_turns) % 4 }
    }

    /// Action of conjugation on a single letter: `U^-1 L U = sign * L'`.
    ///
    /// One +pi/2 turn about axis `a` sends, for the cyclic triple `(a,b,c)`,
    /// `b -> -c` and `c -> +b`.
    pub fn apply_letter(self, letter: Letter) -> (i8, Letter) {
        let mut sign = 1i8;
        let mut l = letter;
        for _ in 0..self.quarter_turns {
            let (s, next) = quarter_turn(self.axis, l);
            sign *= s;
            l = next;
        }
        (sign, l)
    }
}

fn quarter_turn(axis: Axis, l: Letter) -> (i8, Letter) {
    use Letter::*;
    match axis {
        Axis::X => match l {
            E => (1, E),
            X => (1, X),
            Y => (-1, Z),
            Z => (1, Y),
        },
        Axis::Y => match l {
            E => (1, E),
            Y => (1, Y),
            Z => (-1, X),
            X => (1, Z),
        },
        Axis::Z => match l {
            E => (1, E),
            Z => (1, Z),
            X => (-1, Y),
            Y => (1, X),
        },
    }
}

/// Linear combination of Pauli words over `n_spins` sites.
///
/// Terms are kept in a sorted map with zero coefficients pruned, so equality
/// is structural and display order is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum<C: Coeff> {
    n_spins: usize,
    terms: BTreeMap<PauliWord, C>,
}

pub type SymbolicOp = OperatorSum<Exact>;
pub type NumericOp = OperatorSum<Complex64>;

impl<C: Coeff> OperatorSum<C> {
    pub fn zero(n_spins: usize) -> Self {
        OperatorSum { n_spins, terms: BTreeMap::new() }
    }

    pub fn identity(n_spins: usize) -> Self {
        let mut op = Self::zero(n_spins);
        op.insert(PauliWord::identity(n_spins), C::one());
        op
    }

    pub fn from_terms(
        n_spins: usize,
        terms: impl IntoIterator<Item = (PauliWord, C)>,
    ) -> Result<Self, AlgebraError> {
        let mut op = Self::zero(n_spins);
        for (word, coeff) in terms {
            if word.len() != n_spins {
                return Err(AlgebraError::LengthMismatch { left: n_spins, right: word.len() });
            }
            op.insert(word, coeff);
        }
        Ok(op)
    }

    /// Single-spin operator `I_axis` on `site`: coefficient 1/2 on the
    /// one-letter word.
    pub fn single_spin(axis: Axis, site: usize, n_spins: usize) -> Result<Self, AlgebraError> {
        if site >= n_spins {
            return Err(AlgebraError::SiteOutOfRange { site, n_spins });
        }
        let half = BigRational::new(1.into(), 2.into());
        let mut op = Self::zero(n_spins);
        op.insert(PauliWord::single(axis.letter(), site, n_spins), C::from_rational(&half));
        Ok(op)
    }

    /// Collective operator `I_axis,total = sum_i I_axis^i`.
    pub fn total_spin(axis: Axis, n_spins: usize) -> Self {
        let half = BigRational::new(1.into(), 2.into());
        let mut op = Self::zero(n_spins);
        for site in 0..n_spins {
            op.insert(PauliWord::single(axis.letter(), site, n_spins), C::from_rational(&half));
        }
        op
    }

    fn insert(&mut self, word: PauliWord, coeff: C) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&word) {
            Some(existing) => {
                let sum = existing.add(&coeff);
                if sum.is_zero() {
                    self.terms.remove(&word);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(word, coeff);
            }
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, word: &PauliWord) -> Option<&C> {
        self.terms.get(word)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliWord, &C)> {
        self.terms.iter()
    }

    fn check_same_size(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.n_spins != other.n_spins {
            return Err(AlgebraError::LengthMismatch { left: self.n_spins, right: other.n_spins });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_size(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.insert(w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        OperatorSum {
            n_spins: self.n_spins,
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c.neg())).collect(),
        }
    }

    pub fn scale(&self, factor: &C) -> Self {
        let mut out = Self::zero(self.n_spins);
        for (w, c) in &self.terms {
            out.insert(w.clone(), c.mul(factor));
        }
        out
    }

    pub fn scale_rational(&self, r: &BigRational) -> Self {
        self.scale(&C::from_rational(r))
    }

    /// Operator product via the exact letter multiplication table.
    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_size(other)?;
        let mut out = Self::zero(self.n_spins);
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                let (phase, word) = wa.mul(wb);
                out.insert(word, ca.mul(cb).mul_i_pow(phase.exponent()));
            }
        }
        Ok(out)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self, AlgebraError> {
        let ab = self.mul(other)?;
        let ba = other.mul(self)?;
        ab.sub(&ba)
    }

    /// Adjoint. Pauli words are self-adjoint, so only coefficients change.
    pub fn dagger(&self) -> Self {
        OperatorSum {
            n_spins: self.n_spins,
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c.conj())).collect(),
        }
    }

    /// Hermitian iff every coefficient is real. The exact backend decides
    /// structurally; floating point compares imaginary parts against `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.is_real_within(tol))
    }

    /// Conjugation `U^-1 (self) U` by a quarter-turn rotation: a signed
    /// permutation of letters, exact in both backends.
    pub fn clifford_conjugate(&self, rot: CliffordRotation) -> Self {
        let mut out = Self::zero(self.n_spins);
        for (word, coeff) in &self.terms {
            let mut sign = 1i8;
            let mut letters = Vec::with_capacity(word.len());
            for &l in word.letters() {
                let (s, mapped) = rot.apply_letter(l);
                sign *= s;
                letters.push(mapped);
            }
            let c = if sign < 0 { coeff.neg() } else { coeff.clone() };
            out.insert(PauliWord::from_letters(letters), c);
        }
        out
    }

    /// Dense matrix in the computational basis; site 0 is the most
    /// significant qubit and index 0 is the all-up state. Fails if any
    /// coefficient still carries free symbols.
    pub fn to_dense(&self) -> Result<DenseOperator, AlgebraError> {
        let dim = 1usize << self.n_spins;
        let mut mat = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for (word, coeff) in &self.terms {
            let z = coeff
                .to_complex()
                .ok_or_else(|| AlgebraError::NonNumeric { word: word.to_string() })?;
            accumulate_word(&mut mat, word, z, self.n_spins);
        }
        DenseOperator::from_matrix(mat)
    }
}

impl SymbolicOp {
    /// Downgrade exact coefficients to floats. Fails on free symbols.
    pub fn to_numeric(&self) -> Result<NumericOp, AlgebraError> {
        let mut out = NumericOp::zero(self.n_spins);
        for (w, c) in &self.terms {
            let z = c
                .to_complex64()
                .ok_or_else(|| AlgebraError::NonNumeric { word: w.to_string() })?;
            out.insert(w.clone(), z);
        }
        Ok(out)
    }
}

impl NumericOp {
    /// Largest coefficient magnitude; zero for the empty operator.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Max distance between coefficients, over the union of words.
    pub fn coeff_distance(&self, other: &Self) -> Result<f64, AlgebraError> {
        let diff = self.sub(other)?;
        Ok(diff.max_coeff_norm())
    }

    /// Drop terms with magnitude at or below `tol` (cleanup after float
    /// cancellations).
    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = Self::zero(self.n_spins);
        for (w, c) in &self.terms {
            if c.norm() > tol {
                out.insert(w.clone(), *c);
            }
        }
        out
    }
}

/// Adds `z * (sigma word)` into `mat`. Pauli words are monomial matrices, so
/// each basis column maps to a single row with a +/-1 or +/-i amplitude.
fn accumulate_word(
    mat: &mut nalgebra::DMatrix<Complex64>,
    word: &PauliWord,
    z: Complex64,
    n_spins: usize,
) {
    let dim = 1usize << n_spins;
    for col in 0..dim {
        let mut row = col;
        let mut amp = z;
        for (site, &letter) in word.letters().iter().enumerate() {
            let bit_pos = n_spins - 1 - site;
            let bit = (col >> bit_pos) & 1;
            match letter {
                Letter::E => {}
                Letter::X => row ^= 1 << bit_pos,
                Letter::Y => {
                    row ^= 1 << bit_pos;
                    // sigma_y |0> = i|1>, sigma_y |1> = -i|0>
                    amp = if bit == 0 {
                        Complex64::new(-amp.im, amp.re)
                    } else {
                        Complex64::new(amp.im, -amp.re)
                    };
                }
                Letter::Z => {
                    if bit == 1 {
                        amp = -amp;
                    }
                }
            }
        }
        mat[(row, col)] += amp;
    }
}

impl<C: Coeff> fmt::Display for OperatorSum<C> {
    /// One term per line, sorted by word: `+1/2 * ZZ`, `-1/4*a1_2 * XX`, ...
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (word, coeff)) in self.terms.iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            let (sign, abs) = coeff.signed_atom();
            write!(f, "{}{} * {}", sign.prefix(), abs, word)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(n: usize) -> SymbolicOp {
        SymbolicOp::zero(n)
    }

    /// `3 Iz Iz - I.I` on two spins, the angular part of a dipolar pair
    /// coupling: `(1/2) ZZ - (1/4) XX - (1/4) YY` in Pauli-word form.
    fn pair_structure() -> SymbolicOp {
        let _ = sym(2);
        let mut op = SymbolicOp::zero(2);
        let terms = [
            ("ZZ", Exact::ratio(1, 2)),
            ("XX", Exact::ratio(-1, 4)),
            ("YY", Exact::ratio(-1, 4)),
        ];
        for (w, c) in terms {
            op = op
                .add(&SymbolicOp::from_terms(2, [(w.parse().unwrap(), c)]).unwrap())
                .unwrap();
        }
        op
    }

    #[test]
    fn single_spin_squares_to_quarter_identity() {
        let ix = SymbolicOp::single_spin(Axis::X, 0, 1).unwrap();
        let sq = ix.mul(&ix).unwrap();
        let expect = SymbolicOp::identity(1).scale(&Exact::ratio(1, 4));
        assert_eq!(sq, expect);
    }

    #[test]
    fn angular_momentum_commutator() {
        // [Ix, Iy] = i Iz on one spin
        let ix = SymbolicOp::single_spin(Axis::X, 0, 1).unwrap();
        let iy = SymbolicOp::single_spin(Axis::Y, 0, 1).unwrap();
        let iz = SymbolicOp::single_spin(Axis::Z, 0, 1).unwrap();
        let lhs = ix.commutator(&iy).unwrap();
        assert_eq!(lhs, iz.scale(&Exact::i()));
    }

    #[test]
    fn zeeman_does_not_commute_with_pair_coupling() {
        // [Iz^1, 3 Iz Iz - I.I] = (i/4) XY - (i/4) YX, worked out by hand
        // from the letter product table.
        let izl = SymbolicOp::single_spin(Axis::Z, 0, 2).unwrap();
        let comm = izl.commutator(&pair_structure()).unwrap();
        let expect = SymbolicOp::from_terms(
            2,
            [
                ("XY".parse().unwrap(), Exact::i().mul(&Exact::ratio(1, 4))),
                ("YX".parse().unwrap(), Exact::i().mul(&Exact::ratio(-1, 4))),
            ],
        )
        .unwrap();
        assert_eq!(comm, expect);
        // a commutator of Hermitian operators is anti-Hermitian
        assert!(!comm.is_hermitian(0.0));
        assert_eq!(comm.dagger(), comm.neg());
    }

    #[test]
    fn collective_z_commutes_with_pair_coupling() {
        // 3 Iz Iz - I.I singles out z: it commutes with the collective z
        // component but not with x or y.
        let pair = pair_structure();
        let comm_z = SymbolicOp::total_spin(Axis::Z, 2).commutator(&pair).unwrap();
        assert!(comm_z.is_zero(), "got {comm_z}");

        // [Ix,total, 3 Iz Iz - I.I] = -(3/4) i (YZ + ZY), by hand
        let comm_x = SymbolicOp::total_spin(Axis::X, 2).commutator(&pair).unwrap();
        let minus_3i4 = Exact::i().mul(&Exact::ratio(-3, 4));
        let expect = SymbolicOp::from_terms(
            2,
            [
                ("YZ".parse().unwrap(), minus_3i4.clone()),
                ("ZY".parse().unwrap(), minus_3i4),
            ],
        )
        .unwrap();
        assert_eq!(comm_x, expect);

        // the isotropic part I.I alone commutes with every component
        let dot = SymbolicOp::from_terms(
            2,
            [
                ("XX".parse().unwrap(), Exact::ratio(1, 4)),
                ("YY".parse().unwrap(), Exact::ratio(1, 4)),
                ("ZZ".parse().unwrap(), Exact::ratio(1, 4)),
            ],
        )
        .unwrap();
        for axis in Axis::ALL {
            let comm = SymbolicOp::total_spin(axis, 2).commutator(&dot).unwrap();
            assert!(comm.is_zero(), "axis {axis} gave {comm}");
        }
    }

    #[test]
    fn clifford_conjugation_matches_dense() {
        // Exact letter permutation vs dense U^dag A U for every axis and
        // quarter-turn count.
        let op = NumericOp::from_terms(
            2,
            [
                ("XZ".parse().unwrap(), Complex64::new(0.3, 0.0)),
                ("YE".parse().unwrap(), Complex64::new(-0.7, 0.0)),
                ("ZY".parse().unwrap(), Complex64::new(0.11, 0.0)),
                ("EX".parse().unwrap(), Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap();
        let a = op.to_dense().unwrap();
        for axis in Axis::ALL {
            for k in 0..4 {
                let angle = k as f64 * FRAC_PI_2;
                let rot = CliffordRotation::new(axis, angle).unwrap();
                let generator = NumericOp::total_spin(axis, 2).to_dense().unwrap();
                let u = generator.expm_hermitian(angle).unwrap();
                let dense_conj = u.adjoint().mul(&a).unwrap().mul(&u).unwrap();
                let exact_conj = op.clifford_conjugate(rot).to_dense().unwrap();
                let d = dense_conj.max_abs_diff(&exact_conj).unwrap();
                assert!(d < 1e-12, "axis {axis} k {k}: diff {d}");
            }
        }
    }

    #[test]
    fn clifford_rejects_generic_angles() {
        assert!(CliffordRotation::new(Axis::X, 0.3).is_err());
        assert!(CliffordRotation::new(Axis::X, std::f64::consts::PI / 3.0).is_err());
        let r = CliffordRotation::new(Axis::Y, -FRAC_PI_2).unwrap();
        assert_eq!(r.quarter_turns(), 3);
    }

    #[test]
    fn display_is_sorted_and_signed() {
        let op = pair_structure();
        assert_eq!(op.to_string(), "-1/4 * XX\n-1/4 * YY\n+1/2 * ZZ");
        let scaled = op.scale(&Exact::symbol("a1_2"));
        assert_eq!(
            scaled.to_string(),
            "-1/4*a1_2 * XX\n-1/4*a1_2 * YY\n+1/2*a1_2 * ZZ"
        );
        assert_eq!(SymbolicOp::zero(2).to_string(), "0");
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = SymbolicOp::identity(2);
        let b = SymbolicOp::identity(3);
        assert!(matches!(a.mul(&b), Err(AlgebraError::LengthMismatch { .. })));
        assert!(matches!(
            SymbolicOp::single_spin(Axis::X, 5, 2),
            Err(AlgebraError::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn symbolic_dense_conversion_requires_numbers() {
        let op = SymbolicOp::identity(1).scale(&Exact::symbol("d1"));
        assert!(matches!(op.to_dense(), Err(AlgebraError::NonNumeric { .. })));
        let bound = SymbolicOp::identity(1).scale(&Exact::ratio(3, 8));
        let dense = bound.to_dense().unwrap();
        assert_eq!(dense.entry(0, 0), Complex64::new(0.375, 0.0));
    }

    use std::f64::consts::FRAC_PI_2;

    fn arb_numeric_op(n: usize) -> impl Strategy<Value = NumericOp> {
        let word = proptest::collection::vec(0..4u8, n).prop_map(move |ls| {
            PauliWord::from_letters(
                ls.into_iter()
                    .map(|k| Letter::ALL[k as usize])
                    .collect::<Vec<_>>(),
            )
        });
        let term = (word, -4i32..5i32).prop_map(|(w, c)| (w, Complex64::new(c as f64 / 4.0, 0.0)));
        proptest::collection::vec(term, 1..5)
            .prop_map(move |ts| NumericOp::from_terms(n, ts).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The sparse product must agree with the dense matrix product:
        /// to_dense is an algebra homomorphism.
        #[test]
        fn product_homomorphism(a in arb_numeric_op(3), b in arb_numeric_op(3)) {
            let sparse = a.mul(&b).unwrap().to_dense().unwrap();
            let dense = a.to_dense().unwrap().mul(&b.to_dense().unwrap()).unwrap();
            prop_assert!(sparse.max_abs_diff(&dense).unwrap() < 1e-12);
        }

        /// Commutators are antisymmetric, exactly, in the float backend too
        /// (only sign flips and table lookups are involved).
        #[test]
        fn commutator_antisymmetry(a in arb_numeric_op(2), b in arb_numeric_op(2)) {
            let ab = a.commutator(&b).unwrap();
            let ba = b.commutator(&a).unwrap();
            prop_assert_eq!(ab, ba.neg());
        }
    }

    #[test]
    fn jacobi_identity_exact() {
        // [[A,B],C] + [[B,C],A] + [[C,A],B] = 0 with exact coefficients
        let a = pair_structure();
        let b = SymbolicOp::total_spin(Axis::X, 2);
        let c = SymbolicOp::single_spin(Axis::Y, 1, 2).unwrap();
        let j = a
            .commutator(&b)
            .unwrap()
            .commutator(&c)
            .unwrap()
            .add(&b.commutator(&c).unwrap().commutator(&a).unwrap())
            .unwrap()
            .add(&c.commutator(&a).unwrap().commutator(&b).unwrap())
            .unwrap();
        assert!(j.is_zero());
    }
}
