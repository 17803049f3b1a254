//! The coefficient abstraction shared by the exact and floating-point
//! operator backends.

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::exact::Exact;

/// Sign of a displayed term, kept separate from the magnitude so listings can
/// align `+`/`-` prefixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn prefix(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Scalar coefficient of a Pauli word.
///
/// Two implementations exist: [`Exact`] (rational, symbolic, never rounds)
/// and [`Complex64`] (fast floating point). Operator code is generic over
/// this trait so both backends share one code path.
pub trait Coeff: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Complex conjugate.
    fn conj(&self) -> Self;
    /// Multiply by `i^k`. Both backends implement this as an exact component
    /// swap, so no rounding occurs even in floating point.
    fn mul_i_pow(&self, k: u8) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Embed a finite float. The exact backend uses the binary expansion, so
    /// the embedding is lossless. Panics on NaN or infinity; numeric inputs
    /// are validated before they reach operator code.
    fn from_f64(x: f64) -> Self;
    /// Numeric value, or `None` when free symbols remain.
    fn to_complex(&self) -> Option<Complex64>;
    /// Whether the scalar is real. Floating point compares `|Im|` against
    /// `tol`; the exact backend decides structurally and ignores `tol`.
    fn is_real_within(&self, tol: f64) -> bool;
    /// Sign and magnitude string for one-line listings.
    fn signed_atom(&self) -> (Sign, String);

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    fn scale_rational(&self, r: &BigRational) -> Self {
        self.mul(&Self::from_rational(r))
    }
}

impl Coeff for Exact {
    fn zero() -> Self {
        Exact::zero()
    }

    fn one() -> Self {
        Exact::one()
    }

    fn is_zero(&self) -> bool {
        Exact::is_zero(self)
    }

    fn add(&self, other: &Self) -> Self {
        Exact::add(self, other)
    }

    fn mul(&self, other: &Self) -> Self {
        Exact::mul(self, other)
    }

    fn neg(&self) -> Self {
        Exact::neg(self)
    }

    fn conj(&self) -> Self {
        Exact::conj(self)
    }

    fn mul_i_pow(&self, k: u8) -> Self {
        Exact::mul_i_pow(self, k)
    }

    fn from_rational(r: &BigRational) -> Self {
        Exact::from_rational(r.clone())
    }

    fn from_f64(x: f64) -> Self {
        Exact::from_f64(x).expect("finite float")
    }

    fn to_complex(&self) -> Option<Complex64> {
        Exact::to_complex64(self)
    }

    fn is_real_within(&self, _tol: f64) -> bool {
        Exact::is_real(self)
    }

    fn signed_atom(&self) -> (Sign, String) {
        Exact::signed_atom(self)
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }

    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }

    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn mul(&self, other: &Self) -> Self {
        self * other
    }

    fn neg(&self) -> Self {
        -self
    }

    fn conj(&self) -> Self {
        Complex64::new(self.re, -self.im)
    }

    fn mul_i_pow(&self, k: u8) -> Self {
        match k % 4 {
            0 => *self,
            1 => Complex64::new(-self.im, self.re),
            2 => Complex64::new(-self.re, -self.im),
            3 => Complex64::new(self.im, -self.re),
            _ => unreachable!(),
        }
    }

    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(r.to_f64().expect("rational representable as f64"), 0.0)
    }

    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "finite float");
        Complex64::new(x, 0.0)
    }

    fn to_complex(&self) -> Option<Complex64> {
        Some(*self)
    }

    fn is_real_within(&self, tol: f64) -> bool {
        self.im.abs() <= tol
    }

    fn signed_atom(&self) -> (Sign, String) {
        if self.im == 0.0 {
            let sign = if self.re < 0.0 { Sign::Minus } else { Sign::Plus };
            return (sign, format!("{}", self.re.abs()));
        }
        if self.re == 0.0 {
            let sign = if self.im < 0.0 { Sign::Minus } else { Sign::Plus };
            return (sign, format!("{} i", self.im.abs()));
        }
        let sign = if self.im < 0.0 { '-' } else { '+' };
        (Sign::Plus, format!("({} {} {} i)", self.re, sign, self.im.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_i_powers_are_exact_swaps() {
        let z = Complex64::new(0.5, -0.25);
        let w = z.mul_i_pow(1);
        assert_eq!(w, Complex64::new(0.25, 0.5));
        assert_eq!(z.mul_i_pow(2), Complex64::new(-0.5, 0.25));
        assert_eq!(z.mul_i_pow(1).mul_i_pow(3), z);
    }

    #[test]
    fn atoms_render_signed_magnitudes() {
        assert_eq!(Complex64::new(-0.5, 0.0).signed_atom(), (Sign::Minus, "0.5".to_string()));
        assert_eq!(Complex64::new(0.0, 0.25).signed_atom(), (Sign::Plus, "0.25 i".to_string()));
        let (s, a) = Complex64::new(0.5, -0.25).signed_atom();
        assert_eq!(s, Sign::Plus);
        assert_eq!(a, "(0.5 - 0.25 i)");
    }

    #[test]
    fn backends_agree_on_rational_embedding() {
        let r = BigRational::new((-3).into(), 4.into());
        let e = <Exact as Coeff>::from_rational(&r);
        let c = <Complex64 as Coeff>::from_rational(&r);
        assert_eq!(e.to_complex().unwrap(), c);
    }
}
