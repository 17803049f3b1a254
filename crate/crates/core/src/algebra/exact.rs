//! Exact scalars for the symbolic backend: Gaussian rationals with optional
//! polynomial dependence on named real parameters.
//!
//! Arithmetic here never rounds. Rationals use arbitrary precision, the
//! imaginary unit is tracked as an exact component, and parameters such as
//! detunings or couplings stay as free symbols. A cancellation to zero is
//! therefore a mathematical identity, not a small float.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::scalar::Sign;

/// Complex number with exact rational real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussRational {
    pub re: BigRational,
    pub im: BigRational,
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

impl GaussRational {
    pub fn zero() -> Self {
        GaussRational { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        GaussRational { re: rat(1, 1), im: BigRational::zero() }
    }

    pub fn i() -> Self {
        GaussRational { re: BigRational::zero(), im: rat(1, 1) }
    }

    pub fn from_rational(r: BigRational) -> Self {
        GaussRational { re: r, im: BigRational::zero() }
    }

    pub fn from_parts(re: BigRational, im: BigRational) -> Self {
        GaussRational { re, im }
    }

    /// Exact embedding of a finite float via its binary expansion.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Self::from_rational)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        GaussRational { re: &self.re + &other.re, im: &self.im + &other.im }
    }

    pub fn mul(&self, other: &Self) -> Self {
        GaussRational {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    pub fn neg(&self) -> Self {
        GaussRational { re: -&self.re, im: -&self.im }
    }

    pub fn conj(&self) -> Self {
        GaussRational { re: self.re.clone(), im: -&self.im }
    }

    /// Multiply by `i^k` exactly, as a component swap.
    pub fn mul_i_pow(&self, k: u8) -> Self {
        match k % 4 {
            0 => self.clone(),
            1 => GaussRational { re: -&self.im, im: self.re.clone() },
            2 => self.neg(),
            3 => GaussRational { re: self.im.clone(), im: -&self.re },
            _ => unreachable!(),
        }
    }

    pub fn to_complex64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().expect("rational representable as f64"),
            self.im.to_f64().expect("rational representable as f64"),
        )
    }
}

/// Formats one rational as a factor, e.g. `3/2` or `-2`.
fn fmt_rational(r: &BigRational) -> String {
    r.to_string()
}

impl fmt::Display for GaussRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        if self.im.is_zero() {
            return write!(f, "{}", fmt_rational(&self.re));
        }
        if self.re.is_zero() {
            return write!(f, "{}", fmt_imag(&self.im, true));
        }
        let tail = fmt_imag(&self.im.abs(), true);
        let sign = if self.im.is_negative() { '-' } else { '+' };
        write!(f, "{} {} {}", fmt_rational(&self.re), sign, tail)
    }
}

/// `3/2 i`, with `i` alone for unit magnitude. `signed` keeps a leading minus.
fn fmt_imag(im: &BigRational, signed: bool) -> String {
    let mag = im.abs();
    let body = if mag == rat(1, 1) { "i".to_string() } else { format!("{} i", fmt_rational(&mag)) };
    if signed && im.is_negative() {
        format!("-{body}")
    } else {
        body
    }
}

/// Product of symbol powers, kept sorted by symbol name. The empty monomial
/// is the constant `1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Box<[(Arc<str>, u32)]>);

impl Ord for Monomial {
    /// Symbols alphabetically, and for a shared symbol the higher power
    /// first, so polynomials print in the usual descending order
    /// (`a^2 + 2*a*b + b^2`).
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        for ((sa, ea), (sb, eb)) in self.0.iter().zip(other.0.iter()) {
            match sa.cmp(sb).then(eb.cmp(ea)) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Box::new([]))
    }

    pub fn symbol(name: &str) -> Self {
        Monomial(Box::new([(Arc::from(name), 1)]))
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut powers: BTreeMap<Arc<str>, u32> = BTreeMap::new();
        for (s, p) in self.0.iter().chain(other.0.iter()) {
            *powers.entry(s.clone()).or_insert(0) += p;
        }
        Monomial(powers.into_iter().collect())
    }

    pub fn factors(&self) -> &[(Arc<str>, u32)] {
        &self.0
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (s, p) in self.0.iter() {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *p == 1 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{s}^{p}")?;
            }
        }
        Ok(())
    }
}

/// Exact scalar: a polynomial in real symbols with Gaussian-rational
/// coefficients. Stored canonically, so zero coefficients are never kept and
/// equality is structural.
#[derive(Clone, Debug, PartialEq)]
pub struct Exact {
    terms: BTreeMap<Monomial, GaussRational>,
}

impl Exact {
    pub fn zero() -> Self {
        Exact { terms: BTreeMap::new() }
    }

    pub fn constant(c: GaussRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(), c);
        }
        Exact { terms }
    }

    pub fn one() -> Self {
        Self::constant(GaussRational::one())
    }

    pub fn i() -> Self {
        Self::constant(GaussRational::i())
    }

    pub fn from_rational(r: BigRational) -> Self {
        Self::constant(GaussRational::from_rational(r))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Self::from_rational(rat(p, q))
    }

    pub fn integer(n: i64) -> Self {
        Self::ratio(n, 1)
    }

    /// Exact embedding of a finite float.
    pub fn from_f64(x: f64) -> Option<Self> {
        GaussRational::from_f64(x).map(Self::constant)
    }

    /// Free real symbol, e.g. a detuning `d1` or coupling `a1_2`.
    pub fn symbol(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::symbol(name), GaussRational::one());
        Exact { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.keys().all(Monomial::is_unit)
    }

    /// Numeric value if the scalar carries no free symbols.
    pub fn to_complex64(&self) -> Option<Complex64> {
        if self.terms.is_empty() {
            return Some(Complex64::new(0.0, 0.0));
        }
        if !self.is_constant() {
            return None;
        }
        self.terms.values().next().map(GaussRational::to_complex64)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            match terms.get_mut(m) {
                Some(existing) => {
                    let sum = existing.add(c);
                    if sum.is_zero() {
                        terms.remove(m);
                    } else {
                        *existing = sum;
                    }
                }
                None => {
                    terms.insert(m.clone(), c.clone());
                }
            }
        }
        Exact { terms }
    }

    pub fn neg(&self) -> Self {
        Exact { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Monomial, GaussRational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = ca.mul(cb);
                match terms.get_mut(&m) {
                    Some(existing) => {
                        let sum = existing.add(&c);
                        if sum.is_zero() {
                            terms.remove(&m);
                        } else {
                            *existing = sum;
                        }
                    }
                    None => {
                        if !c.is_zero() {
                            terms.insert(m, c);
                        }
                    }
                }
            }
        }
        Exact { terms }
    }

    /// Complex conjugate. Symbols stand for real parameters, so only the
    /// numeric coefficients are conjugated.
    pub fn conj(&self) -> Self {
        Exact { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.conj())).collect() }
    }

    pub fn mul_i_pow(&self, k: u8) -> Self {
        Exact { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.mul_i_pow(k))).collect() }
    }

    /// True when every coefficient is purely real, which under the real-symbol
    /// convention means the scalar itself is real.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(GaussRational::is_real)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &GaussRational)> {
        self.terms.iter()
    }

    /// Sign-magnitude rendering for one-line listings: the magnitude string
    /// never starts with a sign, so callers can place `+`/`-` themselves.
    pub fn signed_atom(&self) -> (Sign, String) {
        if self.terms.is_empty() {
            return (Sign::Plus, "0".to_string());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            return term_atom(m, c);
        }
        let mut out = String::from("(");
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            let (sign, abs) = term_atom(m, c);
            if idx == 0 {
                if sign == Sign::Minus {
                    out.push('-');
                }
            } else {
                out.push_str(match sign {
                    Sign::Plus => " + ",
                    Sign::Minus => " - ",
                });
            }
            out.push_str(&abs);
        }
        out.push(')');
        (Sign::Plus, out)
    }
}

/// One monomial term as sign plus magnitude string.
fn term_atom(m: &Monomial, c: &GaussRational) -> (Sign, String) {
    if c.is_real() {
        let sign = if c.re.is_negative() { Sign::Minus } else { Sign::Plus };
        let mag = c.re.abs();
        let abs = if m.is_unit() {
            fmt_rational(&mag)
        } else if mag == rat(1, 1) {
            m.to_string()
        } else {
            format!("{}*{}", fmt_rational(&mag), m)
        };
        return (sign, abs);
    }
    if c.re.is_zero() {
        let sign = if c.im.is_negative() { Sign::Minus } else { Sign::Plus };
        let body = fmt_imag(&c.im, false);
        let abs = if m.is_unit() { body } else { format!("({body})*{m}") };
        return (sign, abs);
    }
    let inner = c.to_string();
    let abs = if m.is_unit() { format!("({inner})") } else { format!("({inner})*{m}") };
    (Sign::Plus, abs)
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            let (sign, abs) = term_atom(m, c);
            if idx == 0 {
                if sign == Sign::Minus {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", match sign {
                    Sign::Plus => " + ",
                    Sign::Minus => " - ",
                })?;
            }
            write!(f, "{abs}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rational_field_ops() {
        let a = GaussRational::from_parts(rat(1, 2), rat(-1, 3));
        let b = GaussRational::from_parts(rat(2, 5), rat(1, 7));
        // (a + b) - b == a, exactly
        assert_eq!(a.add(&b).add(&b.neg()), a);
        // i^2 = -1
        assert_eq!(GaussRational::i().mul(&GaussRational::i()), GaussRational::one().neg());
        // multiply by i four times is the identity
        assert_eq!(a.mul_i_pow(1).mul_i_pow(3), a);
        // conj is an involution and fixes the real part
        assert_eq!(a.conj().conj(), a);
    }

    #[test]
    fn float_embedding_is_exact() {
        // 0.1 is not a dyadic rational; its float embedding must reproduce
        // the exact f64 value, not the decimal.
        let x = 0.1_f64;
        let g = GaussRational::from_f64(x).unwrap();
        assert_eq!(g.re.to_f64().unwrap(), x);
        // dyadic values embed with small denominators
        let h = GaussRational::from_f64(0.75).unwrap();
        assert_eq!(h.re, rat(3, 4));
        assert!(GaussRational::from_f64(f64::NAN).is_none());
    }

    #[test]
    fn polynomial_cancellation_is_structural() {
        let d = Exact::symbol("d1");
        let expr = d.mul(&Exact::ratio(1, 3)).add(&d.mul(&Exact::ratio(2, 3))).sub(&d);
        assert!(expr.is_zero());
        assert_eq!(expr, Exact::zero());
    }

    #[test]
    fn polynomial_product_collects_monomials() {
        let a = Exact::symbol("a");
        let b = Exact::symbol("b");
        // (a + b)^2 = a^2 + 2ab + b^2
        let sq = a.add(&b).mul(&a.add(&b));
        let expect = a
            .mul(&a)
            .add(&a.mul(&b).mul(&Exact::integer(2)))
            .add(&b.mul(&b));
        assert_eq!(sq, expect);
        assert_eq!(sq.to_string(), "a^2 + 2*a*b + b^2");
    }

    #[test]
    fn display_forms() {
        assert_eq!(Exact::zero().to_string(), "0");
        assert_eq!(Exact::ratio(-1, 2).to_string(), "-1/2");
        assert_eq!(Exact::i().mul(&Exact::ratio(3, 4)).to_string(), "3/4 i");
        assert_eq!(
            Exact::ratio(1, 2).add(&Exact::i().mul(&Exact::ratio(-3, 4))).to_string(),
            "(1/2 - 3/4 i)"
        );
        let d = Exact::symbol("d1");
        assert_eq!(d.mul(&Exact::ratio(-1, 3)).to_string(), "-1/3*d1");
        assert_eq!(d.mul(&Exact::i()).to_string(), "(i)*d1");
        let (sign, atom) = d.sub(&Exact::symbol("d2")).signed_atom();
        assert_eq!(sign, Sign::Plus);
        assert_eq!(atom, "(d1 - d2)");
    }

    #[test]
    fn constants_report_numeric_values() {
        let c = Exact::ratio(1, 4).add(&Exact::i().mul(&Exact::ratio(1, 8)));
        let z = c.to_complex64().unwrap();
        assert_eq!(z.re, 0.25);
        assert_eq!(z.im, 0.125);
        assert!(Exact::symbol("d1").to_complex64().is_none());
    }
}
