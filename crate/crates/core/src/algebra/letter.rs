//! Single-site Pauli letters and the i^k phase group they generate.

use std::fmt;

/// One tensor factor of a Pauli word: the identity or a Pauli axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    E,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::E, Letter::X, Letter::Y, Letter::Z];

    /// Single-site product `self · other` as a phase times a letter.
    ///
    /// `X·Y = iZ` (cyclic), `A·A = E`, `E` is neutral.
    #[allow(clippy::should_implement_trait)] // returns (phase, letter), not Self
    pub fn mul(self, other: Letter) -> (Phase, Letter) {
        use Letter::*;
        match (self, other) {
            (E, b) => (Phase::ONE, b),
            (a, E) => (Phase::ONE, a),
            (a, b) if a == b => (Phase::ONE, E),
            (X, Y) => (Phase::I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, X) => (Phase::I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!("all letter pairs covered"),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Letter::E => 'E',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Letter> {
        match c {
            'E' | 'e' | 'I' | 'i' => Some(Letter::E),
            'X' | 'x' => Some(Letter::X),
            'Y' | 'y' => Some(Letter::Y),
            'Z' | 'z' => Some(Letter::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A power of the imaginary unit, `i^k` with `k` taken mod 4.
///
/// Letter products only ever produce phases from this group, which keeps
/// symbolic arithmetic exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn compose(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    /// Exponent `k` of `i^k`, in `0..4`.
    pub fn exponent(self) -> u8 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closure of the single-site product table: every product is a phase
    /// times a single letter, and the phase is ±1 or ±i. All 16 cases.
    #[test]
    fn product_table_closure() {
        for a in Letter::ALL {
            for b in Letter::ALL {
                let (phase, c) = a.mul(b);
                assert!(phase.exponent() < 4);
                // diagonal squares to identity with phase +1
                if a == b {
                    assert_eq!(c, Letter::E);
                    assert_eq!(phase, Phase::ONE);
                }
                // E is neutral
                if a == Letter::E {
                    assert_eq!((phase, c), (Phase::ONE, b));
                }
            }
        }
        // spot-check the cyclic rules
        assert_eq!(Letter::X.mul(Letter::Y), (Phase::I, Letter::Z));
        assert_eq!(Letter::Y.mul(Letter::X), (Phase::MINUS_I, Letter::Z));
        assert_eq!(Letter::Z.mul(Letter::X), (Phase::I, Letter::Y));
    }

    #[test]
    fn phase_group() {
        assert_eq!(Phase::I.compose(Phase::I), Phase::MINUS_ONE);
        assert_eq!(Phase::I.compose(Phase::MINUS_I), Phase::ONE);
        assert_eq!(Phase::MINUS_ONE.compose(Phase::MINUS_ONE), Phase::ONE);
    }
}
