//! Pauli words: tensor products of single-site letters.

use std::fmt;
use std::str::FromStr;

use super::letter::{Letter, Phase};

/// A tensor product of single-site letters, one per spin.
///
/// Site 0 is the leftmost letter and the most significant factor in the
/// dense matrix expansion: `XZE = X ⊗ Z ⊗ E` acts with `X` on spin 0.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliWord(Box<[Letter]>);

impl PauliWord {
    pub fn identity(n_spins: usize) -> Self {
        PauliWord(vec![Letter::E; n_spins].into_boxed_slice())
    }

    /// Word with `letter` on `site` and identity elsewhere.
    ///
    /// Callers are expected to range-check `site`; this is enforced at the
    /// operator level where a proper error can be reported.
    pub fn single(letter: Letter, site: usize, n_spins: usize) -> Self {
        debug_assert!(site < n_spins);
        let mut letters = vec![Letter::E; n_spins];
        letters[site] = letter;
        PauliWord(letters.into_boxed_slice())
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        PauliWord(letters.into_boxed_slice())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&l| l == Letter::E)
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&l| l != Letter::E).count()
    }

    /// Sitewise product. Both words must have the same length; the operator
    /// layer checks this before calling.
    pub fn mul(&self, other: &PauliWord) -> (Phase, PauliWord) {
        debug_assert_eq!(self.len(), other.len());
        let mut phase = Phase::ONE;
        let mut letters = Vec::with_capacity(self.len());
        for (&a, &b) in self.0.iter().zip(other.0.iter()) {
            let (p, c) = a.mul(b);
            phase = phase.compose(p);
            letters.push(c);
        }
        (phase, PauliWord(letters.into_boxed_slice()))
    }

    /// Replace the letter at `site`, returning a new word.
    pub fn with_letter(&self, site: usize, letter: Letter) -> Self {
        let mut letters = self.0.to_vec();
        letters[site] = letter;
        PauliWord(letters.into_boxed_slice())
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.0.iter() {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            match Letter::from_symbol(c) {
                Some(l) => letters.push(l),
                None => return Err(format!("invalid Pauli letter '{c}'")),
            }
        }
        Ok(PauliWord(letters.into_boxed_slice()))
    }
}
