//! Operator algebra on Pauli words with two interchangeable coefficient
//! backends: exact symbolic scalars and `Complex64` floating point.

mod dense;
mod exact;
mod letter;
mod opsum;
mod scalar;
mod word;

pub use dense::DenseOperator;
pub use exact::{Exact, GaussRational, Monomial};
pub use letter::{Letter, Phase};
pub use opsum::{Axis, CliffordRotation, NumericOp, OperatorSum, SymbolicOp};
pub use scalar::{Coeff, Sign};
pub use word::PauliWord;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("site index {site} out of range for {n_spins} spin(s)")]
    SiteOutOfRange { site: usize, n_spins: usize },

    #[error("operator size mismatch: {left} vs {right} spin(s)")]
    LengthMismatch { left: usize, right: usize },

    #[error("rotation angle {angle} is not a multiple of pi/2; exact conjugation is only defined for quarter turns")]
    UnsupportedAngle { angle: f64 },

    #[error("matrix dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("matrix dimension {dim} is not a power of two")]
    NotPowerOfTwo { dim: usize },

    #[error("matrix is not Hermitian: max |H - H^dag| entry is {defect:.3e}")]
    NotHermitian { defect: f64 },

    #[error("coefficient of {word} contains free symbols; a numeric value is required here")]
    NonNumeric { word: String },

    #[error("value {value} is not finite")]
    NonFinite { value: f64 },
}
