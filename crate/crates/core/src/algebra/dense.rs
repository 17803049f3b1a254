//! Dense matrices in the computational basis, with the Hermitian matrix
//! exponential used to build propagators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::letter::Letter;
use super::opsum::NumericOp;
use super::word::PauliWord;
use super::AlgebraError;

/// Max |H - H^dag| entry accepted before a matrix is rejected as
/// non-Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Square complex matrix of dimension `2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    mat: DMatrix<Complex64>,
}

impl DenseOperator {
    /// Wraps a square matrix whose dimension is a power of two.
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self, AlgebraError> {
        if mat.nrows() != mat.ncols() {
            return Err(AlgebraError::DimMismatch { left: mat.nrows(), right: mat.ncols() });
        }
        let dim = mat.nrows();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(AlgebraError::NotPowerOfTwo { dim });
        }
        Ok(DenseOperator { mat })
    }

    pub fn identity(n_spins: usize) -> Self {
        let dim = 1usize << n_spins;
        DenseOperator { mat: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.mat[(row, col)]
    }

    fn check_dim(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.dim() != other.dim() {
            return Err(AlgebraError::DimMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_dim(other)?;
        Ok(DenseOperator { mat: &self.mat * &other.mat })
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_dim(other)?;
        Ok(DenseOperator { mat: &self.mat + &other.mat })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_dim(other)?;
        Ok(DenseOperator { mat: &self.mat - &other.mat })
    }

    pub fn scale(&self, z: Complex64) -> Self {
        DenseOperator { mat: self.mat.map(|e| e * z) }
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator { mat: self.mat.adjoint() }
    }

    /// Tensor product, `self` acting on the more significant factor.
    pub fn kron(&self, other: &Self) -> Self {
        DenseOperator { mat: self.mat.kronecker(&other.mat) }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Binary-exponentiation matrix power.
    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = DenseOperator { mat: DMatrix::identity(self.dim(), self.dim()) };
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base).expect("same dimension");
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).expect("same dimension");
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value, computed from the top eigenvalue of `A^dag A`.
    pub fn spectral_norm(&self) -> f64 {
        let gram = self.mat.adjoint() * &self.mat;
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        top.max(0.0).sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, AlgebraError> {
        self.check_dim(other)?;
        Ok((&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Max |H - H^dag| entry; zero for an exactly Hermitian matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Symmetrized copy `(A + A^dag)/2`, used to strip accumulated roundoff
    /// before eigendecomposition.
    pub fn hermitized(&self) -> Self {
        DenseOperator { mat: (&self.mat + self.mat.adjoint()).map(|z| z * 0.5) }
    }

    /// `exp(-i * H * t)` for Hermitian `H`, via eigendecomposition. The
    /// result is unitary to machine precision. Rejects matrices whose
    /// Hermiticity defect exceeds [`HERMITICITY_TOL`].
    pub fn expm_hermitian(&self, t: f64) -> Result<Self, AlgebraError> {
        if !t.is_finite() {
            return Err(AlgebraError::NonFinite { value: t });
        }
        let defect = self.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(AlgebraError::NotHermitian { defect });
        }
        let dim = self.dim();
        let eig = self.hermitized().mat.symmetric_eigen();
        // U = V e^{-i lambda t} V^dag
        let mut dvdag = eig.eigenvectors.adjoint();
        for (r, &lambda) in eig.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lambda * t);
            for c in 0..dim {
                dvdag[(r, c)] *= phase;
            }
        }
        Ok(DenseOperator { mat: eig.eigenvectors * dvdag })
    }

    /// Max |U^dag U - 1| entry.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.mat.adjoint() * &self.mat;
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..dim {
            for c in 0..dim {
                let expect = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                worst = worst.max((gram[(r, c)] - expect).norm());
            }
        }
        worst
    }

    /// Frobenius distance between `self` and `other` minimized over a global
    /// phase, `min_phi |U - e^{i phi} V|_F`; the optimum aligns `V` with the
    /// trace overlap `tr(V^dag U)`.
    ///
    /// Formed as an entrywise difference rather than via
    /// `sqrt(|U|^2 + |V|^2 - 2 |tr|)`, whose cancellation would floor the
    /// result near `sqrt(eps)` for nearly equal operators.
    pub fn frobenius_distance_mod_phase(&self, other: &Self) -> Result<f64, AlgebraError> {
        self.check_dim(other)?;
        let overlap = (other.mat.adjoint() * &self.mat).trace();
        let phase = if overlap.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            overlap / overlap.norm()
        };
        Ok((&self.mat - &other.mat * phase).norm())
    }

    /// Expansion in the Pauli-word basis: `c_w = tr(sigma_w A) / 2^n`.
    /// Exact zeros are dropped; callers prune float noise as needed.
    pub fn pauli_decompose(&self) -> NumericOp {
        let n = self.n_spins();
        let dim = self.dim();
        let norm = 1.0 / dim as f64;
        let mut terms = Vec::new();
        for code in 0..(4usize.pow(n as u32)) {
            let mut letters = Vec::with_capacity(n);
            let mut rest = code;
            for _ in 0..n {
                letters.push(Letter::ALL[rest % 4]);
                rest /= 4;
            }
            letters.reverse();
            let word = PauliWord::from_letters(letters);
            // tr(sigma_w A): sigma_w maps column j to row(j) with amp(j), so
            // the trace picks A[(j, row(j))] weighted by amp(j).
            let mut tr = Complex64::new(0.0, 0.0);
            for col in 0..dim {
                let (row, amp) = word_action(&word, col, n);
                tr += amp * self.mat[(col, row)];
            }
            let c = tr * norm;
            if c.re != 0.0 || c.im != 0.0 {
                terms.push((word, c));
            }
        }
        NumericOp::from_terms(n, terms).expect("word lengths match by construction")
    }
}

/// Action of a Pauli word on a basis column: `sigma_w |col> = amp |row>`.
pub(crate) fn word_action(word: &PauliWord, col: usize, n_spins: usize) -> (usize, Complex64) {
    let mut row = col;
    let mut amp = Complex64::new(1.0, 0.0);
    for (site, &letter) in word.letters().iter().enumerate() {
        let bit_pos = n_spins - 1 - site;
        let bit = (col >> bit_pos) & 1;
        match letter {
            Letter::E => {}
            Letter::X => row ^= 1 << bit_pos,
            Letter::Y => {
                row ^= 1 << bit_pos;
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
    (row, amp)
}
