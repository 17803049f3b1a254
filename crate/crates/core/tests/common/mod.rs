//! Independent numerical oracles used by the acceptance tests. Everything
//! here recomputes results along a different route than the library code it
//! checks: brute-force quadrature instead of closed forms, Schur-based
//! matrix logarithms instead of products of exponentials, and
//! exponential-propagation signal scans instead of eigenbasis synthesis.

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use spindd::algebra::{Axis, DenseOperator, NumericOp};
use spindd::dynamics::{initial_state, InitialState};
use spindd::system::SpinSystem;

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Principal matrix logarithm of a unitary via its Schur form. A unitary is
/// normal, so the Schur triangle is diagonal up to rounding; the
/// reconstruction defect is asserted to stay tiny.
pub fn unitary_log(u: &DenseOperator) -> DMatrix<Complex64> {
    let m = u.matrix().clone();
    let dim = m.nrows();
    let schur = m.schur();
    let (q, t) = schur.unpack();
    let mut log_diag = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        let lam: Complex64 = t[(k, k)];
        assert!(
            (lam.norm() - 1.0).abs() < 1e-10,
            "eigenvalue off the unit circle: |lam| = {}",
            lam.norm()
        );
        log_diag[(k, k)] = Complex::new(0.0, lam.arg());
    }
    let log_u = &q * log_diag * q.adjoint();
    // Guard against a badly conditioned Schur basis.
    let mut recon = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        recon[(k, k)] = t[(k, k)];
    }
    let defect = (&q * recon * q.adjoint() - u.matrix()).norm();
    assert!(defect < 1e-10, "Schur reconstruction defect {defect}");
    log_u
}

/// Brute-force time-ordered double integral
/// `D = int_0^T dt2 int_0^t2 dt1 [H(t2), H(t1)]`
/// for a piecewise-constant Hamiltonian given as `(duration, H_k)` pieces.
/// Each piece is split into `cells_per_segment` uniform cells and the
/// commutator is summed over all ordered cell pairs.
pub fn ordered_commutator_integral(
    pieces: &[(f64, DMatrix<Complex64>)],
    cells_per_segment: usize,
) -> DMatrix<Complex64> {
    assert!(cells_per_segment > 0);
    let mut cells: Vec<(f64, &DMatrix<Complex64>)> = Vec::new();
    for (duration, h) in pieces {
        let dt = duration / cells_per_segment as f64;
        for _ in 0..cells_per_segment {
            cells.push((dt, h));
        }
    }
    let dim = pieces[0].1.nrows();
    let mut total = DMatrix::<Complex64>::zeros(dim, dim);
    for (i2, (dt2, h2)) in cells.iter().enumerate() {
        for (dt1, h1) in cells.iter().take(i2) {
            let comm = *h2 * *h1 - *h1 * *h2;
            total += comm * Complex64::new(dt1 * dt2, 0.0);
        }
    }
    total
}

/// Free-induction decay time recomputed by propagating the state with matrix
/// exponentials and scanning for the first crossing of `1/e`, independent of
/// the library's eigenbasis synthesis. Returns `None` when the signal stays
/// above threshold over the horizon.
pub fn fid_decay_oracle(sys: &SpinSystem, horizon: f64, n_scan: usize) -> Option<f64> {
    let n = sys.n_spins();
    let h = sys.hamiltonian_numeric().to_dense().expect("numeric coefficients");
    let rho0 = initial_state(&InitialState::AllTransverseX, n).expect("valid state");
    let ix = NumericOp::total_spin(Axis::X, n).to_dense().expect("numeric coefficients");
    let s0 = rho0.operator().mul(&ix).expect("dims match").trace().re;
    assert!(s0 > 0.0);
    let signal = |t: f64| -> f64 {
        let u = h.expm_hermitian(t).expect("hermitian");
        let rho_t = u.mul(rho0.operator()).expect("dims").mul(&u.adjoint()).expect("dims");
        rho_t.mul(&ix).expect("dims").trace().re / s0
    };
    let threshold = (-1.0f64).exp();
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=n_scan {
        let t = horizon * k as f64 / n_scan as f64;
        if signal(t) <= threshold {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if signal(mid) <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
