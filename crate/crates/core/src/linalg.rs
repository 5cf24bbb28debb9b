//! Small helpers for symmetric matrix functions via eigendecomposition.
//!
//! All matrices here are dense, symmetric and desk-scale (a few hundred rows
//! at most), so one eigendecomposition yields sqrt, log, exp and cosh at once.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Explicit symmetrization M <- (M + M^T)/2.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Jacobi drives the off-diagonal Frobenius norm down to a few ulps of the
/// matrix norm, which keeps the spectral route accurate to ~1e-15 relative —
/// tight enough for the cross-route comparisons that this library lives on.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    // seed with the fast QR eigendecomposition, then polish with Jacobi:
    // the seeded similarity transform is nearly diagonal, so the expensive
    // sweeps reduce to one or two rounds of cleanup rotations
    let (mut a, mut v) = if n > 2 {
        let v0 = m.clone().symmetric_eigen().eigenvectors;
        let mut a0 = v0.transpose() * m * &v0;
        symmetrize(&mut a0);
        (a0, v0)
    } else {
        (m.clone(), DMatrix::identity(n, n))
    };
    if n > 1 {
        let scale: f64 = a.amax().max(f64::MIN_POSITIVE);
        // skip rotations below ~2 ulps of the matrix scale: rounding noise
        // regenerates off-diagonals at that level, so a tighter threshold
        // never converges and buys no accuracy
        let skip = 5e-16 * scale;
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= skip {
                        continue;
                    }
                    rotated = true;
                    let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    a[(p, p)] = app - t * apq;
                    a[(q, q)] = aqq + t * apq;
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        if k != p && k != q {
                            let akp = a[(k, p)];
                            let akq = a[(k, q)];
                            a[(k, p)] = c * akp - s * akq;
                            a[(p, k)] = a[(k, p)];
                            a[(k, q)] = s * akp + c * akq;
                            a[(q, k)] = a[(k, q)];
                        }
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
    }
    SymEigen {
        values: DVector::from_fn(n, |i, _| a[(i, i)]),
        vectors: v,
    }
}

impl SymEigen {
    /// V f(D) V^T, symmetrized.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = f(self.values[i]);
        }
        let mut out = &self.vectors * d * self.vectors.transpose();
        symmetrize(&mut out);
        out
    }

    /// Diagonal element (f(M))_{qq} without forming the full matrix.
    pub fn apply_diag(&self, q: usize, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.values.len() {
            let v = self.vectors[(q, i)];
            s += f(self.values[i]) * v * v;
        }
        s
    }
}

/// V f(D) V^T for a symmetric matrix; errors if any eigenvalue leaves `domain`.
pub fn spectral_map(
    m: &DMatrix<f64>,
    domain: impl Fn(f64) -> bool,
    f: impl Fn(f64) -> f64,
    what: &str,
) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m);
    for &ev in eig.values.iter() {
        if !domain(ev) {
            return Err(Error::domain(format!(
                "{what}: eigenvalue {ev} outside function domain"
            )));
        }
    }
    Ok(eig.apply(f))
}

/// Max absolute entry of the difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_sqrt_squares_back() {
        let mut m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 5.0]);
        symmetrize(&mut m);
        let s = spectral_map(&m, |x| x > 0.0, |x| x.sqrt(), "sqrt").unwrap();
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-12);
    }

    #[test]
    fn spectral_log_rejects_nonpositive() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(spectral_map(&m, |x| x > 0.0, |x| x.ln(), "log").is_err());
    }

    #[test]
    fn apply_diag_matches_full() {
        let mut m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, 0.0, 0.1, 0.0, 2.5]);
        symmetrize(&mut m);
        let eig = sym_eigen(&m);
        let full = eig.apply(|x| x.exp());
        for q in 0..3 {
            assert!((full[(q, q)] - eig.apply_diag(q, |x| x.exp())).abs() < 1e-13);
        }
    }
}
