//! Per-lens operators: h(l), the rank-one P(l), and the Bogoliubov kernel
//!
//!   K(l) = -1/2 log( h^{-1/2} ( h^{1/2} (h + 2P) h^{1/2} )^{1/2} h^{-1/2} )
//!
//! assembled by symmetric eigendecomposition with explicit re-symmetrization.
//! With h = diag(lambda) and P = g |1><1|, the inner matrix is
//! diag(lambda^2) + 2g |w><w| with w_r = sqrt(g lambda_r)... up to the shared
//! factor of g; see `assemble_kernel`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{FermiBall, LensData, Momentum};
use crate::linalg::{spectral_map, sym_eigen, symmetrize};
use crate::potential::PotentialSpec;

const TWO_PI_CUBED: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI;

/// g_l = k_F^{-1} V(l) / (2 (2 pi)^3). k_F is the exact sqrt(shell_cap) of the
/// ball, not the large-N asymptotic.
pub fn coupling_g(ball: &FermiBall, spec: &PotentialSpec, shift: Momentum) -> Result<f64> {
    let v = spec.evaluate(shift)?;
    if !v.is_finite() {
        return Err(Error::domain(format!("V({shift}) is not finite")));
    }
    if ball.shell_cap() == 0 {
        return Err(Error::domain(
            "coupling g undefined for shell_cap = 0 (k_F = 0)",
        ));
    }
    Ok(v / (ball.kf() * 2.0 * TWO_PI_CUBED))
}

/// Assembled kernel for one shift: the lens, the scalar coupling g, and the
/// dense symmetric K matrix indexed by the lens point order.
#[derive(Clone, Debug)]
pub struct KernelData {
    shift: Momentum,
    lens: LensData,
    g: f64,
    k: DMatrix<f64>,
}

impl KernelData {
    pub fn shift(&self) -> Momentum {
        self.shift
    }

    pub fn lens(&self) -> &LensData {
        &self.lens
    }

    /// g_l = k_F^{-1} V(l) / (2 (2 pi)^3).
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Entries of the constant vector v (P = |v><v|).
    pub fn v_entry(&self) -> f64 {
        self.g.sqrt()
    }

    /// Diagonal of h(l) as floats.
    pub fn h_diag(&self) -> Vec<f64> {
        self.lens.lambdas().iter().map(|l| l.to_f64()).collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn is_empty(&self) -> bool {
        self.lens.is_empty()
    }

    pub fn entry(&self, r: Momentum, s: Momentum) -> Option<f64> {
        let (i, j) = (self.lens.index_of(r)?, self.lens.index_of(s)?);
        Some(self.k[(i, j)])
    }

    /// ((2K)^m)_{qq} by repeated symmetric multiplication.
    pub fn matrix_power_diag(&self, m: u32, q: Momentum) -> Result<f64> {
        let idx = self
            .lens
            .index_of(q)
            .ok_or_else(|| Error::invalid(format!("momentum {q} not in lens of shift {}", self.shift)))?;
        if m == 0 {
            return Ok(1.0);
        }
        let two_k = 2.0 * &self.k;
        let mut col = two_k.column(idx).clone_owned();
        for _ in 1..m {
            col = &two_k * col;
        }
        Ok(col[idx])
    }

    /// ((2K)^m)_{qq} through the eigendecomposition; must agree with the
    /// multiplicative route.
    pub fn matrix_power_diag_spectral(&self, m: u32, q: Momentum) -> Result<f64> {
        let idx = self
            .lens
            .index_of(q)
            .ok_or_else(|| Error::invalid(format!("momentum {q} not in lens of shift {}", self.shift)))?;
        let eig = sym_eigen(&self.k);
        Ok(eig.apply_diag(idx, |mu| (2.0 * mu).powi(m as i32)))
    }

    /// (cosh(2K) - 1)_{qq}; nonnegative since cosh of a real spectrum is >= 1.
    pub fn cosh_diag_minus_one(&self, q: Momentum) -> Result<f64> {
        let idx = self
            .lens
            .index_of(q)
            .ok_or_else(|| Error::invalid(format!("momentum {q} not in lens of shift {}", self.shift)))?;
        let eig = sym_eigen(&self.k);
        let val = eig.apply_diag(idx, |mu| (2.0 * mu).cosh() - 1.0);
        Ok(val.max(0.0))
    }
}

/// Assemble K(l) for one lens. An empty lens yields an empty KernelData that
/// every downstream sum skips explicitly (it is represented so audits can
/// count it).
pub fn assemble_kernel(
    ball: &FermiBall,
    lens: &LensData,
    spec: &PotentialSpec,
) -> Result<KernelData> {
    let shift = lens.shift();
    if lens.is_empty() {
        return Ok(KernelData {
            shift,
            lens: lens.clone(),
            g: 0.0,
            k: DMatrix::zeros(0, 0),
        });
    }
    let g = coupling_g(ball, spec, shift)?;
    let n = lens.len();
    let lambdas: Vec<f64> = lens.lambdas().iter().map(|l| l.to_f64()).collect();

    // inner = h^{1/2} (h + 2P) h^{1/2} = diag(lambda^2) + 2g sqrt(l_i l_j)
    let mut inner = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut x = 2.0 * g * (lambdas[i] * lambdas[j]).sqrt();
            if i == j {
                x += lambdas[i] * lambdas[i];
            }
            inner[(i, j)] = x;
        }
    }
    let inner_sqrt = spectral_map(&inner, |x| x > 0.0, |x| x.sqrt(), "inner sqrt")?;

    // a = h^{-1/2} inner^{1/2} h^{-1/2}, still SPD
    let mut a = inner_sqrt;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] /= (lambdas[i] * lambdas[j]).sqrt();
        }
    }
    symmetrize(&mut a);

    let mut k = spectral_map(&a, |x| x > 0.0, |x| -0.5 * x.ln(), "kernel log")?;
    symmetrize(&mut k);

    Ok(KernelData {
        shift,
        lens: lens.clone(),
        g,
        k,
    })
}

/// First-order kernel from the extraction lemma:
/// entries k_F^{-1} V(l) / (2 (2 pi)^3 (lambda_r + lambda_s)).
#[derive(Clone, Debug)]
pub struct LeadingKernel {
    shift: Momentum,
    lens: LensData,
    matrix: DMatrix<f64>,
}

impl LeadingKernel {
    pub fn shift(&self) -> Momentum {
        self.shift
    }

    pub fn lens(&self) -> &LensData {
        &self.lens
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, r: Momentum, s: Momentum) -> Option<f64> {
        let (i, j) = (self.lens.index_of(r)?, self.lens.index_of(s)?);
        Some(self.matrix[(i, j)])
    }
}

pub fn leading_kernel(
    ball: &FermiBall,
    lens: &LensData,
    spec: &PotentialSpec,
) -> Result<LeadingKernel> {
    let shift = lens.shift();
    if lens.is_empty() {
        return Ok(LeadingKernel {
            shift,
            lens: lens.clone(),
            matrix: DMatrix::zeros(0, 0),
        });
    }
    let g = coupling_g(ball, spec, shift)?;
    let n = lens.len();
    let lambdas: Vec<f64> = lens.lambdas().iter().map(|l| l.to_f64()).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = g / (lambdas[i] + lambdas[j]);
        }
    }
    Ok(LeadingKernel {
        shift,
        lens: lens.clone(),
        matrix: m,
    })
}
