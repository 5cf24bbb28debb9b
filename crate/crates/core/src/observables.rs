//! The momentum distribution: n_rpa(q) by three independent routes, the
//! exchange corrections, the inside-ball variant, and the continuum-limit
//! comparison formula.

use std::sync::Arc;

use dashmap::DashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{assemble_kernel, leading_kernel, KernelData, LeadingKernel};
use crate::lattice::{
    build_lens, excitation_gap, relevant_shifts_inside, relevant_shifts_outside, FermiBall,
    LensData, Momentum,
};
use crate::potential::PotentialSpec;
use crate::quad::{integrate, integrate_semi_infinite, QuadratureConfig};

/// Which computation path produced an RPA value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RpaRoute {
    /// Spectral route: 1/2 sum_l (cosh 2K(l) - 1)_{qq}.
    Matrix,
    /// Scalar t-integral per shift (rank-one resolvent reduction).
    Integral,
    /// Truncated even cosh series up to the stated order.
    Series(u32),
}

#[derive(Clone, Debug, Serialize)]
pub struct RpaResult {
    pub q: Momentum,
    pub inside_ball: bool,
    pub n_rpa: f64,
    pub route: RpaRoute,
    /// (shift, contribution) pairs; sums to n_rpa.
    pub per_shift_breakdown: Vec<(Momentum, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExchangeResult {
    pub q: Momentum,
    /// Double-shift sum with leading-kernel denominators.
    pub n_ex: f64,
    /// 1/4 of the first Duhamel exchange term, built from the assembled K.
    pub n_ex_m1: f64,
    pub difference: f64,
}

/// Shared context: ball + potential with memoized lenses and kernels.
/// All cached objects are immutable once built, so the maps are safe to hit
/// from a parallel sweep.
pub struct Model {
    ball: FermiBall,
    spec: PotentialSpec,
    lenses: DashMap<Momentum, Arc<LensData>>,
    kernels: DashMap<Momentum, Arc<KernelData>>,
    leading: DashMap<Momentum, Arc<LeadingKernel>>,
}

impl Model {
    pub fn new(ball: FermiBall, spec: PotentialSpec) -> Self {
        Model {
            ball,
            spec,
            lenses: DashMap::new(),
            kernels: DashMap::new(),
            leading: DashMap::new(),
        }
    }

    pub fn ball(&self) -> &FermiBall {
        &self.ball
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn lens(&self, shift: Momentum) -> Result<Arc<LensData>> {
        if let Some(l) = self.lenses.get(&shift) {
            return Ok(l.clone());
        }
        let lens = Arc::new(build_lens(&self.ball, shift)?);
        self.lenses.insert(shift, lens.clone());
        Ok(lens)
    }

    pub fn kernel(&self, shift: Momentum) -> Result<Arc<KernelData>> {
        if let Some(k) = self.kernels.get(&shift) {
            return Ok(k.clone());
        }
        let lens = self.lens(shift)?;
        let kd = Arc::new(assemble_kernel(&self.ball, &lens, &self.spec)?);
        self.kernels.insert(shift, kd.clone());
        Ok(kd)
    }

    pub fn leading_kernel(&self, shift: Momentum) -> Result<Arc<LeadingKernel>> {
        if let Some(k) = self.leading.get(&shift) {
            return Ok(k.clone());
        }
        let lens = self.lens(shift)?;
        let lk = Arc::new(leading_kernel(&self.ball, &lens, &self.spec)?);
        self.leading.insert(shift, lk.clone());
        Ok(lk)
    }

    /// Default |l|^2 cutoff for inside-ball shift sums: generous enough that
    /// the V(l)^2 tail beyond it is negligible at the tolerances used here.
    pub fn default_inside_shift_cap(&self) -> i64 {
        let kf_ceil = (self.ball.kf().ceil() as i64).max(1);
        (2 * kf_ceil + 3).pow(2)
    }

    fn require_outside(&self, q: Momentum) -> Result<()> {
        if self.ball.contains(q) {
            Err(Error::invalid(format!(
                "momentum {q} lies inside the Fermi ball; use the inside-ball variant"
            )))
        } else {
            Ok(())
        }
    }

    /// n_rpa(q) over an explicit shift list via the spectral route.
    pub fn n_rpa_matrix_over_shifts(&self, q: Momentum, shifts: &[Momentum]) -> Result<RpaResult> {
        let mut breakdown = Vec::new();
        let mut total = 0.0;
        for &l in shifts {
            let kd = self.kernel(l)?;
            if !kd.lens().contains(q) {
                continue;
            }
            let c = 0.5 * kd.cosh_diag_minus_one(q)?;
            total += c;
            breakdown.push((l, c));
        }
        Ok(RpaResult {
            q,
            inside_ball: false,
            n_rpa: total,
            route: RpaRoute::Matrix,
            per_shift_breakdown: breakdown,
        })
    }

    /// Spectral route for q outside the ball; sums over all relevant shifts.
    pub fn n_rpa_matrix(&self, q: Momentum) -> Result<RpaResult> {
        self.require_outside(q)?;
        self.n_rpa_matrix_over_shifts(q, &relevant_shifts_outside(&self.ball, q))
    }

    /// Per-shift scalar integrand of the t-integral route, already reduced to
    /// rank one: the denominator is evaluated in O(|L_l|) per node.
    fn rpa_shift_integral(
        &self,
        lens: &LensData,
        g: f64,
        lambda_q: f64,
        cfg: &QuadratureConfig,
        context: &str,
    ) -> Result<f64> {
        if g == 0.0 {
            return Ok(0.0);
        }
        let lambdas: Vec<f64> = lens.lambdas().iter().map(|l| l.to_f64()).collect();
        let lq2 = lambda_q * lambda_q;
        let value = integrate_semi_infinite(
            |t| {
                let t2 = t * t;
                let denom_sum: f64 = lambdas.iter().map(|&l| l / (t2 + l * l)).sum();
                let d = t2 + lq2;
                g * (t2 - lq2) / (d * d) / (1.0 + 2.0 * g * denom_sum)
            },
            cfg,
            context,
        )?;
        Ok(value / std::f64::consts::PI)
    }

    /// Integral route over an explicit shift list.
    pub fn n_rpa_integral_over_shifts(
        &self,
        q: Momentum,
        shifts: &[Momentum],
        cfg: &QuadratureConfig,
    ) -> Result<RpaResult> {
        let mut breakdown = Vec::new();
        let mut total = 0.0;
        for &l in shifts {
            let lens = self.lens(l)?;
            let Some(lambda_q) = lens.lambda_of(q) else {
                continue;
            };
            let g = crate::kernel::coupling_g(&self.ball, &self.spec, l)?;
            let c = self.rpa_shift_integral(
                &lens,
                g,
                lambda_q.to_f64(),
                cfg,
                &format!("n_rpa integral at q={q}, shift={l}"),
            )?;
            total += c;
            breakdown.push((l, c));
        }
        Ok(RpaResult {
            q,
            inside_ball: false,
            n_rpa: total,
            route: RpaRoute::Integral,
            per_shift_breakdown: breakdown,
        })
    }

    /// t-integral route for q outside the ball.
    pub fn n_rpa_integral(&self, q: Momentum, cfg: &QuadratureConfig) -> Result<RpaResult> {
        self.require_outside(q)?;
        self.n_rpa_integral_over_shifts(q, &relevant_shifts_outside(&self.ball, q), cfg)
    }

    /// Truncated even cosh series up to order n (n even, >= 2); monotone
    /// nondecreasing in n and bounded by the spectral route.
    pub fn n_rpa_series(&self, q: Momentum, n: u32) -> Result<RpaResult> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "series order must be even and >= 2, got {n}"
            )));
        }
        self.require_outside(q)?;
        let mut breakdown = Vec::new();
        let mut total = 0.0;
        for l in relevant_shifts_outside(&self.ball, q) {
            let kd = self.kernel(l)?;
            if !kd.lens().contains(q) {
                continue;
            }
            let mut c = 0.0;
            let mut fact = 2.0; // 2!
            for m in (2..=n).step_by(2) {
                c += kd.matrix_power_diag(m, q)? / fact;
                fact *= ((m + 1) * (m + 2)) as f64;
            }
            c *= 0.5;
            total += c;
            breakdown.push((l, c));
        }
        Ok(RpaResult {
            q,
            inside_ball: false,
            n_rpa: total,
            route: RpaRoute::Series(n),
            per_shift_breakdown: breakdown,
        })
    }

    /// Inside-ball n_rpa via the shifted-index formula: the lens membership is
    /// tested at q + l and the diagonal is taken there. The shift sum is
    /// truncated at |l|^2 <= shift_norm2_cap (it has no finite support).
    pub fn n_rpa_inside_matrix(&self, q: Momentum, shift_norm2_cap: i64) -> Result<RpaResult> {
        if !self.ball.contains(q) {
            return Err(Error::invalid(format!("momentum {q} is outside the ball")));
        }
        let mut breakdown = Vec::new();
        let mut total = 0.0;
        for l in relevant_shifts_inside(&self.ball, q, shift_norm2_cap) {
            let kd = self.kernel(l)?;
            if !kd.lens().contains(q + l) {
                continue;
            }
            let c = 0.5 * kd.cosh_diag_minus_one(q + l)?;
            total += c;
            breakdown.push((l, c));
        }
        Ok(RpaResult {
            q,
            inside_ball: true,
            n_rpa: total,
            route: RpaRoute::Matrix,
            per_shift_breakdown: breakdown,
        })
    }

    /// Exchange terms over an explicit shift list (both shifts restricted).
    pub fn n_exchange_over_shifts(
        &self,
        q: Momentum,
        shifts: &[Momentum],
    ) -> Result<ExchangeResult> {
        self.require_outside(q)?;
        let mut n_ex = 0.0;
        let mut n_ex_m1 = 0.0;
        for &l in shifts {
            let lens_l = self.lens(l)?;
            if !lens_l.contains(q) {
                continue;
            }
            for &l1 in shifts {
                let lens_l1 = self.lens(l1)?;
                if !lens_l1.contains(q) {
                    continue;
                }
                // the partner point shared by all four membership indicators
                let s = l + l1 - q;
                if !lens_l.contains(s) || !lens_l1.contains(s) {
                    continue;
                }
                let lead_l = self.leading_kernel(l)?;
                let lead_l1 = self.leading_kernel(l1)?;
                n_ex += lead_l.entry(q, s).unwrap() * lead_l1.entry(q, s).unwrap();
                let k_l = self.kernel(l)?;
                let k_l1 = self.kernel(l1)?;
                n_ex_m1 += k_l.entry(q, s).unwrap() * k_l1.entry(q, s).unwrap();
            }
        }
        Ok(ExchangeResult {
            q,
            n_ex,
            n_ex_m1,
            difference: n_ex - n_ex_m1,
        })
    }

    /// Exchange contribution n_ex(q) (leading-kernel denominators) and the
    /// first Duhamel exchange term n_ex_m1 = n_ex1(q)/4 (assembled K). The
    /// double shift sum is enumerated from the membership constraints, never
    /// by scanning an infinite box.
    pub fn n_exchange(&self, q: Momentum) -> Result<ExchangeResult> {
        self.require_outside(q)?;
        self.n_exchange_over_shifts(q, &relevant_shifts_outside(&self.ball, q))
    }

    /// Full model momentum distribution, dispatching on ball membership.
    /// Inside the ball the literal shifted-index formula is used (not the sum
    /// rule). The exchange term is a depletion of the RPA value: the exact
    /// Fock-space contraction pairs the two pair-creation orderings with an
    /// odd fermionic transposition, so the cross term is subtracted.
    /// The result must land in [-1e-9, 1+1e-9]; anything else signals a
    /// kernel or quadrature defect and errors out rather than clamping.
    pub fn momentum_distribution(
        &self,
        q: Momentum,
        include_exchange: bool,
        inside_norm2_cap: Option<i64>,
    ) -> Result<f64> {
        let value = if self.ball.contains(q) {
            let cap = inside_norm2_cap.unwrap_or_else(|| self.default_inside_shift_cap());
            let rpa = self.n_rpa_inside_matrix(q, cap)?;
            // the exchange indicator set is empty for q inside the ball
            1.0 - rpa.n_rpa
        } else {
            let rpa = self.n_rpa_matrix(q)?;
            let ex = if include_exchange {
                self.n_exchange(q)?.n_ex
            } else {
                0.0
            };
            rpa.n_rpa - ex
        };
        let eps = 1e-9;
        if !(value >= -eps && value <= 1.0 + eps) {
            return Err(Error::RangeViolation {
                value,
                lo: -eps,
                hi: 1.0 + eps,
                context: format!("momentum distribution at q={q}"),
            });
        }
        Ok(value)
    }

    /// e(q) as a float, convenience for output tables.
    pub fn gap(&self, q: Momentum) -> f64 {
        excitation_gap(&self.ball, q).to_f64()
    }
}

/// Screening factor of the continuum formula: Q(mu) = V (2pi)^-2 (1 - mu arctan(1/mu)).
pub fn continuum_screening(v_hat: f64, mu: f64) -> f64 {
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    v_hat / four_pi2 * (1.0 - mu * (1.0 / mu).atan())
}

/// Continuum-limit n_rpa for a radial potential at |q| = q_radius > k_F.
///
/// The angular reduction leaves a triple integral over (|l|, cos-angle, mu);
/// the stated direction only fixes the geometry and drops out for radial V.
/// The inner mu-integral is evaluated in the subtracted form (the unscreened
/// integrand integrates to zero exactly), which removes the cancellation near
/// grazing angles.
pub fn n_rpa_continuum(
    spec: &PotentialSpec,
    kf: f64,
    q_direction: [f64; 3],
    q_radius: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let norm = (q_direction[0].powi(2) + q_direction[1].powi(2) + q_direction[2].powi(2)).sqrt();
    if !(norm > 0.0) || ((norm - 1.0).abs() > 1e-9) {
        return Err(Error::invalid("q_direction must be a unit vector"));
    }
    if !(q_radius > kf) {
        return Err(Error::invalid(format!(
            "q_radius ({q_radius}) must exceed k_F ({kf})"
        )));
    }
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

    // inner integral over mu at fixed |cos| = c and potential value v
    let inner = |c: f64, v: f64, cfg: &QuadratureConfig| -> Result<f64> {
        if v == 0.0 {
            return Ok(0.0);
        }
        let q0 = v / four_pi2; // screening at mu = 0
        let c2 = c * c;
        integrate_semi_infinite(
            |mu| {
                let m2 = mu * mu;
                let d = m2 + c2;
                let base = (m2 - c2) / (d * d);
                let q = continuum_screening(v, mu);
                base * (1.0 / (1.0 + q) - 1.0 / (1.0 + q0))
            },
            cfg,
            "continuum inner mu integral",
        )
    };

    let mid_cfg = QuadratureConfig {
        abs_tol: cfg.abs_tol.max(1e-13),
        rel_tol: cfg.rel_tol,
        max_subdivisions: cfg.max_subdivisions,
    };
    let inner_cfg = QuadratureConfig {
        abs_tol: (0.1 * cfg.abs_tol).max(1e-14),
        rel_tol: 0.1 * cfg.rel_tol,
        max_subdivisions: cfg.max_subdivisions,
    };

    // |l| range allowed by the lens indicator |q - l| <= k_F
    let (l_lo, l_hi) = (q_radius - kf, q_radius + kf);
    let mut outer_err: Option<Error> = None;
    let outer = integrate(
        |l_mag| {
            if l_mag <= 0.0 {
                return 0.0;
            }
            let v = match spec.evaluate_radial(l_mag) {
                Ok(v) => v,
                Err(e) => {
                    outer_err.get_or_insert(e);
                    return 0.0;
                }
            };
            // cos-angle lower bound from |q - l| <= k_F
            let mu_min =
                ((q_radius * q_radius + l_mag * l_mag - kf * kf) / (2.0 * q_radius * l_mag))
                    .clamp(-1.0, 1.0);
            let angular = integrate(
                |mu_p| match inner(mu_p.abs().max(1e-12), v, &inner_cfg) {
                    Ok(x) => x,
                    Err(e) => {
                        outer_err.get_or_insert(e);
                        0.0
                    }
                },
                mu_min,
                1.0,
                &mid_cfg,
                "continuum angular integral",
            );
            let angular = match angular {
                Ok(a) => a,
                Err(e) => {
                    outer_err.get_or_insert(e);
                    0.0
                }
            };
            l_mag * v * angular
        },
        l_lo,
        l_hi,
        cfg,
        "continuum radial integral",
    )?;
    if let Some(e) = outer_err {
        return Err(e);
    }
    Ok(outer / (kf * kf * 8.0 * std::f64::consts::PI.powi(3)))
}
