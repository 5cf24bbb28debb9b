//! Interaction potential families V(l) in Fourier space and finite-range
//! verification of the decay hypotheses they are declared to satisfy.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{shifts_up_to, Momentum};

/// Declared tail behavior of a potential; infinite-sum hypotheses cannot be
/// decided by a finite scan, so the class records what the family guarantees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DecayClass {
    /// V(l) <= C |l|^-2 but not summable over Z^3.
    CoulombLike,
    /// sum_l V(l) < infinity.
    Summable,
    /// sum_l V(l)^2 |l|^alpha < infinity for the stated alpha.
    AlphaSquareSummable(f64),
}

#[derive(Clone)]
enum Family {
    Coulomb { g: f64 },
    Yukawa { g: f64, decay_power: f64 },
    Zero,
    Custom {
        name: String,
        f: Arc<dyn Fn(Momentum) -> f64 + Send + Sync>,
    },
}

/// An interaction potential: evaluator, declared decay class, and a global
/// coupling scale used by sweep tests.
#[derive(Clone)]
pub struct PotentialSpec {
    family: Family,
    pub decay_class: DecayClass,
    pub coupling_scale: f64,
}

impl PotentialSpec {
    /// V(l) = g / |l|^2.
    pub fn coulomb(g: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::invalid(format!("coulomb coupling must be positive, got {g}")));
        }
        Ok(PotentialSpec {
            family: Family::Coulomb { g },
            decay_class: DecayClass::CoulombLike,
            coupling_scale: 1.0,
        })
    }

    /// V(l) = g |l|^(-2 decay_power); summable over Z^3 for decay_power > 3/2.
    pub fn yukawa_like(g: f64, decay_power: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::invalid(format!("yukawa coupling must be positive, got {g}")));
        }
        if !(decay_power > 1.5) {
            return Err(Error::invalid(format!(
                "yukawa decay_power must exceed 3/2, got {decay_power}"
            )));
        }
        Ok(PotentialSpec {
            family: Family::Yukawa { g, decay_power },
            decay_class: DecayClass::Summable,
            coupling_scale: 1.0,
        })
    }

    /// The trivial potential V = 0 (free gas).
    pub fn zero() -> Self {
        PotentialSpec {
            family: Family::Zero,
            decay_class: DecayClass::Summable,
            coupling_scale: 1.0,
        }
    }

    /// Arbitrary evaluator, for tests and injected-violation checks.
    pub fn custom(
        name: impl Into<String>,
        decay_class: DecayClass,
        f: impl Fn(Momentum) -> f64 + Send + Sync + 'static,
    ) -> Self {
        PotentialSpec {
            family: Family::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            decay_class,
            coupling_scale: 1.0,
        }
    }

    /// Same potential with the coupling scale replaced.
    pub fn with_scale(&self, scale: f64) -> Self {
        let mut s = self.clone();
        s.coupling_scale = scale;
        s
    }

    /// V(l) for l != 0, including the coupling scale.
    pub fn evaluate(&self, l: Momentum) -> Result<f64> {
        if l.is_zero() {
            return Err(Error::invalid("potential evaluated at l = 0"));
        }
        let base = match &self.family {
            Family::Coulomb { g } => g / l.norm2() as f64,
            Family::Yukawa { g, decay_power } => g * (l.norm2() as f64).powf(-decay_power),
            Family::Zero => 0.0,
            Family::Custom { f, .. } => f(l),
        };
        Ok(self.coupling_scale * base)
    }

    /// Radial evaluation at a real |l| > 0, for the continuum-limit formula.
    /// Only the built-in radial families support this.
    pub fn evaluate_radial(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("radial argument must be positive, got {r}")));
        }
        let base = match &self.family {
            Family::Coulomb { g } => g / (r * r),
            Family::Yukawa { g, decay_power } => g * (r * r).powf(-decay_power),
            Family::Zero => 0.0,
            Family::Custom { name, .. } => {
                return Err(Error::invalid(format!(
                    "custom potential '{name}' has no radial continuation"
                )))
            }
        };
        Ok(self.coupling_scale * base)
    }

    /// Stable textual descriptor, used for cache keys and output metadata.
    pub fn descriptor(&self) -> String {
        let family = match &self.family {
            Family::Coulomb { g } => format!("coulomb:g={g}"),
            Family::Yukawa { g, decay_power } => format!("yukawa:g={g},p={decay_power}"),
            Family::Zero => "zero".to_string(),
            Family::Custom { name, .. } => format!("custom:{name}"),
        };
        format!("{family};scale={}", self.coupling_scale)
    }

    /// 64-bit fingerprint of the descriptor.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.descriptor().hash(&mut h);
        h.finish()
    }

    /// Supremum of admissible alpha with sum_l V(l)^2 |l|^alpha < infinity,
    /// where known in closed form; capped at 2 (the range the error analysis
    /// uses).
    pub fn alpha_supremum(&self) -> Option<f64> {
        match &self.family {
            // V^2 |l|^a ~ |l|^(a-4): summable for a < 1
            Family::Coulomb { .. } => Some(1.0),
            // V^2 |l|^a ~ |l|^(a-4p): summable for a < 4p - 3
            Family::Yukawa { decay_power, .. } => Some((4.0 * decay_power - 3.0).min(2.0)),
            Family::Zero => Some(2.0),
            Family::Custom { .. } => match self.decay_class {
                DecayClass::AlphaSquareSummable(a) => Some(a.min(2.0)),
                _ => None,
            },
        }
    }
}

impl std::fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PotentialSpec({})", self.descriptor())
    }
}

/// One exhaustively checked finite-range property.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub violations: Vec<Momentum>,
}

/// Outcome of `verify_hypotheses`: finite-range checks are measured, tail
/// verdicts are taken from the declared decay class. The two are reported
/// separately on purpose.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub range_cap: i64,
    /// V(l) >= 0 on the scanned range.
    pub nonnegative: CheckResult,
    /// V(l) = V(-l) on the scanned range.
    pub even: CheckResult,
    /// V nonincreasing in |l| on the scanned range (checked in |l|; the
    /// alternative reading along rays is strictly weaker for radial families).
    pub radial_decreasing: CheckResult,
    /// Declared: V(l) <= C |l|^-2 with the scanned range consistent.
    pub coulomb_like: bool,
    /// Declared: sum_l V(l) < infinity.
    pub summable: bool,
    /// Declared supremum of admissible alpha, if known.
    pub alpha_supremum: Option<f64>,
}

impl HypothesisReport {
    pub fn all_checked_passed(&self) -> bool {
        self.nonnegative.passed && self.even.passed && self.radial_decreasing.passed
    }
}

/// Scan |l| <= range_cap exhaustively for the finite-range hypotheses and
/// combine with the declared tail class. Violations are reported, not thrown.
pub fn verify_hypotheses(spec: &PotentialSpec, range_cap: i64) -> Result<HypothesisReport> {
    if range_cap < 1 {
        return Err(Error::invalid(format!("range_cap must be >= 1, got {range_cap}")));
    }
    let shifts = shifts_up_to(range_cap * range_cap);
    let mut nonneg = CheckResult { passed: true, violations: vec![] };
    let mut even = CheckResult { passed: true, violations: vec![] };
    let mut decreasing = CheckResult { passed: true, violations: vec![] };

    // group values by norm^2 for the monotonicity check
    let mut by_norm2: Vec<(i64, f64, f64)> = Vec::new(); // (norm2, min, max)
    for &l in &shifts {
        let v = spec.evaluate(l)?;
        if !v.is_finite() {
            return Err(Error::domain(format!("V({l}) is not finite")));
        }
        if v < 0.0 {
            nonneg.passed = false;
            nonneg.violations.push(l);
        }
        let vm = spec.evaluate(-l)?;
        if (v - vm).abs() > 0.0 && l.sort_key() < (-l).sort_key() {
            even.passed = false;
            even.violations.push(l);
        }
        match by_norm2.last_mut() {
            Some((n2, lo, hi)) if *n2 == l.norm2() => {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
            _ => by_norm2.push((l.norm2(), v, v)),
        }
    }
    for w in by_norm2.windows(2) {
        let (_, lo_prev, _) = w[0];
        let (n2, _, hi_next) = w[1];
        if hi_next > lo_prev {
            decreasing.passed = false;
            // report a representative point on the offending shell
            if let Some(&l) = shifts.iter().find(|l| l.norm2() == n2) {
                decreasing.violations.push(l);
            }
        }
    }

    // coulomb-like: |l|^2 V(l) bounded by its value at |l| = 1 on the range
    let c0 = spec.evaluate(Momentum::new(1, 0, 0))?;
    let mut coulomb_like = true;
    for &l in &shifts {
        let v = spec.evaluate(l)?;
        if v * l.norm2() as f64 > c0 * (1.0 + 1e-12) + 1e-300 {
            coulomb_like = false;
            break;
        }
    }

    let summable = matches!(spec.decay_class, DecayClass::Summable);

    Ok(HypothesisReport {
        range_cap,
        nonnegative: nonneg,
        even,
        radial_decreasing: decreasing,
        coulomb_like,
        summable,
        alpha_supremum: spec.alpha_supremum(),
    })
}
