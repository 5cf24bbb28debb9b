//! Exact integer-lattice geometry: the Fermi ball, lenses and excitation
//! energies. Everything here is integer or half-integer arithmetic; floating
//! point enters only downstream in the numerical kernels.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A momentum on the lattice Z^3.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Momentum {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl Momentum {
    pub const ZERO: Momentum = Momentum { x: 0, y: 0, z: 0 };

    pub fn new(x: i64, y: i64, z: i64) -> Self {
        Momentum { x, y, z }
    }

    /// |k|^2 as an exact integer.
    pub fn norm2(&self) -> i64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn is_zero(&self) -> bool {
        *self == Momentum::ZERO
    }

    /// Canonical sort key: (norm^2, lexicographic).
    pub fn sort_key(&self) -> (i64, i64, i64, i64) {
        (self.norm2(), self.x, self.y, self.z)
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, rhs: Momentum) -> Momentum {
        Momentum::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, rhs: Momentum) -> Momentum {
        Momentum::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// An exact half-integer, stored as its numerator over 2.
///
/// Excitation energies lambda and the gap e(q) are half-integers; keeping them
/// exact removes rounding ambiguity from set membership and gap comparisons.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct HalfInt(pub i64);

impl HalfInt {
    pub fn from_numerator(num: i64) -> Self {
        HalfInt(num)
    }

    pub fn numerator(&self) -> i64 {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// The discrete Fermi ball B_F = { k in Z^3 : |k|^2 <= shell_cap }.
#[derive(Clone, Debug)]
pub struct FermiBall {
    shell_cap: i64,
    points: Vec<Momentum>,
    min_outside_norm2: i64,
}

impl FermiBall {
    /// Maximal admitted norm^2 (= floor(k_F^2)).
    pub fn shell_cap(&self) -> i64 {
        self.shell_cap
    }

    /// Ball points, sorted by (norm^2, lexicographic).
    pub fn points(&self) -> &[Momentum] {
        &self.points
    }

    /// Particle number N = |B_F|.
    pub fn n_particles(&self) -> usize {
        self.points.len()
    }

    /// Fermi momentum k_F = sqrt(shell_cap).
    pub fn kf(&self) -> f64 {
        (self.shell_cap as f64).sqrt()
    }

    /// Smallest norm^2 realized by a lattice point outside the ball.
    pub fn min_outside_norm2(&self) -> i64 {
        self.min_outside_norm2
    }

    pub fn contains(&self, q: Momentum) -> bool {
        q.norm2() <= self.shell_cap
    }
}

/// Whether some lattice point has norm^2 exactly `s`.
fn norm2_is_realized(s: i64) -> bool {
    // Legendre: only 4^a(8b+7) fail, but a direct scan is cheap and obvious.
    let r = (s as f64).sqrt() as i64 + 1;
    for x in 0..=r {
        let x2 = x * x;
        if x2 > s {
            break;
        }
        for y in x..=r {
            let xy2 = x2 + y * y;
            if xy2 > s {
                break;
            }
            let rem = s - xy2;
            let z = (rem as f64).sqrt() as i64;
            for zc in [z - 1, z, z + 1] {
                if zc >= y && zc * zc == rem {
                    return true;
                }
            }
        }
    }
    false
}

/// Build the Fermi ball for a given integer shell cap.
///
/// `shell_cap = 0` yields the single point (0,0,0) with N = 1.
pub fn build_fermi_ball(shell_cap: i64) -> Result<FermiBall> {
    if shell_cap < 0 {
        return Err(Error::invalid(format!(
            "shell_cap must be nonnegative, got {shell_cap}"
        )));
    }
    let r = (shell_cap as f64).sqrt() as i64 + 1;
    let mut points = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let p = Momentum::new(x, y, z);
                if p.norm2() <= shell_cap {
                    points.push(p);
                }
            }
        }
    }
    points.sort_by_key(|p| p.sort_key());

    let mut s = shell_cap + 1;
    while !norm2_is_realized(s) {
        s += 1;
    }

    Ok(FermiBall {
        shell_cap,
        points,
        min_outside_norm2: s,
    })
}

/// The lens L_l = B_F^c intersect (B_F + l) for a shift l != 0, with the excitation
/// energies lambda_{l,p} = (|p|^2 - |p-l|^2)/2 aligned to the point list.
#[derive(Clone, Debug)]
pub struct LensData {
    shift: Momentum,
    points: Vec<Momentum>,
    lambdas: Vec<HalfInt>,
    index_of: HashMap<Momentum, usize>,
}

impl LensData {
    pub fn shift(&self) -> Momentum {
        self.shift
    }

    pub fn points(&self) -> &[Momentum] {
        &self.points
    }

    pub fn lambdas(&self) -> &[HalfInt] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, p: Momentum) -> Option<usize> {
        self.index_of.get(&p).copied()
    }

    pub fn contains(&self, p: Momentum) -> bool {
        self.index_of.contains_key(&p)
    }

    pub fn lambda_of(&self, p: Momentum) -> Option<HalfInt> {
        self.index_of(p).map(|i| self.lambdas[i])
    }

    /// Synthetic lens for testing closed forms (points and energies given
    /// directly; no ball membership is implied).
    pub fn synthetic(shift: Momentum, points: Vec<Momentum>, lambdas: Vec<HalfInt>) -> Self {
        assert_eq!(points.len(), lambdas.len());
        let index_of = points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        LensData {
            shift,
            points,
            lambdas,
            index_of,
        }
    }
}

/// Build the lens for a nonzero shift. An empty lens is valid and contributes
/// nothing downstream.
pub fn build_lens(ball: &FermiBall, shift: Momentum) -> Result<LensData> {
    if shift.is_zero() {
        return Err(Error::invalid("lens shift must be nonzero"));
    }
    let mut points: Vec<Momentum> = ball
        .points()
        .iter()
        .map(|&k| k + shift)
        .filter(|p| !ball.contains(*p))
        .collect();
    points.sort_by_key(|p| p.sort_key());
    let lambdas = points
        .iter()
        .map(|p| HalfInt::from_numerator(p.norm2() - (*p - shift).norm2()))
        .collect();
    let index_of = points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    Ok(LensData {
        shift,
        points,
        lambdas,
        index_of,
    })
}

/// The gap e(q) = | |q|^2 - min_outside_norm2 + 1/2 |, always >= 1/2.
pub fn excitation_gap(ball: &FermiBall, q: Momentum) -> HalfInt {
    HalfInt::from_numerator((2 * q.norm2() - 2 * ball.min_outside_norm2() + 1).abs())
}

/// Shifts l with q in L_l, for q outside the ball: exactly { q - k : k in B_F }.
pub fn relevant_shifts_outside(ball: &FermiBall, q: Momentum) -> Vec<Momentum> {
    debug_assert!(!ball.contains(q));
    let mut shifts: Vec<Momentum> = ball
        .points()
        .iter()
        .map(|&k| q - k)
        .filter(|l| !l.is_zero())
        .collect();
    shifts.sort_by_key(|l| l.sort_key());
    shifts
}

/// Shifts l != 0 with q + l in L_l, for q inside the ball, restricted to
/// |l|^2 <= shift_norm2_cap.
///
/// The unrestricted set is infinite (any l moving q outside the ball
/// qualifies), so inside-ball evaluations always carry an explicit cutoff.
pub fn relevant_shifts_inside(ball: &FermiBall, q: Momentum, shift_norm2_cap: i64) -> Vec<Momentum> {
    debug_assert!(ball.contains(q));
    let r = (shift_norm2_cap as f64).sqrt() as i64 + 1;
    let mut shifts = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let l = Momentum::new(x, y, z);
                if l.is_zero() || l.norm2() > shift_norm2_cap {
                    continue;
                }
                if !ball.contains(q + l) {
                    shifts.push(l);
                }
            }
        }
    }
    shifts.sort_by_key(|l| l.sort_key());
    shifts
}

/// Dispatch on ball membership; inside-ball requires the explicit cutoff.
pub fn relevant_shifts(ball: &FermiBall, q: Momentum, inside_norm2_cap: i64) -> Vec<Momentum> {
    if ball.contains(q) {
        relevant_shifts_inside(ball, q, inside_norm2_cap)
    } else {
        relevant_shifts_outside(ball, q)
    }
}

/// All shifts l != 0 with |l|^2 <= norm2_cap, canonically ordered.
pub fn shifts_up_to(norm2_cap: i64) -> Vec<Momentum> {
    let r = (norm2_cap as f64).sqrt() as i64 + 1;
    let mut shifts = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let l = Momentum::new(x, y, z);
                if !l.is_zero() && l.norm2() <= norm2_cap {
                    shifts.push(l);
                }
            }
        }
    }
    shifts.sort_by_key(|l| l.sort_key());
    shifts
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: count lattice points of norm^2 <= cap by a plain
    /// cube scan with no early exits.
    fn brute_force_count(cap: i64) -> usize {
        let r = 2 * ((cap as f64).sqrt() as i64) + 2;
        let mut n = 0;
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    if x * x + y * y + z * z <= cap {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn ball_trivial_cases() {
        let b = build_fermi_ball(0).unwrap();
        assert_eq!(b.n_particles(), 1);
        assert_eq!(b.points(), &[Momentum::ZERO]);
        assert_eq!(b.min_outside_norm2(), 1);

        let b = build_fermi_ball(1).unwrap();
        assert_eq!(b.n_particles(), 7);
        assert_eq!(b.min_outside_norm2(), 2);

        let b = build_fermi_ball(3).unwrap();
        assert_eq!(b.n_particles(), 27);
    }

    #[test]
    fn ball_negative_cap_rejected() {
        assert!(build_fermi_ball(-1).is_err());
    }

    #[test]
    fn ball_counts_match_brute_force() {
        for cap in 1..=25 {
            let b = build_fermi_ball(cap).unwrap();
            assert_eq!(b.n_particles(), brute_force_count(cap), "cap={cap}");
        }
    }

    #[test]
    fn ball_inversion_symmetry_and_ordering() {
        let b = build_fermi_ball(9).unwrap();
        for &k in b.points() {
            assert!(b.points().binary_search_by_key(&(-k).sort_key(), |p| p.sort_key()).is_ok());
        }
        let mut sorted = b.points().to_vec();
        sorted.sort_by_key(|p| p.sort_key());
        assert_eq!(sorted, b.points());
    }

    #[test]
    fn min_outside_skips_unrealized_norms() {
        // 7 = 8*0+7 is not a sum of three squares, so a cap of 6 jumps to 8.
        let b = build_fermi_ball(6).unwrap();
        assert_eq!(b.min_outside_norm2(), 8);
    }

    #[test]
    fn lens_shell1_unit_shift() {
        let b = build_fermi_ball(1).unwrap();
        let lens = build_lens(&b, Momentum::new(1, 0, 0)).unwrap();
        let mut expected = [
            Momentum::new(2, 0, 0),
            Momentum::new(1, 1, 0),
            Momentum::new(1, -1, 0),
            Momentum::new(1, 0, 1),
            Momentum::new(1, 0, -1),
        ];
        expected.sort_by_key(|p| p.sort_key());
        assert_eq!(lens.points(), &expected[..]);
        for (p, lam) in lens.points().iter().zip(lens.lambdas()) {
            let want = if p.norm2() == 4 { 3 } else { 1 };
            assert_eq!(lam.numerator(), want, "p={p}");
        }
    }

    #[test]
    fn lens_rotation_image() {
        // Cubic symmetry: the (0,0,1) lens is the rotation image of (1,0,0).
        let b = build_fermi_ball(1).unwrap();
        let lx = build_lens(&b, Momentum::new(1, 0, 0)).unwrap();
        let lz = build_lens(&b, Momentum::new(0, 0, 1)).unwrap();
        let mut rotated: Vec<Momentum> = lx
            .points()
            .iter()
            .map(|p| Momentum::new(p.z, p.y, p.x)) // (1,0,0) -> (0,0,1)
            .collect();
        rotated.sort_by_key(|p| p.sort_key());
        assert_eq!(lz.points(), &rotated[..]);
    }

    #[test]
    fn lens_zero_shift_rejected() {
        let b = build_fermi_ball(1).unwrap();
        assert!(build_lens(&b, Momentum::ZERO).is_err());
    }

    #[test]
    fn lens_reflection_symmetry() {
        let b = build_fermi_ball(4).unwrap();
        for shift in [
            Momentum::new(1, 0, 0),
            Momentum::new(1, 1, 0),
            Momentum::new(2, 1, -1),
            Momentum::new(3, 0, 0),
        ] {
            let lp = build_lens(&b, shift).unwrap();
            let ln = build_lens(&b, -shift).unwrap();
            let mut mirrored: Vec<Momentum> = lp.points().iter().map(|&p| -p).collect();
            mirrored.sort_by_key(|p| p.sort_key());
            assert_eq!(ln.points(), &mirrored[..]);
            for &p in lp.points() {
                assert_eq!(lp.lambda_of(p), ln.lambda_of(-p));
            }
        }
    }

    #[test]
    fn lambda_positive_and_at_least_half() {
        for cap in [1, 2, 3, 4] {
            let b = build_fermi_ball(cap).unwrap();
            for shift in shifts_up_to(4 * cap) {
                let lens = build_lens(&b, shift).unwrap();
                for lam in lens.lambdas() {
                    assert!(lam.numerator() >= 1);
                }
            }
        }
    }

    #[test]
    fn gap_examples() {
        let b = build_fermi_ball(1).unwrap();
        assert_eq!(excitation_gap(&b, Momentum::new(1, 1, 0)).numerator(), 1); // 1/2
        assert_eq!(excitation_gap(&b, Momentum::ZERO).numerator(), 3); // 3/2
        assert_eq!(excitation_gap(&b, Momentum::new(3, 0, 0)).numerator(), 15); // 15/2
    }

    #[test]
    fn gap_lower_bounds_lambda() {
        // lambda_{l,q} >= e(q)/2 for every lens containing q, small balls.
        for cap in [1, 2, 3] {
            let b = build_fermi_ball(cap).unwrap();
            for shift in shifts_up_to(4 * cap) {
                let lens = build_lens(&b, shift).unwrap();
                for (p, lam) in lens.points().iter().zip(lens.lambdas()) {
                    let e = excitation_gap(&b, *p);
                    // lambda >= e/2  <=>  2*num(lambda) >= num(e)
                    assert!(2 * lam.numerator() >= e.numerator(), "cap={cap} l={shift} p={p}");
                }
            }
        }
    }

    #[test]
    fn relevant_shifts_outside_example() {
        let b = build_fermi_ball(1).unwrap();
        let q = Momentum::new(1, 1, 0);
        let shifts = relevant_shifts_outside(&b, q);
        assert_eq!(shifts.len(), 7);
        for &l in &shifts {
            let lens = build_lens(&b, l).unwrap();
            assert!(lens.contains(q));
        }
    }

    #[test]
    fn relevant_shifts_inside_examples() {
        let b = build_fermi_ball(1).unwrap();
        let q = Momentum::ZERO;
        let shifts = relevant_shifts_inside(&b, q, 9);
        for &l in &shifts {
            let lens = build_lens(&b, l).unwrap();
            assert!(lens.contains(q + l));
        }
        // every l with |l|^2 <= 9 outside the ball qualifies for q = 0
        let expected: Vec<Momentum> = shifts_up_to(9)
            .into_iter()
            .filter(|l| l.norm2() > 1)
            .collect();
        assert_eq!(shifts, expected);

        // B_F = {0}: all l != 0 qualify, lens point is l itself
        let b0 = build_fermi_ball(0).unwrap();
        let shifts0 = relevant_shifts_inside(&b0, Momentum::ZERO, 4);
        assert_eq!(shifts0, shifts_up_to(4));
        for &l in &shifts0 {
            let lens = build_lens(&b0, l).unwrap();
            assert_eq!(lens.points(), &[l]);
        }
    }

    #[test]
    fn energy_sum_bounded_over_sweep() {
        // sum_{r in L_l} 1/lambda_{l,r} / k_F stays bounded as the ball grows.
        let worst = |cap: i64| -> f64 {
            let b = build_fermi_ball(cap).unwrap();
            let two_kf2 = 4 * cap; // |l| <= 2 k_F
            let mut max = 0.0f64;
            for l in shifts_up_to(two_kf2) {
                let lens = build_lens(&b, l).unwrap();
                let s: f64 = lens.lambdas().iter().map(|lam| 1.0 / lam.to_f64()).sum();
                max = max.max(s / b.kf());
            }
            max
        };
        let base = worst(4);
        for cap in 5..=25 {
            assert!(worst(cap) <= 2.0 * base, "cap={cap}");
        }
    }
}
