//! Exact desk-scale reference: the quadratic generator S represented on a
//! truncated fermionic Fock space in the occupation-bitmask basis, with
//! e^{-lambda S} applied to the vacuum by a Taylor scheme with a posteriori
//! error control.
//!
//! Everything lives after the particle-hole transformation: the vacuum is the
//! empty mask, and each mode (particle or hole) carries one bit. Fermionic
//! signs come from the parity of set bits below the acted index.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::KernelData;
use crate::lattice::{build_lens, shifts_up_to, FermiBall, Momentum};

/// Ordered truncated mode set: all lens points with |l|^2 <= shift_cutoff
/// together with their hole partners p - l.
#[derive(Clone, Debug)]
pub struct ModeSet {
    modes: Vec<Momentum>,
    index: HashMap<Momentum, usize>,
    is_hole: Vec<bool>,
    shift_cutoff: i64,
}

impl ModeSet {
    pub fn modes(&self) -> &[Momentum] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, p: Momentum) -> Option<usize> {
        self.index.get(&p).copied()
    }

    pub fn is_hole(&self, idx: usize) -> bool {
        self.is_hole[idx]
    }

    pub fn shift_cutoff(&self) -> i64 {
        self.shift_cutoff
    }

    pub fn n_holes(&self) -> usize {
        self.is_hole.iter().filter(|&&h| h).count()
    }

    pub fn n_particles(&self) -> usize {
        self.len() - self.n_holes()
    }
}

pub fn build_mode_set(ball: &FermiBall, shift_cutoff: i64) -> Result<ModeSet> {
    if shift_cutoff < 1 {
        return Err(Error::invalid(format!(
            "shift_cutoff must be >= 1, got {shift_cutoff}"
        )));
    }
    let mut modes = Vec::new();
    for l in shifts_up_to(shift_cutoff) {
        let lens = build_lens(ball, l)?;
        for &p in lens.points() {
            modes.push(p);
            modes.push(p - l);
        }
    }
    modes.sort_by_key(|p| p.sort_key());
    modes.dedup();
    let index = modes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let is_hole = modes.iter().map(|&p| ball.contains(p)).collect();
    Ok(ModeSet {
        modes,
        index,
        is_hole,
        shift_cutoff,
    })
}

/// Even-popcount occupation basis, capped at particle_cap set bits, over the
/// fixed mode ordering.
#[derive(Clone, Debug)]
pub struct FockBasis {
    mode_set: Arc<ModeSet>,
    masks: Vec<u32>,
    index: HashMap<u32, usize>,
    particle_cap: u32,
}

/// Hard ceiling on the basis dimension; beyond this the run is refused.
pub const MAX_BASIS_DIM: u128 = 2_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn build_basis(mode_set: Arc<ModeSet>, particle_cap: u32) -> Result<FockBasis> {
    if particle_cap == 0 || !particle_cap.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "particle_cap must be even and positive, got {particle_cap}"
        )));
    }
    let n = mode_set.len();
    if n == 0 || n > 32 {
        return Err(Error::ResourceGuard(format!(
            "mode set size {n} outside the supported range 1..=32"
        )));
    }
    let dim: u128 = (0..=particle_cap.min(n as u32))
        .step_by(2)
        .map(|k| binomial(n as u128, k as u128))
        .sum();
    if dim > MAX_BASIS_DIM {
        return Err(Error::ResourceGuard(format!(
            "basis dimension {dim} exceeds the limit {MAX_BASIS_DIM}"
        )));
    }
    let mut masks = Vec::with_capacity(dim as usize);
    for k in (0..=particle_cap.min(n as u32)).step_by(2) {
        if k == 0 {
            masks.push(0u32);
            continue;
        }
        // Gosper's hack: iterate all n-bit masks with exactly k set bits
        let mut m: u32 = (1u32 << k) - 1;
        let limit: u64 = 1u64 << n;
        while (m as u64) < limit {
            masks.push(m);
            let c = m & m.wrapping_neg();
            let r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
            if c == 0 {
                break;
            }
        }
    }
    masks.sort_unstable();
    let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    Ok(FockBasis {
        mode_set,
        masks,
        index,
        particle_cap,
    })
}

impl FockBasis {
    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn mode_set(&self) -> &ModeSet {
        &self.mode_set
    }

    pub fn particle_cap(&self) -> u32 {
        self.particle_cap
    }

    pub fn index_of(&self, mask: u32) -> Option<usize> {
        self.index.get(&mask).copied()
    }
}

/// a_i |mask> with the Jordan-Wigner sign from the bits below i.
fn annihilate(mask: u32, i: u32) -> Option<(u32, f64)> {
    let bit = 1u32 << i;
    if mask & bit == 0 {
        return None;
    }
    let below = (mask & (bit - 1)).count_ones();
    let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((mask & !bit, sign))
}

/// Sparse representation of S = X - X^T, where X is the pure-annihilation
/// half of 1/2 sum_l sum_{r,s} K(l)_{r,s} b_r(l) b_{-s}(-l). Antisymmetry is
/// structural: every stored X entry (i, j, v) contributes +v at (i, j) and
/// -v at (j, i), so S + S^T = 0 exactly.
#[derive(Debug)]
pub struct GeneratorMatrix {
    basis: Arc<FockBasis>,
    /// per-column outgoing entries: cols[j] = [(i, S_ij)]
    cols: Vec<Vec<(u32, f64)>>,
    nnz: usize,
    lens_terms: usize,
}

impl GeneratorMatrix {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn lens_terms(&self) -> usize {
        self.lens_terms
    }

    /// y = S x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, col) in self.cols.iter().enumerate() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for &(i, v) in col {
                y[i as usize] += v * xj;
            }
        }
    }

    /// Dense copy of the leading block (first `cap` basis states) for audits.
    pub fn to_dense_block(&self, cap: usize) -> nalgebra::DMatrix<f64> {
        let n = self.basis.dim().min(cap);
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (j, col) in self.cols.iter().enumerate().take(n) {
            for &(i, v) in col {
                if (i as usize) < n {
                    m[(i as usize, j)] += v;
                }
            }
        }
        m
    }
}

pub fn build_generator(
    basis: Arc<FockBasis>,
    kernels: &[Arc<KernelData>],
) -> Result<GeneratorMatrix> {
    let modes = basis.mode_set();
    // flatten every kernel entry into an annihilation quadruple
    // (application order: a_{-s}, a_{l-s}, a_r, a_{r-l})
    let mut quads: Vec<([u32; 4], f64)> = Vec::new();
    let mut lens_terms = 0usize;
    for kd in kernels {
        let l = kd.shift();
        let lens = kd.lens();
        lens_terms += lens.len() * lens.len();
        for (ri, &r) in lens.points().iter().enumerate() {
            for (si, &s) in lens.points().iter().enumerate() {
                let coeff = 0.5 * kd.matrix()[(ri, si)];
                if coeff == 0.0 {
                    continue;
                }
                let seq = [-s, l - s, r, r - l];
                let mut idx = [0u32; 4];
                for (slot, &m) in seq.iter().enumerate() {
                    idx[slot] = modes.index_of(m).ok_or_else(|| {
                        Error::invalid(format!(
                            "mode {m} required by shift {l} is missing from the mode set \
                             (cutoff {})",
                            modes.shift_cutoff()
                        ))
                    })? as u32;
                }
                quads.push((idx, coeff));
            }
        }
    }

    let mut x_entries: HashMap<(u32, u32), f64> = HashMap::new();
    for (j, &mask) in basis.masks().iter().enumerate() {
        if mask.count_ones() < 4 {
            continue;
        }
        for &(idx, coeff) in &quads {
            let mut m = mask;
            let mut sign = 1.0;
            let mut dead = false;
            for &i in &idx {
                match annihilate(m, i) {
                    Some((m2, s2)) => {
                        m = m2;
                        sign *= s2;
                    }
                    None => {
                        dead = true;
                        break;
                    }
                }
            }
            if dead {
                continue;
            }
            // the target has popcount - 4, always within the capped sector
            let i = basis.index_of(m).expect("popcount-reduced mask in basis") as u32;
            *x_entries.entry((i, j as u32)).or_insert(0.0) += sign * coeff;
        }
    }

    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); basis.dim()];
    let mut nnz = 0usize;
    for (&(i, j), &v) in &x_entries {
        if v == 0.0 {
            continue;
        }
        cols[j as usize].push((i, v));
        cols[i as usize].push((j, -v));
        nnz += 2;
    }
    for col in cols.iter_mut() {
        col.sort_unstable_by_key(|e| e.0);
    }
    Ok(GeneratorMatrix {
        basis,
        cols,
        nnz,
        lens_terms,
    })
}

/// Amplitudes over the even-popcount basis; produced by the exponential flow.
#[derive(Clone)]
pub struct FockStateVector {
    basis: Arc<FockBasis>,
    amplitudes: Vec<f64>,
}

impl FockStateVector {
    /// The vacuum (empty mask, amplitude 1).
    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let mut amplitudes = vec![0.0; basis.dim()];
        let omega = basis.index_of(0).expect("vacuum in basis");
        amplitudes[omega] = 1.0;
        FockStateVector { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn norm_deviation(&self) -> f64 {
        (self.norm() - 1.0).abs()
    }

    /// Raw excitation occupation <psi, a_q^dag a_q psi> for a mode index.
    fn raw_mode_occupation(&self, mode_idx: usize) -> f64 {
        let bit = 1u32 << mode_idx;
        self.basis
            .masks()
            .iter()
            .zip(&self.amplitudes)
            .filter(|(&m, _)| m & bit != 0)
            .map(|(_, a)| a * a)
            .sum()
    }
}

/// xi_lambda = e^{-lambda S} Omega by Taylor summation; stops when two
/// consecutive term norms fall below tol and reports non-convergence with the
/// achieved residual otherwise.
pub fn apply_exp_generator(s: &GeneratorMatrix, lambda: f64, tol: f64) -> Result<FockStateVector> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::RangeViolation {
            value: lambda,
            lo: 0.0,
            hi: 1.0,
            context: "exponential flow parameter lambda".into(),
        });
    }
    let mut state = FockStateVector::vacuum(s.basis().clone());
    if lambda == 0.0 {
        return Ok(state);
    }
    let dim = s.basis().dim();
    let mut term = state.amplitudes.clone();
    let mut next = vec![0.0; dim];
    let max_terms = 500usize;
    let mut small_streak = 0;
    for k in 1..=max_terms {
        s.apply(&term, &mut next);
        let scale = -lambda / k as f64;
        for (t, n) in term.iter_mut().zip(&next) {
            *t = scale * n;
        }
        for (acc, t) in state.amplitudes.iter_mut().zip(&term) {
            *acc += t;
        }
        let tnorm = term.iter().map(|t| t * t).sum::<f64>().sqrt();
        if tnorm <= tol {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(state);
            }
        } else {
            small_streak = 0;
        }
    }
    let residual = term.iter().map(|t| t * t).sum::<f64>().sqrt();
    Err(Error::ExpNonConvergence {
        residual,
        iterations: max_terms,
    })
}

/// Physical occupation at q, undoing the particle-hole transformation:
/// outside the ball it is the raw expectation, inside it is 1 minus the
/// hole-mode expectation. `in_modes = false` means q is not represented and
/// the free value (indicator of the ball) is returned.
#[derive(Clone, Copy, Debug)]
pub struct Occupation {
    pub value: f64,
    pub in_modes: bool,
}

pub fn occupation_expectation(state: &FockStateVector, q: Momentum, ball: &FermiBall) -> Occupation {
    let modes = state.basis().mode_set();
    match modes.index_of(q) {
        Some(idx) => {
            let raw = state.raw_mode_occupation(idx);
            let value = if modes.is_hole(idx) { 1.0 - raw } else { raw };
            Occupation {
                value,
                in_modes: true,
            }
        }
        None => Occupation {
            value: if ball.contains(q) { 1.0 } else { 0.0 },
            in_modes: false,
        },
    }
}

/// Raw excitation expectation <psi, a_q^dag a_q psi> (no particle-hole
/// undoing); None if q is not a mode.
pub fn raw_occupation(state: &FockStateVector, q: Momentum) -> Option<f64> {
    state
        .basis()
        .mode_set()
        .index_of(q)
        .map(|idx| state.raw_mode_occupation(idx))
}

/// <(N+1)^m> over the amplitudes, N = popcount.
pub fn number_moment(state: &FockStateVector, m: u32) -> Result<f64> {
    if !(1..=5).contains(&m) {
        return Err(Error::invalid(format!("moment order must be in 1..=5, got {m}")));
    }
    Ok(state
        .basis()
        .masks()
        .iter()
        .zip(state.amplitudes())
        .map(|(&mask, a)| a * a * ((mask.count_ones() + 1) as f64).powi(m as i32))
        .sum())
}

/// Bootstrap supremum: max over the given flow states and all modes of the
/// raw excitation expectation.
pub fn bootstrap_sup(states: &[FockStateVector]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::invalid("bootstrap_sup needs a nonempty state list"));
    }
    let mut sup = 0.0f64;
    for st in states {
        for idx in 0..st.basis().mode_set().len() {
            sup = sup.max(st.raw_mode_occupation(idx));
        }
    }
    Ok(sup)
}
