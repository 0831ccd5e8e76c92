//! Exhaustive tables of point processes on tiny finite ground sets.
//!
//! Subsets of an `n`-node space are bitmasks; a [`TabulatedProcess`] stores
//! `P(ξ = S)` for all `2^n` of them. Everything here is exact enumeration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DppError, Result};
use crate::ground::{Configuration, GroundSpace, Marking};
use crate::kernels::Kernel;
use crate::linalg;

pub const MAX_NODES: usize = 15;
/// Negative subset probabilities above `-NEG_TOL` are roundoff and clipped.
pub const NEG_TOL: f64 = 1e-10;
const SUM_TOL: f64 = 1e-12;

fn check_size(n: usize) -> Result<()> {
    if n > MAX_NODES {
        return Err(DppError::OracleTooLarge { max: MAX_NODES, got: n });
    }
    Ok(())
}

fn product_over(mask: u64, f: impl Fn(usize) -> f64) -> f64 {
    let mut p = 1.0;
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        p *= f(i);
        m &= m - 1;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProcess {
    space: GroundSpace,
    prob: Vec<f64>,
}

impl TabulatedProcess {
    /// `prob[mask]` is `P(ξ = mask)`; checked nonnegative and summing to one.
    pub fn new(space: GroundSpace, prob: Vec<f64>) -> Result<Self> {
        let n = space.len();
        check_size(n)?;
        if prob.len() != 1 << n {
            return Err(DppError::DimensionMismatch {
                expected: 1 << n,
                got: prob.len(),
            });
        }
        if let Some(&p) = prob.iter().find(|p| !(**p >= 0.0)) {
            return Err(DppError::NotAValidDpp(p));
        }
        let total: f64 = prob.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(DppError::Precondition(format!("probabilities sum to {total}")));
        }
        Ok(Self { space, prob })
    }

    pub fn space(&self) -> &GroundSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    pub fn prob(&self, s: &Configuration) -> f64 {
        self.prob_mask(s.mask())
    }

    pub fn prob_mask(&self, mask: u64) -> f64 {
        self.prob.get(mask as usize).copied().unwrap_or(0.0)
    }

    /// `P(S ⊂ ξ) = Σ_{T ⊇ S} P(T)`.
    pub fn inclusion(&self, s: &Configuration) -> f64 {
        let m = s.mask();
        (0..self.prob.len() as u64)
            .filter(|t| t & m == m)
            .map(|t| self.prob[t as usize])
            .sum()
    }

    /// Correlation function at `S` against `μ`: `P(S ⊂ ξ) / Π_{S} w`.
    pub fn correlation(&self, s: &Configuration) -> f64 {
        let w = self.space.weights();
        self.inclusion(s) / product_over(s.mask(), |i| w[i])
    }

    /// Mean and variance of `Σ_{x∈ξ} f(x)`.
    pub fn moments(&self, f: &[f64]) -> Result<(f64, f64)> {
        if f.len() != self.len() {
            return Err(DppError::DimensionMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        let (mut m1, mut m2) = (0.0, 0.0);
        for (mask, &p) in self.prob.iter().enumerate() {
            let mut s = 0.0;
            let mut m = mask as u64;
            while m != 0 {
                s += f[m.trailing_zeros() as usize];
                m &= m - 1;
            }
            m1 += p * s;
            m2 += p * s * s;
        }
        Ok((m1, m2 - m1 * m1))
    }

    /// Factorial moments `E[ξ(B)(ξ(B) − 1)⋯(ξ(B) − r + 1)]` for `r = 0..=|B|`.
    pub fn factorial_moments(&self, b: &Configuration) -> Vec<f64> {
        let bm = b.mask();
        let mut out = vec![0.0; b.len() + 1];
        for (mask, &p) in self.prob.iter().enumerate() {
            let k = (mask as u64 & bm).count_ones() as usize;
            let mut falling = 1.0;
            for (r, slot) in out.iter_mut().enumerate() {
                *slot += p * falling;
                falling *= k as f64 - r as f64;
            }
        }
        out
    }

    /// Law of `|ξ|`.
    pub fn count_law(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() + 1];
        for (mask, &p) in self.prob.iter().enumerate() {
            out[mask.count_ones() as usize] += p;
        }
        out
    }

    pub fn total_variation(&self, other: &TabulatedProcess) -> f64 {
        0.5 * self.prob.iter().zip(&other.prob).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Inverts the correlation determinants by inclusion–exclusion:
/// `P(ξ = S) = Σ_{T ⊇ S} (−1)^{|T∖S|} det K(T) Π_T w`.
pub fn from_kernel(k: &Kernel) -> Result<TabulatedProcess> {
    let n = k.len();
    check_size(n)?;
    let w = k.weights();
    let size = 1usize << n;
    let mut table: Vec<f64> = (0..size as u64)
        .into_par_iter()
        .map(|mask| {
            let idx = Configuration::from_mask(mask);
            let d = linalg::det(&linalg::principal(k.matrix(), idx.indices())).re;
            d * product_over(mask, |i| w[i])
        })
        .collect();
    // superset Möbius transform
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..size {
            if mask & b == 0 {
                table[mask] -= table[mask | b];
            }
        }
    }
    let worst = table.iter().copied().fold(0.0, f64::min);
    if worst < -NEG_TOL {
        return Err(DppError::NotAValidDpp(worst));
    }
    table.iter_mut().for_each(|p| *p = p.max(0.0));
    let total: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= total);
    TabulatedProcess::new(k.space().clone(), table)
}

/// Independent occupancy with `p_i = ρ(x_i) w_i / (1 + ρ(x_i) w_i)`.
pub fn poisson_tabulated(intensity: impl Fn(f64) -> f64, space: &GroundSpace) -> Result<TabulatedProcess> {
    let n = space.len();
    check_size(n)?;
    let p: Vec<f64> = space
        .nodes()
        .iter()
        .zip(space.weights())
        .map(|(&x, &w)| {
            let r = intensity(x) * w;
            r / (1.0 + r)
        })
        .collect();
    for (i, &pi) in p.iter().enumerate() {
        if !(0.0..1.0).contains(&pi) {
            return Err(DppError::IntensityTooLarge(i));
        }
    }
    let table = (0..1u64 << n)
        .map(|mask| product_over(mask, |i| p[i]) * product_over(!mask & ((1 << n) - 1), |i| 1.0 - p[i]))
        .collect();
    TabulatedProcess::new(space.clone(), table)
}

/// The marked process, evaluated lazily from the ground table.
#[derive(Debug, Clone)]
pub struct MarkedTable {
    ground: TabulatedProcess,
    theta: Marking,
}

pub fn mark_exact(tp: &TabulatedProcess, theta: &Marking) -> Result<MarkedTable> {
    theta.check_len(tp.len())?;
    Ok(MarkedTable {
        ground: tp.clone(),
        theta: theta.clone(),
    })
}

impl MarkedTable {
    pub fn ground(&self) -> &TabulatedProcess {
        &self.ground
    }

    pub fn marking(&self) -> &Marking {
        &self.theta
    }

    /// `P(ξ₀ = A, ξ₁ = B) = P(A ∪ B) Π_B θ Π_A (1 − θ)`.
    pub fn joint_mask(&self, a: u64, b: u64) -> f64 {
        if a & b != 0 {
            return 0.0;
        }
        let t = self.theta.values();
        self.ground.prob_mask(a | b) * product_over(b, |i| t[i]) * product_over(a, |i| 1.0 - t[i])
    }

    pub fn joint(&self, a: &Configuration, b: &Configuration) -> f64 {
        self.joint_mask(a.mask(), b.mask())
    }

    fn full(&self) -> u64 {
        (1u64 << self.ground.len()) - 1
    }

    /// `P(ξ₁ = v)`.
    pub fn observation_prob(&self, v: &Configuration) -> f64 {
        let vm = v.mask();
        let rest = self.full() & !vm;
        submasks(rest).map(|a| self.joint_mask(a, vm)).sum()
    }

    /// Law of `ξ₀` given `ξ₁ = v`.
    pub fn condition(&self, v: &Configuration) -> Result<TabulatedProcess> {
        v.check_within(self.ground.len())?;
        let pv = self.observation_prob(v);
        if !(pv > 0.0) {
            return Err(DppError::ZeroProbabilityObservation(pv));
        }
        let vm = v.mask();
        let table = (0..=self.full()).map(|a| self.joint_mask(a, vm) / pv).collect();
        renormalized(self.ground.space.clone(), table)
    }

    /// Marginal law of `ξ₀`.
    pub fn mark0_marginal(&self) -> Result<TabulatedProcess> {
        let full = self.full();
        let table = (0..=full)
            .map(|a| submasks(full & !a).map(|b| self.joint_mask(a, b)).sum())
            .collect();
        renormalized(self.ground.space.clone(), table)
    }

    /// Marginal law of `ξ₁`.
    pub fn mark1_marginal(&self) -> Result<TabulatedProcess> {
        let full = self.full();
        let table = (0..=full)
            .map(|b| submasks(full & !b).map(|a| self.joint_mask(a, b)).sum())
            .collect();
        renormalized(self.ground.space.clone(), table)
    }

    /// Correlation of `ξ₀` at `x` given `ξ₁ = v`, against `(1 − θ) μ`.
    pub fn conditional_correlation(&self, v: &Configuration, x: &Configuration) -> Result<f64> {
        let ct = self.condition(v)?;
        let (t, w) = (self.theta.values(), self.ground.space.weights());
        let mass = product_over(x.mask(), |i| (1.0 - t[i]) * w[i]);
        Ok(ct.inclusion(x) / mass)
    }
}

fn renormalized(space: GroundSpace, mut table: Vec<f64>) -> Result<TabulatedProcess> {
    let total: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= total);
    TabulatedProcess::new(space, table)
}

/// All submasks of `m`, including `0` and `m`.
fn submasks(m: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(m);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & m) };
        Some(cur)
    })
}

/// Law of `ξ₀` given `ξ₁ = v`.
pub fn condition_exact(marked: &MarkedTable, v: &Configuration) -> Result<TabulatedProcess> {
    marked.condition(v)
}

/// `(mean, variance)` of `Σ_{x∈ξ} f(x)`.
pub fn moments_exact(tp: &TabulatedProcess, f: &[f64]) -> Result<(f64, f64)> {
    tp.moments(f)
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    space: GroundSpace,
    prob: BTreeMap<String, f64>,
}

impl Serialize for TabulatedProcess {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            space: self.space.clone(),
            prob: self
                .prob
                .iter()
                .enumerate()
                .map(|(m, &p)| (format!("{m:#x}"), p))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TabulatedProcess {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = TableRepr::deserialize(d)?;
        let n = repr.space.len();
        check_size(n).map_err(D::Error::custom)?;
        let mut prob = vec![0.0; 1 << n];
        for (key, p) in repr.prob {
            let mask = usize::from_str_radix(key.trim_start_matches("0x"), 16)
                .map_err(|_| D::Error::custom(format!("bad subset key {key}")))?;
            *prob
                .get_mut(mask)
                .ok_or_else(|| D::Error::custom(format!("subset {key} outside the space")))? = p;
        }
        TabulatedProcess::new(repr.space, prob).map_err(D::Error::custom)
    }
}
