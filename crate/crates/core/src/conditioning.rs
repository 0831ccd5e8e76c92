//! Palm kernels, conditioning on a partial observation, Fredholm
//! determinants and Janossy densities.
//!
//! Conventions. A marking `θ` splits each point into observed (`ξ₁`, with
//! probability `θ(x)`) and unobserved (`ξ₀`). The kernel of `ξ₀` given
//! `ξ₁ = v` is
//!
//! ```text
//! C = K_v (1 − Θ W K_v)^{-1}
//! ```
//!
//! taken against the measure `μ₀^θ = (1 − θ) μ`. [`ConditionalKernel`] stores
//! `C` on the original nodes; the reference weights `(1 − θ) w` come with it.

use std::f64::consts::PI;

use rand::{distr::weighted::WeightedIndex, prelude::Distribution, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DppError, Result};
use crate::ground::{Configuration, DomainTag, Marking};
use crate::kernels::{self, Kernel, OpeData, OpeKind};
use crate::linalg::{self, c, CMat, C64};

/// Relative tolerance on `|det K(v,v)|` against its Hadamard bound.
pub const PALM_TOL: f64 = 1e-10;
/// Relative tolerance on `|det(1 − Θ W K)|` against its Hadamard bound.
pub const RESOLVENT_TOL: f64 = 1e-12;
/// Strata with smaller probability are treated as impossible.
pub const STRATUM_TOL: f64 = 1e-14;
/// Largest accepted condition number of a Hankel/Toeplitz moment matrix.
pub const MOMENT_COND_MAX: f64 = 1e13;

fn check_len(k: &Kernel, len: usize) -> Result<()> {
    if len != k.len() {
        return Err(DppError::DimensionMismatch {
            expected: k.len(),
            got: len,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PalmContext {
    base: Kernel,
    points: Configuration,
    det_vv: C64,
    kernel: Kernel,
}

impl PalmContext {
    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn points(&self) -> &Configuration {
        &self.points
    }

    pub fn det_vv(&self) -> C64 {
        self.det_vv
    }

    /// `K_v`, on the same space as the base kernel.
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn into_kernel(self) -> Kernel {
        self.kernel
    }
}

/// Reduced Palm kernel `K_v = K − K(·,v) K(v,v)^{-1} K(v,·)`.
pub fn palm_kernel(k: &Kernel, v: &Configuration) -> Result<PalmContext> {
    v.check_within(k.len())?;
    let idx = v.indices();
    if idx.is_empty() {
        return Ok(PalmContext {
            base: k.clone(),
            points: v.clone(),
            det_vv: c(1.0),
            kernel: k.clone(),
        });
    }
    let kvv = linalg::principal(k.matrix(), idx);
    let det = linalg::det(&kvv);
    // bound taken on W^{1/2} K(v,v) W^{1/2}, rescaled back
    let wv: Vec<f64> = idx.iter().map(|&i| k.weights()[i]).collect();
    let sw = linalg::sqrt_weights(&wv);
    let wprod: f64 = wv.iter().product();
    let tol = PALM_TOL * linalg::hadamard_bound(&linalg::scale(&kvv, &sw, &sw)) / wprod;
    if !(det.norm() > tol) {
        return Err(DppError::NearSingularPalm { det: det.norm(), tol });
    }
    let all: Vec<usize> = (0..k.len()).collect();
    let kxv = linalg::submatrix(k.matrix(), &all, idx);
    let kvy = linalg::submatrix(k.matrix(), idx, &all);
    let solved = kvv
        .lu()
        .solve(&kvy)
        .ok_or(DppError::NearSingularPalm { det: det.norm(), tol })?;
    let mut m = k.matrix() - kxv * solved;
    // these rows and columns vanish identically
    for &i in idx {
        m.row_mut(i).fill(c(0.0));
        m.column_mut(i).fill(c(0.0));
    }
    let mut kernel = Kernel::new(k.space().clone(), m)?;
    if k.is_hermitian() && !kernel.is_hermitian() {
        kernel = Kernel::new(k.space().clone(), hermitize(kernel.matrix()))?;
    }
    Ok(PalmContext {
        base: k.clone(),
        points: v.clone(),
        det_vv: det,
        kernel,
    })
}

fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

/// Singularity threshold for `det(1 − D K)`, `D ≥ 0`, taken on the similar
/// matrix `1 − D^{1/2} K D^{1/2}` so it does not depend on the scale of `K`.
fn resolvent_tol(k: &CMat, d: &[f64]) -> f64 {
    let n = k.nrows();
    let s = linalg::sqrt_weights(d);
    RESOLVENT_TOL * linalg::hadamard_bound(&(CMat::identity(n, n) - linalg::scale(k, &s, &s)))
}

/// `(K (1 − D K)^{-1}, det(1 − D K))` with `D = diag(d)`, `d ≥ 0`.
fn resolvent(k: &CMat, d: &[f64]) -> Result<(CMat, C64)> {
    let n = k.nrows();
    let a = CMat::identity(n, n) - linalg::scale_rows(k, d);
    let lu = linalg::RightDivisor::new(&a);
    let det = lu.determinant();
    let tol = resolvent_tol(k, d);
    if !(det.norm() > tol) {
        return Err(DppError::SingularResolvent { det: det.norm(), tol });
    }
    let l = lu.solve(k).ok_or(DppError::SingularResolvent { det: det.norm(), tol })?;
    Ok((l, det))
}

#[derive(Debug, Clone)]
pub struct ConditionalKernel {
    kernel: Kernel,
    marking: Marking,
    points: Configuration,
    symmetrized: Option<Kernel>,
    resolvent_det: C64,
    projection_defect: Option<f64>,
}

impl ConditionalKernel {
    /// `C` on the original space; its reference measure is [`Self::reference_weights`].
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    pub fn points(&self) -> &Configuration {
        &self.points
    }

    /// `M_{√(1−θ)} C M_{√(1−θ)}` against `μ`, present when the base kernel is hermitian.
    pub fn symmetrized(&self) -> Option<&Kernel> {
        self.symmetrized.as_ref()
    }

    /// `det(1 − Θ W K_v)`.
    pub fn resolvent_det(&self) -> C64 {
        self.resolvent_det
    }

    /// Defect of `C` as an operator on `L²(μ₀^θ)`, computed when the base kernel is a projection.
    pub fn projection_defect(&self) -> Option<f64> {
        self.projection_defect
    }

    /// `(1 − θ_i) w_i`.
    pub fn reference_weights(&self) -> Vec<f64> {
        self.marking.mark0_weights(self.kernel.space())
    }

    /// Kernel of the same operator against `μ`: `(1 − θ(x)) C(x, y)`.
    pub fn mu_kernel(&self) -> CMat {
        let one_minus: Vec<f64> = self.marking.values().iter().map(|t| 1.0 - t).collect();
        linalg::scale_rows(self.kernel.matrix(), &one_minus)
    }

    /// `Σ_i C_ii (1 − θ_i) w_i`.
    pub fn trace(&self) -> C64 {
        let w = self.reference_weights();
        (0..w.len()).map(|i| self.kernel.at(i, i) * w[i]).sum()
    }

    /// `det C(x_i, x_j)`, the correlation function against `μ₀^θ`.
    pub fn correlation(&self, x: &Configuration) -> C64 {
        kernels::correlation(&self.kernel, x)
    }

    /// Eigenvalues of the conditional operator, ascending. Requires the symmetrized form.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        match &self.symmetrized {
            Some(s) => s.spectrum(),
            None => Err(DppError::NonHermitian(linalg::hermitian_defect(self.kernel.matrix()))),
        }
    }

    /// `C` as a [`Kernel`] on the nodes where `θ < 1`, weighted by `(1 − θ) w`.
    pub fn on_mark0_support(&self) -> Result<(Kernel, Vec<usize>)> {
        let w = self.reference_weights();
        let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        let sp = self.kernel.space();
        let space = crate::ground::GroundSpace::new(
            sp.domain(),
            keep.iter().map(|&i| sp.nodes()[i]).collect(),
            keep.iter().map(|&i| w[i]).collect(),
        )?;
        let k = Kernel::new(space, linalg::principal(self.kernel.matrix(), &keep))?;
        Ok((k, keep))
    }
}

/// Kernel of `ξ₀` given `ξ₁ = v`.
pub fn conditional_kernel(k: &Kernel, theta: &Marking, v: &Configuration) -> Result<ConditionalKernel> {
    theta.check_len(k.len())?;
    let palm = palm_kernel(k, v)?;
    let kv = palm.kernel();
    let d = theta.mark1_weights(k.space());
    let (mut cm, det) = resolvent(kv.matrix(), &d)?;
    if k.is_hermitian() {
        cm = hermitize(&cm);
    }
    let kernel = Kernel::new(k.space().clone(), cm)?;
    let symmetrized = if k.is_hermitian() {
        let s: Vec<f64> = theta.values().iter().map(|t| (1.0 - t).sqrt()).collect();
        let sym = linalg::scale(kernel.matrix(), &s, &s);
        Some(Kernel::new(k.space().clone(), hermitize(&sym))?)
    } else {
        None
    };
    let is_projection = k.claims_projection() || kernels::is_near_projection(k, 1e-10);
    let projection_defect = is_projection.then(|| {
        kernels::projection_defect_weighted(kernel.matrix(), &theta.mark0_weights(k.space()))
    });
    Ok(ConditionalKernel {
        kernel,
        marking: theta.clone(),
        points: v.clone(),
        symmetrized,
        resolvent_det: det,
        projection_defect,
    })
}

/// `det(1 − M_√φ K M_√φ)`; for `φ` with negative entries, `det(1 − M_φ K)`.
pub fn fredholm_det(k: &Kernel, phi: &[f64]) -> Result<C64> {
    check_len(k, phi.len())?;
    Ok(fredholm_det_weighted(k.matrix(), k.weights(), phi))
}

pub fn fredholm_det_weighted(m: &CMat, weights: &[f64], phi: &[f64]) -> C64 {
    let n = m.nrows();
    let a = if phi.iter().all(|&p| p >= 0.0) {
        let s: Vec<f64> = phi.iter().zip(weights).map(|(p, w)| (p * w).sqrt()).collect();
        CMat::identity(n, n) - linalg::scale(m, &s, &s)
    } else {
        let d: Vec<f64> = phi.iter().zip(weights).map(|(p, w)| p * w).collect();
        CMat::identity(n, n) - linalg::scale_rows(m, &d)
    };
    linalg::det(&a)
}

/// `L_v[1 − (1−θ)(1−φ₀)] / L_v[θ]`.
pub fn avg_mult_functional(k: &Kernel, theta: &Marking, v: &Configuration, phi0: &[f64]) -> Result<C64> {
    theta.check_len(k.len())?;
    check_len(k, phi0.len())?;
    let palm = palm_kernel(k, v)?;
    let kv = palm.kernel();
    let t = theta.values();
    let num_phi: Vec<f64> = (0..t.len()).map(|i| 1.0 - (1.0 - t[i]) * (1.0 - phi0[i])).collect();
    let den = fredholm_det(kv, t)?;
    let tol = resolvent_tol(kv.matrix(), &theta.mark1_weights(k.space()));
    if !(den.norm() > tol) {
        return Err(DppError::SingularResolvent { det: den.norm(), tol });
    }
    Ok(fredholm_det(kv, &num_phi)? / den)
}

/// The same functional as the Fredholm determinant of the conditional kernel
/// against `μ₀^θ`.
pub fn avg_mult_functional_conditional(
    k: &Kernel,
    theta: &Marking,
    v: &Configuration,
    phi0: &[f64],
) -> Result<C64> {
    check_len(k, phi0.len())?;
    let ck = conditional_kernel(k, theta, v)?;
    Ok(fredholm_det_weighted(ck.kernel.matrix(), &ck.reference_weights(), phi0))
}

/// Precomputed `det(1 − D_ρ K)` and `K (1 − D_ρ K)^{-1}` for repeated Janossy evaluations.
#[derive(Debug, Clone)]
pub struct JanossyTable {
    det: C64,
    resolved: CMat,
}

impl JanossyTable {
    /// `ρ` is the thinning weight (`θ` for `ξ₁`, `1 − θ` for `ξ₀`, `1_B` for `B`).
    pub fn new(k: &Kernel, rho: &[f64]) -> Result<Self> {
        check_len(k, rho.len())?;
        let d: Vec<f64> = rho.iter().zip(k.weights()).map(|(r, w)| r * w).collect();
        let (resolved, det) = resolvent(k.matrix(), &d)?;
        Ok(Self { det, resolved })
    }

    /// `det(1 − D_ρ K)`, the probability of no point under the thinning.
    pub fn void(&self) -> C64 {
        self.det
    }

    pub fn at(&self, x: &Configuration) -> C64 {
        self.det * linalg::det(&linalg::principal(&self.resolved, x.indices()))
    }
}

/// `j(x) = det(1 − D_ρ K) · det[K (1 − D_ρ K)^{-1}](x)`, a density against `ρ μ`.
pub fn janossy_density(k: &Kernel, rho: &[f64], x: &Configuration) -> Result<C64> {
    x.check_within(k.len())?;
    Ok(JanossyTable::new(k, rho)?.at(x))
}

/// `P(|ξ₁| = m)` for `m = 0..=n`, from the generating function `det(1 − (1 − z) Θ W K)`.
pub fn stratum_probabilities(k: &Kernel, theta: &Marking) -> Result<Vec<f64>> {
    theta.check_len(k.len())?;
    let n = k.len();
    let tw = theta.mark1_weights(k.space());
    if k.is_hermitian() {
        let (lambda, _) = linalg::weighted_eigen(k.matrix(), &tw);
        // coefficients of Π ((1 − λ) + λ z)
        let mut poly = vec![1.0];
        for l in lambda {
            let mut next = vec![0.0; poly.len() + 1];
            for (j, &p) in poly.iter().enumerate() {
                next[j] += p * (1.0 - l);
                next[j + 1] += p * l;
            }
            poly = next;
        }
        return Ok(poly);
    }
    let size = n + 1;
    let gen: Vec<C64> = (0..size)
        .map(|j| {
            let z = C64::from_polar(1.0, 2.0 * PI * j as f64 / size as f64);
            let d: Vec<C64> = tw.iter().map(|&t| (c(1.0) - z) * t).collect();
            let a = CMat::from_fn(n, n, |r, s| {
                let id = if r == s { c(1.0) } else { c(0.0) };
                id - d[r] * k.at(r, s)
            });
            linalg::det(&a)
        })
        .collect();
    Ok((0..size)
        .map(|m| {
            let s: C64 = (0..size)
                .map(|j| gen[j] * C64::from_polar(1.0, -2.0 * PI * (j * m) as f64 / size as f64))
                .sum();
            s.re / size as f64
        })
        .collect())
}

/// The law of `ξ₁` given `|ξ₁| = m`, as a density against `(θ μ)^{⊗m}` on
/// ordered tuples.
#[derive(Debug, Clone)]
pub struct ObservationDensity {
    m: usize,
    prob: f64,
    factorial: f64,
    table: JanossyTable,
}

impl ObservationDensity {
    pub fn stratum(&self) -> usize {
        self.m
    }

    /// `P(|ξ₁| = m)`.
    pub fn probability(&self) -> f64 {
        self.prob
    }

    /// `j₁(v) / (m! P(|ξ₁| = m))`; zero off the stratum.
    pub fn eval(&self, v: &Configuration) -> f64 {
        if v.len() != self.m {
            return 0.0;
        }
        self.table.at(v).re / (self.factorial * self.prob)
    }

    /// Probability that `ξ₁` equals the set `v`, given `|ξ₁| = m`.
    pub fn set_probability(&self, v: &Configuration, theta: &Marking, weights: &[f64]) -> f64 {
        let mass: f64 = v.indices().iter().map(|&i| theta.values()[i] * weights[i]).product();
        self.eval(v) * self.factorial * mass
    }
}

pub fn observation_density(k: &Kernel, theta: &Marking, m: usize) -> Result<ObservationDensity> {
    let probs = stratum_probabilities(k, theta)?;
    let prob = probs.get(m).copied().unwrap_or(0.0);
    if !(prob > STRATUM_TOL) {
        return Err(DppError::ZeroProbabilityStratum { m, prob });
    }
    let table = JanossyTable::new(k, theta.values())?;
    Ok(ObservationDensity {
        m,
        prob,
        factorial: (1..=m).map(|i| i as f64).product(),
        table,
    })
}

/// `j₁(x ⊔ v) / j₁(v)`: the correlation of `ξ₀` at `x` given `ξ₁ = v`, against `μ₀^θ`.
pub fn conditional_correlation(k: &Kernel, theta: &Marking, v: &Configuration, x: &Configuration) -> Result<C64> {
    theta.check_len(k.len())?;
    v.check_within(k.len())?;
    x.check_within(k.len())?;
    let table = JanossyTable::new(k, theta.values())?;
    let den = table.at(v);
    if !(den.norm() > STRATUM_TOL * table.void().norm().max(1e-300)) || den.norm() < 1e-300 {
        return Err(DppError::ZeroProbabilityObservation(den.norm()));
    }
    match x.disjoint_union(v) {
        Some(u) => Ok(table.at(&u) / den),
        None => Ok(c(0.0)),
    }
}

fn vandermonde_sq(z: &[C64]) -> f64 {
    let mut p = 1.0;
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            p *= (z[i] - z[j]).norm_sqr();
        }
    }
    p
}

/// Hermitian moment matrix determinant with a condition check.
fn moment_det(h: &CMat) -> Result<f64> {
    if h.nrows() == 0 {
        return Ok(1.0);
    }
    if h.nrows() > 1 {
        let eig = hermitize(h).symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if max > 0.0 {
            let cond = if min > 0.0 { max / min } else { f64::INFINITY };
            if cond > MOMENT_COND_MAX {
                return Err(DppError::MomentsIllConditioned(cond));
            }
        }
    }
    Ok(linalg::det(h).re)
}

/// Unnormalized density of the `n = N − m` unobserved points of an OPE given
/// that `m` points were observed, against `dx^{⊗n}` (`dt^{⊗n}` on the circle):
/// `|Δ(u)|² D_m(θ w Π(· − u_j)²) Π (1 − θ(u_j)) w(u_j)` with `D_m` the Hankel
/// (line) or Toeplitz (circle) determinant.
pub fn marginal_mark0_density(ope: &OpeData, theta: &Marking, m: usize, u: &Configuration) -> Result<f64> {
    let base = &ope.base;
    theta.check_len(base.len())?;
    u.check_within(base.len())?;
    if m >= ope.size {
        return Err(DppError::Precondition(format!(
            "need N − m > 0 unobserved points (N = {}, m = {m})",
            ope.size
        )));
    }
    if u.len() != ope.size - m {
        return Err(DppError::DimensionMismatch {
            expected: ope.size - m,
            got: u.len(),
        });
    }
    let x = base.nodes();
    let q = base.weights();
    let t = theta.values();
    let w = &ope.weight;
    let idx = u.indices();
    let point = |s: f64| match ope.kind {
        OpeKind::Line => c(s),
        OpeKind::Circle => C64::from_polar(1.0, s),
    };
    let uz: Vec<C64> = idx.iter().map(|&i| point(x[i])).collect();
    let tail: f64 = idx.iter().map(|&i| (1.0 - t[i]) * w[i]).product();
    if tail == 0.0 {
        return Ok(0.0);
    }
    let f: Vec<f64> = (0..x.len())
        .map(|i| {
            let z = point(x[i]);
            t[i] * w[i] * q[i] * uz.iter().map(|a| (z - a).norm_sqr()).product::<f64>()
        })
        .collect();
    let d = match ope.kind {
        OpeKind::Line => {
            let (center, half) = match base.domain() {
                DomainTag::RealInterval { a, b } => (0.5 * (a + b), 0.5 * (b - a)),
                _ => (0.0, 1.0),
            };
            let y: Vec<f64> = x.iter().map(|s| (s - center) / half).collect();
            let mom: Vec<f64> = (0..(2 * m).max(1))
                .map(|k| (0..x.len()).map(|i| y[i].powi(k as i32) * f[i]).sum())
                .collect();
            let h = CMat::from_fn(m, m, |j, k| c(mom[j + k]));
            moment_det(&h)? * half.powi((m * m.saturating_sub(1)) as i32)
        }
        OpeKind::Circle => {
            let g = |l: i64| -> C64 {
                (0..x.len())
                    .map(|i| C64::from_polar(f[i], -(l as f64) * x[i]))
                    .sum::<C64>()
                    / (2.0 * PI)
            };
            let h = CMat::from_fn(m, m, |j, k| g(j as i64 - k as i64));
            moment_det(&h)?
        }
    };
    Ok(vandermonde_sq(&uz) * d * tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub value: f64,
    pub std_error: f64,
    pub method: NormalizationMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMethod {
    Quadrature,
    MonteCarlo,
}

/// Largest `n` for which the normalization is summed over all `n`-subsets.
pub const EXACT_NORMALIZATION_MAX: usize = 3;

/// `Z' = Σ_u density(u) Π q(u)` over sets of `n = N − m` nodes: exhaustive
/// for `n ≤ 3`, otherwise importance-sampled with `samples` draws.
pub fn marginal_normalization(
    ope: &OpeData,
    theta: &Marking,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<Normalization> {
    let len = ope.base.len();
    let n = ope.size.checked_sub(m).filter(|&n| n > 0).ok_or_else(|| {
        DppError::Precondition(format!("need N − m > 0 (N = {}, m = {m})", ope.size))
    })?;
    let q = ope.base.weights();
    if n <= EXACT_NORMALIZATION_MAX {
        let mut total = 0.0;
        let mut idx: Vec<usize> = (0..n).collect();
        if n > len {
            return Ok(Normalization {
                value: 0.0,
                std_error: 0.0,
                method: NormalizationMethod::Quadrature,
            });
        }
        loop {
            let u = Configuration::new(idx.clone())?;
            let mass: f64 = idx.iter().map(|&i| q[i]).product();
            total += marginal_mark0_density(ope, theta, m, &u)? * mass;
            // next combination in lexicographic order
            let mut pos = n;
            while pos > 0 && idx[pos - 1] == len - n + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for j in pos..n {
                idx[j] = idx[j - 1] + 1;
            }
        }
        return Ok(Normalization {
            value: total,
            std_error: 0.0,
            method: NormalizationMethod::Quadrature,
        });
    }
    if samples < 2 {
        return Err(DppError::Precondition("Monte Carlo normalization needs at least 2 samples".into()));
    }
    let t = theta.values();
    let prop: Vec<f64> = (0..len).map(|i| (1.0 - t[i]) * ope.weight[i] * q[i]).collect();
    let dist = WeightedIndex::new(&prop)
        .map_err(|e| DppError::Precondition(format!("no unobserved mass: {e}")))?;
    let total: f64 = prop.iter().sum();
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let draw: Vec<usize> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let Ok(u) = Configuration::from_unsorted(draw.clone()) else {
            values.push(0.0);
            continue;
        };
        if u.len() < n {
            values.push(0.0);
            continue;
        }
        let pdf: f64 = draw.iter().map(|&i| prop[i] / total).product();
        let mass: f64 = draw.iter().map(|&i| q[i]).product();
        values.push(marginal_mark0_density(ope, theta, m, &u)? * mass / (pdf * fact));
    }
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok(Normalization {
        value: mean,
        std_error: (var / samples as f64).sqrt(),
        method: NormalizationMethod::MonteCarlo,
    })
}

/// `(d/dt log det(1 − Θ_t W K), −Σ ∂_tθ_t(x_i) C_t(x_i, x_i) w_i)`, the left side by
/// a central difference and `∂_tθ_t` by the same stencil. `C_t` is the
/// conditional kernel given an empty observation, against `μ₀^{θ_t}`.
pub fn jacobi_logderiv(
    k: &Kernel,
    theta: impl Fn(f64) -> Result<Marking>,
    t: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let (tp, tm, t0) = (theta(t + dt)?, theta(t - dt)?, theta(t)?);
    for th in [&tp, &tm, &t0] {
        th.check_len(k.len())?;
    }
    let logdet = |th: &Marking| -> Result<f64> {
        let (_, det) = resolvent(k.matrix(), &th.mark1_weights(k.space()))?;
        Ok(det.norm().ln())
    };
    let lhs = (logdet(&tp)? - logdet(&tm)?) / (2.0 * dt);
    let (l, _) = resolvent(k.matrix(), &t0.mark1_weights(k.space()))?;
    let w = k.weights();
    let rhs = -(0..k.len())
        .map(|i| (tp.values()[i] - tm.values()[i]) / (2.0 * dt) * l[(i, i)].re * w[i])
        .sum::<f64>();
    Ok((lhs, rhs))
}

#[derive(Serialize, Deserialize)]
struct ConditionalRepr {
    #[serde(flatten)]
    kernel: Kernel,
    theta: Marking,
    points: Configuration,
}

impl Serialize for ConditionalKernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConditionalRepr {
            kernel: self.kernel.clone(),
            theta: self.marking.clone(),
            points: self.points.clone(),
        }
        .serialize(s)
    }
}
