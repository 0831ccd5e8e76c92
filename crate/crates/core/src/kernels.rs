//! Correlation kernels on a ground space and kernel-level functionals.
//!
//! A [`Kernel`] stores the matrix `K(x_i, x_j)` together with its
//! [`GroundSpace`]; the operator acts by `(K f)_i = Σ_j K_ij w_j f_j`.
//! Spectral statements always refer to the symmetrized matrix
//! `W^{1/2} K W^{1/2}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::airy::airy_certified;
use crate::error::{DppError, Result};
use crate::ground::{Configuration, DomainTag, GroundSpace};
use crate::linalg::{self, c, CMat, C64};

pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    space: GroundSpace,
    matrix: CMat,
    hermitian: bool,
    claimed_projection: bool,
}

impl Kernel {
    /// Wraps a matrix; the hermitian flag is detected at `1e-12` relative to the largest entry.
    pub fn new(space: GroundSpace, matrix: CMat) -> Result<Self> {
        let n = space.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(DppError::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let scale = linalg::max_abs(&matrix).max(1.0);
        let hermitian = linalg::hermitian_defect(&matrix) <= HERMITIAN_TOL * scale;
        Ok(Self {
            space,
            matrix,
            hermitian,
            claimed_projection: false,
        })
    }

    pub fn from_real_fn(space: GroundSpace, k: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = space.len();
        let m = CMat::from_fn(n, n, |i, j| c(k(i, j)));
        Self::new(space, m)
    }

    pub fn claiming_projection(mut self) -> Self {
        self.claimed_projection = true;
        self
    }

    pub fn space(&self) -> &GroundSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn weights(&self) -> &[f64] {
        self.space.weights()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn claims_projection(&self) -> bool {
        self.claimed_projection
    }

    /// Same matrix against a different reference measure on the same nodes.
    pub fn with_space(&self, space: GroundSpace) -> Result<Self> {
        let mut k = Self::new(space, self.matrix.clone())?;
        k.claimed_projection = false;
        Ok(k)
    }

    /// Operator action `Σ_j K_ij w_j f_j`.
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let w = self.weights();
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.matrix[(i, j)] * w[j] * f[j]).sum())
            .collect()
    }

    /// `Σ_i K(x_i, x_i) w_i`.
    pub fn trace(&self) -> C64 {
        self.weights()
            .iter()
            .enumerate()
            .map(|(i, &w)| self.matrix[(i, i)] * w)
            .sum()
    }

    /// Eigenvalues of `W^{1/2} K W^{1/2}`, ascending. Requires a hermitian kernel.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        Ok(linalg::weighted_eigen(&self.matrix, self.weights()).0)
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(DppError::NonHermitian(linalg::hermitian_defect(&self.matrix)))
        }
    }

    /// Real part of every entry, asserting the imaginary residue is below `tol`.
    pub fn real_matrix(&self, tol: f64) -> Option<nalgebra::DMatrix<f64>> {
        if self.matrix.iter().any(|z| z.im.abs() > tol) {
            return None;
        }
        Some(self.matrix.map(|z| z.re))
    }
}

fn require_interval(space: &GroundSpace) -> Result<()> {
    match space.domain() {
        DomainTag::RealInterval { .. } => Ok(()),
        other => Err(DppError::WrongDomain {
            expected: "real-interval",
            got: other.to_string(),
        }),
    }
}

fn require_circle(space: &GroundSpace) -> Result<()> {
    match space.domain() {
        DomainTag::UnitCircle => Ok(()),
        other => Err(DppError::WrongDomain {
            expected: "unit-circle",
            got: other.to_string(),
        }),
    }
}

pub fn sine_value(u: f64, v: f64) -> f64 {
    let d = PI * (u - v);
    if d == 0.0 {
        1.0
    } else {
        d.sin() / d
    }
}

/// `sin π(u−v) / π(u−v)`.
pub fn sine_kernel(space: &GroundSpace) -> Result<Kernel> {
    require_interval(space)?;
    let x = space.nodes();
    Kernel::from_real_fn(space.clone(), |i, j| sine_value(x[i], x[j]))
}

/// `(Ai(x)Ai'(y) − Ai(y)Ai'(x)) / (x − y)`, diagonal `Ai'(x)² − x Ai(x)²`.
pub fn airy_kernel(space: &GroundSpace) -> Result<Kernel> {
    require_interval(space)?;
    let x = space.nodes();
    let ai: Vec<(f64, f64)> = x.iter().map(|&t| airy_certified(t)).collect::<Result<_>>()?;
    Kernel::from_real_fn(space.clone(), |i, j| {
        let (a, da) = ai[i];
        if i == j {
            da * da - x[i] * a * a
        } else {
            let (b, db) = ai[j];
            (a * db - b * da) / (x[i] - x[j])
        }
    })
}

pub fn cue_value(n: usize, t: f64, s: f64) -> f64 {
    let d = t - s;
    let den = (0.5 * d).sin();
    if den.abs() < 1e-300 {
        n as f64 / (2.0 * PI)
    } else {
        (0.5 * n as f64 * d).sin() / den / (2.0 * PI)
    }
}

/// `(1/2π) sin(N(t−s)/2) / sin((t−s)/2)` on circle angles.
pub fn cue_kernel(n: usize, space: &GroundSpace) -> Result<Kernel> {
    require_circle(space)?;
    if n == 0 {
        return Err(DppError::Precondition("CUE size must be positive".into()));
    }
    let t = space.nodes();
    Ok(Kernel::from_real_fn(space.clone(), |i, j| {
        if i == j {
            n as f64 / (2.0 * PI)
        } else {
            cue_value(n, t[i], t[j])
        }
    })?
    .claiming_projection())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpeKind {
    Line,
    Circle,
}

/// Orthonormal polynomials on a discretized weight and the induced kernel.
#[derive(Debug, Clone)]
pub struct OpeData {
    pub kind: OpeKind,
    /// Number of particles `N`.
    pub size: usize,
    /// Quadrature space for `dx` (or `dt` on the circle).
    pub base: GroundSpace,
    /// `w(x_i)`.
    pub weight: Vec<f64>,
    /// Row `j` holds `p_j(x_i)` (or `φ_j(e^{i t_i})`), `j = 0..=N`.
    pub polys: CMat,
    /// Derivatives `p_j'(x_i)`, real line only.
    pub dpolys: Option<CMat>,
    /// Leading coefficients `κ_0..κ_N`.
    pub kappa: Vec<f64>,
    /// Recurrence `x p_k = β_{k+1} p_{k+1} + a_k p_k + β_k p_{k−1}`, real line only.
    pub recurrence: Option<(Vec<f64>, Vec<f64>)>,
    /// Indices of the base nodes carrying positive weight.
    pub support: Vec<usize>,
    /// `K_N` against `w·dx`, on the support nodes.
    pub kernel: Kernel,
}

impl OpeData {
    /// `γ_N = κ_{N−1} / κ_N`.
    pub fn gamma(&self) -> f64 {
        self.kappa[self.size - 1] / self.kappa[self.size]
    }

    /// Christoffel–Darboux form `γ_N (p_N(x)p_{N−1}(y) − p_N(y)p_{N−1}(x)) / (x − y)`
    /// on the support nodes, diagonal `γ_N (p_N' p_{N−1} − p_{N−1}' p_N)`.
    pub fn christoffel_darboux(&self) -> Result<CMat> {
        let dp = match (&self.kind, &self.dpolys) {
            (OpeKind::Line, Some(dp)) => dp,
            _ => {
                return Err(DppError::Precondition(
                    "Christoffel–Darboux form is implemented on the real line".into(),
                ))
            }
        };
        let (n, g) = (self.size, self.gamma());
        let x = self.base.nodes();
        let s = &self.support;
        Ok(CMat::from_fn(s.len(), s.len(), |a, b| {
            let (i, j) = (s[a], s[b]);
            let pn = |k| self.polys[(n, k)];
            let pm = |k| self.polys[(n - 1, k)];
            if i == j {
                (dp[(n, i)] * pm(i) - dp[(n - 1, i)] * pn(i)) * g
            } else {
                (pn(i) * pm(j) - pn(j) * pm(i)) * g / (x[i] - x[j])
            }
        }))
    }
}

fn check_weight(weight: &[f64]) -> Result<()> {
    for (index, &value) in weight.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(DppError::NegativeWeight { index, value });
        }
    }
    Ok(())
}

fn inner(f: &[C64], g: &[C64], m: &[f64]) -> C64 {
    f.iter().zip(g).zip(m).map(|((a, b), w)| a * b.conj() * *w).sum()
}

fn norm(f: &[C64], m: &[f64]) -> f64 {
    inner(f, f, m).re.max(0.0).sqrt()
}

// Relative size below which a new orthogonal direction counts as lost.
const BREAKDOWN: f64 = 1e-10;

#[allow(clippy::too_many_arguments)]
fn finish_ope(
    kind: OpeKind,
    size: usize,
    space: &GroundSpace,
    weight: Vec<f64>,
    polys: Vec<Vec<C64>>,
    dpolys: Option<Vec<Vec<C64>>>,
    kappa: Vec<f64>,
    recurrence: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<OpeData> {
    let n = space.len();
    let support: Vec<usize> = (0..n).filter(|&i| weight[i] > 0.0).collect();
    let mass: Vec<f64> = support.iter().map(|&i| weight[i] * space.weights()[i]).collect();
    let nodes: Vec<f64> = support.iter().map(|&i| space.nodes()[i]).collect();
    let kspace = GroundSpace::new(space.domain(), nodes, mass)?;
    let to_mat = |rows: &Vec<Vec<C64>>| CMat::from_fn(rows.len(), n, |j, i| rows[j][i]);
    let matrix = CMat::from_fn(support.len(), support.len(), |a, b| {
        let (i, j) = (support[a], support[b]);
        (0..size).map(|k| polys[k][i] * polys[k][j].conj()).sum()
    });
    let kernel = Kernel::new(kspace, matrix)?.claiming_projection();
    Ok(OpeData {
        kind,
        size,
        base: space.clone(),
        weight,
        polys: to_mat(&polys),
        dpolys: dpolys.as_ref().map(to_mat),
        kappa,
        recurrence,
        support,
        kernel,
    })
}

/// `N`-point orthogonal polynomial ensemble on the real line with weight `w`,
/// built by the Stieltjes procedure on the quadrature nodes.
pub fn ope_kernel(weight: impl Fn(f64) -> f64, size: usize, space: &GroundSpace) -> Result<OpeData> {
    require_interval(space)?;
    if size == 0 {
        return Err(DppError::Precondition("ensemble size must be positive".into()));
    }
    let x = space.nodes();
    let wv: Vec<f64> = x.iter().map(|&t| weight(t)).collect();
    check_weight(&wv)?;
    let m: Vec<f64> = wv.iter().zip(space.weights()).map(|(a, b)| a * b).collect();
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(DppError::GramBreakdown { degree: 0 });
    }
    let n = x.len();
    let k0 = 1.0 / total.sqrt();
    let mut p: Vec<Vec<C64>> = vec![vec![c(k0); n]];
    let mut dp: Vec<Vec<C64>> = vec![vec![c(0.0); n]];
    let mut kappa = vec![k0];
    let (mut a, mut beta) = (Vec::new(), vec![0.0]);
    for k in 0..size {
        let xp: Vec<C64> = (0..n).map(|i| p[k][i] * x[i]).collect();
        let ak = inner(&xp, &p[k], &m).re;
        let mut r: Vec<C64> = (0..n)
            .map(|i| xp[i] - p[k][i] * ak - if k > 0 { p[k - 1][i] * beta[k] } else { c(0.0) })
            .collect();
        // two passes of full reorthogonalization; p_{k+1} stays a polynomial of
        // degree k + 1 with the same leading coefficient
        for _ in 0..2 {
            for q in &p {
                let h = inner(&r, q, &m);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= qi * h);
            }
        }
        let bk = norm(&r, &m);
        if !(bk > BREAKDOWN * norm(&xp, &m)) {
            return Err(DppError::GramBreakdown { degree: k + 1 });
        }
        let next: Vec<C64> = r.iter().map(|v| v / bk).collect();
        let dnext: Vec<C64> = (0..n)
            .map(|i| {
                let prev = if k > 0 { dp[k - 1][i] * beta[k] } else { c(0.0) };
                (dp[k][i] * (x[i] - ak) + p[k][i] - prev) / bk
            })
            .collect();
        a.push(ak);
        beta.push(bk);
        kappa.push(kappa[k] / bk);
        p.push(next);
        dp.push(dnext);
    }
    finish_ope(OpeKind::Line, size, space, wv, p, Some(dp), kappa, Some((a, beta)))
}

/// `N`-point orthogonal polynomial ensemble on the unit circle, by
/// Gram–Schmidt on `1, z, …, z^N` against `w(e^{it}) dt`.
pub fn circle_ope_kernel(
    weight: impl Fn(f64) -> f64,
    size: usize,
    space: &GroundSpace,
) -> Result<OpeData> {
    require_circle(space)?;
    if size == 0 {
        return Err(DppError::Precondition("ensemble size must be positive".into()));
    }
    let t = space.nodes();
    let wv: Vec<f64> = t.iter().map(|&s| weight(s)).collect();
    check_weight(&wv)?;
    let m: Vec<f64> = wv.iter().zip(space.weights()).map(|(a, b)| a * b).collect();
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(DppError::GramBreakdown { degree: 0 });
    }
    let n = t.len();
    let z: Vec<C64> = t.iter().map(|&s| C64::from_polar(1.0, s)).collect();
    let k0 = 1.0 / total.sqrt();
    let mut phi: Vec<Vec<C64>> = vec![vec![c(k0); n]];
    let mut kappa = vec![k0];
    for k in 0..size {
        let zp: Vec<C64> = (0..n).map(|i| phi[k][i] * z[i]).collect();
        let mut r = zp.clone();
        for _ in 0..2 {
            for q in &phi {
                let h = inner(&r, q, &m);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= qi * h);
            }
        }
        let nk = norm(&r, &m);
        if !(nk > BREAKDOWN * norm(&zp, &m)) {
            return Err(DppError::GramBreakdown { degree: k + 1 });
        }
        phi.push(r.iter().map(|v| v / nk).collect());
        kappa.push(kappa[k] / nk);
    }
    finish_ope(OpeKind::Circle, size, space, wv, phi, None, kappa, None)
}

/// Max-norm of `K∘K − K` for the μ-weighted product, measured after the
/// similarity `W^{1/2} · W^{1/2}` so that the value does not depend on how
/// the weight is split between kernel and measure.
pub fn projection_defect(k: &Kernel) -> f64 {
    projection_defect_weighted(k.matrix(), k.weights())
}

pub fn projection_defect_weighted(m: &CMat, weights: &[f64]) -> f64 {
    let s = linalg::sqrt_weights(weights);
    let a = linalg::scale(m, &s, &s);
    linalg::max_abs(&(&a * &a - &a))
}

/// `projection_defect(k) <= tol`, rejecting cheaply through the diagonal of
/// `A² − A` (`Σ_j |A_ij|² − A_ii` for hermitian `A`) before forming the product.
pub fn is_near_projection(k: &Kernel, tol: f64) -> bool {
    if k.is_hermitian() {
        let s = linalg::sqrt_weights(k.weights());
        let a = linalg::scale(k.matrix(), &s, &s);
        let diag = (0..a.nrows())
            .map(|i| (a.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>() - a[(i, i)].re).abs())
            .fold(0.0, f64::max);
        if !(diag <= tol) {
            return false;
        }
    }
    projection_defect(k) <= tol
}

/// `det K(x_i, x_j)` over the configuration; `1` for the empty configuration.
pub fn correlation(k: &Kernel, config: &Configuration) -> C64 {
    linalg::det(&linalg::principal(k.matrix(), config.indices()))
}

/// Mean and variance of `Σ_{x∈ξ} f(x)` for a hermitian kernel.
pub fn linear_statistic_moments(k: &Kernel, f: &[f64]) -> Result<(f64, f64)> {
    k.require_hermitian()?;
    if f.len() != k.len() {
        return Err(DppError::DimensionMismatch {
            expected: k.len(),
            got: f.len(),
        });
    }
    let w = k.weights();
    let n = k.len();
    let mean: f64 = (0..n).map(|i| f[i] * k.at(i, i).re * w[i]).sum();
    let second: f64 = (0..n).map(|i| f[i] * f[i] * k.at(i, i).re * w[i]).sum();
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            cross += f[i] * f[j] * k.at(i, j).norm_sqr() * w[i] * w[j];
        }
    }
    Ok((mean, second - cross))
}

/// JSON form: `{space, matrix, flags}`; the matrix is row-major, with
/// `[re, im]` pairs when any entry is complex.
#[derive(Serialize, Deserialize)]
struct KernelRepr {
    space: GroundSpace,
    matrix: MatrixRepr,
    flags: Flags,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
}

#[derive(Serialize, Deserialize)]
struct Flags {
    hermitian: bool,
    claimed_projection: bool,
}

impl Serialize for Kernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self.matrix.nrows();
        let matrix = if self.matrix.iter().all(|z| z.im == 0.0) {
            MatrixRepr::Real((0..rows).map(|i| self.matrix.row(i).iter().map(|z| z.re).collect()).collect())
        } else {
            MatrixRepr::Complex(
                (0..rows)
                    .map(|i| self.matrix.row(i).iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            )
        };
        KernelRepr {
            space: self.space.clone(),
            matrix,
            flags: Flags {
                hermitian: self.hermitian,
                claimed_projection: self.claimed_projection,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = KernelRepr::deserialize(d)?;
        let n = repr.space.len();
        let entries: Vec<Vec<C64>> = match repr.matrix {
            MatrixRepr::Real(rows) => rows.into_iter().map(|r| r.into_iter().map(c).collect()).collect(),
            MatrixRepr::Complex(rows) => rows
                .into_iter()
                .map(|r| r.into_iter().map(|[a, b]| C64::new(a, b)).collect())
                .collect(),
        };
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(D::Error::custom(format!("matrix must be {n}x{n}")));
        }
        let m = CMat::from_fn(n, n, |i, j| entries[i][j]);
        let mut k = Kernel::new(repr.space, m).map_err(D::Error::custom)?;
        k.claimed_projection = repr.flags.claimed_projection;
        if repr.flags.hermitian && !k.hermitian {
            return Err(D::Error::custom("hermitian flag set on a non-hermitian matrix"));
        }
        Ok(k)
    }
}
