//! `k`-integrable kernels `K(x, y) = f(x)ᵀ g(y) / (x − y)` with `f(x)ᵀ g(x) = 0`,
//! their Palm updates and the rational dressing `R(z)`.
//!
//! `f` and `g` are stored as `n × k` matrices whose row `i` is the value at
//! node `x_i`. The diagonal is the limit `f'(x)ᵀ g(x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::airy::airy_certified;
use crate::error::{DppError, Result};
use crate::ground::{Configuration, DomainTag, GroundSpace, Marking};
use crate::kernels::{Kernel, OpeData, OpeKind};
use crate::linalg::{self, c, CMat, C64};

/// `|f(x)ᵀ g(x)|` allowed relative to `|f(x)| |g(x)|`.
pub const CONSTRAINT_TOL: f64 = 1e-12;
/// Relative step of the symmetric difference used by [`IntegrableKernel::from_fn`].
pub const FD_STEP: f64 = 1e-5;
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeSource {
    Supplied,
    /// Symmetric difference of the supplied functions.
    Difference,
    /// Three-point Lagrange stencil on neighbouring nodes.
    NodeStencil,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrableKernel {
    space: GroundSpace,
    f: CMat,
    g: CMat,
    df: CMat,
    source: DerivativeSource,
}

fn row(m: &CMat, i: usize) -> Vec<C64> {
    m.row(i).iter().copied().collect()
}

fn dot(a: impl IntoIterator<Item = C64>, b: impl IntoIterator<Item = C64>) -> C64 {
    a.into_iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Derivative weights at `x[t]` of the quadratic through `x[a], x[a+1], x[a+2]`.
fn stencil(x: &[f64], i: usize) -> Option<[(usize, f64); 3]> {
    let n = x.len();
    if n < 3 {
        return None;
    }
    let a = i.saturating_sub(1).min(n - 3);
    let (x0, x1, x2) = (x[a], x[a + 1], x[a + 2]);
    let t = x[i];
    let w0 = ((t - x1) + (t - x2)) / ((x0 - x1) * (x0 - x2));
    let w1 = ((t - x0) + (t - x2)) / ((x1 - x0) * (x1 - x2));
    let w2 = ((t - x0) + (t - x1)) / ((x2 - x0) * (x2 - x1));
    let ws = [(a, w0), (a + 1, w1), (a + 2, w2)];
    ws.iter().all(|(_, w)| w.is_finite()).then_some(ws)
}

/// Row-wise node-stencil derivative of the samples in `m`.
fn stencil_derivative(x: &[f64], m: &CMat) -> Result<CMat> {
    let mut d = CMat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let ws = stencil(x, i).ok_or(DppError::DerivativeUnavailable(i))?;
        for (j, w) in ws {
            // differences against the centre keep constants exactly stationary
            for col in 0..m.ncols() {
                d[(i, col)] += (m[(j, col)] - m[(i, col)]) * w;
            }
        }
    }
    Ok(d)
}

impl IntegrableKernel {
    /// Validates `f(x_i)ᵀ g(x_i) = 0`. Without `df` the derivative comes from a
    /// node stencil, which is only second-order accurate.
    pub fn new(space: GroundSpace, f: CMat, g: CMat, df: Option<CMat>) -> Result<Self> {
        let n = space.len();
        for m in [Some(&f), Some(&g), df.as_ref()].into_iter().flatten() {
            if m.nrows() != n || m.ncols() != f.ncols() {
                return Err(DppError::DimensionMismatch {
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        if f.ncols() == 0 {
            return Err(DppError::Precondition("k must be positive".into()));
        }
        for i in 0..n {
            let s = dot(row(&f, i), row(&g, i));
            let scale = f.row(i).norm() * g.row(i).norm();
            if s.norm() > CONSTRAINT_TOL * scale.max(1e-300) && s.norm() > 1e-300 {
                return Err(DppError::ConstraintViolation {
                    index: i,
                    residual: s.norm() / scale,
                });
            }
        }
        let (df, source) = match df {
            Some(d) => (d, DerivativeSource::Supplied),
            None => (stencil_derivative(space.nodes(), &f)?, DerivativeSource::NodeStencil),
        };
        Ok(Self { space, f, g, df, source })
    }

    /// Samples closures at the nodes; `f'` by a symmetric difference with step
    /// `1e-5 · max(1, |x|)`.
    pub fn from_fn(
        space: &GroundSpace,
        f: impl Fn(f64) -> Vec<C64>,
        g: impl Fn(f64) -> Vec<C64>,
    ) -> Result<Self> {
        let x = space.nodes();
        let fv: Vec<Vec<C64>> = x.iter().map(|&t| f(t)).collect();
        let k = fv.first().map_or(0, Vec::len);
        let gv: Vec<Vec<C64>> = x.iter().map(|&t| g(t)).collect();
        let fm = CMat::from_fn(x.len(), k, |i, j| fv[i][j]);
        let gm = CMat::from_fn(x.len(), k, |i, j| gv[i][j]);
        let dm = CMat::from_fn(x.len(), k, |i, j| {
            let h = FD_STEP * x[i].abs().max(1.0);
            (f(x[i] + h)[j] - f(x[i] - h)[j]) / (2.0 * h)
        });
        let mut ik = Self::new(space.clone(), fm, gm, Some(dm))?;
        ik.source = DerivativeSource::Difference;
        Ok(ik)
    }

    /// `f = (e^{iπx}, e^{−iπx}) / (2πi)`, `g = (e^{−iπy}, −e^{iπy})`.
    pub fn sine(space: &GroundSpace) -> Result<Self> {
        let x = space.nodes();
        let n = x.len();
        let e = |s: f64| C64::from_polar(1.0, PI * s);
        let den = 2.0 * PI * I;
        let f = CMat::from_fn(n, 2, |i, j| if j == 0 { e(x[i]) / den } else { e(-x[i]) / den });
        let g = CMat::from_fn(n, 2, |i, j| if j == 0 { e(-x[i]) } else { -e(x[i]) });
        let df = CMat::from_fn(n, 2, |i, j| if j == 0 { e(x[i]) * 0.5 } else { -e(-x[i]) * 0.5 });
        Self::new(space.clone(), f, g, Some(df))
    }

    /// `f = (Ai, Ai')`, `g = (Ai', −Ai)`, `f' = (Ai', x Ai)`.
    pub fn airy(space: &GroundSpace) -> Result<Self> {
        let x = space.nodes();
        let ai: Vec<(f64, f64)> = x.iter().map(|&t| airy_certified(t)).collect::<Result<_>>()?;
        let n = x.len();
        let f = CMat::from_fn(n, 2, |i, j| c(if j == 0 { ai[i].0 } else { ai[i].1 }));
        let g = CMat::from_fn(n, 2, |i, j| c(if j == 0 { ai[i].1 } else { -ai[i].0 }));
        let df = CMat::from_fn(n, 2, |i, j| c(if j == 0 { ai[i].1 } else { x[i] * ai[i].0 }));
        Self::new(space.clone(), f, g, Some(df))
    }

    /// Christoffel–Darboux form of a real-line OPE kernel:
    /// `f = γ_N (p_N, −p_{N−1})`, `g = (p_{N−1}, p_N)`, on the kernel's space.
    pub fn christoffel_darboux(ope: &OpeData) -> Result<Self> {
        let dp = match (ope.kind, &ope.dpolys) {
            (OpeKind::Line, Some(dp)) => dp,
            _ => return Err(DppError::Precondition("CD form needs a real-line OPE".into())),
        };
        let (n, gam) = (ope.size, ope.gamma());
        let s = &ope.support;
        let m = s.len();
        let f = CMat::from_fn(m, 2, |a, j| {
            if j == 0 {
                ope.polys[(n, s[a])] * gam
            } else {
                -ope.polys[(n - 1, s[a])] * gam
            }
        });
        let g = CMat::from_fn(m, 2, |a, j| ope.polys[(if j == 0 { n - 1 } else { n }, s[a])]);
        let df = CMat::from_fn(m, 2, |a, j| {
            if j == 0 {
                dp[(n, s[a])] * gam
            } else {
                -dp[(n - 1, s[a])] * gam
            }
        });
        Self::new(ope.kernel.space().clone(), f, g, Some(df))
    }

    pub fn space(&self) -> &GroundSpace {
        &self.space
    }

    /// The integer `k`.
    pub fn rank(&self) -> usize {
        self.f.ncols()
    }

    pub fn f(&self) -> &CMat {
        &self.f
    }

    pub fn g(&self) -> &CMat {
        &self.g
    }

    pub fn df(&self) -> &CMat {
        &self.df
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        self.source
    }

    /// `K(x_i, x_j)`.
    pub fn eval(&self, i: usize, j: usize) -> C64 {
        if i == j {
            dot(row(&self.df, i), row(&self.g, i))
        } else {
            let x = self.space.nodes();
            dot(row(&self.f, i), row(&self.g, j)) / (x[i] - x[j])
        }
    }

    pub fn matrix(&self) -> CMat {
        let n = self.space.len();
        CMat::from_fn(n, n, |i, j| self.eval(i, j))
    }

    pub fn to_kernel(&self) -> Result<Kernel> {
        Kernel::new(self.space.clone(), self.matrix())
    }

    /// Real kernel, asserting every imaginary part is below `1e-12`.
    pub fn to_real_kernel(&self) -> Result<Kernel> {
        let m = self.matrix();
        let worst = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if worst > 1e-12 {
            return Err(DppError::Precondition(format!("imaginary residue {worst:e}")));
        }
        Kernel::new(self.space.clone(), m.map(|z| c(z.re)))
    }

    /// `max_i |f(x_i)ᵀ g(x_i)|`.
    pub fn constraint_residual(&self) -> f64 {
        (0..self.space.len())
            .map(|i| dot(row(&self.f, i), row(&self.g, i)).norm())
            .fold(0.0, f64::max)
    }

    fn kvv(&self, v: &[usize]) -> CMat {
        CMat::from_fn(v.len(), v.len(), |a, b| self.eval(v[a], v[b]))
    }
}

fn palm_tol(kvv: &CMat) -> (C64, f64) {
    (linalg::det(kvv), crate::conditioning::PALM_TOL * linalg::hadamard_bound(kvv))
}

/// `(f_v, g_v)` with `f_v(x) = f(x) − K(x,v) K(v,v)^{-1} f(v)` and
/// `g_v(y) = g(y) − g(v)ᵀ K(v,v)^{-1} K(v,y)`.
pub fn palm_update(ik: &IntegrableKernel, v: &Configuration) -> Result<IntegrableKernel> {
    let n = ik.space.len();
    v.check_within(n)?;
    let idx = v.indices();
    if idx.is_empty() {
        return Ok(ik.clone());
    }
    let kvv = ik.kvv(idx);
    let (det, tol) = palm_tol(&kvv);
    if !(det.norm() > tol) {
        return Err(DppError::NearSingularPalm { det: det.norm(), tol });
    }
    let inv = kvv
        .try_inverse()
        .ok_or(DppError::NearSingularPalm { det: det.norm(), tol })?;
    let x = ik.space.nodes();
    let fvv = CMat::from_fn(idx.len(), ik.rank(), |a, j| ik.f[(idx[a], j)]);
    let gvv = CMat::from_fn(idx.len(), ik.rank(), |a, j| ik.g[(idx[a], j)]);
    let kxv = CMat::from_fn(n, idx.len(), |i, a| ik.eval(i, idx[a]));
    let kvy = CMat::from_fn(idx.len(), n, |a, i| ik.eval(idx[a], i));
    // ∂_x K(x, v_a); its value at the pole is irrelevant because g_v(v_a) = 0
    let dkxv = CMat::from_fn(n, idx.len(), |i, a| {
        let va = idx[a];
        if i == va {
            return c(0.0);
        }
        let d = x[i] - x[va];
        let num = dot(row(&ik.df, i), row(&ik.g, va)) * d - dot(row(&ik.f, i), row(&ik.g, va));
        num / (d * d)
    });
    let coef = &inv * &fvv;
    let mut f = &ik.f - &kxv * &coef;
    let mut g = &ik.g - kvy.transpose() * inv.transpose() * &gvv;
    let df = &ik.df - dkxv * &coef;
    for &i in idx {
        f.row_mut(i).fill(c(0.0));
        g.row_mut(i).fill(c(0.0));
    }
    // the constraint holds analytically; cancellation in the tails can push the
    // relative residual past CONSTRAINT_TOL, so it is measured rather than enforced
    Ok(IntegrableKernel {
        space: ik.space.clone(),
        f,
        g,
        df,
        source: ik.source,
    })
}

/// The rational matrix `R(z) = Π_j (I + R_j / (z − v_j))` with the data for
/// its closed form `I + f(v) diag(1/(z − v)) K(v,v)^{-T} g(v)ᵀ`.
#[derive(Debug, Clone)]
pub struct RationalDressing {
    poles: Configuration,
    locations: Vec<f64>,
    residues: Vec<CMat>,
    fvv: CMat,
    gvv: CMat,
    kvv_inv_t: CMat,
}

impl RationalDressing {
    pub fn poles(&self) -> &Configuration {
        &self.poles
    }

    /// `R_j = f_{j−1}(v_j) g_{j−1}(v_j)ᵀ / K_{j−1}(v_j, v_j)` along the sorted order.
    pub fn residues(&self) -> &[CMat] {
        &self.residues
    }

    fn check_pole(&self, z: C64) -> Result<()> {
        match self.locations.iter().find(|&&p| (z - p).norm() == 0.0) {
            Some(&p) => Err(DppError::PoleEvaluation(p)),
            None => Ok(()),
        }
    }

    pub fn product(&self, z: C64) -> Result<CMat> {
        self.check_pole(z)?;
        let k = self.fvv.ncols();
        let mut r = CMat::identity(k, k);
        for (rj, &vj) in self.residues.iter().zip(&self.locations) {
            r *= CMat::identity(k, k) + rj / (z - vj);
        }
        Ok(r)
    }

    pub fn closed_form(&self, z: C64) -> Result<CMat> {
        self.check_pole(z)?;
        let k = self.fvv.ncols();
        let m = self.locations.len();
        let dz = CMat::from_fn(m, m, |a, b| if a == b { c(1.0) / (z - self.locations[a]) } else { c(0.0) });
        Ok(CMat::identity(k, k) + self.fvv.transpose() * dz * &self.kvv_inv_t * &self.gvv)
    }
}

pub fn rational_dressing(ik: &IntegrableKernel, v: &Configuration) -> Result<RationalDressing> {
    v.check_within(ik.space.len())?;
    let idx = v.indices();
    let x = ik.space.nodes();
    let mut residues = Vec::with_capacity(idx.len());
    let mut cur = ik.clone();
    for (j, &vj) in idx.iter().enumerate() {
        let kjj = cur.eval(vj, vj);
        let (det, tol) = palm_tol(&CMat::from_element(1, 1, kjj));
        if !(det.norm() > tol) {
            return Err(DppError::NearSingularPalm { det: det.norm(), tol });
        }
        let fj = cur.f.row(vj).transpose();
        let gj = cur.g.row(vj);
        residues.push(fj * gj / kjj);
        if j + 1 < idx.len() {
            cur = palm_update(&cur, &Configuration::new(vec![vj])?)?;
        }
    }
    let kvv = ik.kvv(idx);
    let (det, tol) = palm_tol(&kvv);
    if !idx.is_empty() && !(det.norm() > tol) {
        return Err(DppError::NearSingularPalm { det: det.norm(), tol });
    }
    let kvv_inv_t = kvv
        .try_inverse()
        .ok_or(DppError::NearSingularPalm { det: det.norm(), tol })?
        .transpose();
    Ok(RationalDressing {
        poles: v.clone(),
        locations: idx.iter().map(|&i| x[i]).collect(),
        residues,
        fvv: CMat::from_fn(idx.len(), ik.rank(), |a, j| ik.f[(idx[a], j)]),
        gvv: CMat::from_fn(idx.len(), ik.rank(), |a, j| ik.g[(idx[a], j)]),
        kvv_inv_t,
    })
}

/// `R(z)` as `(ordered product, closed form)`.
pub fn dressing_matrix(ik: &IntegrableKernel, v: &Configuration, z: C64) -> Result<(CMat, CMat)> {
    let rd = rational_dressing(ik, v)?;
    Ok((rd.product(z)?, rd.closed_form(z)?))
}

/// `J_Y(x_i) = I − 2πi θ(x_i) f_v(x_i) g_v(x_i)ᵀ`.
pub fn jump_matrix(ik: &IntegrableKernel, theta: &Marking, v: &Configuration, i: usize) -> Result<CMat> {
    theta.check_len(ik.space.len())?;
    let pv = palm_update(ik, v)?;
    Ok(jump_from(&pv, theta.values()[i], i))
}

fn jump_from(ik: &IntegrableKernel, t: f64, i: usize) -> CMat {
    let k = ik.rank();
    let fg = ik.f.row(i).transpose() * ik.g.row(i);
    CMat::identity(k, k) - fg * (2.0 * PI * I * t)
}

/// `max |J_Y − R^{-1} (I − 2πiθ f gᵀ) R|` over the nodes outside `v`.
pub fn jump_conjugation_residual(ik: &IntegrableKernel, theta: &Marking, v: &Configuration) -> Result<f64> {
    theta.check_len(ik.space.len())?;
    let pv = palm_update(ik, v)?;
    let rd = rational_dressing(ik, v)?;
    let x = ik.space.nodes();
    let mut worst = 0.0f64;
    for i in (0..x.len()).filter(|&i| !v.contains(i)) {
        let t = theta.values()[i];
        let r = rd.closed_form(c(x[i]))?;
        let rinv = r.clone().try_inverse().ok_or(DppError::SingularY(i))?;
        let conj = &rinv * jump_from(ik, t, i) * &r;
        worst = worst.max(linalg::max_abs(&(jump_from(&pv, t, i) - conj)));
    }
    Ok(worst)
}

/// `g_v(y)ᵀ Y(y)^{-1} Y(x) f_v(x) / (x − y)`; the diagonal uses
/// `(Y f_v)'(x)ᵀ Y(x)^{-T} g_v(x)` with `Y'` from the node stencil.
pub fn dressed_kernel(ik: &IntegrableKernel, v: &Configuration, y: &[CMat]) -> Result<Kernel> {
    let n = ik.space.len();
    if y.len() != n {
        return Err(DppError::DimensionMismatch { expected: n, got: y.len() });
    }
    let pv = palm_update(ik, v)?;
    let k = ik.rank();
    let x = ik.space.nodes();
    let mut f = CMat::zeros(n, k);
    let mut g = CMat::zeros(n, k);
    let mut df = CMat::zeros(n, k);
    for i in 0..n {
        let yi = &y[i];
        if yi.nrows() != k || yi.ncols() != k {
            return Err(DppError::DimensionMismatch { expected: k, got: yi.nrows() });
        }
        let yinv = yi.clone().try_inverse().ok_or(DppError::SingularY(i))?;
        let fi = yi * pv.f.row(i).transpose();
        let gi = yinv.transpose() * pv.g.row(i).transpose();
        let mut dy = CMat::zeros(k, k);
        if let Some(ws) = stencil(x, i) {
            for (j, w) in ws {
                dy += (&y[j] - yi) * c(w);
            }
        }
        let dfi = yi * pv.df.row(i).transpose() + dy * pv.f.row(i).transpose();
        f.set_row(i, &fi.transpose());
        g.set_row(i, &gi.transpose());
        df.set_row(i, &dfi.transpose());
    }
    let m = CMat::from_fn(n, n, |i, j| {
        if i == j {
            dot(df.row(i).iter().copied(), g.row(i).iter().copied())
        } else {
            dot(f.row(i).iter().copied(), g.row(j).iter().copied()) / (x[i] - x[j])
        }
    });
    Kernel::new(ik.space.clone(), m)
}

#[derive(Serialize, Deserialize)]
struct IntegrableRepr {
    k: usize,
    f: Vec<Vec<[f64; 2]>>,
    g: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    df: Option<Vec<Vec<[f64; 2]>>>,
    space: GroundSpace,
}

fn to_pairs(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn from_pairs(rows: &[Vec<[f64; 2]>], k: usize) -> std::result::Result<CMat, String> {
    if rows.iter().any(|r| r.len() != k) {
        return Err(format!("every sample row needs {k} entries"));
    }
    Ok(CMat::from_fn(rows.len(), k, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl Serialize for IntegrableKernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        IntegrableRepr {
            k: self.rank(),
            f: to_pairs(&self.f),
            g: to_pairs(&self.g),
            df: (self.source != DerivativeSource::NodeStencil).then(|| to_pairs(&self.df)),
            space: self.space.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntegrableKernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = IntegrableRepr::deserialize(d)?;
        let f = from_pairs(&r.f, r.k).map_err(D::Error::custom)?;
        let g = from_pairs(&r.g, r.k).map_err(D::Error::custom)?;
        let df = r.df.as_deref().map(|x| from_pairs(x, r.k)).transpose().map_err(D::Error::custom)?;
        IntegrableKernel::new(r.space, f, g, df).map_err(D::Error::custom)
    }
}

/// Real-line domain check used by constructors taking interval grids.
pub fn is_interval(space: &GroundSpace) -> bool {
    matches!(space.domain(), DomainTag::RealInterval { .. })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::palm_kernel;
    use crate::ground::Scheme;
    use crate::kernels;
    use rand::{Rng, SeedableRng};

    fn interval(a: f64, b: f64, n: usize) -> GroundSpace {
        GroundSpace::discretize(DomainTag::RealInterval { a, b }, n, Scheme::GaussLegendre).unwrap()
    }

    fn cfg(v: &[usize]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sine_integrable_matches_sine_kernel() {
        let s = interval(-3.0, 3.0, 40);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let k = kernels::sine_kernel(&s).unwrap();
        assert!(linalg::max_abs(&(ik.matrix() - k.matrix())) < 1e-12);
        assert!(ik.constraint_residual() < 1e-15);
        assert!(ik.to_real_kernel().unwrap().is_hermitian());
    }

    #[test]
    fn airy_integrable_matches_airy_kernel() {
        let s = interval(-6.0, 4.0, 30);
        let ik = IntegrableKernel::airy(&s).unwrap();
        let k = kernels::airy_kernel(&s).unwrap();
        assert!(linalg::max_abs(&(ik.matrix() - k.matrix())) < 1e-14);
    }

    #[test]
    fn cd_integrable_matches_ope() {
        let s = interval(-4.0, 4.0, 50);
        let ope = kernels::ope_kernel(|x| (-x * x).exp(), 6, &s).unwrap();
        let ik = IntegrableKernel::christoffel_darboux(&ope).unwrap();
        let sw: Vec<f64> = ope.support.iter().map(|&i| ope.weight[i].sqrt()).collect();
        let diff = linalg::scale(&(ik.matrix() - ope.kernel.matrix()), &sw, &sw);
        assert!(linalg::max_abs(&diff) < 1e-10);
    }

    #[test]
    fn constraint_enforced() {
        let s = interval(0.0, 1.0, 3);
        let f = CMat::from_element(3, 2, c(1.0));
        let g = CMat::from_element(3, 2, c(1.0));
        assert!(matches!(
            IntegrableKernel::new(s, f, g, None),
            Err(DppError::ConstraintViolation { index: 0, .. })
        ));
    }

    #[test]
    fn finite_difference_diagonals() {
        let s = interval(-2.0, 2.0, 41);
        let fd = IntegrableKernel::from_fn(
            &s,
            |x| vec![C64::from_polar(1.0, PI * x) / (2.0 * PI * I), C64::from_polar(1.0, -PI * x) / (2.0 * PI * I)],
            |y| vec![C64::from_polar(1.0, -PI * y), -C64::from_polar(1.0, PI * y)],
        )
        .unwrap();
        assert_eq!(fd.derivative_source(), DerivativeSource::Difference);
        for i in 0..41 {
            assert!((fd.eval(i, i) - c(1.0)).norm() < 1e-9);
        }
        let exact = IntegrableKernel::sine(&s).unwrap();
        let nodes = IntegrableKernel::new(s.clone(), exact.f().clone(), exact.g().clone(), None).unwrap();
        assert_eq!(nodes.derivative_source(), DerivativeSource::NodeStencil);
        for i in 0..41 {
            assert!((nodes.eval(i, i) - c(1.0)).norm() < 5e-2);
        }
        let tiny = GroundSpace::new(DomainTag::RealInterval { a: 0.0, b: 1.0 }, vec![0.2, 0.8], vec![0.5, 0.5]).unwrap();
        let ik1 = IntegrableKernel::sine(&tiny).unwrap();
        assert!(matches!(
            IntegrableKernel::new(tiny, ik1.f().clone(), ik1.g().clone(), None),
            Err(DppError::DerivativeUnavailable(0))
        ));
    }

    #[test]
    fn palm_update_matches_matrix_palm() {
        let s = interval(-3.0, 3.0, 50);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let k = ik.to_kernel().unwrap();
        for v in [cfg(&[]), cfg(&[25]), cfg(&[10, 33]), cfg(&[4, 20, 41])] {
            let pv = palm_update(&ik, &v).unwrap();
            let mat = palm_kernel(&k, &v).unwrap();
            let diff = linalg::max_abs(&(pv.matrix() - mat.kernel().matrix()));
            assert!(diff < 1e-10, "{v:?}: {diff:e}");
            assert!(pv.constraint_residual() < 1e-12);
            for &j in v.indices() {
                assert!(pv.f().row(j).norm() == 0.0 && pv.g().row(j).norm() == 0.0);
            }
        }
    }

    #[test]
    fn iterated_palm_update() {
        let s = interval(-3.0, 3.0, 30);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let a = palm_update(&palm_update(&ik, &cfg(&[7])).unwrap(), &cfg(&[19])).unwrap();
        let b = palm_update(&ik, &cfg(&[7, 19])).unwrap();
        assert!(linalg::max_abs(&(a.matrix() - b.matrix())) < 1e-10);
    }

    #[test]
    fn dressing_identities() {
        let s = interval(-3.0, 3.0, 40);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let (id, idc) = dressing_matrix(&ik, &Configuration::empty(), C64::new(0.3, 0.2)).unwrap();
        assert_eq!(id, CMat::identity(2, 2));
        assert_eq!(idc, CMat::identity(2, 2));
        let v = cfg(&[5, 18, 30]);
        let rd = rational_dressing(&ik, &v).unwrap();
        for r in rd.residues() {
            assert!(linalg::max_abs(&(r * r)) < 1e-12);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let z = C64::new(rng.random_range(-4.0..4.0), rng.random_range(-1.0..1.0));
            let (p, cf) = (rd.product(z).unwrap(), rd.closed_form(z).unwrap());
            assert!(linalg::max_abs(&(&p - &cf)) < 1e-10);
            assert!((linalg::det(&p) - c(1.0)).norm() < 1e-10);
        }
        let pv = palm_update(&ik, &v).unwrap();
        let x = s.nodes();
        for i in (0..40).filter(|i| !v.contains(*i)) {
            let r = rd.closed_form(c(x[i])).unwrap();
            let fv = r.clone().try_inverse().unwrap() * ik.f().row(i).transpose();
            let gv = ik.g().row(i) * &r;
            assert!((fv - pv.f().row(i).transpose()).iter().all(|z| z.norm() < 1e-10));
            assert!((gv - pv.g().row(i)).iter().all(|z| z.norm() < 1e-10));
        }
        assert!(matches!(rd.product(c(x[18])), Err(DppError::PoleEvaluation(_))));
    }

    #[test]
    fn dressing_is_order_independent() {
        let s = interval(-3.0, 3.0, 40);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let z = C64::new(0.1, 0.7);
        let a = rational_dressing(&ik, &cfg(&[5, 30])).unwrap().product(z).unwrap();
        // reversed order built by hand from the residues of the reversed Palm chain
        let first = palm_update(&ik, &cfg(&[30])).unwrap();
        let x = s.nodes();
        let r30 = ik.f().row(30).transpose() * ik.g().row(30) / ik.eval(30, 30);
        let r5 = first.f().row(5).transpose() * first.g().row(5) / first.eval(5, 5);
        let id = CMat::identity(2, 2);
        let b = (&id + r30 / (z - x[30])) * (&id + r5 / (z - x[5]));
        assert!(linalg::max_abs(&(a - b)) < 1e-10);
    }

    #[test]
    fn jump_matrix_identities() {
        let s = interval(-3.0, 3.0, 40);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let th = Marking::from_fn(&s, |x| 0.5 + 0.4 * (x / 3.0)).unwrap();
        let v = cfg(&[12, 27]);
        for i in [0, 13, 39] {
            let j = jump_matrix(&ik, &th, &v, i).unwrap();
            assert!((linalg::det(&j) - c(1.0)).norm() < 1e-12);
        }
        assert!(jump_conjugation_residual(&ik, &th, &v).unwrap() < 1e-10);
        let zero = jump_matrix(&ik, &Marking::zero(40), &v, 3).unwrap();
        assert_eq!(zero, CMat::identity(2, 2));
    }

    #[test]
    fn trivial_dressing_recovers_palm_kernel() {
        let s = interval(-3.0, 3.0, 30);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let v = cfg(&[9, 20]);
        let pv = palm_update(&ik, &v).unwrap().to_kernel().unwrap();
        let ident = vec![CMat::identity(2, 2); 30];
        let dk = dressed_kernel(&ik, &v, &ident).unwrap();
        assert_eq!(dk.matrix(), pv.matrix());
        let cst = CMat::from_row_slice(2, 2, &[c(2.0), C64::new(0.5, 1.0), c(-1.0), c(3.0)]);
        let dk2 = dressed_kernel(&ik, &v, &vec![cst; 30]).unwrap();
        assert!(linalg::max_abs(&(dk2.matrix() - pv.matrix())) < 1e-12);
        let mut bad = ident.clone();
        bad[4] = CMat::zeros(2, 2);
        assert!(matches!(dressed_kernel(&ik, &v, &bad), Err(DppError::SingularY(4))));
    }

    #[test]
    fn dressed_diagonal_matches_limit() {
        // Y(x) varying smoothly; the diagonal must match the off-diagonal limit.
        let s = interval(-2.0, 2.0, 200);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let x = s.nodes();
        let y: Vec<CMat> = x
            .iter()
            .map(|&t| CMat::from_row_slice(2, 2, &[c(1.0), c(0.3 * t), c(0.0), c(1.0)]))
            .collect();
        let dk = dressed_kernel(&ik, &Configuration::empty(), &y).unwrap();
        for i in [50, 100, 150] {
            // cubic through K(x_i, x_j), j = i±1, i±2, evaluated at x_i
            let js = [i - 2, i - 1, i + 1, i + 2];
            let lim: C64 = js
                .iter()
                .map(|&j| {
                    let l: f64 = js.iter().filter(|&&m| m != j).map(|&m| (x[i] - x[m]) / (x[j] - x[m])).product();
                    dk.at(i, j) * l
                })
                .sum();
            assert!((dk.at(i, i) - lim).norm() < 1e-5, "{} vs {}", dk.at(i, i), lim);
        }
    }

    #[test]
    fn json_round_trip() {
        let s = interval(-1.0, 1.0, 5);
        let ik = IntegrableKernel::sine(&s).unwrap();
        let v = serde_json::to_value(&ik).unwrap();
        assert_eq!(v["k"], 2);
        let back: IntegrableKernel = serde_json::from_value(v).unwrap();
        assert_eq!(back, ik);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn palm_preserves_constraint(a in 0usize..30, b in 0usize..30) {
                prop_assume!(a != b);
                let s = interval(-3.0, 3.0, 30);
                let ik = IntegrableKernel::sine(&s).unwrap();
                let v = Configuration::from_unsorted(vec![a, b]).unwrap();
                let pv = palm_update(&ik, &v).unwrap();
                prop_assert!(pv.constraint_residual() < 1e-12);
            }
        }
    }
}
