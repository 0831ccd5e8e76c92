//! Ground spaces, point configurations and markings.
//!
//! A [`GroundSpace`] is the discrete stand-in for a measure space: sorted,
//! distinct nodes with strictly positive quadrature weights. Continuum
//! domains enter through [`GroundSpace::discretize`]; unbounded lines are
//! truncated to an interval chosen by the caller.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{DppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainTag {
    FiniteSet,
    RealInterval { a: f64, b: f64 },
    UnitCircle,
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainTag::FiniteSet => write!(f, "finite-set"),
            DomainTag::RealInterval { a, b } => write!(f, "real-interval({a},{b})"),
            DomainTag::UnitCircle => write!(f, "unit-circle"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GaussLegendre,
    TrapezoidCircle,
    UniformFinite,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::GaussLegendre => "gauss-legendre",
            Scheme::TrapezoidCircle => "trapezoid-circle",
            Scheme::UniformFinite => "uniform-finite",
        };
        f.write_str(s)
    }
}

/// Nodes and positive weights standing in for `(Λ, μ)`.
///
/// On the unit circle nodes are angles in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct GroundSpace {
    domain: DomainTag,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSpace {
    domain: DomainTag,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawSpace> for GroundSpace {
    type Error = DppError;

    fn try_from(raw: RawSpace) -> Result<Self> {
        GroundSpace::new(raw.domain, raw.nodes, raw.weights)
    }
}

impl GroundSpace {
    pub fn new(domain: DomainTag, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(DppError::DimensionMismatch {
                expected: nodes.len(),
                got: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(DppError::InvalidSpace(format!(
                    "weight {w} at node {i} is not strictly positive"
                )));
            }
        }
        for (i, &x) in nodes.iter().enumerate() {
            if !x.is_finite() {
                return Err(DppError::InvalidSpace(format!("node {i} is not finite")));
            }
        }
        if nodes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(DppError::InvalidSpace(
                "nodes must be strictly increasing".into(),
            ));
        }
        if domain == DomainTag::UnitCircle && nodes.iter().any(|&t| !(0.0..2.0 * PI).contains(&t)) {
            return Err(DppError::InvalidSpace(
                "circle angles must lie in [0, 2π)".into(),
            ));
        }
        Ok(Self {
            domain,
            nodes,
            weights,
        })
    }

    /// Builds the quadrature rule `scheme` with `n` nodes on `domain`.
    pub fn discretize(domain: DomainTag, n: usize, scheme: Scheme) -> Result<Self> {
        let n_nz = NonZeroUsize::new(n).ok_or(DppError::ZeroNodes)?;
        let mismatch = || DppError::InvalidScheme {
            scheme: scheme.to_string(),
            domain: domain.to_string(),
        };
        match (scheme, domain) {
            (Scheme::GaussLegendre, DomainTag::RealInterval { a, b }) => {
                if !(a < b) {
                    return Err(DppError::InvalidSpace(format!("empty interval ({a},{b})")));
                }
                let rule = GaussLegendre::new(n_nz);
                let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
                let mut pairs: Vec<(f64, f64)> =
                    rule.iter().map(|(x, w)| (mid + half * x, half * w)).collect();
                pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
                let (nodes, weights) = pairs.into_iter().unzip();
                Self::new(domain, nodes, weights)
            }
            (Scheme::TrapezoidCircle, DomainTag::UnitCircle) => {
                let h = 2.0 * PI / n as f64;
                let nodes = (0..n).map(|k| k as f64 * h).collect();
                Self::new(domain, nodes, vec![h; n])
            }
            (Scheme::UniformFinite, DomainTag::FiniteSet) => {
                let nodes = (0..n).map(|k| k as f64).collect();
                Self::new(domain, nodes, vec![1.0; n])
            }
            _ => Err(mismatch()),
        }
    }

    /// Finite set with the given labels and weights.
    pub fn finite(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(DomainTag::FiniteSet, nodes, weights)
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same nodes, new weights (e.g. `w(x_i)·w_i` for a weighted reference measure).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.domain, self.nodes.clone(), weights)
    }

    /// `Σ f(x_i) w_i`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }

    /// Restriction to the nodes selected by `keep`, with the index map back
    /// into `self`.
    pub fn restrict(&self, keep: impl Fn(f64) -> bool) -> (GroundSpace, Vec<usize>) {
        let index: Vec<usize> = (0..self.len()).filter(|&i| keep(self.nodes[i])).collect();
        let sub = GroundSpace {
            domain: self.domain,
            nodes: index.iter().map(|&i| self.nodes[i]).collect(),
            weights: index.iter().map(|&i| self.weights[i]).collect(),
        };
        (sub, index)
    }

    /// Index of the node closest to `x` (angles compared on the circle).
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let dist = |y: f64| match self.domain {
            DomainTag::UnitCircle => {
                let d = (x - y).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d)
            }
            _ => (x - y).abs(),
        };
        (0..self.len()).min_by(|&i, &j| dist(self.nodes[i]).total_cmp(&dist(self.nodes[j])))
    }
}

/// A simple point configuration: strictly increasing node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Configuration(Vec<usize>);

impl TryFrom<Vec<usize>> for Configuration {
    type Error = DppError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Configuration::new(v)
    }
}

impl From<Configuration> for Vec<usize> {
    fn from(c: Configuration) -> Self {
        c.0
    }
}

impl Configuration {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(DppError::InvalidConfiguration(format!(
                "indices {indices:?} are not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    /// Sorts the indices; repeated indices are rejected.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_disjoint(&self, other: &Configuration) -> bool {
        self.0.iter().all(|&i| !other.contains(i))
    }

    /// Union of two disjoint configurations; `None` if they share a node.
    pub fn disjoint_union(&self, other: &Configuration) -> Option<Configuration> {
        if !self.is_disjoint(other) {
            return None;
        }
        let mut all = self.0.clone();
        all.extend_from_slice(&other.0);
        all.sort_unstable();
        Some(Configuration(all))
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= n => Err(DppError::InvalidConfiguration(format!(
                "index {last} out of range for {n} nodes"
            ))),
            _ => Ok(()),
        }
    }
}

/// Observation probabilities `θ_i ∈ [0, 1]`, one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Marking(Vec<f64>);

impl TryFrom<Vec<f64>> for Marking {
    type Error = DppError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Marking::new(v)
    }
}

impl From<Marking> for Vec<f64> {
    fn from(m: Marking) -> Self {
        m.0
    }
}

impl Marking {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        for (index, &value) in theta.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(DppError::InvalidMarking { index, value });
            }
        }
        Ok(Self(theta))
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_fn(space: &GroundSpace, theta: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(space.nodes().iter().map(|&x| theta(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights of `μ₁^θ = θ μ`.
    pub fn mark1_weights(&self, space: &GroundSpace) -> Vec<f64> {
        self.0.iter().zip(space.weights()).map(|(t, w)| t * w).collect()
    }

    /// Weights of `μ₀^θ = (1 − θ) μ`.
    pub fn mark0_weights(&self, space: &GroundSpace) -> Vec<f64> {
        self.0
            .iter()
            .zip(space.weights())
            .map(|(t, w)| (1.0 - t) * w)
            .collect()
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(DppError::DimensionMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Split of a configuration into unobserved (mark 0) and observed (mark 1) points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedConfiguration {
    pub zeros: Configuration,
    pub ones: Configuration,
}

impl MarkedConfiguration {
    pub fn new(zeros: Configuration, ones: Configuration) -> Result<Self> {
        if !zeros.is_disjoint(&ones) {
            return Err(DppError::InvalidConfiguration(
                "mark 0 and mark 1 points overlap".into(),
            ));
        }
        Ok(Self { zeros, ones })
    }

    pub fn ground(&self) -> Configuration {
        self.zeros
            .disjoint_union(&self.ones)
            .expect("marked parts are disjoint")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_gauss_legendre() {
        let s = GroundSpace::discretize(
            DomainTag::RealInterval { a: -1.0, b: 1.0 },
            2,
            Scheme::GaussLegendre,
        )
        .unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(s.nodes()[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.nodes()[1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.weights()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn circle_trapezoid() {
        let s = GroundSpace::discretize(DomainTag::UnitCircle, 4, Scheme::TrapezoidCircle).unwrap();
        for (k, (&t, &w)) in s.nodes().iter().zip(s.weights()).enumerate() {
            assert_abs_diff_eq!(t, k as f64 * PI / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(w, PI / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn weight_sum_on_unit_interval() {
        let s = GroundSpace::discretize(
            DomainTag::RealInterval { a: 0.0, b: 1.0 },
            10,
            Scheme::GaussLegendre,
        )
        .unwrap();
        assert_abs_diff_eq!(s.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn polynomial_exactness() {
        let s = GroundSpace::discretize(
            DomainTag::RealInterval { a: -2.0, b: 3.0 },
            6,
            Scheme::GaussLegendre,
        )
        .unwrap();
        // degree 11 = 2n - 1
        let exact = (3f64.powi(12) - 2f64.powi(12)) / 12.0;
        assert_abs_diff_eq!(s.integrate(|x| x.powi(11)), exact, epsilon = 1e-12 * exact.abs());
    }

    #[test]
    fn scheme_domain_mismatch() {
        assert!(matches!(
            GroundSpace::discretize(DomainTag::UnitCircle, 4, Scheme::GaussLegendre),
            Err(DppError::InvalidScheme { .. })
        ));
        assert!(matches!(
            GroundSpace::discretize(
                DomainTag::RealInterval { a: 0.0, b: 1.0 },
                4,
                Scheme::TrapezoidCircle
            ),
            Err(DppError::InvalidScheme { .. })
        ));
        assert_eq!(
            GroundSpace::discretize(DomainTag::FiniteSet, 0, Scheme::UniformFinite),
            Err(DppError::ZeroNodes)
        );
    }

    #[test]
    fn restrictions() {
        let s = GroundSpace::discretize(
            DomainTag::RealInterval { a: -1.0, b: 1.0 },
            9,
            Scheme::GaussLegendre,
        )
        .unwrap();
        let (all, idx) = s.restrict(|_| true);
        assert_eq!(all, s);
        assert_eq!(idx, (0..9).collect::<Vec<_>>());
        let (none, idx) = s.restrict(|_| false);
        assert!(none.is_empty() && idx.is_empty());
        let (pos, idx) = s.restrict(|x| x > 0.1);
        assert_eq!(idx, vec![5, 6, 7, 8]);
        assert!(pos.nodes().iter().all(|&x| x > 0.0));
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(pos.weights()[k], s.weights()[i]);
        }
    }

    #[test]
    fn rejects_ties_and_bad_weights() {
        assert!(GroundSpace::finite(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GroundSpace::finite(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(Configuration::new(vec![2, 1]).is_err());
        assert!(Configuration::from_unsorted(vec![3, 1, 3]).is_err());
        assert!(Marking::new(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn json_shape() {
        let s = GroundSpace::finite(vec![0.1, 0.7], vec![0.25, 1.0 / 3.0]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["domain"], "finite-set");
        let back: GroundSpace = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::json!({"domain": "finite-set", "nodes": [1.0, 0.0], "weights": [1.0, 1.0]});
        assert!(serde_json::from_value::<GroundSpace>(bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nested_restriction_is_conjunction(n in 1usize..60, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
                let s = GroundSpace::discretize(
                    DomainTag::RealInterval { a: -1.0, b: 1.0 }, n, Scheme::GaussLegendre).unwrap();
                let (outer, idx1) = s.restrict(|x| x > c1);
                let (inner, idx2) = outer.restrict(|x| x < c2);
                let (direct, idx) = s.restrict(|x| x > c1 && x < c2);
                prop_assert_eq!(inner, direct);
                let composed: Vec<usize> = idx2.iter().map(|&j| idx1[j]).collect();
                prop_assert_eq!(composed, idx);
            }

            #[test]
            fn gauss_legendre_exact_to_degree(n in 1usize..40, k in 0usize..79) {
                prop_assume!(k < 2 * n);
                let s = GroundSpace::discretize(
                    DomainTag::RealInterval { a: 0.0, b: 1.0 }, n, Scheme::GaussLegendre).unwrap();
                let exact = 1.0 / (k as f64 + 1.0);
                prop_assert!((s.integrate(|x| x.powi(k as i32)) - exact).abs() < 1e-12);
            }
        }
    }
}
