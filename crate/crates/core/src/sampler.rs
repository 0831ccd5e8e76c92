//! Exact sampling of hermitian DPPs on a grid and Monte Carlo estimators.
//!
//! Sample `s` of a batch draws from `ChaCha20` seeded with the batch seed and
//! switched to stream `s`, so batches do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::conditional_kernel;
use crate::error::{DppError, Result};
use crate::ground::{Configuration, MarkedConfiguration, Marking};
use crate::kernels::Kernel;
use crate::linalg::{self, CMat, C64};

/// Eigenvalues within this distance of `[0, 1]` are clipped.
pub const EIGEN_WINDOW: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch<C = Configuration> {
    pub configurations: Vec<C>,
    pub seed: u64,
    pub count: usize,
}

fn stream(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Spectral data of `W^{1/2} K W^{1/2}` prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    lambda: Vec<f64>,
    vectors: CMat,
}

impl SpectralSampler {
    pub fn new(k: &Kernel) -> Result<Self> {
        k.require_hermitian()?;
        let (mut lambda, vectors) = linalg::weighted_eigen(k.matrix(), k.weights());
        for l in lambda.iter_mut() {
            if *l < -EIGEN_WINDOW || *l > 1.0 + EIGEN_WINDOW {
                return Err(DppError::EigenvalueOutOfRange(*l));
            }
            *l = l.clamp(0.0, 1.0);
        }
        Ok(Self { lambda, vectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// One configuration: Bernoulli selection of eigenvectors, then the
    /// projection DPP on their span point by point.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Configuration {
        let n = self.vectors.nrows();
        let chosen: Vec<usize> = (0..self.lambda.len())
            .filter(|&j| rng.random::<f64>() < self.lambda[j])
            .collect();
        let mut basis: Vec<Vec<C64>> = chosen
            .iter()
            .map(|&j| self.vectors.column(j).iter().copied().collect())
            .collect();
        let mut points = Vec::with_capacity(basis.len());
        while !basis.is_empty() {
            let k = basis.len();
            let probs: Vec<f64> = (0..n).map(|i| basis.iter().map(|b| b[i].norm_sqr()).sum::<f64>()).collect();
            let total: f64 = probs.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &p) in probs.iter().enumerate() {
                if u < p {
                    pick = i;
                    break;
                }
                u -= p;
            }
            points.push(pick);
            // eliminate the coordinate `pick` using the vector with the largest entry there
            let pivot = (0..k)
                .max_by(|&a, &b| basis[a][pick].norm().total_cmp(&basis[b][pick].norm()))
                .unwrap_or(0);
            let pv = basis.swap_remove(pivot);
            for b in basis.iter_mut() {
                let r = b[pick] / pv[pick];
                b.iter_mut().zip(&pv).for_each(|(x, p)| *x -= p * r);
                b[pick] = C64::new(0.0, 0.0);
            }
            // Gram–Schmidt, twice for stability
            for _ in 0..2 {
                for a in 0..basis.len() {
                    for c in 0..a {
                        let h: C64 = basis[a].iter().zip(&basis[c]).map(|(x, y)| y.conj() * x).sum();
                        let (head, tail) = basis.split_at_mut(a);
                        tail[0].iter_mut().zip(&head[c]).for_each(|(x, y)| *x -= y * h);
                    }
                    let nrm = basis[a].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    basis[a].iter_mut().for_each(|z| *z /= nrm);
                }
            }
        }
        Configuration::from_unsorted(points).expect("distinct sampled points")
    }

    pub fn batch(&self, seed: u64, count: usize) -> SampleBatch {
        let configurations = (0..count)
            .into_par_iter()
            .map(|s| self.draw(&mut stream(seed, s)))
            .collect();
        SampleBatch {
            configurations,
            seed,
            count,
        }
    }
}

pub fn sample_dpp(k: &Kernel, seed: u64, count: usize) -> Result<SampleBatch> {
    Ok(SpectralSampler::new(k)?.batch(seed, count))
}

/// Independent Bernoulli(`θ`) marks; sample `s` uses stream `s` of `seed`.
pub fn mark_sample(batch: &SampleBatch, theta: &Marking, seed: u64) -> Result<SampleBatch<MarkedConfiguration>> {
    let t = theta.values();
    let configurations = batch
        .configurations
        .par_iter()
        .enumerate()
        .map(|(s, cfg)| {
            cfg.check_within(t.len())?;
            let mut rng = stream(seed, s);
            let (mut ones, mut zeros) = (Vec::new(), Vec::new());
            for &i in cfg.indices() {
                if rng.random::<f64>() < t[i] {
                    ones.push(i);
                } else {
                    zeros.push(i);
                }
            }
            MarkedConfiguration::new(Configuration::new(zeros)?, Configuration::new(ones)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        configurations,
        seed,
        count: batch.count,
    })
}

/// Samples `ξ₀` given `ξ₁ = v` through the symmetrized conditional kernel.
pub fn sample_conditional(
    k: &Kernel,
    theta: &Marking,
    v: &Configuration,
    seed: u64,
    count: usize,
) -> Result<SampleBatch> {
    let ck = conditional_kernel(k, theta, v)?;
    let sym = ck
        .symmetrized()
        .ok_or_else(|| DppError::NonHermitian(linalg::hermitian_defect(k.matrix())))?;
    sample_dpp(sym, seed, count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "values")]
pub enum Statistic {
    /// `|ξ|`.
    Count,
    /// `Σ_{x∈ξ} f(x)`.
    Linear(Vec<f64>),
    /// `Π_{x∈ξ} (1 − φ(x))`.
    Multiplicative(Vec<f64>),
}

impl Statistic {
    pub fn eval(&self, cfg: &Configuration) -> f64 {
        let idx = cfg.indices();
        match self {
            Statistic::Count => idx.len() as f64,
            Statistic::Linear(f) => idx.iter().map(|&i| f[i]).sum(),
            Statistic::Multiplicative(phi) => idx.iter().map(|&i| 1.0 - phi[i]).product(),
        }
    }
}

/// Sample mean and its jackknife standard error (for a mean this is `s / √n`).
pub fn estimate(batch: &SampleBatch, statistic: &Statistic) -> Result<(f64, f64)> {
    let n = batch.configurations.len();
    if n == 0 {
        return Err(DppError::EmptyBatch);
    }
    let vals: Vec<f64> = batch.configurations.iter().map(|c| statistic.eval(c)).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

fn join(idx: &[usize], sep: &str) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(sep)
}

impl SampleBatch {
    /// `# key=value` header, then one row of sorted node indices per configuration.
    pub fn to_csv(&self, params: &[(&str, String)]) -> String {
        let mut out = header(self.seed, self.count, params);
        for c in &self.configurations {
            out.push_str(&join(c.indices(), ","));
            out.push('\n');
        }
        out
    }
}

impl SampleBatch<MarkedConfiguration> {
    /// Rows `zeros,ones` with indices inside each field separated by spaces.
    pub fn to_csv(&self, params: &[(&str, String)]) -> String {
        let mut out = header(self.seed, self.count, params);
        out.push_str("unobserved,observed\n");
        for c in &self.configurations {
            out.push_str(&format!("{},{}\n", join(c.zeros.indices(), " "), join(c.ones.indices(), " ")));
        }
        out
    }
}

fn header(seed: u64, count: usize, params: &[(&str, String)]) -> String {
    let mut h = format!("# seed={seed} count={count}");
    for (k, v) in params {
        h.push_str(&format!(" {k}={v}"));
    }
    h.push('\n');
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{DomainTag, GroundSpace, Scheme};
    use crate::kernels;
    use crate::linalg::c;
    use approx::assert_abs_diff_eq;

    fn interval(a: f64, b: f64, n: usize) -> GroundSpace {
        GroundSpace::discretize(DomainTag::RealInterval { a, b }, n, Scheme::GaussLegendre).unwrap()
    }

    fn rank_one(n: usize) -> (Kernel, Vec<f64>) {
        let s = interval(0.0, 1.0, n);
        let phi: Vec<f64> = s.nodes().iter().map(|x| 1.0 + 2.0 * x).collect();
        let nrm: f64 = phi.iter().zip(s.weights()).map(|(p, w)| p * p * w).sum();
        let law: Vec<f64> = phi.iter().zip(s.weights()).map(|(p, w)| p * p * w / nrm).collect();
        (Kernel::from_real_fn(s, |i, j| phi[i] * phi[j] / nrm).unwrap(), law)
    }

    #[test]
    fn rank_one_location_law() {
        let (k, law) = rank_one(6);
        let batch = sample_dpp(&k, 11, 100_000).unwrap();
        let mut counts = [0usize; 6];
        for cfg in &batch.configurations {
            assert_eq!(cfg.len(), 1);
            counts[cfg.indices()[0]] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&law)
            .map(|(&o, &p)| {
                let e = p * 100_000.0;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // χ²(5) upper 0.001 quantile
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    #[test]
    fn zero_kernel_is_empty() {
        let s = interval(0.0, 1.0, 5);
        let k = Kernel::new(s, CMat::zeros(5, 5)).unwrap();
        let b = sample_dpp(&k, 1, 100).unwrap();
        assert!(b.configurations.iter().all(Configuration::is_empty));
    }

    #[test]
    fn projection_sample_size() {
        let s = interval(-5.0, 5.0, 60);
        let ope = kernels::ope_kernel(|x| (-x * x).exp(), 7, &s).unwrap();
        let b = sample_dpp(&ope.kernel, 5, 500).unwrap();
        assert!(b.configurations.iter().all(|c| c.len() == 7));
        assert_eq!(estimate(&b, &Statistic::Count).unwrap(), (7.0, 0.0));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let k = kernels::sine_kernel(&interval(0.0, 4.0, 40)).unwrap();
        let a = sample_dpp(&k, 42, 200).unwrap();
        let b = sample_dpp(&k, 42, 200).unwrap();
        let c2 = sample_dpp(&k, 43, 200).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.configurations, c2.configurations);
    }

    #[test]
    fn out_of_range_eigenvalues_rejected() {
        let s = interval(0.0, 1.0, 3);
        let k = Kernel::new(s, CMat::identity(3, 3) * c(5.0)).unwrap();
        assert!(matches!(sample_dpp(&k, 0, 1), Err(DppError::EigenvalueOutOfRange(_))));
    }

    #[test]
    fn marking_extremes() {
        let (k, _) = rank_one(5);
        let b = sample_dpp(&k, 3, 1000).unwrap();
        let all = mark_sample(&b, &Marking::constant(5, 1.0).unwrap(), 9).unwrap();
        for (m, g) in all.configurations.iter().zip(&b.configurations) {
            assert_eq!(&m.ones, g);
            assert!(m.zeros.is_empty());
        }
        let half = mark_sample(&sample_dpp(&k, 4, 20_000).unwrap(), &Marking::constant(5, 0.5).unwrap(), 9).unwrap();
        let freq = half.configurations.iter().filter(|m| !m.ones.is_empty()).count() as f64 / 20_000.0;
        let sd = (0.25f64 / 20_000.0).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sd + 1e-12, "{freq}");
    }

    #[test]
    fn linear_and_multiplicative_estimates() {
        let s = interval(-2.0, 2.0, 40);
        let k = kernels::sine_kernel(&s).unwrap();
        let b = sample_dpp(&k, 77, 20_000).unwrap();
        let f: Vec<f64> = s.nodes().iter().map(|x| x * x).collect();
        let (m, se) = estimate(&b, &Statistic::Linear(f.clone())).unwrap();
        let (exact, _) = kernels::linear_statistic_moments(&k, &f).unwrap();
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se} vs {exact}");
        let phi: Vec<f64> = s.nodes().iter().map(|x| if x.abs() < 0.7 { 0.8 } else { 0.0 }).collect();
        let (m, se) = estimate(&b, &Statistic::Multiplicative(phi.clone())).unwrap();
        let fd = crate::conditioning::fredholm_det(&k, &phi).unwrap().re;
        assert!((m - fd).abs() < 3.0 * se, "{m} ± {se} vs {fd}");
    }

    #[test]
    fn conditional_sampling_of_projection_has_fixed_count() {
        let s = interval(-5.0, 5.0, 60);
        let ope = kernels::ope_kernel(|x| (-x * x).exp(), 5, &s).unwrap();
        let th = Marking::from_fn(ope.kernel.space(), |x| if x.abs() > 1.0 { 1.0 } else { 0.4 }).unwrap();
        let v = Configuration::new(vec![10, 45]).unwrap();
        let ck = conditional_kernel(&ope.kernel, &th, &v).unwrap();
        let expected = ck.trace().re.round() as usize;
        let b = sample_conditional(&ope.kernel, &th, &v, 8, 300).unwrap();
        assert!(b.configurations.iter().all(|c| c.len() == expected));
        assert!(b.configurations.iter().all(|c| c.is_disjoint(&v)));
    }

    #[test]
    fn conditional_with_no_information_matches_plain() {
        let k = kernels::sine_kernel(&interval(0.0, 3.0, 20)).unwrap();
        let a = sample_conditional(&k, &Marking::zero(20), &Configuration::empty(), 5, 50).unwrap();
        let b = sample_dpp(&k, 5, 50).unwrap();
        let (ma, _) = estimate(&a, &Statistic::Count).unwrap();
        let (mb, _) = estimate(&b, &Statistic::Count).unwrap();
        assert_abs_diff_eq!(ma, mb, epsilon = 0.3);
    }

    #[test]
    fn empty_batch_and_csv() {
        let empty = SampleBatch {
            configurations: vec![],
            seed: 0,
            count: 0,
        };
        assert_eq!(estimate(&empty, &Statistic::Count), Err(DppError::EmptyBatch));
        let b = SampleBatch {
            configurations: vec![Configuration::new(vec![1, 4]).unwrap(), Configuration::empty()],
            seed: 3,
            count: 2,
        };
        assert_eq!(b.to_csv(&[("kernel", "sine".into())]), "# seed=3 count=2 kernel=sine\n1,4\n\n");
    }
}
