//! One module per verb. Each reads typed parameters (with defaults) from the
//! config, runs, and returns a [`Report`].

pub mod condition;
pub mod fredholm;
pub mod gue;
pub mod integrable_check;
pub mod jacobi;
pub mod oracle_check;
pub mod palm;
pub mod rigidity;
pub mod sample;
pub mod scaling;

use dppc_core::{CMat, Configuration, GroundSpace, Kernel, Marking, C64};
use rand::Rng;

use crate::config::{ExperimentConfig, Verb};
use crate::error::Result;
use crate::report::Report;

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        Verb::Rigidity => rigidity::run(cfg),
        Verb::GueDeform => gue::run(cfg),
        Verb::Scaling => scaling::run(cfg),
        Verb::Jacobi => jacobi::run(cfg),
        Verb::Condition => condition::run(cfg),
        Verb::Fredholm => fredholm::run(cfg),
        Verb::Sample => sample::run(cfg),
        Verb::IntegrableCheck => integrable_check::run(cfg),
        Verb::OracleCheck => oracle_check::run(cfg),
        Verb::Palm => palm::run(cfg),
    }
}

/// Hermitian kernel on `n` labelled points with weights in `[0.5, 1.5)` and
/// weighted spectrum drawn uniformly from `[0, 1]`.
pub fn random_kernel<R: Rng>(n: usize, rng: &mut R) -> Result<Kernel> {
    let a = CMat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let q = a.qr().q();
    let lambda: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let s = CMat::from_fn(n, n, |i, j| {
        (0..n).map(|k| q[(i, k)] * q[(j, k)].conj() * lambda[k]).sum::<C64>() / (w[i] * w[j]).sqrt()
    });
    let space = GroundSpace::finite((0..n).map(|i| i as f64).collect(), w)?;
    Ok(Kernel::new(space, s)?)
}

/// Marks uniform in `[0, 1)`.
pub fn random_marking<R: Rng>(n: usize, rng: &mut R) -> Result<Marking> {
    Ok(Marking::new((0..n).map(|_| rng.random::<f64>()).collect())?)
}

/// A uniformly chosen subset of size at most `max`.
pub fn random_subset<R: Rng>(n: usize, max: usize, rng: &mut R) -> Result<Configuration> {
    let size = rng.random_range(0..=max.min(n));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(size);
    Ok(Configuration::from_unsorted(idx)?)
}

fn join(idx: &[usize]) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

/// `P(S ⊂ ξ)` for every mask `S`, from the table of `P(ξ = T)`.
pub fn inclusion_table(prob: &[f64]) -> Vec<f64> {
    let mut t = prob.to_vec();
    let n = t.len().trailing_zeros();
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..t.len() {
            if mask & b == 0 {
                t[mask] += t[mask | b];
            }
        }
    }
    t
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
