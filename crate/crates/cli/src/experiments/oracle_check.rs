//! Randomized agreement between the closed-form conditional objects and
//! exhaustive enumeration.

use dppc_core::conditioning::{avg_mult_functional, avg_mult_functional_conditional, conditional_kernel};
use dppc_core::oracle::{self, mark_exact};
use dppc_core::Configuration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{inclusion_table, max_of, random_kernel, random_marking, random_subset};
use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub cases: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Observations rarer than this are skipped.
    pub min_observation_prob: f64,
    pub tolerance: f64,
    pub functional_cases: usize,
    pub functional_max_nodes: usize,
    pub functional_max_observed: usize,
    pub functional_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            cases: 50,
            min_nodes: 3,
            max_nodes: 8,
            min_observation_prob: 1e-6,
            tolerance: 1e-9,
            functional_cases: 100,
            functional_max_nodes: 10,
            functional_max_observed: 3,
            functional_tolerance: 1e-10,
        }
    }
}

struct CaseResult {
    nodes: usize,
    observations: usize,
    correlations: usize,
    error: f64,
}

/// Every observation with enough probability, every correlation of the
/// unobserved points at nodes with `θ < 1`.
fn correlation_case(p: &Params, seed: u64, case: usize) -> Result<CaseResult> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    let n = rng.random_range(p.min_nodes..=p.max_nodes);
    let k = random_kernel(n, &mut rng)?;
    let theta = random_marking(n, &mut rng)?;
    let marked = mark_exact(&oracle::from_kernel(&k)?, &theta)?;
    let (t, w) = (theta.values(), k.weights());
    let (mut observations, mut correlations, mut error) = (0, 0, 0.0f64);
    for vmask in 0u64..(1 << n) {
        let v = Configuration::from_mask(vmask);
        if marked.observation_prob(&v) <= p.min_observation_prob {
            continue;
        }
        observations += 1;
        let ck = conditional_kernel(&k, &theta, &v)?;
        let incl = inclusion_table(marked.condition(&v)?.probabilities());
        for xmask in 1u64..(1 << n) {
            if xmask & vmask != 0 {
                continue;
            }
            let x = Configuration::from_mask(xmask);
            let mass: f64 = x.indices().iter().map(|&i| (1.0 - t[i]) * w[i]).product();
            let exact = incl[xmask as usize] / mass;
            error = error.max((ck.correlation(&x).re - exact).abs());
            correlations += 1;
        }
    }
    Ok(CaseResult {
        nodes: n,
        observations,
        correlations,
        error,
    })
}

/// `E[Π(1 − φ₀) | ξ₁ = v]` by the ratio of Fredholm determinants and by the
/// conditional kernel.
fn functional_case(p: &Params, seed: u64, case: usize) -> Result<(f64, f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(case as u64);
    let n = rng.random_range(p.min_nodes..=p.functional_max_nodes);
    let k = random_kernel(n, &mut rng)?;
    let theta = random_marking(n, &mut rng)?;
    let v = random_subset(n, p.functional_max_observed, &mut rng)?;
    let phi0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ratio = avg_mult_functional(&k, &theta, &v, &phi0)?.re;
    let direct = avg_mult_functional_conditional(&k, &theta, &v, &phi0)?.re;
    Ok((ratio, direct, (ratio - direct).abs()))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if p.min_nodes == 0 || p.min_nodes > p.max_nodes || p.max_nodes > 12 || p.functional_max_nodes > 14 {
        return Err(CliError::config("node range must satisfy 1 ≤ min ≤ max ≤ 12 (14 for functionals)"));
    }
    let mut r = Report::new(Verb::OracleCheck, cfg.resolved(&p)?);
    let results: Vec<CaseResult> = (0..p.cases)
        .into_par_iter()
        .map(|c| correlation_case(&p, cfg.seed, c))
        .collect::<Result<_>>()?;
    let mut table = Table::new("correlation_cases", &["case", "nodes", "observations", "correlations", "max_error"]);
    for (c, res) in results.iter().enumerate() {
        table.push(vec![
            c.to_string(),
            res.nodes.to_string(),
            res.observations.to_string(),
            res.correlations.to_string(),
            num(res.error),
        ]);
    }
    r.note("observations_checked", results.iter().map(|c| c.observations).sum::<usize>());
    r.note("correlations_checked", results.iter().map(|c| c.correlations).sum::<usize>());
    r.check("conditional_correlation_error", max_of(results.iter().map(|c| c.error)), Bound::AtMost(p.tolerance));
    r.tables.push(table);

    let functionals: Vec<(f64, f64, f64)> = (0..p.functional_cases)
        .into_par_iter()
        .map(|c| functional_case(&p, cfg.seed, c))
        .collect::<Result<_>>()?;
    let mut ft = Table::new("functional_cases", &["case", "ratio_route", "kernel_route", "abs_diff"]);
    for (c, (a, b, d)) in functionals.iter().enumerate() {
        ft.push(vec![c.to_string(), num(*a), num(*b), num(*d)]);
    }
    r.check(
        "multiplicative_identity_error",
        max_of(functionals.iter().map(|f| f.2)),
        Bound::AtMost(p.functional_tolerance),
    );
    r.tables.push(ft);
    Ok(r)
}
