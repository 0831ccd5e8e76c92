//! Spectral sampling checked against enumeration and Fredholm determinants.

use dppc_core::conditioning::{conditional_kernel, fredholm_det};
use dppc_core::kernels::is_near_projection;
use dppc_core::oracle::{self, mark_exact, TabulatedProcess};
use dppc_core::sampler::{estimate, mark_sample, sample_conditional, SpectralSampler};
use dppc_core::{Configuration, Statistic};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::expr::Expr;
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub count: usize,
    /// χ² test level against enumeration (spaces of at most `oracle_max_nodes`).
    pub significance: f64,
    pub oracle_max_nodes: usize,
    /// Cells with a smaller expected count are pooled.
    pub min_expected: f64,
    /// Monte Carlo estimates must lie within this many standard errors.
    pub sigma_max: f64,
    /// `φ` for the multiplicative statistic `Π (1 − φ)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    /// Total-variation bound for conditional samples against enumeration.
    pub tv_max: f64,
    /// At most this many configurations are written out.
    pub write_limit: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            count: 100_000,
            significance: 1e-3,
            oracle_max_nodes: 12,
            min_expected: 5.0,
            sigma_max: 3.0,
            phi: None,
            tv_max: 0.02,
            write_limit: 10_000,
        }
    }
}

/// Number of standard errors between an estimate and its target.
fn sigmas(mean: f64, se: f64, target: f64) -> f64 {
    let d = (mean - target).abs();
    if se > 0.0 {
        d / se
    } else if d <= 1e-12 * target.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Pearson χ² of configuration frequencies with small cells pooled; returns
/// `(statistic, degrees of freedom, p-value)`.
fn chi_square(counts: &[usize], law: &TabulatedProcess, total: usize, min_expected: f64) -> Result<(f64, usize, f64)> {
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (mask, &obs) in counts.iter().enumerate() {
        let e = law.prob_mask(mask as u64) * total as f64;
        if e >= min_expected {
            stat += (obs as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            pooled_obs += obs as f64;
            pooled_exp += e;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    } else if pooled_obs > 0.0 {
        stat = f64::INFINITY;
    }
    if cells < 2 {
        return Err(CliError::config("too few cells for a χ² test; raise `count`"));
    }
    let dof = cells - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| CliError::config(e.to_string()))?;
    Ok((stat, dof, dist.sf(stat)))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if p.count < 2 {
        return Err(CliError::config("sample needs count ≥ 2"));
    }
    let space = cfg.ground()?;
    let k = cfg.kernel_on(&space)?.kernel;
    let n = k.len();
    let mut r = Report::new(Verb::Sample, cfg.resolved(&p)?);
    let sampler = SpectralSampler::new(&k)?;
    let batch = sampler.batch(cfg.seed, p.count);

    let label = cfg.kernel.as_ref().map_or_else(String::new, |s| serde_json::to_string(s).unwrap_or_default());
    let params = [("kernel", label.replace(',', ";")), ("nodes", n.to_string())];
    let mut head = batch.clone();
    head.configurations.truncate(p.write_limit);
    r.attachments.push(("samples.csv".into(), head.to_csv(&params).into_bytes()));

    let (mean, se) = estimate(&batch, &Statistic::Count)?;
    let trace = k.trace().re;
    r.note("count_mean", [mean, se]);
    r.check("count_mean_sigmas", sigmas(mean, se, trace), Bound::AtMost(p.sigma_max));
    if k.claims_projection() || is_near_projection(&k, 1e-10) {
        let rank = trace.round();
        let spread = batch.configurations.iter().map(|c| (c.len() as f64 - rank).abs()).fold(0.0, f64::max);
        r.check("projection_count_spread", spread, Bound::AtMost(0.0));
    }

    let mut stats = Table::new("estimates", &["statistic", "mean", "std_error", "target", "sigmas"]);
    stats.push(vec!["count".into(), num(mean), num(se), num(trace), num(sigmas(mean, se, trace))]);

    if n <= p.oracle_max_nodes {
        let law = oracle::from_kernel(&k)?;
        let mut counts = vec![0usize; 1 << n];
        for c in &batch.configurations {
            counts[c.mask() as usize] += 1;
        }
        let (stat, dof, pval) = chi_square(&counts, &law, p.count, p.min_expected)?;
        r.note("chi_square", serde_json::json!({"statistic": stat, "dof": dof, "p_value": pval}));
        r.check("chi_square_p_value", pval, Bound::AtLeast(p.significance));
        let mut freq = Table::new("frequencies", &["mask", "observed", "expected"]);
        for (mask, &o) in counts.iter().enumerate() {
            freq.push(vec![mask.to_string(), o.to_string(), num(law.prob_mask(mask as u64) * p.count as f64)]);
        }
        r.tables.push(freq);
    }

    if let Some(src) = &p.phi {
        let phi = Expr::parse(src)?.eval_nodes(k.space().nodes(), 0.0)?;
        let (m, s) = estimate(&batch, &Statistic::Multiplicative(phi.clone()))?;
        let target = fredholm_det(&k, &phi)?.re;
        stats.push(vec!["multiplicative".into(), num(m), num(s), num(target), num(sigmas(m, s, target))]);
        r.check("multiplicative_sigmas", sigmas(m, s, target), Bound::AtMost(p.sigma_max));
    }

    if let Some(ms) = &cfg.marking {
        let theta = ms.compile()?.on(k.space(), 0.0)?;
        let marked = mark_sample(&batch, &theta, cfg.seed.wrapping_add(1))?;
        let ones: Vec<f64> = marked.configurations.iter().map(|c| c.ones.len() as f64).collect();
        let mean1 = ones.iter().sum::<f64>() / ones.len() as f64;
        let var1 = ones.iter().map(|x| (x - mean1).powi(2)).sum::<f64>() / (ones.len() - 1) as f64;
        let se1 = (var1 / ones.len() as f64).sqrt();
        let w = k.weights();
        let target: f64 = (0..n).map(|i| theta.values()[i] * k.at(i, i).re * w[i]).sum();
        stats.push(vec!["observed_count".into(), num(mean1), num(se1), num(target), num(sigmas(mean1, se1, target))]);
        r.check("observed_count_sigmas", sigmas(mean1, se1, target), Bound::AtMost(p.sigma_max));

        let v = match &cfg.observation {
            Some(o) => o.fixed(k.space())?,
            None => None,
        };
        if let Some(v) = v {
            conditional(&k, &theta, &v, cfg.seed.wrapping_add(2), &p, &mut r)?;
        }
    }
    r.tables.push(stats);
    Ok(r)
}

fn conditional(
    k: &dppc_core::Kernel,
    theta: &dppc_core::Marking,
    v: &Configuration,
    seed: u64,
    p: &Params,
    r: &mut Report,
) -> Result<()> {
    let batch = sample_conditional(k, theta, v, seed, p.count)?;
    let ck = conditional_kernel(k, theta, v)?;
    if ck.projection_defect().is_some_and(|d| d <= 1e-10) {
        let first = batch.configurations.first().map_or(0, Configuration::len);
        let spread = batch.configurations.iter().map(|c| c.len().abs_diff(first)).max().unwrap_or(0);
        r.check("conditional_count_spread", spread as f64, Bound::AtMost(0.0));
    }
    if k.len() <= p.oracle_max_nodes {
        let exact = mark_exact(&oracle::from_kernel(k)?, theta)?.condition(v)?;
        let mut freq = vec![0.0; 1 << k.len()];
        for c in &batch.configurations {
            freq[c.mask() as usize] += 1.0 / p.count as f64;
        }
        let tv = 0.5 * freq.iter().enumerate().map(|(m, f)| (f - exact.prob_mask(m as u64)).abs()).sum::<f64>();
        r.check("conditional_total_variation", tv, Bound::AtMost(p.tv_max));
    }
    Ok(())
}
