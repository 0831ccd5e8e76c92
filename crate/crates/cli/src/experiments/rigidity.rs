//! Conditional point counts given sampled observations.
//!
//! The variance ratio, integer fraction and `ℓ_v` thresholds are empirical
//! calibrations, reported as such.

use dppc_core::conditioning::conditional_kernel;
use dppc_core::kernels::projection_defect;
use dppc_core::linalg::sqrt_weights;
use dppc_core::sampler::{mark_sample, SpectralSampler};
use dppc_core::{Configuration, Kernel, Marking};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{join, max_of};
use crate::config::{ExperimentConfig, ObservationSpec, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub observations: usize,
    /// Upper bound on `max |K² − K|` for the kernel to count as near-projection.
    pub projection_defect_max: f64,
    /// Exact checks apply when the defect is below this.
    pub exact_tolerance: f64,
    pub variance_ratio_max: f64,
    pub integer_tolerance: f64,
    pub integer_fraction_min: f64,
    pub ell_tolerance: f64,
    pub ell_fraction_min: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            observations: 100,
            projection_defect_max: 0.05,
            exact_tolerance: 1e-8,
            variance_ratio_max: 0.2,
            integer_tolerance: 0.1,
            integer_fraction_min: 0.9,
            ell_tolerance: 0.1,
            ell_fraction_min: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
struct Row {
    v: Configuration,
    trace: f64,
    variance: f64,
    eigen_distance: f64,
    integer_distance: f64,
    /// `(a, ℓ)` for tents of plateau half-width `a`.
    ell: Vec<(f64, f64)>,
}

/// Plateau `[c − a, c + a]`, linear decay to 0 over a further `a`.
fn tent(x: f64, c: f64, a: f64) -> f64 {
    let d = (x - c).abs();
    if d <= a {
        1.0
    } else {
        (2.0 - d / a).max(0.0)
    }
}

fn widths(nodes: &[f64]) -> (f64, Vec<f64>) {
    let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let half = 0.5 * (hi - lo);
    let mut out = Vec::new();
    let mut a = 1.0;
    while 2.0 * a <= half + 1e-12 {
        out.push(a);
        a *= 2.0;
    }
    (0.5 * (lo + hi), out)
}

fn observe(k: &Kernel, theta: &Marking, v: &Configuration, centre: f64, ws: &[f64]) -> Result<Row> {
    let ck = conditional_kernel(k, theta, v)?;
    let trace = ck.trace().re;
    let spec = ck.spectrum()?;
    let variance: f64 = spec.iter().map(|l| l * (1.0 - l)).sum();
    let eigen_distance = max_of(spec.iter().map(|&l| l.min(1.0 - l).max(0.0)));
    let x = k.space().nodes();
    let w = k.weights();
    let ell = ws
        .iter()
        .map(|&a| {
            let expected: f64 = (0..x.len()).map(|i| tent(x[i], centre, a) * k.at(i, i).re * w[i]).sum();
            let seen: f64 = v.indices().iter().map(|&i| tent(x[i], centre, a)).sum();
            (a, expected - seen)
        })
        .collect();
    Ok(Row {
        v: v.clone(),
        trace,
        variance,
        eigen_distance,
        integer_distance: (trace - trace.round()).abs(),
        ell,
    })
}

/// `Var ξ₀(count)` without conditioning: `tr M − tr M²` for `M = √((1−θ)w) K √((1−θ)w)`.
fn unconditioned_variance(k: &Kernel, theta: &Marking) -> f64 {
    let s = sqrt_weights(&theta.mark0_weights(k.space()));
    let m = dppc_core::linalg::scale(k.matrix(), &s, &s);
    let tr = m.trace().re;
    let tr2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    tr - tr2
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    let space = cfg.ground()?;
    let k = cfg.kernel_on(&space)?.kernel;
    let theta = cfg.marking_or(0.5)?.on(&space, 0.0)?;
    let mut r = Report::new(Verb::Rigidity, cfg.resolved(&p)?);

    let defect = projection_defect(&k);
    let exact = k.claims_projection() || defect <= p.exact_tolerance;
    r.calibrated("projection_defect", defect, Bound::AtMost(p.projection_defect_max));

    let observations: Vec<Configuration> = match &cfg.observation {
        Some(ObservationSpec::Sampled(count)) => sampled(&k, &theta, cfg.seed, *count)?,
        Some(o) => vec![o.fixed(&space)?.expect("fixed observation")],
        None => sampled(&k, &theta, cfg.seed, p.observations)?,
    };
    if observations.is_empty() {
        return Err(CliError::config("rigidity needs at least one observation"));
    }
    let (centre, ws) = widths(space.nodes());
    let results: Vec<std::result::Result<Row, String>> = observations
        .par_iter()
        .map(|v| observe(&k, &theta, v, centre, &ws).map_err(|e| e.to_string()))
        .collect();

    let mut t = Table::new(
        "observations",
        &["observation", "points", "trace", "variance", "eigen_distance", "integer_distance", "ell", "error"],
    );
    let mut ells = Table::new("ell_sequence", &["observation", "half_width", "ell"]);
    let mut rows = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(row) => {
                let last = row.ell.last().map_or(f64::NAN, |e| e.1);
                t.push(vec![
                    i.to_string(),
                    join(row.v.indices()),
                    num(row.trace),
                    num(row.variance),
                    num(row.eigen_distance),
                    num(row.integer_distance),
                    num(last),
                    String::new(),
                ]);
                for &(a, l) in &row.ell {
                    ells.push(vec![i.to_string(), num(a), num(l)]);
                }
                rows.push(row);
            }
            Err(e) => t.push(vec![
                i.to_string(),
                join(observations[i].indices()),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e,
            ]),
        }
    }
    let total = observations.len() as f64;
    r.note("observations", observations.len());
    r.note("failed_observations", observations.len() - rows.len());

    if exact {
        let rank = k.trace().re.round();
        r.note("rank", rank);
        r.check("conditional_variance_max", max_of(rows.iter().map(|row| row.variance)), Bound::AtMost(p.exact_tolerance));
        r.check(
            "rank_identity_error",
            max_of(rows.iter().map(|row| (row.trace + row.v.len() as f64 - rank).abs())),
            Bound::AtMost(p.exact_tolerance),
        );
        r.check("failed_observations", total - rows.len() as f64, Bound::AtMost(0.0));
    } else {
        let var0 = unconditioned_variance(&k, &theta);
        let mean_var = rows.iter().map(|row| row.variance).sum::<f64>() / rows.len().max(1) as f64;
        r.note("unconditioned_variance", var0);
        r.note("mean_conditional_variance", mean_var);
        r.calibrated("variance_ratio", mean_var / var0, Bound::AtMost(p.variance_ratio_max));
        let near = rows.iter().filter(|row| row.integer_distance <= p.integer_tolerance).count() as f64;
        r.calibrated("integer_fraction", near / total, Bound::AtLeast(p.integer_fraction_min));
        let close = rows
            .iter()
            .filter(|row| row.ell.last().is_some_and(|&(_, l)| (l - row.trace).abs() <= p.ell_tolerance))
            .count() as f64;
        r.calibrated("ell_fraction", close / total, Bound::AtLeast(p.ell_fraction_min));
    }
    r.tables.push(t);
    r.tables.push(ells);
    Ok(r)
}

/// `ξ₁` from independent draws of the marked process.
fn sampled(k: &Kernel, theta: &Marking, seed: u64, count: usize) -> Result<Vec<Configuration>> {
    let batch = SpectralSampler::new(k)?.batch(seed, count);
    let marked = mark_sample(&batch, theta, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    Ok(marked.configurations.into_iter().map(|m| m.ones).collect())
}
