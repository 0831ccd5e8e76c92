//! `d/dt log det(1 − θ_t K)` against the trace formula, with the hazard rate
//! `∂_tθ_t / (1 − θ_t)` on the grid.

use dppc_core::conditioning::{fredholm_det, jacobi_logderiv};
use serde::{Deserialize, Serialize};

use super::max_of;
use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub t_start: f64,
    pub t_step: f64,
    pub t_count: usize,
    pub dt: f64,
    pub tolerance: f64,
    /// Also check `t = 0` with one-sided differences (needs `θ_0 ≡ 0`).
    pub origin: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            t_start: 0.1,
            t_step: 0.2,
            t_count: 20,
            dt: 1e-4,
            tolerance: 1e-6,
            origin: true,
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if !(p.dt > 0.0) || p.t_count == 0 {
        return Err(CliError::config("jacobi needs dt > 0 and at least one time"));
    }
    let space = cfg.ground()?;
    let k = cfg.kernel_on(&space)?.kernel;
    let theta = cfg
        .marking
        .as_ref()
        .ok_or_else(|| CliError::config("jacobi needs a `marking` depending on t"))?
        .compile()?;
    let mut r = Report::new(Verb::Jacobi, cfg.resolved(&p)?);
    let at = |t: f64| theta.on(&space, t).map_err(|e| match e {
        CliError::Numeric(d) => d,
        other => dppc_core::DppError::Precondition(other.to_string()),
    });
    let mut sweep = Table::new("sweep", &["t", "lhs", "rhs", "abs_diff"]);
    let mut hazard = Table::new("hazard", &["t", "x", "theta", "dtheta", "hazard"]);
    let mut diffs = Vec::new();
    for s in 0..p.t_count {
        let t = p.t_start + p.t_step * s as f64;
        let (lhs, rhs) = jacobi_logderiv(&k, at, t, p.dt)?;
        diffs.push((lhs - rhs).abs());
        sweep.push(vec![num(t), num(lhs), num(rhs), num((lhs - rhs).abs())]);
        let (tp, tm, t0) = (at(t + p.dt)?, at(t - p.dt)?, at(t)?);
        for (i, &x) in space.nodes().iter().enumerate() {
            let th = t0.values()[i];
            let d = (tp.values()[i] - tm.values()[i]) / (2.0 * p.dt);
            let h = if th < 1.0 { num(d / (1.0 - th)) } else { "inf".into() };
            hazard.push(vec![num(t), num(x), num(th), num(d), h]);
        }
    }
    r.check("max_abs_diff", max_of(diffs.iter().copied()), Bound::AtMost(p.tolerance));
    if p.origin {
        // second-order one-sided stencils at t = 0
        let (t0, t1, t2) = (at(0.0)?, at(p.dt)?, at(2.0 * p.dt)?);
        let logdet = |th: &dppc_core::Marking| -> Result<f64> { Ok(fredholm_det(&k, th.values())?.norm().ln()) };
        let lhs = (-3.0 * logdet(&t0)? + 4.0 * logdet(&t1)? - logdet(&t2)?) / (2.0 * p.dt);
        let w = k.weights();
        let rhs = -(0..k.len())
            .map(|i| {
                let d = (-3.0 * t0.values()[i] + 4.0 * t1.values()[i] - t2.values()[i]) / (2.0 * p.dt);
                d * k.at(i, i).re * w[i]
            })
            .sum::<f64>();
        r.check("origin_nonzero_marking", t0.values().iter().fold(0.0f64, |a, &b| a.max(b)), Bound::AtMost(0.0));
        r.check("origin_abs_diff", (lhs - rhs).abs(), Bound::AtMost(p.tolerance));
        r.note("origin_lhs", lhs);
        r.note("origin_rhs", rhs);
    }
    r.note("max_abs_diff", max_of(diffs));
    r.tables.push(sweep);
    r.tables.push(hazard);
    Ok(r)
}
