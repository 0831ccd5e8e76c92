//! Gaussian OPE conditioned with `θ = 1 − e^{−N(V − x²)}` against the OPE
//! built directly for `e^{−NV}` (times `Π (x − v)²` given observed points).

use dppc_core::conditioning::conditional_kernel;
use dppc_core::kernels::{ope_kernel, OpeData};
use dppc_core::{Configuration, Marking};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::expr::Expr;
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub n: usize,
    /// `V(x)`; must satisfy `V ≥ x²` on the grid.
    pub potential: String,
    pub tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n: 4,
            potential: "x^2 + x^4/10".into(),
            tolerance: 1e-8,
        }
    }
}

/// Largest `|C(x_i, x_j) − Π_v (x_i − v)(x_j − v) D(x_i, x_j)| · √(ρ_i ρ_j)` over
/// nodes in both supports, as `(weighted, raw)`. Both kernels act on
/// `ρ dx` with `ρ = e^{−NV}`, so the weighted form is the kernel against `dx`;
/// raw entries grow like `1/ρ` in the tails. `C` lives on `base.support`,
/// `D` on `direct.support`.
fn deviation(c: &dppc_core::CMat, base: &OpeData, direct: &OpeData, v: &[f64], rho: &[f64]) -> (f64, f64) {
    let x = base.base.nodes();
    let pos = |i: usize| base.support.iter().position(|&s| s == i);
    let (mut worst, mut raw) = (0.0f64, 0.0f64);
    for (a, &i) in direct.support.iter().enumerate() {
        let Some(ci) = pos(i) else { continue };
        for (b, &j) in direct.support.iter().enumerate() {
            let Some(cj) = pos(j) else { continue };
            let factor: f64 = v.iter().map(|&p| (x[i] - p) * (x[j] - p)).product();
            let d = (c[(ci, cj)] - direct.kernel.at(a, b) * factor).norm();
            raw = raw.max(d);
            worst = worst.max(d * (rho[i] * rho[j]).sqrt());
        }
    }
    (worst, raw)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    let space = cfg.ground()?;
    let nn = p.n as f64;
    let v_expr = Expr::parse(&p.potential)?;
    let x = space.nodes().to_vec();
    let vx = v_expr.eval_nodes(&x, 0.0)?;
    if let Some(i) = (0..x.len()).find(|&i| vx[i] < x[i] * x[i]) {
        return Err(CliError::config(format!(
            "potential below x² at x = {} (V = {}); θ would be negative",
            x[i], vx[i]
        )));
    }
    let mut r = Report::new(Verb::GueDeform, cfg.resolved(&p)?);
    let base = ope_kernel(|t| (-nn * t * t).exp(), p.n, &space)?;
    let on_base = |i: usize| base.support[i];
    let theta_full: Vec<f64> = (0..x.len()).map(|i| 1.0 - (-nn * (vx[i] - x[i] * x[i])).exp()).collect();
    let theta = Marking::new((0..base.support.len()).map(|a| theta_full[on_base(a)]).collect())?;
    // already evaluated successfully on every node
    let at_node = |t: f64| v_expr.eval(t, 0.0).unwrap_or(f64::NAN);

    let direct = ope_kernel(|t| (-nn * at_node(t)).exp(), p.n, &space)?;
    let ck = conditional_kernel(&base.kernel, &theta, &Configuration::empty())?;
    let rho: Vec<f64> = vx.iter().map(|v| (-nn * v).exp()).collect();
    let (dev, raw) = deviation(ck.kernel().matrix(), &base, &direct, &[], &rho);
    r.check("deviation_empty_observation", dev, Bound::AtMost(p.tolerance));
    r.note("raw_deviation_empty_observation", raw);

    let mut diag = Table::new("diagonal", &["x", "theta", "conditional", "direct"]);
    for (a, &i) in direct.support.iter().enumerate() {
        let ci = base.support.iter().position(|&s| s == i);
        diag.push(vec![
            num(space.nodes()[i]),
            num(theta_full[i]),
            ci.map_or(String::new(), |ci| num(ck.kernel().at(ci, ci).re)),
            num(direct.kernel.at(a, a).re),
        ]);
    }
    r.tables.push(diag);

    let observed = match &cfg.observation {
        Some(o) => o
            .fixed(&space)?
            .ok_or_else(|| CliError::config("gue-deform takes fixed observation points"))?,
        None => Configuration::empty(),
    };
    if !observed.is_empty() {
        if observed.len() >= p.n {
            return Err(CliError::config("observe fewer points than the ensemble size"));
        }
        let xs = space.nodes();
        let vpts: Vec<f64> = observed.indices().iter().map(|&i| xs[i]).collect();
        // observation indices on the base kernel's support
        let local = observed
            .indices()
            .iter()
            .map(|&i| {
                base.support
                    .iter()
                    .position(|&s| s == i)
                    .ok_or_else(|| CliError::config(format!("observed node {i} carries no weight")))
            })
            .collect::<Result<Vec<_>>>()?;
        let ckv = conditional_kernel(&base.kernel, &theta, &Configuration::new(local)?)?;
        let vp = vpts.clone();
        let reduced = ope_kernel(
            move |t| (-nn * at_node(t)).exp() * vp.iter().map(|&q| (t - q) * (t - q)).product::<f64>(),
            p.n - observed.len(),
            &space,
        )?;
        let (devv, rawv) = deviation(ckv.kernel().matrix(), &base, &reduced, &vpts, &rho);
        r.check("deviation_observed", devv, Bound::AtMost(p.tolerance));
        r.note("raw_deviation_observed", rawv);
        r.note("observed_points", vpts);
    }
    r.note("theta_max", theta_full.iter().fold(0.0f64, |a, &b| a.max(b)));
    r.note("resolvent_det", ck.resolvent_det().re);
    Ok(r)
}
