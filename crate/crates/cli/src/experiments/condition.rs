//! The conditional kernel for a configured observation, optionally checked
//! against enumeration, and the unobserved-point marginal of an OPE.

use dppc_core::conditioning::{conditional_kernel, marginal_mark0_density, marginal_normalization};
use dppc_core::kernels::OpeKind;
use dppc_core::oracle::{self, mark_exact, MAX_NODES};
use dppc_core::{Configuration, C64};
use serde::{Deserialize, Serialize};

use super::{inclusion_table, join, subsets};
use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Conditional correlations against enumeration (small spaces only).
    pub tolerance: f64,
    /// Largest correlation order compared with enumeration.
    pub max_order: usize,
    /// Write the full conditional kernel up to this many nodes.
    pub matrix_limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<Marginal>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_order: 3,
            matrix_limit: 400,
            marginal: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Marginal {
    /// Number of observed points.
    pub m: usize,
    /// Monte Carlo draws when the normalization is not summed exactly.
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for Marginal {
    fn default() -> Self {
        Self {
            m: 1,
            samples: 20_000,
            tolerance: 1e-8,
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    let space = cfg.ground()?;
    let built = cfg.kernel_on(&space)?;
    let k = &built.kernel;
    let ks = k.space();
    let theta = cfg.marking_or(0.0)?.on(ks, 0.0)?;
    let v = match &cfg.observation {
        Some(o) => o
            .fixed(ks)?
            .ok_or_else(|| CliError::config("condition takes a fixed observation"))?,
        None => Configuration::empty(),
    };
    let mut r = Report::new(Verb::Condition, cfg.resolved(&p)?);
    let ck = conditional_kernel(k, &theta, &v)?;
    let n = k.len();
    r.note("nodes", n);
    r.note("observed", v.indices());
    r.note("trace", ck.trace().re);
    r.note("resolvent_det", [ck.resolvent_det().re, ck.resolvent_det().im]);
    r.note("projection_defect", ck.projection_defect());

    let mu = ck.mu_kernel();
    let mut one = Table::new("one_point", &["index", "x", "theta", "rho_mu0", "rho_mu"]);
    for i in 0..n {
        one.push(vec![
            i.to_string(),
            num(ks.nodes()[i]),
            num(theta.values()[i]),
            num(ck.kernel().at(i, i).re),
            num(mu[(i, i)].re),
        ]);
    }
    r.tables.push(one);
    if let Ok(spec) = ck.spectrum() {
        let mut t = Table::new("spectrum", &["eigenvalue"]);
        spec.iter().for_each(|&l| t.push(vec![num(l)]));
        r.note("variance", spec.iter().map(|l| l * (1.0 - l)).sum::<f64>());
        r.tables.push(t);
    }
    if n <= p.matrix_limit {
        let mut t = Table::new("kernel", &["i", "j", "re", "im"]);
        let m = ck.kernel().matrix();
        for i in 0..n {
            for j in 0..n {
                t.push(vec![i.to_string(), j.to_string(), num(m[(i, j)].re), num(m[(i, j)].im)]);
            }
        }
        r.tables.push(t);
    }

    if n <= MAX_NODES {
        let marked = mark_exact(&oracle::from_kernel(k)?, &theta)?;
        let pv = marked.observation_prob(&v);
        r.note("observation_probability", pv);
        let cond = marked.condition(&v)?;
        let incl = inclusion_table(cond.probabilities());
        let (t, w) = (theta.values(), ks.weights());
        let mut worst = 0.0f64;
        let mut compared = 0usize;
        for mask in 1u64..(1 << n) {
            let x = Configuration::from_mask(mask);
            if x.len() > p.max_order || !x.is_disjoint(&v) || x.indices().iter().any(|&i| t[i] >= 1.0) {
                continue;
            }
            let mass: f64 = x.indices().iter().map(|&i| (1.0 - t[i]) * w[i]).product();
            let exact = incl[mask as usize] / mass;
            worst = worst.max((ck.correlation(&x).re - exact).abs());
            compared += 1;
        }
        r.note("correlations_compared", compared);
        r.check("oracle_correlation_error", worst, Bound::AtMost(p.tolerance));
    }

    if let Some(mp) = &p.marginal {
        marginal(cfg, &built, mp, &mut r)?;
    }
    Ok(r)
}

fn marginal(cfg: &ExperimentConfig, built: &crate::config::BuiltKernel, mp: &Marginal, r: &mut Report) -> Result<()> {
    let ope = built
        .ope
        .as_ref()
        .ok_or_else(|| CliError::config("the marginal needs an `ope` or `circle-ope` kernel"))?;
    let base = &ope.base;
    let theta = cfg.marking_or(0.0)?.on(base, 0.0)?;
    let unobserved = ope
        .size
        .checked_sub(mp.m)
        .filter(|&u| u > 0)
        .ok_or_else(|| CliError::config("need fewer observed points than the ensemble size"))?;
    let z = marginal_normalization(ope, &theta, mp.m, mp.samples, cfg.seed)?;
    r.note("normalization", z);
    let (t, w, q, x) = (theta.values(), &ope.weight, base.weights(), base.nodes());
    let point = |s: f64| match ope.kind {
        OpeKind::Line => C64::new(s, 0.0),
        OpeKind::Circle => C64::from_polar(1.0, s),
    };
    let mut table = Table::new("marginal", &["unobserved", "density", "probability", "oracle"]);
    let oracle_ok = base.len() <= MAX_NODES;
    let marked = if oracle_ok {
        let sub = dppc_core::Marking::new(ope.support.iter().map(|&i| t[i]).collect())?;
        Some(mark_exact(&oracle::from_kernel(&ope.kernel)?, &sub)?)
    } else {
        None
    };
    let local = |i: usize| ope.support.iter().position(|&s| s == i);
    let mut oracle_probs = Vec::new();
    let mut rows = Vec::new();
    let (mut moment_dev, mut moment_checked) = (0.0f64, false);
    for u in subsets(base.len(), unobserved) {
        let cfg_u = Configuration::new(u.clone())?;
        let density = marginal_mark0_density(ope, &theta, mp.m, &cfg_u)?;
        let mass: f64 = u.iter().map(|&i| q[i]).product();
        let prob = density * mass / z.value;
        if mp.m == 1 {
            // a 1×1 Hankel or Toeplitz determinant is the zeroth moment
            let uz: Vec<C64> = u.iter().map(|&i| point(x[i])).collect();
            let mut vdm = 1.0;
            for a in 0..uz.len() {
                for b in (a + 1)..uz.len() {
                    vdm *= (uz[a] - uz[b]).norm_sqr();
                }
            }
            let mut moment: f64 = (0..x.len())
                .map(|i| t[i] * w[i] * q[i] * uz.iter().map(|a| (point(x[i]) - a).norm_sqr()).product::<f64>())
                .sum();
            if ope.kind == OpeKind::Circle {
                moment /= 2.0 * std::f64::consts::PI;
            }
            let tail: f64 = u.iter().map(|&i| (1.0 - t[i]) * w[i]).product();
            let direct = if tail == 0.0 { 0.0 } else { vdm * moment * tail };
            let scale = direct.abs().max(f64::MIN_POSITIVE);
            moment_dev = moment_dev.max((density - direct).abs() / scale);
            moment_checked = true;
        }
        let exact = marked.as_ref().map(|mk| {
            let Some(um) = u.iter().map(|&i| local(i)).collect::<Option<Vec<_>>>() else {
                return 0.0;
            };
            let umask = um.iter().fold(0u64, |a, &i| a | 1 << i);
            let rest = ((1u64 << ope.support.len()) - 1) & !umask;
            let mut s = 0.0;
            let mut b = rest;
            loop {
                if b.count_ones() as usize == mp.m {
                    s += mk.joint_mask(umask, b);
                }
                if b == 0 {
                    break;
                }
                b = (b - 1) & rest;
            }
            s
        });
        oracle_probs.push(exact);
        rows.push((u, density, prob));
    }
    let total: f64 = oracle_probs.iter().flatten().sum();
    let mut worst = 0.0f64;
    for ((u, density, prob), exact) in rows.into_iter().zip(oracle_probs) {
        let e = exact.map(|e| e / total);
        if let Some(e) = e {
            worst = worst.max((prob - e).abs());
        }
        table.push(vec![join(&u), num(density), num(prob), e.map_or(String::new(), num)]);
    }
    if oracle_ok {
        r.check("marginal_oracle_error", worst, Bound::AtMost(mp.tolerance));
    }
    if moment_checked {
        r.check("single_moment_reduction", moment_dev, Bound::AtMost(1e-14));
    }
    r.tables.push(table);
    Ok(())
}
