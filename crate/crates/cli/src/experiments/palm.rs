//! Algebra of reduced Palm kernels on random finite kernels.

use dppc_core::conditioning::palm_kernel;
use dppc_core::linalg::max_abs;
use dppc_core::{Configuration, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{join, max_of, random_kernel};
use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub cases: usize,
    pub nodes: usize,
    /// Points removed per case (at least 2).
    pub points: usize,
    pub tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            cases: 50,
            nodes: 8,
            points: 3,
            tolerance: 1e-12,
        }
    }
}

struct Case {
    points: Vec<usize>,
    order: f64,
    iterated: f64,
    vanishing: f64,
}

fn single(k: &Kernel, i: usize) -> Result<Kernel> {
    Ok(palm_kernel(k, &Configuration::new(vec![i])?)?.into_kernel())
}

fn chain(k: &Kernel, order: &[usize]) -> Result<Kernel> {
    order.iter().try_fold(k.clone(), |acc, &i| single(&acc, i))
}

fn case(p: &Params, seed: u64, c: usize) -> Result<Case> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(c as u64);
    let k = random_kernel(p.nodes, &mut rng)?;
    let mut pts: Vec<usize> = (0..p.nodes).collect();
    for i in 0..p.points {
        let j = rng.random_range(i..p.nodes);
        pts.swap(i, j);
    }
    pts.truncate(p.points);
    let v = Configuration::from_unsorted(pts.clone())?;
    let joint = palm_kernel(&k, &v)?.into_kernel();
    let forward = chain(&k, &pts)?;
    let mut reversed = pts.clone();
    reversed.reverse();
    let backward = chain(&k, &reversed)?;
    let vanishing = max_of(
        v.indices()
            .iter()
            .flat_map(|&i| joint.matrix().row(i).iter().chain(joint.matrix().column(i).iter()).map(|z| z.norm()).collect::<Vec<_>>()),
    );
    Ok(Case {
        points: pts,
        order: max_abs(&(forward.matrix() - backward.matrix())),
        iterated: max_abs(&(forward.matrix() - joint.matrix())),
        vanishing,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if p.points < 2 || p.points > p.nodes {
        return Err(CliError::config("palm needs 2 ≤ points ≤ nodes"));
    }
    let mut r = Report::new(Verb::Palm, cfg.resolved(&p)?);
    let cases: Vec<Case> = (0..p.cases)
        .into_par_iter()
        .map(|c| case(&p, cfg.seed, c))
        .collect::<Result<_>>()?;
    let mut t = Table::new("cases", &["case", "points", "order_defect", "iterated_defect", "vanishing"]);
    for (i, c) in cases.iter().enumerate() {
        t.push(vec![i.to_string(), join(&c.points), num(c.order), num(c.iterated), num(c.vanishing)]);
    }
    r.check("order_independence", max_of(cases.iter().map(|c| c.order)), Bound::AtMost(p.tolerance));
    r.check("iterated_vs_joint", max_of(cases.iter().map(|c| c.iterated)), Bound::AtMost(p.tolerance));
    r.check("vanishing_rows", max_of(cases.iter().map(|c| c.vanishing)), Bound::AtMost(p.tolerance));
    r.tables.push(t);
    Ok(r)
}
