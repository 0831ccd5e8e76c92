//! Palm updates of integrable kernels and the rational dressing `R(z)`.
//!
//! Observations are subsets of exact samples; points far outside the bulk make
//! `K(v, v)` nearly singular and the identities lose digits for that reason alone.
//! Polynomial kernels are compared after scaling by the weight `ρ`, since
//! `f`, `g` grow like `ρ^{-1/2}` in the tails where `K ρ` stays bounded.

use std::f64::consts::PI;

use dppc_core::conditioning::palm_kernel;
use dppc_core::integrable::{dressed_kernel, palm_update, rational_dressing};
use dppc_core::linalg::{det, max_abs};
use dppc_core::sampler::SpectralSampler;
use dppc_core::{CMat, Configuration, IntegrableKernel, Marking, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{join, max_of, random_marking};
use crate::config::{ExperimentConfig, KernelSpec, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub cases: usize,
    /// Random observations have between 1 and this many points.
    pub max_points: usize,
    /// Points evaluated off the axis per case.
    pub spectral_points: usize,
    pub constraint_tolerance: f64,
    pub nilpotent_tolerance: f64,
    pub dressing_tolerance: f64,
    pub palm_tolerance: f64,
    pub jump_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            cases: 20,
            max_points: 3,
            spectral_points: 8,
            constraint_tolerance: 1e-12,
            nilpotent_tolerance: 1e-12,
            dressing_tolerance: 1e-10,
            palm_tolerance: 1e-10,
            jump_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Default)]
struct Case {
    points: Vec<usize>,
    constraint: f64,
    nilpotent: f64,
    det: f64,
    product: f64,
    palm: f64,
    jump: f64,
    trivial: f64,
    residue_norm: f64,
}

fn integrable(cfg: &ExperimentConfig) -> Result<(IntegrableKernel, Vec<f64>)> {
    let space = cfg.ground()?;
    let spec = cfg.kernel.as_ref().ok_or_else(|| CliError::config("integrable-check needs a `kernel`"))?;
    Ok(match spec {
        KernelSpec::Sine => (IntegrableKernel::sine(&space)?, vec![1.0; space.len()]),
        KernelSpec::Airy => (IntegrableKernel::airy(&space)?, vec![1.0; space.len()]),
        KernelSpec::Ope { .. } => {
            let ope = spec.build(&space)?.ope.expect("polynomial kernels carry their data");
            let rho = ope.support.iter().map(|&i| ope.weight[i]).collect();
            (IntegrableKernel::christoffel_darboux(&ope)?, rho)
        }
        _ => return Err(CliError::config("integrable-check supports sine, airy and ope kernels")),
    })
}

fn weighted(m: &CMat, rho: &[f64]) -> f64 {
    let n = m.nrows();
    max_of((0..n).flat_map(|i| (0..n).map(move |j| m[(i, j)].norm() * (rho[i] * rho[j]).sqrt())))
}

fn case(ik: &IntegrableKernel, rho: &[f64], v: &Configuration, theta: &Marking, zs: &[C64]) -> Result<Case> {
    let n = ik.space().len();
    let x = ik.space().nodes();
    let pv = palm_update(ik, v)?;
    let constraint = max_of((0..n).map(|i| {
        let s: C64 = pv.f().row(i).iter().zip(pv.g().row(i).iter()).map(|(a, b)| a * b).sum();
        s.norm() * rho[i]
    }));

    let rd = rational_dressing(ik, v)?;
    let nilpotent = max_of(rd.residues().iter().map(|r| max_abs(&(r * r))));
    let residue_norm = max_of(rd.residues().iter().map(max_abs));
    let (mut dmax, mut pmax) = (0.0f64, 0.0f64);
    for &z in zs {
        let p = rd.product(z)?;
        dmax = dmax.max((det(&p) - 1.0).norm());
        pmax = pmax.max(max_abs(&(&p - rd.closed_form(z)?)));
    }

    let matrix = palm_kernel(&ik.to_kernel()?, v)?.into_kernel();
    let palm = weighted(&(pv.matrix() - matrix.matrix()), rho);

    let k = ik.rank();
    let twopi_i = C64::new(0.0, 2.0 * PI);
    let mut jump = 0.0f64;
    for i in (0..n).filter(|&i| !v.contains(i)) {
        let t = theta.values()[i];
        let jv = CMat::identity(k, k) - pv.f().row(i).transpose() * pv.g().row(i) * (twopi_i * t);
        let j0 = CMat::identity(k, k) - ik.f().row(i).transpose() * ik.g().row(i) * (twopi_i * t);
        let r = rd.closed_form(C64::new(x[i], 0.0))?;
        let rinv = r.clone().try_inverse().ok_or_else(|| CliError::config(format!("R(x_{i}) is singular")))?;
        jump = jump.max(max_abs(&(jv - &rinv * j0 * &r)) * rho[i]);
    }

    let identity = vec![CMat::identity(k, k); n];
    let trivial = max_abs(&(dressed_kernel(ik, v, &identity)?.matrix() - pv.matrix()));

    Ok(Case {
        points: v.indices().to_vec(),
        constraint,
        nilpotent,
        det: dmax,
        product: pmax,
        palm,
        jump,
        trivial,
        residue_norm,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if p.max_points == 0 {
        return Err(CliError::config("integrable-check needs max_points ≥ 1"));
    }
    let (ik, rho) = integrable(cfg)?;
    let n = ik.space().len();
    let (lo, hi) = ik.space().nodes().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut r = Report::new(Verb::IntegrableCheck, cfg.resolved(&p)?);
    r.note("rank", ik.rank());
    r.check("base_constraint", max_of((0..n).map(|i| {
        let s: C64 = ik.f().row(i).iter().zip(ik.g().row(i).iter()).map(|(a, b)| a * b).sum();
        s.norm() * rho[i]
    })), Bound::AtMost(p.constraint_tolerance));

    let sampler = SpectralSampler::new(&ik.to_real_kernel()?)?;
    if sampler.eigenvalues().iter().all(|&l| l < 1e-3) {
        return Err(CliError::config("the kernel almost never produces points on this ground set"));
    }
    let mut inputs = Vec::with_capacity(p.cases + 1);
    for c in 0..p.cases {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(c as u64);
        // up to max_points of an exact sample, so observations are ones the process produces
        let mut idx = Vec::new();
        while idx.is_empty() {
            idx = sampler.draw(&mut rng).indices().to_vec();
        }
        let size = rng.random_range(1..=p.max_points.min(idx.len()));
        for i in 0..size {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(size);
        let theta = random_marking(n, &mut rng)?;
        let zs: Vec<C64> = (0..p.spectral_points)
            .map(|_| C64::new(lo + (hi - lo) * rng.random::<f64>(), 0.1 + rng.random::<f64>()))
            .collect();
        inputs.push((Configuration::from_unsorted(idx)?, theta, zs));
    }
    if let Some(v) = match &cfg.observation {
        Some(o) => o.fixed(ik.space())?,
        None => None,
    } {
        let theta = cfg.marking_or(0.5)?.on(ik.space(), 0.0)?;
        let zs = (0..p.spectral_points.max(1)).map(|j| C64::new(lo + (hi - lo) * (j as f64 + 0.5) / p.spectral_points.max(1) as f64, 0.5)).collect();
        inputs.push((v, theta, zs));
    }
    let cases: Vec<Case> = inputs.par_iter().map(|(v, t, zs)| case(&ik, &rho, v, t, zs)).collect::<Result<_>>()?;

    let mut t = Table::new(
        "cases",
        &["case", "points", "constraint", "nilpotent", "det_defect", "product_defect", "palm_defect", "jump_defect", "trivial_dressing", "residue_norm"],
    );
    for (i, c) in cases.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            join(&c.points),
            num(c.constraint),
            num(c.nilpotent),
            num(c.det),
            num(c.product),
            num(c.palm),
            num(c.jump),
            num(c.trivial),
            num(c.residue_norm),
        ]);
    }
    let worst = |f: fn(&Case) -> f64| max_of(cases.iter().map(f));
    r.check("palm_constraint", worst(|c| c.constraint), Bound::AtMost(p.constraint_tolerance));
    r.check("residue_nilpotent", worst(|c| c.nilpotent), Bound::AtMost(p.nilpotent_tolerance));
    r.check("dressing_det", worst(|c| c.det), Bound::AtMost(p.dressing_tolerance));
    r.check("dressing_closed_form", worst(|c| c.product), Bound::AtMost(p.dressing_tolerance));
    r.check("palm_update_vs_matrix", worst(|c| c.palm), Bound::AtMost(p.palm_tolerance));
    r.check("jump_conjugation", worst(|c| c.jump), Bound::AtMost(p.jump_tolerance));
    r.check("trivial_dressing", worst(|c| c.trivial), Bound::AtMost(0.0));
    r.tables.push(t);
    Ok(r)
}
