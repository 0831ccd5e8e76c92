//! Fredholm determinants `det(1 − φK)` under quadrature refinement.

use dppc_core::conditioning::fredholm_det;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::expr::Expr;
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub phi: String,
    /// Node counts, coarse to fine; the last two are compared.
    pub nodes: Vec<usize>,
    /// Agreement in this many significant digits: relative change `< 5·10^{-digits}`.
    pub digits: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            phi: "ind(x, 0, 1)".into(),
            nodes: vec![40, 80],
            digits: 6,
            reference: None,
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if p.nodes.len() < 2 {
        return Err(CliError::config("fredholm needs at least two node counts"));
    }
    let ground = cfg
        .ground
        .as_ref()
        .ok_or_else(|| CliError::config("fredholm needs a `ground`"))?;
    let phi = Expr::parse(&p.phi)?;
    let mut r = Report::new(Verb::Fredholm, cfg.resolved(&p)?);
    let mut table = Table::new("determinants", &["nodes", "det_re", "det_im"]);
    let mut dets = Vec::new();
    for &n in &p.nodes {
        let space = ground.with_nodes(n)?.build()?;
        let k = cfg.kernel_on(&space)?.kernel;
        let values = phi.eval_nodes(space.nodes(), 0.0)?;
        let d = fredholm_det(&k, &values)?;
        table.push(vec![n.to_string(), num(d.re), num(d.im)]);
        dets.push(d);
    }
    let (a, b) = (dets[dets.len() - 2], dets[dets.len() - 1]);
    let rel = (a - b).norm() / b.norm();
    r.check("relative_change", rel, Bound::AtMost(5.0 * 10f64.powi(-(p.digits as i32))));
    if let Some(reference) = p.reference {
        r.check(
            "reference_relative_error",
            (b.re - reference).abs() / reference.abs(),
            Bound::AtMost(5.0 * 10f64.powi(-(p.digits as i32))),
        );
    }
    r.note("determinant", b.re);
    r.note("determinant_imag", b.im);
    r.tables.push(table);
    Ok(r)
}
