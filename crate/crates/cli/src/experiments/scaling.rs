//! Rescaled CUE kernels against the sine kernel.

use std::f64::consts::PI;

use dppc_core::kernels::{cue_value, sine_value};
use dppc_core::C64;
use serde::{Deserialize, Serialize};

use super::max_of;
use crate::config::{ExperimentConfig, Verb};
use crate::error::{CliError, Result};
use crate::report::{num, Bound, Report, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub sizes: Vec<usize>,
    /// Grid `|u|, |v| ≤ extent`.
    pub extent: f64,
    pub points: usize,
    pub error_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            sizes: vec![25, 50, 100, 200],
            extent: 2.0,
            points: 41,
            error_max: 1e-2,
            ratio_min: 0.4,
            ratio_max: 0.6,
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let p: Params = cfg.params()?;
    if p.sizes.is_empty() || p.sizes.contains(&0) || p.points < 2 {
        return Err(CliError::config("scaling needs positive sizes and at least two grid points"));
    }
    let mut r = Report::new(Verb::Scaling, cfg.resolved(&p)?);
    let u: Vec<f64> = (0..p.points)
        .map(|i| -p.extent + 2.0 * p.extent * i as f64 / (p.points - 1) as f64)
        .collect();
    let mut table = Table::new("errors", &["n", "sup_error", "ratio", "diagonal_defect", "sum_form_error"]);
    let mut errors = Vec::new();
    for &n in &p.sizes {
        let h = 2.0 * PI / n as f64;
        let (mut err, mut sum_form, mut diag) = (0.0f64, 0.0f64, 0.0f64);
        for &a in &u {
            for &b in &u {
                let k = h * cue_value(n, h * a, h * b);
                let s = sine_value(a, b);
                err = err.max((k - s).abs());
                // the same kernel written as Σ_{j<n} e^{ij(t−s)}/2π, against
                // the sine kernel conjugated by e^{iπu}
                let raw = C64::from_polar(k, PI * (a - b) * (n - 1) as f64 / n as f64);
                sum_form = sum_form.max((raw - C64::from_polar(s, PI * (a - b))).norm());
            }
            diag = diag.max((h * cue_value(n, h * a, h * a) - 1.0).abs());
        }
        let ratio = errors.last().map(|&prev: &f64| err / prev);
        table.push(vec![
            n.to_string(),
            num(err),
            ratio.map_or(String::new(), num),
            num(diag),
            num(sum_form),
        ]);
        errors.push(err);
        r.check(&format!("diagonal_n{n}"), diag, Bound::AtMost(1e-14));
    }
    for w in p.sizes.windows(2).zip(errors.windows(2)) {
        let ([a, b], [ea, eb]) = w else { unreachable!() };
        r.check(
            &format!("error_ratio_{a}_to_{b}"),
            eb / ea,
            Bound::Within(p.ratio_min, p.ratio_max),
        );
    }
    let last = *p.sizes.last().expect("nonempty");
    r.check(
        &format!("sup_error_n{last}"),
        *errors.last().expect("nonempty"),
        Bound::AtMost(p.error_max),
    );
    r.note("sup_errors", &errors);
    r.note("max_diagonal_defect", max_of(table.rows.iter().map(|row| row[3].parse().unwrap_or(f64::NAN))));
    r.tables.push(table);
    Ok(r)
}
