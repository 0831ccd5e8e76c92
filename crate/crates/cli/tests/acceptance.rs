//! One line per acceptance criterion. Criteria listed in `KNOWN_RED` are
//! expected to fail at their stated tolerance; everything else must pass.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dppc_cli::{run_config, Report};
use serde_json::{json, Value};

const KNOWN_RED: &[u32] = &[6, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(cfg: Value) -> Report {
    run_config(&cfg).unwrap_or_else(|e| panic!("{e}\nconfig: {cfg}"))
}

/// All named checks of `r` must pass; returns their summary.
fn require(r: &Report, names: &[&str], detail: &mut Vec<String>) -> bool {
    let mut ok = true;
    for n in names {
        match r.check_named(n) {
            Some(c) => {
                ok &= c.pass;
                detail.push(format!("{n}={:.3e}{}", c.value, if c.pass { "" } else { "!" }));
            }
            None => {
                ok = false;
                detail.push(format!("{n}=missing"));
            }
        }
    }
    ok
}

fn within(t: Duration, limit: f64, what: &str, detail: &mut Vec<String>) -> bool {
    let s = t.as_secs_f64();
    detail.push(format!("{what}_time={s:.2}s"));
    s < limit
}

fn outcome(pass: bool, detail: Vec<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.join(" "),
    }
}

fn oracle_equivalence() -> Outcome {
    let mut d = Vec::new();
    let start = Instant::now();
    let r = run(json!({"experiment": "oracle-check", "seed": 11,
        "params": {"cases": 50, "max_nodes": 8, "functional_cases": 0}}));
    let t = start.elapsed();
    let ok = require(&r, &["conditional_correlation_error"], &mut d);
    outcome(ok & within(t, 30.0, "total", &mut d), d)
}

fn multiplicative_identity() -> Outcome {
    let mut d = Vec::new();
    let r = run(json!({"experiment": "oracle-check", "seed": 12,
        "params": {"cases": 0, "functional_cases": 100, "functional_max_nodes": 10}}));
    outcome(require(&r, &["multiplicative_identity_error"], &mut d), d)
}

fn palm_algebra() -> Outcome {
    let mut d = Vec::new();
    let r = run(json!({"experiment": "palm", "seed": 13, "params": {"cases": 50, "nodes": 8, "points": 3}}));
    outcome(require(&r, &["order_independence", "iterated_vs_joint", "vanishing_rows"], &mut d), d)
}

fn integrable_dressing() -> Outcome {
    let names = [
        "base_constraint",
        "palm_constraint",
        "residue_nilpotent",
        "dressing_det",
        "dressing_closed_form",
        "palm_update_vs_matrix",
        "jump_conjugation",
        "trivial_dressing",
    ];
    let mut d = Vec::new();
    let mut ok = true;
    for (label, ground, kernel) in [
        ("sine", json!({"domain": "interval", "a": -4, "b": 4, "nodes": 60}), json!({"type": "sine"})),
        (
            "cd",
            json!({"domain": "interval", "a": -3.5, "b": 3.5, "nodes": 60}),
            json!({"type": "ope", "n": 4, "weight": "exp(-(x^2))"}),
        ),
    ] {
        let r = run(json!({"experiment": "integrable-check", "seed": 14, "ground": ground, "kernel": kernel,
            "params": {"cases": 20, "max_points": 3}}));
        d.push(format!("[{label}]"));
        ok &= require(&r, &names, &mut d);
    }
    outcome(ok, d)
}

fn gue_deformation() -> Outcome {
    let mut d = Vec::new();
    let mut ok = true;
    for n in [4, 10] {
        let r = run(json!({"experiment": "gue-deform", "ground": {"domain": "interval", "a": -3, "b": 3, "nodes": 200},
            "observation": {"points": [0.3]}, "params": {"n": n, "potential": "x^2 + x^4/10"}}));
        d.push(format!("[N={n}]"));
        ok &= require(&r, &["deviation_empty_observation", "deviation_observed"], &mut d);
    }
    outcome(ok, d)
}

fn cue_scaling() -> Outcome {
    let mut d = Vec::new();
    let r = run(json!({"experiment": "scaling", "params": {"sizes": [25, 50, 100, 200], "extent": 2}}));
    let ok = require(
        &r,
        &["sup_error_n200", "error_ratio_25_to_50", "error_ratio_50_to_100", "error_ratio_100_to_200"],
        &mut d,
    );
    outcome(ok, d)
}

fn jacobi_identity() -> Outcome {
    let mut d = Vec::new();
    let start = Instant::now();
    let r = run(json!({"experiment": "jacobi", "ground": {"domain": "interval", "a": -1, "b": 2, "nodes": 60},
        "kernel": {"type": "sine"},
        "marking": {"type": "expression", "expr": "(1 - exp(-t)) * ind(x, 0, 1)"},
        "params": {"t_count": 20, "dt": 1e-4, "tolerance": 1e-6}}));
    let t = start.elapsed();
    let ok = require(&r, &["max_abs_diff"], &mut d);
    outcome(ok & within(t, 10.0, "run", &mut d), d)
}

fn rigidity() -> Outcome {
    let mut d = Vec::new();
    let mut ok = true;
    for (i, marking) in [
        json!({"type": "constant", "value": 0.5}),
        json!({"type": "expression", "expr": "0.2 + 0.6 * ind(x, 0, 1)"}),
        json!({"type": "piecewise", "default": 1, "pieces": [{"from": -1, "to": 1, "value": 0.1}]}),
    ]
    .into_iter()
    .enumerate()
    {
        let r = run(json!({"experiment": "rigidity", "seed": 15 + i,
            "ground": {"domain": "interval", "a": -4, "b": 4, "nodes": 80},
            "kernel": {"type": "ope", "n": 5, "weight": "exp(-(x^2))"},
            "marking": marking, "params": {"observations": 30}}));
        d.push(format!("[projection θ{i}]"));
        ok &= require(&r, &["conditional_variance_max", "rank_identity_error", "failed_observations"], &mut d);
    }
    let r = run(json!({"experiment": "rigidity", "seed": 18,
        "ground": {"domain": "interval", "a": -10, "b": 10, "nodes": 300},
        "kernel": {"type": "sine"},
        "marking": {"type": "piecewise", "default": 1, "pieces": [{"from": -2, "to": 2, "value": 0.3}]},
        "params": {"observations": 100}}));
    d.push("[sine]".into());
    ok &= require(&r, &["projection_defect", "variance_ratio", "integer_fraction"], &mut d);
    outcome(ok, d)
}

fn sampler() -> Outcome {
    let mut d = Vec::new();
    let four = json!({"experiment": "sample", "seed": 19,
        "ground": {"domain": "finite", "points": [0, 1, 2, 3], "weights": [1, 1, 1, 1]},
        "kernel": {"type": "matrix", "real": [[0.5, 0.1, 0.0, 0.1], [0.1, 0.4, 0.2, 0.0], [0.0, 0.2, 0.6, 0.1], [0.1, 0.0, 0.1, 0.3]]},
        "params": {"count": 1_000_000, "significance": 1e-3, "write_limit": 0}});
    d.push("[4-node]".into());
    let mut ok = require(&run(four), &["chi_square_p_value"], &mut d);
    let projection = json!({"experiment": "sample", "seed": 20,
        "ground": {"domain": "interval", "a": -4, "b": 4, "nodes": 30},
        "kernel": {"type": "ope", "n": 5, "weight": "exp(-(x^2))"},
        "params": {"count": 100_000, "write_limit": 0}});
    d.push("[projection]".into());
    ok &= require(&run(projection), &["projection_count_spread"], &mut d);
    let sine = json!({"experiment": "sample", "seed": 21,
        "ground": {"domain": "interval", "a": 0, "b": 2, "nodes": 40},
        "kernel": {"type": "sine"},
        "params": {"count": 100_000, "phi": "0.5 * ind(x, 0, 1) + 0.25", "sigma_max": 3, "write_limit": 0}});
    d.push("[sine]".into());
    ok &= require(&run(sine), &["multiplicative_sigmas"], &mut d);
    outcome(ok, d)
}

fn fredholm_stability() -> Outcome {
    let mut d = Vec::new();
    let r = run(json!({"experiment": "fredholm", "ground": {"domain": "interval", "a": 0, "b": 1, "nodes": 40},
        "kernel": {"type": "sine"}, "params": {"phi": "ind(x, 0, 1)", "nodes": [40, 80], "digits": 6}}));
    outcome(require(&r, &["relative_change"], &mut d), d)
}

fn hankel_toeplitz() -> Outcome {
    let mut d = Vec::new();
    let line = run(json!({"experiment": "condition", "ground": {"domain": "interval", "a": -2, "b": 2, "nodes": 4},
        "kernel": {"type": "ope", "n": 2, "weight": "exp(-(x^2))"},
        "marking": {"type": "constant", "value": 0.4}, "params": {"marginal": {"m": 1, "tolerance": 1e-8}}}));
    d.push("[line]".into());
    let mut ok = require(&line, &["marginal_oracle_error", "single_moment_reduction"], &mut d);
    let circle = run(json!({"experiment": "condition", "ground": {"domain": "circle", "nodes": 6},
        "kernel": {"type": "circle-ope", "n": 2, "weight": "1 + cos(x)/2"},
        "marking": {"type": "constant", "value": 0.4}, "params": {"marginal": {"m": 1}}}));
    d.push("[circle]".into());
    ok &= require(&circle, &["single_moment_reduction"], &mut d);
    outcome(ok, d)
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "multiplicative-functional identity", multiplicative_identity),
        (3, "palm algebra", palm_algebra),
        (4, "integrable dressing suite", integrable_dressing),
        (5, "gue deformation", gue_deformation),
        (6, "cue to sine scaling", cue_scaling),
        (7, "jacobi identity", jacobi_identity),
        (8, "rigidity signatures", rigidity),
        (9, "sampler validity", sampler),
        (10, "fredholm quadrature stability", fredholm_stability),
        (11, "hankel/toeplitz marginal", hankel_toeplitz),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let known = !o.pass && KNOWN_RED.contains(&id);
        println!(
            "criterion {id:>2} {tag} {name}{}: {}",
            if known { " (known red)" } else { "" },
            o.detail
        );
        if !o.pass && !known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
