//! Airy function `Ai` and its derivative.
//!
//! For `|x| <= 9` the Maclaurin series is summed in double-double
//! arithmetic: the alternating terms reach about `e^{2|x|^{3/2}/3}` before
//! cancelling, which at `|x| = 9` is `6.5e7` and would cost eight digits in
//! plain `f64`. Beyond `|x| = 9` the Poincaré expansions are used; their
//! optimally truncated error is below `e^{-2ζ} ≈ 2e-16` relative there, with
//! `ζ = 2|x|^{3/2}/3`.
//!
//! Absolute error is below `1e-12` on `[-15, 8]`, the range accepted by
//! [`airy_certified`].

use std::f64::consts::PI;

use twofloat::TwoFloat;

use crate::error::{DppError, Result};

pub const SERIES_LIMIT: f64 = 9.0;
pub const CERTIFIED_RANGE: (f64, f64) = (-15.0, 8.0);

// Ai(0) and -Ai'(0) as (hi, lo) pairs.
const AI0: (f64, f64) = (0.3550280538878172, 2.05233632436212e-17);
const MINUS_AIP0: (f64, f64) = (0.2588194037928068, -2.522243111610832e-17);

/// `(Ai(x), Ai'(x))`.
pub fn airy(x: f64) -> (f64, f64) {
    if x.abs() <= SERIES_LIMIT {
        series(x)
    } else if x > 0.0 {
        asymptotic_pos(x)
    } else {
        asymptotic_neg(-x)
    }
}

/// [`airy`] restricted to the certified range.
pub fn airy_certified(x: f64) -> Result<(f64, f64)> {
    if !(CERTIFIED_RANGE.0..=CERTIFIED_RANGE.1).contains(&x) {
        return Err(DppError::UncertifiedAiryRange(x));
    }
    Ok(airy(x))
}

fn dd(p: (f64, f64)) -> TwoFloat {
    TwoFloat::try_from(p).expect("non-overlapping constant")
}

fn series(x: f64) -> (f64, f64) {
    let x = TwoFloat::from(x);
    let x3 = x * x * x;
    let tiny = 1e-34;

    // f = Σ t_k, g = Σ s_k, with f'(x) = Σ a_k and g'(x) = Σ b_k.
    let mut t = TwoFloat::from(1.0);
    let mut s = x;
    let mut a = x * x / 2.0;
    let mut b = TwoFloat::from(1.0);
    let (mut f, mut g, mut df, mut dg) = (t, s, a, b);
    for k in 0..200 {
        let kf = k as f64;
        t = t * x3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        s = s * x3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        let k1 = kf + 1.0;
        a = a * x3 / (3.0 * k1 * (3.0 * k1 + 2.0));
        b = b * x3 / (3.0 * k1 * (3.0 * k1 - 2.0));
        f += t;
        g += s;
        df += a;
        dg += b;
        let scale = f.hi().abs().max(g.hi().abs()).max(1.0);
        if t.hi().abs().max(s.hi().abs()).max(a.hi().abs()).max(b.hi().abs()) < tiny * scale {
            break;
        }
    }
    let c1 = dd(AI0);
    let c2 = dd(MINUS_AIP0);
    let ai = c1 * f - c2 * g;
    let aip = c1 * df - c2 * dg;
    (ai.hi() + ai.lo(), aip.hi() + aip.lo())
}

/// Coefficients `u_k`, `v_k` of the large-argument expansions.
fn uv(kmax: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![1.0];
    for k in 1..=kmax {
        let kf = k as f64;
        let prev = u[k - 1];
        u.push(
            prev * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf),
        );
    }
    let v = u
        .iter()
        .enumerate()
        .map(|(k, &uk)| {
            let kf = k as f64;
            -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk
        })
        .collect();
    (u, v)
}

/// Optimally truncated `Σ c_k (sign)^k ζ^{-k}` over the selected indices.
fn truncated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut last = f64::INFINITY;
    for t in terms {
        if t.abs() > last || t.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        sum += t;
        last = t.abs();
    }
    sum
}

fn asymptotic_pos(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let (u, v) = uv(60);
    let su = truncated_sum((0..u.len()).map(|k| (-1f64).powi(k as i32) * u[k] / zeta.powi(k as i32)));
    let sv = truncated_sum((0..v.len()).map(|k| (-1f64).powi(k as i32) * v[k] / zeta.powi(k as i32)));
    let e = (-zeta).exp() / (2.0 * PI.sqrt());
    let q = x.powf(0.25);
    (e / q * su, -e * q * sv)
}

fn asymptotic_neg(y: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * y.powf(1.5);
    let (u, v) = uv(80);
    let even = |c: &[f64]| {
        truncated_sum((0..c.len() / 2).map(|k| (-1f64).powi(k as i32) * c[2 * k] / zeta.powi(2 * k as i32)))
    };
    let odd = |c: &[f64]| {
        truncated_sum(
            (0..c.len() / 2 - 1)
                .map(|k| (-1f64).powi(k as i32) * c[2 * k + 1] / zeta.powi(2 * k as i32 + 1)),
        )
    };
    let phase = zeta - PI / 4.0;
    let (sn, cs) = phase.sin_cos();
    let q = y.powf(0.25);
    let ai = (cs * even(&u) + sn * odd(&u)) / (PI.sqrt() * q);
    let aip = q * (sn * even(&v) - cs * odd(&v)) / PI.sqrt();
    (ai, aip)
}
