//! Expectations under a centred Gaussian.
//!
//! Gauss-Hermite rules of order 20, 40, ..., 320 are tried in turn until two
//! successive orders agree to the tolerance. Integrands with structure much
//! narrower than the standard deviation (a sigmoid under a very wide Gaussian)
//! defeat that; those fall back to adaptive Gauss-Legendre on a truncated
//! range with geometric breakpoints around the origin.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{GaussHermite, GaussLegendre};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

const HERMITE_ORDERS: [usize; 5] = [20, 40, 80, 160, 320];
const LEGENDRE_ORDER: usize = 15;
const MAX_DEPTH: usize = 30;
const MAX_SPLITS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    /// Point mass (zero standard deviation).
    Exact,
    GaussHermite,
    AdaptiveLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    /// Difference between the last two estimates.
    pub achieved: f64,
    /// Hermite order, or number of accepted Legendre panels.
    pub order: usize,
    pub method: QuadMethod,
}

fn hermite_rule(level: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: [OnceLock<(Vec<f64>, Vec<f64>)>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    RULES[level].get_or_init(|| {
        let rule = GaussHermite::new(NonZeroUsize::new(HERMITE_ORDERS[level]).unwrap());
        rule.iter().map(|(x, w)| (*x, *w)).unzip()
    })
}

fn legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(LEGENDRE_ORDER).unwrap());
        rule.iter().map(|(x, w)| (*x, *w)).unzip()
    })
}

fn hermite_estimate(f: &impl Fn(f64) -> f64, sd: f64, level: usize) -> f64 {
    let (x, w) = hermite_rule(level);
    let scale = std::f64::consts::SQRT_2 * sd;
    let s: f64 = x.iter().zip(w).map(|(&x, &w)| w * f(scale * x)).sum();
    s / std::f64::consts::PI.sqrt()
}

fn legendre_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = legendre_rule();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * x.iter().zip(w).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>()
}

/// Adaptive bisection; returns (integral, accepted panels, worst local error).
/// `budget` caps the total number of panel splits across calls.
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    budget: &mut usize,
) -> (f64, usize, f64) {
    let m = 0.5 * (a + b);
    let left = legendre_panel(f, a, m);
    let right = legendre_panel(f, m, b);
    let err = (left + right - whole).abs();
    if err <= tol || depth == 0 || *budget == 0 {
        return (left + right, 1, err);
    }
    *budget -= 1;
    let (l, nl, el) = adaptive(f, a, m, left, 0.5 * tol, depth - 1, budget);
    let (r, nr, er) = adaptive(f, m, b, right, 0.5 * tol, depth - 1, budget);
    (l + r, nl + nr, el.max(er))
}

/// `E[f(b)]` for `b ~ N(0, sd^2)`.
///
/// The fallback range `[-L, L]` with `L = sd (12 + 2 sd)` keeps integrands that
/// grow up to `exp(2 |b|)` inside the window.
pub fn gaussian_expectation(f: impl Fn(f64) -> f64, sd: f64, tol: f64) -> Result<QuadResult> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::Domain(format!("standard deviation must be finite and >= 0, got {sd}")));
    }
    if sd == 0.0 {
        return Ok(QuadResult {
            value: f(0.0),
            achieved: 0.0,
            order: 1,
            method: QuadMethod::Exact,
        });
    }
    let mut prev = hermite_estimate(&f, sd, 0);
    let mut achieved = f64::INFINITY;
    for level in 1..HERMITE_ORDERS.len() {
        let cur = hermite_estimate(&f, sd, level);
        achieved = (cur - prev).abs();
        if achieved < tol * cur.abs().max(1.0) {
            return Ok(QuadResult {
                value: cur,
                achieved,
                order: HERMITE_ORDERS[level],
                method: QuadMethod::GaussHermite,
            });
        }
        prev = cur;
    }
    log::debug!("Gauss-Hermite stalled at {achieved:.3e} (sd = {sd}); switching to adaptive Legendre");
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let g = |b: f64| f(b) * norm * (-0.5 * (b / sd) * (b / sd)).exp();
    let range = sd * (12.0 + 2.0 * sd);
    // geometric breakpoints 0, 1/4, 1/2, 1, 2, ... resolve structure near the origin
    let mut edges = vec![0.0];
    let mut e = 0.25;
    while e < range {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(range);
    let scale = prev.abs().max(1.0);
    let panel_tol = 0.5 * tol * scale / (edges.len() - 1) as f64;
    let (mut value, mut panels, mut err) = (0.0, 0, 0.0f64);
    let mut budget = MAX_SPLITS;
    for w in edges.windows(2) {
        for (a, b) in [(w[0], w[1]), (-w[1], -w[0])] {
            let (v, np, ep) = adaptive(&g, a, b, legendre_panel(&g, a, b), panel_tol, MAX_DEPTH, &mut budget);
            value += v;
            panels += np;
            err = err.max(ep);
        }
    }
    if !(value.is_finite() && err <= tol * value.abs().max(1.0)) {
        return Err(Error::Quadrature {
            achieved: err.min(achieved),
            order: panels,
        });
    }
    Ok(QuadResult {
        value,
        achieved: err,
        order: panels,
        method: QuadMethod::AdaptiveLegendre,
    })
}
