//! Maximal Lyapunov exponent by the two-trajectory Benettin method, and the
//! search for the gain at which it changes sign.
//!
//! A reference trajectory and a copy displaced by `eps` along a random unit
//! direction are evolved together. After every step the separation `d` is
//! measured on `h`, `ln(d / eps)` is recorded once the transient is over, and
//! the copy is pulled back to distance `eps` along the current separation.
//! For LSTMs the carried output gates are pulled back by the same factor.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::disorder::{realize, DisorderRealization, NetworkConfig};
use crate::dynamics::{HiddenState, Propagator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::norm2;
use crate::rng::substream;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenettinOptions {
    /// Total number of steps, transient included.
    pub t: usize,
    pub transient: usize,
    pub eps: f64,
    /// Number of batches for the batch-means standard error.
    pub batches: usize,
}

impl Default for BenettinOptions {
    fn default() -> Self {
        Self {
            t: 3000,
            transient: 200,
            eps: 1e-7,
            batches: 10,
        }
    }
}

impl BenettinOptions {
    pub fn validate(&self) -> Result<()> {
        if self.t <= self.transient {
            return Err(Error::Config(format!(
                "T must exceed the transient (T = {}, transient = {})",
                self.t, self.transient
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1e-2) {
            return Err(Error::Config(format!(
                "eps must lie in (0, 1e-2), got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub g: f64,
    /// Nats per step; `-inf` when the two trajectories merged exactly.
    pub lambda_max: f64,
    /// Batch-means error for one replica, across-replica standard error otherwise.
    pub stderr: f64,
    pub steps_used: usize,
    pub transient: usize,
    pub replicas: usize,
    pub eps: f64,
    /// Trajectories collapsed onto each other (`d = 0`) in at least one replica.
    pub merged: bool,
    pub per_replica: Vec<f64>,
}

/// Random unit vector from the realization's `"benettin"` substream.
pub fn perturbation_direction(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = substream(seed, "benettin");
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Rescale `pert - reference` to length `eps`; returns the length before rescaling.
/// `aux` pairs (LSTM output gates) are rescaled by the same factor.
fn renormalize(
    reference: &[f64],
    pert: &mut [f64],
    aux_ref: &[f64],
    aux_pert: &mut [f64],
    eps: f64,
) -> f64 {
    let d = reference
        .iter()
        .zip(pert.iter())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    if d == 0.0 {
        return 0.0;
    }
    let s = eps / d;
    for (p, r) in pert.iter_mut().zip(reference) {
        *p = r + s * (*p - r);
    }
    for (p, r) in aux_pert.iter_mut().zip(aux_ref) {
        *p = r + s * (*p - r);
    }
    d
}

struct Tracker {
    logs: Vec<f64>,
    merged: bool,
}

impl Tracker {
    fn finish(self, g: f64, opts: &BenettinOptions) -> LyapunovEstimate {
        let steps_used = opts.t - opts.transient;
        let (lambda, stderr) = if self.merged {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (
                stats::mean(&self.logs),
                stats::batch_means_stderr(&self.logs, opts.batches),
            )
        };
        LyapunovEstimate {
            g,
            lambda_max: lambda,
            stderr,
            steps_used,
            transient: opts.transient,
            replicas: 1,
            eps: opts.eps,
            merged: self.merged,
            per_replica: vec![lambda],
        }
    }
}

/// Benettin estimate for a generic map `step(x)` in place, starting at `x0`.
pub fn benettin_map(
    mut step: impl FnMut(&mut [f64]),
    x0: &[f64],
    direction: &[f64],
    opts: &BenettinOptions,
) -> Result<LyapunovEstimate> {
    opts.validate()?;
    let mut x = x0.to_vec();
    let mut y: Vec<f64> = x0.iter().zip(direction).map(|(a, v)| a + opts.eps * v).collect();
    let mut tr = Tracker {
        logs: Vec::with_capacity(opts.t - opts.transient),
        merged: false,
    };
    for t in 1..=opts.t {
        step(&mut x);
        step(&mut y);
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                step: t,
                replica_seed: None,
            });
        }
        let d = renormalize(&x, &mut y, &[], &mut [], opts.eps);
        if d == 0.0 {
            tr.merged = true;
            break;
        }
        if t > opts.transient {
            tr.logs.push((d / opts.eps).ln());
        }
    }
    Ok(tr.finish(f64::NAN, opts))
}

/// Benettin estimates at several gains on one realization, advanced together.
pub fn benettin_batch(
    real: &DisorderRealization,
    gains: &[f64],
    h0: &HiddenState,
    opts: &BenettinOptions,
) -> Result<Vec<LyapunovEstimate>> {
    opts.validate()?;
    let n = real.n;
    let dir = perturbation_direction(real.seed, n);
    let pert = HiddenState {
        h: h0.h.iter().zip(&dir).map(|(a, v)| a + opts.eps * v).collect(),
        output_gate: h0.output_gate.clone(),
    };
    let mut cols = Vec::with_capacity(2 * gains.len());
    let mut starts = Vec::with_capacity(2 * gains.len());
    for &g in gains {
        cols.extend_from_slice(&[g, g]);
        starts.push(h0.clone());
        starts.push(pert.clone());
    }
    let mut prop = Propagator::with_states(real, &cols, &starts)?;
    let mut trackers: Vec<Tracker> = gains
        .iter()
        .map(|_| Tracker {
            logs: Vec::with_capacity(opts.t - opts.transient),
            merged: false,
        })
        .collect();
    for t in 1..=opts.t {
        prop.step(None)?;
        let (h, o) = prop.buffers_mut();
        for (j, tr) in trackers.iter_mut().enumerate() {
            let (h_ref, h_pert) = h[2 * j * n..(2 * j + 2) * n].split_at_mut(n);
            let d = if o.is_empty() {
                renormalize(h_ref, h_pert, &[], &mut [], opts.eps)
            } else {
                let (o_ref, o_pert) = o[2 * j * n..(2 * j + 2) * n].split_at_mut(n);
                renormalize(h_ref, h_pert, o_ref, o_pert, opts.eps)
            };
            if tr.merged {
                continue;
            }
            if d == 0.0 {
                tr.merged = true;
            } else if t > opts.transient {
                tr.logs.push((d / opts.eps).ln());
            }
        }
    }
    Ok(trackers
        .into_iter()
        .zip(gains)
        .map(|(tr, &g)| tr.finish(g, opts))
        .collect())
}

pub fn benettin_lambda_max(
    real: &DisorderRealization,
    g: f64,
    h0: &HiddenState,
    opts: &BenettinOptions,
) -> Result<LyapunovEstimate> {
    Ok(benettin_batch(real, &[g], h0, opts)?.remove(0))
}

fn aggregate(g: f64, reps: Vec<LyapunovEstimate>, opts: &BenettinOptions) -> LyapunovEstimate {
    if reps.len() == 1 {
        return reps.into_iter().next().unwrap();
    }
    let vals: Vec<f64> = reps.iter().map(|e| e.lambda_max).collect();
    let merged = reps.iter().any(|e| e.merged);
    let stderr = if merged {
        0.0
    } else {
        stats::sample_sd(&vals) / (vals.len() as f64).sqrt()
    };
    LyapunovEstimate {
        g,
        lambda_max: stats::mean(&vals),
        stderr,
        steps_used: opts.t - opts.transient,
        transient: opts.transient,
        replicas: reps.len(),
        eps: opts.eps,
        merged,
        per_replica: vals,
    }
}

/// Replica-averaged exponents over a gain grid; replica `r` uses `config.replica(r)`.
pub fn lyapunov_sweep(
    config: &NetworkConfig,
    gains: &[f64],
    replicas: usize,
    h0: f64,
    opts: &BenettinOptions,
    exec: Exec,
) -> Result<Vec<LyapunovEstimate>> {
    config.validate()?;
    opts.validate()?;
    if replicas == 0 {
        return Err(Error::Config("replicas must be >= 1".into()));
    }
    let per_rep = exec.try_map(replicas, |r| {
        let cfg = config.replica(r);
        let real = realize(&cfg)?;
        benettin_batch(&real, gains, &HiddenState::constant(cfg.n, h0), opts)
            .map_err(|e| e.with_replica_seed(cfg.seed))
    })?;
    Ok(gains
        .iter()
        .enumerate()
        .map(|(j, &g)| aggregate(g, per_rep.iter().map(|v| v[j].clone()).collect(), opts))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingMode {
    /// Each replica is bisected on its own quenched disorder; the crossings are
    /// averaged and their spread gives the interval.
    PerReplica,
    /// One bracket refined on the replica-averaged sign; the interval comes from
    /// the across-replica spread of the exponent divided by the bracket slope.
    SharedBracket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingOptions {
    pub g_lo: f64,
    pub g_hi: f64,
    pub tol_g: f64,
    pub replicas: usize,
    /// Interior points per refinement round (1 = bisection). All points of a
    /// round share one pass over the weights per step.
    pub interior: usize,
    pub mode: CrossingMode,
    pub benettin: BenettinOptions,
    pub h0: f64,
    pub exec: Exec,
    /// Per-replica bracket widenings allowed when a replica's own endpoints do
    /// not straddle zero.
    pub max_expand: usize,
}

impl CrossingOptions {
    pub fn new(g_lo: f64, g_hi: f64, replicas: usize) -> Self {
        Self {
            g_lo,
            g_hi,
            tol_g: 5e-3,
            replicas,
            interior: 1,
            mode: CrossingMode::PerReplica,
            benettin: BenettinOptions::default(),
            h0: 1.0,
            exec: Exec::default(),
            max_expand: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.g_lo >= 0.0 && self.g_lo < self.g_hi && self.g_hi.is_finite()) {
            return Err(Error::Config(format!(
                "bracket must satisfy 0 <= g_lo < g_hi, got [{}, {}]",
                self.g_lo, self.g_hi
            )));
        }
        if !(self.tol_g > 0.0) {
            return Err(Error::Config("tol_g must be > 0".into()));
        }
        if self.replicas == 0 || self.interior == 0 {
            return Err(Error::Config("replicas and interior points must be >= 1".into()));
        }
        self.benettin.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub s_b: f64,
    pub g_star: f64,
    pub ci95_halfwidth: f64,
    pub bracket: (f64, f64),
    pub replicas: usize,
    pub mode: CrossingMode,
    /// Replica-averaged exponents at the bracket endpoints.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Per-replica crossings (per-replica mode only).
    pub per_replica: Vec<f64>,
    /// Number of (gain, replica) exponent evaluations.
    pub evaluations: usize,
}

fn interior_points(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|k| lo + (hi - lo) * k as f64 / (m + 1) as f64).collect()
}

/// Narrow `[lo, hi]` to the first sub-interval whose right end has a positive exponent.
fn refine(lo: f64, hi: f64, pts: &[f64], lambdas: &[f64]) -> (f64, f64) {
    let mut left = lo;
    for (&g, &l) in pts.iter().zip(lambdas) {
        if l > 0.0 {
            return (left, g);
        }
        left = g;
    }
    (left, hi)
}

fn replica_crossing(
    real: &DisorderRealization,
    h0: &HiddenState,
    mut lo: f64,
    mut hi: f64,
    mut lam_lo: f64,
    mut lam_hi: f64,
    opts: &CrossingOptions,
) -> Result<(f64, usize)> {
    let mut evals = 0;
    let mut expansions = 0;
    while !(lam_lo <= 0.0 && lam_hi > 0.0) {
        if expansions == opts.max_expand || (lam_lo > 0.0 && lo == 0.0) {
            return Err(Error::Bracket {
                g_lo: lo,
                lambda_lo: lam_lo,
                g_hi: hi,
                lambda_hi: lam_hi,
            });
        }
        let w = hi - lo;
        if lam_lo > 0.0 {
            hi = lo;
            lam_hi = lam_lo;
            lo = (lo - w).max(0.0);
            lam_lo = benettin_lambda_max(real, lo, h0, &opts.benettin)?.lambda_max;
        } else {
            lo = hi;
            lam_lo = lam_hi;
            hi += w;
            lam_hi = benettin_lambda_max(real, hi, h0, &opts.benettin)?.lambda_max;
        }
        evals += 1;
        expansions += 1;
    }
    while hi - lo >= opts.tol_g {
        let pts = interior_points(lo, hi, opts.interior);
        let lams: Vec<f64> = benettin_batch(real, &pts, h0, &opts.benettin)?
            .iter()
            .map(|e| e.lambda_max)
            .collect();
        evals += pts.len();
        (lo, hi) = refine(lo, hi, &pts, &lams);
    }
    Ok((0.5 * (lo + hi), evals))
}

/// Gain at which the maximal exponent changes sign, with a 95% interval.
pub fn find_crossing(config: &NetworkConfig, opts: &CrossingOptions) -> Result<CrossingEstimate> {
    config.validate()?;
    opts.validate()?;
    let endpoints = opts.exec.try_map(opts.replicas, |r| {
        let cfg = config.replica(r);
        let real = realize(&cfg)?;
        let h0 = HiddenState::constant(cfg.n, opts.h0);
        let e = benettin_batch(&real, &[opts.g_lo, opts.g_hi], &h0, &opts.benettin)
            .map_err(|e| e.with_replica_seed(cfg.seed))?;
        Ok::<_, Error>((e[0].lambda_max, e[1].lambda_max))
    })?;
    let lam_lo = stats::mean(&endpoints.iter().map(|e| e.0).collect::<Vec<_>>());
    let lam_hi = stats::mean(&endpoints.iter().map(|e| e.1).collect::<Vec<_>>());
    if !(lam_lo < 0.0 && lam_hi > 0.0) {
        return Err(Error::Bracket {
            g_lo: opts.g_lo,
            lambda_lo: lam_lo,
            g_hi: opts.g_hi,
            lambda_hi: lam_hi,
        });
    }
    let s_b = config.scheme.gate_sd();
    let mut evaluations = 2 * opts.replicas;
    match opts.mode {
        CrossingMode::PerReplica => {
            let found = opts.exec.try_map(opts.replicas, |r| {
                let cfg = config.replica(r);
                let real = realize(&cfg)?;
                let h0 = HiddenState::constant(cfg.n, opts.h0);
                let (l, h) = endpoints[r];
                replica_crossing(&real, &h0, opts.g_lo, opts.g_hi, l, h, opts)
                    .map_err(|e| e.with_replica_seed(cfg.seed))
            })?;
            let per_replica: Vec<f64> = found.iter().map(|f| f.0).collect();
            evaluations += found.iter().map(|f| f.1).sum::<usize>();
            let s = stats::summarize(&per_replica);
            Ok(CrossingEstimate {
                s_b,
                g_star: s.mean,
                ci95_halfwidth: s.ci95,
                bracket: (opts.g_lo, opts.g_hi),
                replicas: opts.replicas,
                mode: opts.mode,
                lambda_lo: lam_lo,
                lambda_hi: lam_hi,
                per_replica,
                evaluations,
            })
        }
        CrossingMode::SharedBracket => {
            let (mut lo, mut hi) = (opts.g_lo, opts.g_hi);
            let mut nearest: Option<(f64, Vec<f64>)> = None;
            while hi - lo >= opts.tol_g {
                let pts = interior_points(lo, hi, opts.interior);
                let per_rep = opts.exec.try_map(opts.replicas, |r| {
                    let cfg = config.replica(r);
                    let real = realize(&cfg)?;
                    let h0 = HiddenState::constant(cfg.n, opts.h0);
                    benettin_batch(&real, &pts, &h0, &opts.benettin)
                        .map_err(|e| e.with_replica_seed(cfg.seed))
                })?;
                evaluations += pts.len() * opts.replicas;
                let avg: Vec<f64> = (0..pts.len())
                    .map(|j| stats::mean(&per_rep.iter().map(|v| v[j].lambda_max).collect::<Vec<_>>()))
                    .collect();
                (lo, hi) = refine(lo, hi, &pts, &avg);
                let mid = 0.5 * (lo + hi);
                let j = (0..pts.len())
                    .min_by(|&a, &b| (pts[a] - mid).abs().total_cmp(&(pts[b] - mid).abs()))
                    .unwrap();
                nearest = Some((pts[j], per_rep.iter().map(|v| v[j].lambda_max).collect()));
            }
            let g_star = 0.5 * (lo + hi);
            let slope = (lam_hi - lam_lo) / (opts.g_hi - opts.g_lo);
            let ci = match nearest {
                Some((_, lams)) => stats::ci95_halfwidth(&lams) / slope,
                None => f64::INFINITY,
            };
            Ok(CrossingEstimate {
                s_b,
                g_star,
                ci95_halfwidth: ci,
                bracket: (opts.g_lo, opts.g_hi),
                replicas: opts.replicas,
                mode: opts.mode,
                lambda_lo: lam_lo,
                lambda_hi: lam_hi,
                per_replica: Vec::new(),
                evaluations,
            })
        }
    }
}
