//! The order parameter `q_t = (1/N) sum_i h_i^2` and its long-time value.

use serde::{Deserialize, Serialize};

use crate::disorder::{realize, NetworkConfig};
use crate::dynamics::{HiddenState, Propagator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::stats;

/// Below this, `q_inf` is reported as zero (ordered phase).
pub const Q_ZERO_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub g: f64,
    pub s_b: f64,
    pub s_c: f64,
    pub mean_q_inf: f64,
    pub ci95_halfwidth: f64,
    pub replicas: usize,
    pub t: usize,
    pub n: usize,
    pub tail_window: usize,
    /// Per-replica tail averages, in replica order.
    pub per_replica: Vec<f64>,
}

impl QEstimate {
    pub fn is_ordered(&self) -> bool {
        self.mean_q_inf < Q_ZERO_FLOOR
    }
}

pub fn q_of_state(h: &[f64]) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64
}

/// `min(T/4, 500)`, at least 1.
pub fn default_tail_window(t: usize) -> usize {
    (t / 4).clamp(1, 500)
}

#[derive(Debug, Clone)]
pub struct QOptions {
    pub t: usize,
    pub replicas: usize,
    pub tail_window: usize,
    /// Every entry of `h_0` is set to this value.
    pub h0: f64,
    pub exec: Exec,
}

impl QOptions {
    pub fn new(t: usize, replicas: usize) -> Self {
        Self {
            t,
            replicas,
            tail_window: default_tail_window(t),
            h0: 1.0,
            exec: Exec::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        if self.tail_window == 0 || self.tail_window > self.t {
            return Err(Error::Config(format!(
                "tail window must satisfy 1 <= window <= T, got window {} with T = {}",
                self.tail_window, self.t
            )));
        }
        if !self.h0.is_finite() {
            return Err(Error::Config("h0 must be finite".into()));
        }
        Ok(())
    }
}

/// `q_t` for `t = 0..=T` along one trajectory.
pub fn q_series(
    real: &crate::disorder::DisorderRealization,
    g: f64,
    h0: &HiddenState,
    t: usize,
) -> Result<Vec<f64>> {
    let (_, out) = crate::dynamics::run_autonomous_fold(real, g, h0, t, Vec::with_capacity(t + 1), |mut acc, _, h| {
        acc.push(q_of_state(h));
        acc
    })?;
    Ok(out)
}

/// Tail-averaged `q` for each gain, one replica: all gains share the realization
/// and advance together.
fn replica_tails(config: &NetworkConfig, gains: &[f64], opts: &QOptions) -> Result<Vec<f64>> {
    let real = realize(config)?;
    let h0 = HiddenState::constant(config.n, opts.h0);
    let mut prop = Propagator::new(&real, gains, &h0)?;
    let mut sums = vec![0.0; gains.len()];
    let start = opts.t - opts.tail_window + 1;
    for step in 1..=opts.t {
        prop.step(None).map_err(|e| e.with_replica_seed(config.seed))?;
        if step >= start {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += q_of_state(prop.h(j));
            }
        }
    }
    Ok(sums.into_iter().map(|s| s / opts.tail_window as f64).collect())
}

/// `q_inf` estimates for every gain in `gains`, replica-averaged.
pub fn q_inf_sweep(config: &NetworkConfig, gains: &[f64], opts: &QOptions) -> Result<Vec<QEstimate>> {
    config.validate()?;
    opts.validate()?;
    let per_rep = opts
        .exec
        .try_map(opts.replicas, |r| replica_tails(&config.replica(r), gains, opts))?;
    Ok(gains
        .iter()
        .enumerate()
        .map(|(j, &g)| {
            let vals: Vec<f64> = per_rep.iter().map(|v| v[j]).collect();
            let s = stats::summarize(&vals);
            QEstimate {
                g,
                s_b: config.scheme.gate_sd(),
                s_c: config.scheme.candidate_sd,
                mean_q_inf: s.mean,
                ci95_halfwidth: s.ci95,
                replicas: opts.replicas,
                t: opts.t,
                n: config.n,
                tail_window: opts.tail_window,
                per_replica: vals,
            }
        })
        .collect())
}

pub fn estimate_q_inf(config: &NetworkConfig, g: f64, opts: &QOptions) -> Result<QEstimate> {
    Ok(q_inf_sweep(config, &[g], opts)?.remove(0))
}
