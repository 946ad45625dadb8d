//! Jacobian at the origin and its spectral radius.
//!
//! `J = diag(M) + g diag(L) U diag(R)`. The radius is estimated by power
//! iteration from several random starts run as one batch. A dominant real
//! eigenvalue shows up as `J x ~ mu x`, a dominant complex pair as
//! `J^2 x ~ a J x + b x` (roots of `mu^2 - a mu - b`); whichever fits the
//! current iterate better gives the estimate. When neither settles (several
//! eigenvalues of nearly equal modulus, typical at the edge of a random
//! spectrum) the geometric-mean growth rate over the second half of the run
//! is reported instead, with `converged = false`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::criterion::extract_mlr;
use crate::disorder::{realize, BiasScheme, DisorderRealization, NetworkConfig};
use crate::arch::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{dot, mul_batch, norm2, Mat};
use crate::rng::{derive_seed, substream};
use crate::stats;

#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    pub j: Mat,
    pub g: f64,
    pub seed: u64,
    pub arch: ArchitectureSpec,
    pub scheme: BiasScheme,
}

/// `J_ij = M_i delta_ij + g L_i U_ij R_j`, valid only when the origin is a fixed point.
pub fn build_jacobian(real: &DisorderRealization, g: f64) -> Result<JacobianMatrix> {
    if real.scheme.candidate_sd != 0.0 {
        return Err(Error::Contract(format!(
            "the Jacobian at h = 0 needs a zero candidate bias (s_c = {}); with s_c > 0 the origin is not a fixed point",
            real.scheme.candidate_sd
        )));
    }
    let t = extract_mlr(real)?;
    let u = real.candidate_recurrent();
    let n = real.n;
    let (m, l, r) = (t.m(), t.l(), t.r());
    let j = Mat::from_fn(n, n, |i, k| {
        let off = g * l[i] * u.get(i, k) * r[k];
        if i == k {
            m[i] + off
        } else {
            off
        }
    });
    Ok(JacobianMatrix {
        j,
        g,
        seed: real.seed,
        arch: real.arch,
        scheme: real.scheme,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5000,
            restarts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub radius: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Estimate and relative residual from the last two iterates of one restart.
/// `xp` unit, `x = J xp / np` unit, `y = J x`.
fn extract(xp: &[f64], np: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
    // one step: y ~ mu x
    let mu = dot(x, y);
    let ny = norm2(y);
    let r1 = if ny == 0.0 {
        0.0
    } else {
        x.iter().zip(y).map(|(a, b)| (b - mu * a).powi(2)).sum::<f64>().sqrt() / ny
    };
    // two steps on unscaled iterates y0 = xp, y1 = np x, y2 = np y:
    // y2 ~ a y1 + b y0, solved by 2x2 least squares
    let (g11, g12, g22) = (np * np, np * dot(x, xp), 1.0);
    let (c1, c2) = (np * np * dot(x, y), np * dot(xp, y));
    let det = g11 * g22 - g12 * g12;
    if det.abs() <= 1e-14 * g11 * g22 || ny == 0.0 {
        return (mu.abs(), r1);
    }
    let a = (c1 * g22 - g12 * c2) / det;
    let b = (g11 * c2 - g12 * c1) / det;
    let r2 = (0..x.len())
        .map(|i| (np * y[i] - a * np * x[i] - b * xp[i]).powi(2))
        .sum::<f64>()
        .sqrt()
        / (np * ny);
    let disc = a * a + 4.0 * b;
    let rho2 = if disc >= 0.0 {
        let s = disc.sqrt();
        (0.5 * (a + s)).abs().max((0.5 * (a - s)).abs())
    } else {
        // complex pair: |mu|^2 = -b
        (-b).sqrt()
    };
    if r2 < r1 {
        (rho2, r2)
    } else {
        (mu.abs(), r1)
    }
}

/// Largest eigenvalue modulus of `j` by batched power iteration.
pub fn spectral_radius(j: &Mat, opts: &PowerOptions) -> Result<RadiusEstimate> {
    let n = j.rows();
    if n != j.cols() || n == 0 {
        return Err(Error::Dimension(format!("matrix must be square and nonempty, got {}x{}", n, j.cols())));
    }
    if j.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    if opts.restarts == 0 || opts.max_iters < 2 {
        return Err(Error::Config("need >= 1 restart and >= 2 iterations".into()));
    }
    let b = opts.restarts;
    let mut rng = substream(opts.seed, "power");
    // vectors back to back
    let mut x: Vec<f64> = (0..n * b).map(|_| StandardNormal.sample(&mut rng)).collect();
    for c in x.chunks_mut(n) {
        let s = norm2(c);
        c.iter_mut().for_each(|v| *v /= s);
    }
    let mut xp = x.clone();
    let mut np = vec![f64::NAN; b];
    let mut out = vec![0.0; n * b];
    let mut y = vec![0.0; n * b];
    let mut est = vec![0.0; b];
    let mut stable = vec![0usize; b];
    let mut log_growth = vec![0.0; b];
    let half = opts.max_iters / 2;
    let mut zero = vec![false; b];
    for it in 1..=opts.max_iters {
        mul_batch(j.view(), &x, b, &mut out);
        // transpose row-major (n x b) product into per-restart vectors
        for i in 0..n {
            for c in 0..b {
                y[c * n + i] = out[i * b + c];
            }
        }
        let mut all_done = true;
        for c in 0..b {
            let (xc, yc) = (&x[c * n..(c + 1) * n], &y[c * n..(c + 1) * n]);
            let ny = norm2(yc);
            if ny == 0.0 {
                zero[c] = true;
                est[c] = 0.0;
                continue;
            }
            if it > 1 {
                let (rho, res) = extract(&xp[c * n..(c + 1) * n], np[c], xc, yc);
                let settled = (rho - est[c]).abs() <= opts.tol * rho.max(f64::MIN_POSITIVE) && res <= opts.tol.sqrt();
                stable[c] = if settled { stable[c] + 1 } else { 0 };
                est[c] = rho;
            }
            if it > half {
                log_growth[c] += ny.ln();
            }
            if stable[c] < 3 {
                all_done = false;
            }
        }
        if all_done {
            return Ok(RadiusEstimate {
                radius: est.iter().cloned().fold(0.0, f64::max),
                converged: true,
                iterations: it,
            });
        }
        xp.copy_from_slice(&x);
        for c in 0..b {
            let yc = &y[c * n..(c + 1) * n];
            let ny = norm2(yc);
            np[c] = ny;
            if ny > 0.0 {
                for (xi, yi) in x[c * n..(c + 1) * n].iter_mut().zip(yc) {
                    *xi = yi / ny;
                }
            }
        }
        if zero.iter().all(|&z| z) {
            return Ok(RadiusEstimate { radius: 0.0, converged: true, iterations: it });
        }
    }
    let steps = (opts.max_iters - half) as f64;
    let radius = (0..b)
        .map(|c| {
            if zero[c] {
                0.0
            } else if stable[c] >= 3 {
                est[c]
            } else {
                (log_growth[c] / steps).exp()
            }
        })
        .fold(0.0, f64::max);
    log::debug!("power iteration did not settle after {} iterations; growth-rate estimate {radius}", opts.max_iters);
    Ok(RadiusEstimate {
        radius,
        converged: false,
        iterations: opts.max_iters,
    })
}

/// All eigenvalues (real, imaginary parts) via Hessenberg reduction and shifted QR.
/// Best effort, limited to `N <= 300`.
pub fn eigenvalues(j: &Mat) -> Result<Vec<(f64, f64)>> {
    if j.rows() != j.cols() {
        return Err(Error::Dimension("matrix must be square".into()));
    }
    if j.rows() > 300 {
        return Err(Error::Config(format!(
            "full eigenvalue dump is limited to N <= 300 (got N = {})",
            j.rows()
        )));
    }
    let ev = j.to_nalgebra().complex_eigenvalues();
    Ok(ev.iter().map(|z| (z.re, z.im)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub g: f64,
    pub radius_mean: f64,
    pub radius_ci: f64,
    pub n: usize,
    pub replicas: usize,
    pub all_converged: bool,
    pub per_replica: Vec<f64>,
}

/// Replica-averaged spectral radius for each gain; every replica is realized once.
pub fn radius_vs_gain_sweep(
    config: &NetworkConfig,
    gains: &[f64],
    replicas: usize,
    opts: &PowerOptions,
    exec: Exec,
) -> Result<Vec<RadiusRow>> {
    config.validate()?;
    if gains.is_empty() || replicas == 0 {
        return Err(Error::Config("need a nonempty gain grid and >= 1 replica".into()));
    }
    let per_rep = exec.try_map(replicas, |r| {
        let cfg = config.replica(r);
        let real = realize(&cfg)?;
        gains
            .iter()
            .map(|&g| {
                let jac = build_jacobian(&real, g)?;
                let o = PowerOptions {
                    seed: derive_seed(cfg.seed, 0x5eed),
                    ..*opts
                };
                spectral_radius(&jac.j, &o)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(gains
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let vals: Vec<f64> = per_rep.iter().map(|v| v[k].radius).collect();
            let s = stats::summarize(&vals);
            RadiusRow {
                g,
                radius_mean: s.mean,
                radius_ci: s.ci95,
                n: config.n,
                replicas,
                all_converged: per_rep.iter().all(|v| v[k].converged),
                per_replica: vals,
            }
        })
        .collect())
}
