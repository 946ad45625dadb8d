//! Closed-form critical gain from the linearization around `h = 0`.
//!
//! At the origin every gate sits at `sigmoid(bias)`, and the Jacobian takes the
//! form `J = M + g L U R` with diagonal `M`, `L`, `R`:
//!
//! | kind | M              | L            | R            |
//! |------|----------------|--------------|--------------|
//! | LSTM | sigmoid(b_f)   | sigmoid(b_i) | sigmoid(b_o) |
//! | GRU  | 1 - sigmoid(b_z) | sigmoid(b_z) | sigmoid(b_r) |
//! | RNN  | 0              | 1            | 1            |
//!
//! (`L` and `R` also carry `phi'(0)` and `Psi'(0)`.) The limiting spectral
//! support is bounded by `(1/N) sum g^2 L_i^2 R_i^2 / |z - M_i|^2 = 1`; the left
//! side is largest on the unit circle at `z = 1`, so the support first reaches
//! the circle there, at
//!
//! ```text
//! g_c = [ (1/N) sum_i L_i^2 R_i^2 / (1 - M_i)^2 ]^(-1/2).
//! ```
//!
//! `1 - M` is stored separately as computed from the bias (`sigmoid(-b_f)`,
//! `sigmoid(b_z)`), which makes the GRU and chrono cancellations `L / (1 - M) = 1`
//! exact in floating point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arch::{ArchKind, ArchitectureSpec, Gate};
use crate::disorder::{realize_gate_biases, BiasScheme, DisorderRealization, GateBias, NetworkConfig, OutputBias};
use crate::dynamics::sigmoid;
use crate::error::{Error, Result};
use crate::quadrature::{gaussian_expectation, QuadMethod, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalTriple {
    m: Vec<f64>,
    l: Vec<f64>,
    r: Vec<f64>,
    /// `1 - M`, computed without cancellation.
    gap: Vec<f64>,
}

impl DiagonalTriple {
    /// Triple with `1 - M` formed by subtraction.
    pub fn new(m: Vec<f64>, l: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let gap = m.iter().map(|v| 1.0 - v).collect();
        Self::with_gap(m, l, r, gap)
    }

    pub fn with_gap(m: Vec<f64>, l: Vec<f64>, r: Vec<f64>, gap: Vec<f64>) -> Result<Self> {
        let n = m.len();
        if n == 0 || l.len() != n || r.len() != n || gap.len() != n {
            return Err(Error::Dimension(format!(
                "triple components must be nonempty and equal length (M {}, L {}, R {}, 1-M {})",
                n,
                l.len(),
                r.len(),
                gap.len()
            )));
        }
        Ok(Self { m, l, r, gap })
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn gap(&self) -> &[f64] {
        &self.gap
    }

    pub fn summary(&self) -> TripleSummary {
        let stat = |v: &[f64]| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &x in v {
                lo = lo.min(x);
                hi = hi.max(x);
            }
            [v.iter().sum::<f64>() / v.len() as f64, lo, hi]
        };
        TripleSummary {
            n: self.n(),
            m: stat(&self.m),
            l: stat(&self.l),
            r: stat(&self.r),
        }
    }
}

/// Mean, min and max of each diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleSummary {
    pub n: usize,
    pub m: [f64; 3],
    pub l: [f64; 3],
    pub r: [f64; 3],
}

fn gate(biases: &[(Gate, Vec<f64>)], g: Gate) -> &[f64] {
    &biases
        .iter()
        .find(|(x, _)| *x == g)
        .expect("gate present for architecture")
        .1
}

/// Triple from per-gate bias vectors of length `n`.
pub fn triple_from_biases(arch: &ArchitectureSpec, n: usize, biases: &[(Gate, Vec<f64>)]) -> Result<DiagonalTriple> {
    let dphi = arch.phi.derivative_at_zero();
    let dpsi = arch.psi.derivative_at_zero();
    let sig = |v: &[f64], sign: f64, scale: f64| -> Vec<f64> { v.iter().map(|&b| scale * sigmoid(sign * b)).collect() };
    match arch.kind {
        ArchKind::Rnn => DiagonalTriple::with_gap(vec![0.0; n], vec![dphi; n], vec![dpsi; n], vec![1.0; n]),
        ArchKind::Lstm => {
            let (bf, bi, bo) = (gate(biases, Gate::Forget), gate(biases, Gate::Input), gate(biases, Gate::Output));
            DiagonalTriple::with_gap(sig(bf, 1.0, 1.0), sig(bi, 1.0, dphi), sig(bo, 1.0, dpsi), sig(bf, -1.0, 1.0))
        }
        ArchKind::Gru => {
            let (bz, br) = (gate(biases, Gate::Update), gate(biases, Gate::Reset));
            let gap = sig(bz, 1.0, 1.0);
            let m = gap.iter().map(|z| 1.0 - z).collect();
            DiagonalTriple::with_gap(m, sig(bz, 1.0, dphi), sig(br, 1.0, dpsi), gap)
        }
    }
}

/// Gates of a realization evaluated at the origin.
pub fn extract_mlr(real: &DisorderRealization) -> Result<DiagonalTriple> {
    let biases: Vec<(Gate, Vec<f64>)> = real
        .arch
        .gates()
        .iter()
        .map(|&g| (g, real.gate_bias(g).expect("gate present").to_vec()))
        .collect();
    triple_from_biases(&real.arch, real.n, &biases)
}

/// Same triple as `extract_mlr(&realize(config))`, without sampling any matrix.
pub fn sample_triple(config: &NetworkConfig) -> Result<DiagonalTriple> {
    triple_from_biases(&config.arch, config.n, &realize_gate_biases(config)?)
}

/// `z - M_i` as `(z - 1) + (1 - M_i)`, exact at `z = 1`.
fn shifted(z: Complex64, gap: f64) -> Complex64 {
    Complex64::new(z.re - 1.0 + gap, z.im)
}

/// `(1/N) sum g^2 L_i^2 R_i^2 / |z - M_i|^2`.
pub fn boundary_sum(triple: &DiagonalTriple, g: f64, z: Complex64) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..triple.n() {
        let d = shifted(z, triple.gap[i]).norm();
        if d == 0.0 {
            return Err(Error::Pole { index: i, value: triple.m[i] });
        }
        let t = g * triple.l[i] * triple.r[i] / d;
        s += t * t;
    }
    Ok(s / triple.n() as f64)
}

/// `(1/N) sum g^2 / (sv_i^2 + r^2)` with `sv_i = |z - M_i| / (L_i R_i)`.
/// At `r = 0` this is [`boundary_sum`].
pub fn regularized_boundary_sum(triple: &DiagonalTriple, g: f64, z: Complex64, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("regularization must be >= 0, got {r}")));
    }
    if r == 0.0 {
        return boundary_sum(triple, g, z);
    }
    let mut s = 0.0;
    for i in 0..triple.n() {
        let sv = shifted(z, triple.gap[i]).norm() / (triple.l[i] * triple.r[i]);
        s += g * g / (sv * sv + r * r);
    }
    Ok(s / triple.n() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PredictionMode {
    /// From one sampled triple.
    FiniteN { n: usize, seed: Option<u64> },
    /// Expectation over the bias distribution (`N -> infinity`).
    Asymptotic { method: QuadMethod, achieved: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalGainPrediction {
    pub g_c: f64,
    pub arch: Option<ArchitectureSpec>,
    pub scheme: Option<BiasScheme>,
    pub mode: PredictionMode,
    pub summary: Option<TripleSummary>,
}

/// `(1/N) sum (L_i R_i / (1 - M_i))^2`, the boundary sum at `g = 1`, `z = 1`.
fn unit_gain_sum(triple: &DiagonalTriple) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..triple.n() {
        let gap = triple.gap[i];
        if !(gap > 0.0) {
            return Err(Error::Domain(format!(
                "M[{i}] = {} is not below 1; the origin is not attracting along this unit",
                triple.m[i]
            )));
        }
        let t = (triple.l[i] / gap) * triple.r[i];
        s += t * t;
    }
    Ok(s / triple.n() as f64)
}

pub fn critical_gain(triple: &DiagonalTriple) -> Result<CriticalGainPrediction> {
    let s = unit_gain_sum(triple)?;
    let g_c = 1.0 / s.sqrt();
    if !(g_c.is_finite() && g_c > 0.0) {
        return Err(Error::Domain(format!("critical gain is not a positive finite number ({g_c})")));
    }
    Ok(CriticalGainPrediction {
        g_c,
        arch: None,
        scheme: None,
        mode: PredictionMode::FiniteN { n: triple.n(), seed: None },
        summary: Some(triple.summary()),
    })
}

/// Finite-N prediction for one replica's biases.
pub fn critical_gain_for(config: &NetworkConfig) -> Result<CriticalGainPrediction> {
    let mut p = critical_gain(&sample_triple(config)?)?;
    p.arch = Some(config.arch);
    p.scheme = Some(config.scheme);
    p.mode = PredictionMode::FiniteN { n: config.n, seed: Some(config.seed) };
    Ok(p)
}

/// `E[sigmoid(b)^2]` for `b ~ N(0, s_b^2)`; exactly 1/4 at `s_b = 0`.
pub fn sigma_sq_mean(s_b: f64) -> Result<f64> {
    Ok(gaussian_expectation(|b| sigmoid(b).powi(2), s_b, DEFAULT_TOL)?.value)
}

/// Asymptotic prediction for any supported scheme.
///
/// Gate biases are independent across gates, so the expectation of the summand
/// factorizes: `E[L^2] E[R^2] E[(1 - M)^-2]`. For the LSTM the last factor is
/// `E[(1 + e^b)^2]`; for the GRU `L / (1 - M) = 1` and only `E[R^2]` remains;
/// under chrono `L = 1 - M` and only the output gate remains.
pub fn gc_asymptotic(arch: &ArchitectureSpec, scheme: &BiasScheme) -> Result<CriticalGainPrediction> {
    scheme.validate(arch)?;
    let dphi = arch.phi.derivative_at_zero();
    let dpsi = arch.psi.derivative_at_zero();
    let mut worst = 0.0f64;
    let mut method = QuadMethod::Exact;
    let mut track = |q: crate::quadrature::QuadResult| {
        worst = worst.max(q.achieved);
        if q.method != QuadMethod::Exact {
            method = q.method;
        }
        q.value
    };
    let sig2 = |sd: f64| gaussian_expectation(|b| sigmoid(b).powi(2), sd, DEFAULT_TOL);
    let s = match (arch.kind, scheme.gates) {
        (ArchKind::Rnn, _) => dphi * dphi * dpsi * dpsi,
        (ArchKind::Gru, g) => {
            let sd = match g {
                GateBias::Zero => 0.0,
                GateBias::Gaussian { sd } => sd,
                GateBias::Chrono { .. } => unreachable!("validated"),
            };
            dphi * dphi * dpsi * dpsi * track(sig2(sd)?)
        }
        (ArchKind::Lstm, GateBias::Chrono { output, .. }) => {
            let so = match output {
                OutputBias::Zero => 0.0,
                OutputBias::Gaussian { sd } => sd,
            };
            dphi * dphi * dpsi * dpsi * track(sig2(so)?)
        }
        (ArchKind::Lstm, g) => {
            let sd = match g {
                GateBias::Gaussian { sd } => sd,
                _ => 0.0,
            };
            let l2 = track(sig2(sd)?);
            let inv_gap2 = track(gaussian_expectation(|b| (1.0 + b.exp()).powi(2), sd, DEFAULT_TOL)?);
            dphi * dphi * dpsi * dpsi * l2 * l2 * inv_gap2
        }
    };
    let g_c = 1.0 / s.sqrt();
    Ok(CriticalGainPrediction {
        g_c,
        arch: Some(*arch),
        scheme: Some(*scheme),
        mode: PredictionMode::Asymptotic { method, achieved: worst },
        summary: None,
    })
}

pub fn gc_gaussian_asymptotic(arch: &ArchitectureSpec, s_b: f64) -> Result<CriticalGainPrediction> {
    gc_asymptotic(arch, &BiasScheme::gaussian(s_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub increasing: bool,
    /// Smallest consecutive difference; `+inf` for a single-point grid.
    pub margin: f64,
}

/// Checks that `sigma_sq_mean` strictly increases along a strictly increasing grid.
pub fn monotonicity_check(grid: &[f64]) -> Result<MonotonicityReport> {
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
        return Err(Error::Config("grid must be strictly increasing and >= 0".into()));
    }
    let vals = grid.iter().map(|&s| sigma_sq_mean(s)).collect::<Result<Vec<_>>>()?;
    let margin = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(MonotonicityReport { increasing: margin > 0.0, margin })
}

/// `E[(1 - sigmoid(b))^-2] = E[(1 + e^b)^2] = 1 + 2 e^(s^2/2) + e^(2 s^2)`.
/// Saturates to `+inf` (with a warning) once the exponentials overflow.
pub fn appendix_a_moment(s_b: f64) -> f64 {
    let s2 = s_b * s_b;
    let v = 1.0 + 2.0 * (0.5 * s2).exp() + (2.0 * s2).exp();
    if !v.is_finite() {
        log::warn!("moment overflows double precision at s_b = {s_b}; returning +inf");
        return f64::INFINITY;
    }
    v
}
