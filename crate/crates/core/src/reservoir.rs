//! Mackey–Glass forecasting with a fixed random gated network as reservoir.
//!
//! The reservoir is driven by the scalar series (`K = 1`, `x_t = scale * u(t)`),
//! and a ridge readout on `[h_t, 1]` is trained to predict `u(t + 1)`.
//! Sweeps over gains reuse one realization per seed and run every gain as a
//! column of the same batched propagator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arch::ArchitectureSpec;
use crate::criterion::gc_gaussian_asymptotic;
use crate::disorder::{realize, BiasScheme, DisorderRealization, NetworkConfig};
use crate::dynamics::{HiddenState, Propagator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::Mat;
use crate::sweep::SweepResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassConfig {
    pub beta: f64,
    pub gamma: f64,
    pub exponent: i32,
    pub tau: usize,
    /// Constant value of `u` on the initial history `t = -tau..=0`.
    pub history_init: f64,
    /// Total number of generated samples `u(0), ..., u(length - 1)`.
    pub length: usize,
    /// Leading samples dropped from the output.
    pub washout: usize,
}

impl Default for MackeyGlassConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            exponent: 10,
            tau: 25,
            history_init: 1.2,
            length: 11_000,
            washout: 1000,
        }
    }
}

impl MackeyGlassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau < 1 {
            return Err(Error::Config("Mackey-Glass delay tau must be >= 1".into()));
        }
        if self.length <= self.washout {
            return Err(Error::Config(format!(
                "Mackey-Glass length ({}) must exceed washout ({})",
                self.length, self.washout
            )));
        }
        if ![self.beta, self.gamma, self.history_init].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("Mackey-Glass parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Discrete delay map `u(t+1) = (1 - gamma) u(t) + beta u(t - tau) / (1 + u(t - tau)^n)`.
/// Returns `length - washout` samples starting at `u(washout)`.
pub fn mackey_glass(cfg: &MackeyGlassConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let tau = cfg.tau;
    // buf[k] = u(k - tau)
    let mut buf = Vec::with_capacity(cfg.length + tau);
    buf.resize(tau + 1, cfg.history_init);
    for t in 0..cfg.length - 1 {
        let now = buf[t + tau];
        let lag = buf[t];
        buf.push((1.0 - cfg.gamma) * now + cfg.beta * lag / (1.0 + lag.powi(cfg.exponent)));
    }
    Ok(buf.split_off(tau + cfg.washout))
}

/// Run the reservoir on `inputs` from `h0`, one column per gain, and return
/// for each gain the states after each input, minus the first `washout` rows.
/// Row `t` is the state that has seen `inputs[washout + t]`.
pub fn drive_reservoir_batch(
    real: &DisorderRealization,
    gains: &[f64],
    inputs: &[f64],
    input_scale: f64,
    washout: usize,
    h0: &HiddenState,
) -> Result<Vec<Mat>> {
    if real.k != 1 {
        return Err(Error::Dimension(format!("reservoir input is scalar; realization has K = {}", real.k)));
    }
    if real.scheme.candidate_sd != 0.0 {
        return Err(Error::Contract("reservoir runs require s_c = 0".into()));
    }
    if washout > inputs.len() {
        return Err(Error::Config(format!(
            "washout ({washout}) exceeds input length ({})",
            inputs.len()
        )));
    }
    if inputs.iter().any(|u| !u.is_finite()) || !input_scale.is_finite() {
        return Err(Error::Contract("reservoir inputs must be finite".into()));
    }
    let n = real.n;
    let rows = inputs.len() - washout;
    let mut out: Vec<Mat> = gains.iter().map(|_| Mat::zeros(rows, n)).collect();
    let mut p = Propagator::new(real, gains, h0)?;
    for (t, &u) in inputs.iter().enumerate() {
        p.step(Some(&[input_scale * u]))?;
        if t >= washout {
            let r = t - washout;
            for (j, m) in out.iter_mut().enumerate() {
                m.as_mut_slice()[r * n..(r + 1) * n].copy_from_slice(p.h(j));
            }
        }
    }
    Ok(out)
}

/// Single-gain reservoir run from `h = 1`.
pub fn drive_reservoir(
    real: &DisorderRealization,
    g: f64,
    inputs: &[f64],
    input_scale: f64,
    washout: usize,
) -> Result<Mat> {
    let h0 = HiddenState::constant(real.n, 1.0);
    Ok(drive_reservoir_batch(real, &[g], inputs, input_scale, washout, &h0)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Feature weights followed by the bias term (length `N + 1`).
    pub weights: Vec<f64>,
    pub ridge_lambda: f64,
    /// Normwise relative residual of the normal equations at the solution.
    pub residual: f64,
}

impl ReadoutModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let n = self.weights.len() - 1;
        self.weights[n] + x.iter().zip(&self.weights[..n]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, features: &Mat) -> Vec<f64> {
        (0..features.rows()).map(|r| self.predict_row(features.row(r))).collect()
    }

    pub fn mse(&self, features: &Mat, targets: &[f64]) -> f64 {
        let p = self.predict(features);
        p.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / targets.len() as f64
    }
}

pub const RIDGE_RESIDUAL_TOL: f64 = 1e-8;

/// Augmented normal-equation matrix `[X 1]^T [X 1] + lambda diag(1, .., 1, 0)` and right-hand side.
fn augmented_system(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (m, n) = x.shape();
    let mut xa = DMatrix::from_element(m, n + 1, 1.0);
    xa.columns_mut(0, n).copy_from(x);
    let mut a = xa.tr_mul(&xa);
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    (a, xa.tr_mul(y))
}

/// Ridge regression with an unpenalized intercept: minimizes
/// `|X w + b - y|^2 + lambda |w|^2`.
///
/// Solved on centered data by Cholesky with iterative refinement; the
/// returned residual is measured on the equivalent augmented system.
pub fn fit_ridge(features: &Mat, targets: &[f64], ridge_lambda: f64) -> Result<ReadoutModel> {
    let (m, n) = (features.rows(), features.cols());
    if m != targets.len() {
        return Err(Error::Dimension(format!("{m} feature rows but {} targets", targets.len())));
    }
    if m == 0 || n == 0 {
        return Err(Error::Dimension("empty regression problem".into()));
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::Config(format!("ridge lambda must be finite and >= 0, got {ridge_lambda}")));
    }
    let x = DMatrix::from_row_slice(m, n, features.as_slice());
    let mu = x.row_mean();
    let ybar = targets.iter().sum::<f64>() / m as f64;
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mu;
    }
    let yc = DVector::from_iterator(m, targets.iter().map(|t| t - ybar));
    let mut a = xc.tr_mul(&xc);
    for i in 0..n {
        a[(i, i)] += ridge_lambda;
    }
    let rhs = xc.tr_mul(&yc);
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let singular = || {
        Error::Singular(format!(
            "normal equations are rank-deficient at lambda = {ridge_lambda}; use a ridge lambda > 0"
        ))
    };
    let chol = a.clone().cholesky().ok_or_else(singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    if ridge_lambda == 0.0 && min_pivot <= f64::EPSILON * n as f64 * scale {
        return Err(singular());
    }
    let mut w = chol.solve(&rhs);
    for _ in 0..5 {
        let r = &rhs - &a * &w;
        if r.norm() <= 1e-3 * RIDGE_RESIDUAL_TOL * (a.norm() * w.norm() + rhs.norm()) {
            break;
        }
        w += chol.solve(&r);
    }
    let b = ybar - mu.transpose().dot(&w);
    let mut weights: Vec<f64> = w.iter().cloned().collect();
    weights.push(b);
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    let y = DVector::from_column_slice(targets);
    let (aa, ba) = augmented_system(&x, &y, ridge_lambda);
    let wa = DVector::from_column_slice(&weights);
    let residual = (&ba - &aa * &wa).norm() / (aa.norm() * wa.norm() + ba.norm()).max(f64::MIN_POSITIVE);
    if residual > RIDGE_RESIDUAL_TOL {
        log::warn!("ridge normal-equation residual {residual:.3e} exceeds {RIDGE_RESIDUAL_TOL:.0e}");
    }
    Ok(ReadoutModel {
        weights,
        ridge_lambda,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcConfig {
    pub arch: ArchitectureSpec,
    pub n: usize,
    /// Generator settings; `length` is overridden to fit the run.
    pub mg: MackeyGlassConfig,
    /// Reservoir steps discarded before training rows.
    pub washout: usize,
    pub train: usize,
    pub test: usize,
    pub ridge_lambda: f64,
    pub input_scale: f64,
    /// Constant initial hidden state.
    pub h0: f64,
}

impl RcConfig {
    pub fn new(arch: ArchitectureSpec, n: usize) -> Self {
        Self {
            arch,
            n,
            mg: MackeyGlassConfig::default(),
            washout: 500,
            train: 3000,
            test: 1000,
            ridge_lambda: 1e-6,
            input_scale: 1.0,
            h0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.train == 0 || self.test == 0 {
            return Err(Error::Config("N, train and test lengths must be >= 1".into()));
        }
        self.series_config().validate()
    }

    /// Generator config producing exactly the samples one run consumes.
    pub fn series_config(&self) -> MackeyGlassConfig {
        MackeyGlassConfig {
            length: self.mg.washout + self.washout + self.train + self.test + 1,
            ..self.mg
        }
    }

    fn network(&self, s_b: f64, seed: u64) -> NetworkConfig {
        let scheme = if s_b == 0.0 { BiasScheme::zero() } else { BiasScheme::gaussian(s_b) };
        NetworkConfig::new(self.arch, self.n, scheme, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcRunResult {
    pub g: f64,
    pub s_b: f64,
    pub n: usize,
    pub seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
}

fn evaluate(cfg: &RcConfig, features: &Mat, series: &[f64]) -> Result<(f64, f64)> {
    // features row t has seen series[washout + t]; target is the next sample
    let n = features.cols();
    let targets = &series[cfg.washout + 1..];
    let split = |lo: usize, hi: usize| Mat::from_vec(hi - lo, n, features.as_slice()[lo * n..hi * n].to_vec());
    let xtr = split(0, cfg.train);
    let xte = split(cfg.train, cfg.train + cfg.test);
    let model = fit_ridge(&xtr, &targets[..cfg.train], cfg.ridge_lambda)?;
    Ok((
        model.mse(&xtr, &targets[..cfg.train]),
        model.mse(&xte, &targets[cfg.train..cfg.train + cfg.test]),
    ))
}

/// Train/test MSE for each gain on one realization (`seed`) of bias scale `s_b`.
pub fn rc_gain_sweep(cfg: &RcConfig, gains: &[f64], s_b: f64, seed: u64) -> Result<Vec<RcRunResult>> {
    cfg.validate()?;
    let series = mackey_glass(&cfg.series_config())?;
    let net = cfg.network(s_b, seed);
    let real = realize(&net)?;
    let h0 = HiddenState::constant(cfg.n, cfg.h0);
    let inputs = &series[..series.len() - 1];
    let mut results = Vec::with_capacity(gains.len());
    // at most 4 columns per pass keeps feature storage bounded
    for chunk in gains.chunks(4) {
        let feats = drive_reservoir_batch(&real, chunk, inputs, cfg.input_scale, cfg.washout, &h0)?;
        for (&g, f) in chunk.iter().zip(&feats) {
            let (train_mse, test_mse) = evaluate(cfg, f, &series)?;
            results.push(RcRunResult {
                g,
                s_b,
                n: cfg.n,
                seed,
                train_mse,
                test_mse,
            });
        }
    }
    Ok(results)
}

pub fn rc_run(cfg: &RcConfig, g: f64, s_b: f64, seed: u64) -> Result<RcRunResult> {
    Ok(rc_gain_sweep(cfg, &[g], s_b, seed)?.remove(0))
}

/// Critical gain used to normalize `g` at bias scale `s_b`.
pub fn reference_gc(arch: ArchitectureSpec, s_b: f64) -> Result<f64> {
    Ok(gc_gaussian_asymptotic(&arch, s_b)?.g_c)
}

/// Runs for every `(seed, g/g_c)` pair at one `s_b`; `g = ratio * g_c(s_b)`.
pub fn rc_ratio_sweep(
    cfg: &RcConfig,
    s_b: f64,
    ratios: &[f64],
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<RcRunResult>> {
    let gc = reference_gc(cfg.arch, s_b)?;
    let gains: Vec<f64> = ratios.iter().map(|r| r * gc).collect();
    let per_seed = exec.try_map(seeds.len(), |i| rc_gain_sweep(cfg, &gains, s_b, seeds[i]))?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub const RC_COLUMNS: [&str; 7] = ["s_b", "g", "g_over_gc", "N", "seed", "train_mse", "test_mse"];
pub const HEATMAP_COLUMNS: [&str; 3] = ["s_b", "g_over_gc", "normalized_accuracy"];

/// Rescale to `[0, 1]`; a constant row maps to all ones.
pub fn normalize_row(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Row-normalized mean accuracy `1 / test_mse` over seeds on the
/// `(s_b, g/g_c)` grid. Columns as in [`HEATMAP_COLUMNS`].
pub fn rc_heatmap(
    cfg: &RcConfig,
    s_b_grid: &[f64],
    ratios: &[f64],
    seeds: &[u64],
    exec: Exec,
) -> Result<SweepResult> {
    if s_b_grid.is_empty() || ratios.is_empty() || seeds.is_empty() {
        return Err(Error::Config("heatmap needs nonempty s_b, g/g_c and seed grids".into()));
    }
    // one job per (s_b, seed)
    let jobs: Vec<(usize, u64)> = (0..s_b_grid.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs = exec.try_map(jobs.len(), |k| {
        let (i, seed) = jobs[k];
        let gc = reference_gc(cfg.arch, s_b_grid[i])?;
        let gains: Vec<f64> = ratios.iter().map(|r| r * gc).collect();
        rc_gain_sweep(cfg, &gains, s_b_grid[i], seed)
    })?;
    let mut out = SweepResult::new("rc_heatmap", &HEATMAP_COLUMNS)
        .with_meta("arch", cfg.arch.kind)
        .with_meta("N", cfg.n)
        .with_meta("seeds", seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"));
    for (i, &s_b) in s_b_grid.iter().enumerate() {
        let mut acc = vec![0.0; ratios.len()];
        for (k, &(ji, _)) in jobs.iter().enumerate() {
            if ji == i {
                for (a, r) in acc.iter_mut().zip(&runs[k]) {
                    *a += 1.0 / r.test_mse / seeds.len() as f64;
                }
            }
        }
        for (&ratio, v) in ratios.iter().zip(normalize_row(&acc)) {
            out.push(vec![s_b.into(), ratio.into(), v.into()])?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mackey_glass_first_step() {
        let cfg = MackeyGlassConfig {
            history_init: 0.5,
            length: 2,
            washout: 0,
            ..Default::default()
        };
        let u = mackey_glass(&cfg).unwrap();
        assert_eq!(u[0], 0.5);
        assert!((u[1] - 0.5499024).abs() < 5e-8, "{}", u[1]);
    }

    #[test]
    fn mackey_glass_without_feedback_decays_geometrically() {
        let cfg = MackeyGlassConfig {
            beta: 0.0,
            history_init: 0.7,
            length: 50,
            washout: 0,
            ..Default::default()
        };
        let u = mackey_glass(&cfg).unwrap();
        let mut want = 0.7;
        for v in &u {
            assert_eq!(*v, want);
            want *= 0.9;
        }
    }

    #[test]
    fn mackey_glass_length_and_validation() {
        let cfg = MackeyGlassConfig { length: 100, washout: 30, ..Default::default() };
        assert_eq!(mackey_glass(&cfg).unwrap().len(), 70);
        assert!(mackey_glass(&MackeyGlassConfig { length: 5, washout: 5, ..Default::default() }).is_err());
        assert!(mackey_glass(&MackeyGlassConfig { tau: 0, ..Default::default() }).is_err());
    }

    fn toy_features(m: usize, n: usize) -> Mat {
        Mat::from_fn(m, n, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 + ((i * j) as f64 * 0.37).sin())
    }

    #[test]
    fn exact_linear_targets_are_interpolated() {
        let x = toy_features(60, 5);
        let w = [0.3, -1.2, 0.5, 2.0, -0.1];
        let y: Vec<f64> = (0..60).map(|i| 0.7 + x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect();
        let m = fit_ridge(&x, &y, 0.0).unwrap();
        let var = y.iter().map(|v| v * v).sum::<f64>() / 60.0;
        assert!(m.mse(&x, &y) <= 1e-16 * var);
        assert!((m.weights[5] - 0.7).abs() < 1e-9);
        assert!(m.residual <= RIDGE_RESIDUAL_TOL);
    }

    #[test]
    fn huge_penalty_gives_mean_model() {
        let x = toy_features(40, 4);
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos()).collect();
        let m = fit_ridge(&x, &y, 1e14).unwrap();
        assert!(m.weights[..4].iter().all(|w| w.abs() < 1e-10));
        let ybar = y.iter().sum::<f64>() / 40.0;
        assert!((m.weights[4] - ybar).abs() < 1e-9);
    }

    #[test]
    fn rank_deficient_without_penalty_is_singular() {
        let x = Mat::from_fn(20, 3, |i, j| if j == 2 { 2.0 * i as f64 } else { i as f64 + j as f64 });
        let y = vec![1.0; 20];
        assert!(matches!(fit_ridge(&x, &y, 0.0), Err(Error::Singular(_))));
        assert!(fit_ridge(&x, &y, 1e-3).is_ok());
        assert!(fit_ridge(&x, &y[..5], 1e-3).is_err());
    }

    #[test]
    fn normalize_rows() {
        assert_eq!(normalize_row(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(normalize_row(&[5.0]), vec![1.0]);
        assert_eq!(normalize_row(&[1.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn drive_shapes_and_subcritical_decay() {
        let real = realize(&NetworkConfig::new(ArchitectureSpec::lstm(), 30, BiasScheme::zero(), 4)).unwrap();
        let u: Vec<f64> = (0..120).map(|t| (t as f64 * 0.1).sin()).collect();
        let f = drive_reservoir(&real, 1.5, &u, 1.0, 20).unwrap();
        assert_eq!((f.rows(), f.cols()), (100, 30));
        let quiet = drive_reservoir(&real, 0.5, &u, 0.0, 100).unwrap();
        assert!(quiet.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_run_matches_sweep_entry() {
        let mut cfg = RcConfig::new(ArchitectureSpec::gru(), 20);
        cfg.train = 200;
        cfg.test = 50;
        cfg.washout = 50;
        cfg.mg.washout = 100;
        let sweep = rc_gain_sweep(&cfg, &[0.5, 1.0, 1.5, 2.0, 2.5], 0.5, 9).unwrap();
        let one = rc_run(&cfg, 2.5, 0.5, 9).unwrap();
        assert_eq!(sweep[4], one);
        assert!(sweep.iter().all(|r| r.train_mse >= 0.0 && r.test_mse >= 0.0));
    }

    #[test]
    fn degenerate_heatmap_cell() {
        let mut cfg = RcConfig::new(ArchitectureSpec::lstm(), 10);
        cfg.train = 100;
        cfg.test = 20;
        cfg.washout = 20;
        cfg.mg.washout = 50;
        let h = rc_heatmap(&cfg, &[1.0], &[1.0], &[3], Exec::Sequential).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.column("normalized_accuracy").unwrap(), vec![1.0]);
    }
}
