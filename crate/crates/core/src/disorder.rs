//! Quenched randomness: weight matrices and bias vectors for one replica.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arch::{ArchKind, ArchitectureSpec, Gate};
use crate::error::{Error, Result};
use crate::linalg::{Mat, MatRef};
use crate::rng::{derive_seed, substream, SubstreamRng};

/// Output-gate bias rule under chrono initialization (left open by chrono itself).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutputBias {
    Zero,
    Gaussian { sd: f64 },
}

/// Distribution of the gate biases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateBias {
    Zero,
    /// i.i.d. `N(0, sd^2)` for every gate.
    Gaussian { sd: f64 },
    /// LSTM chrono: `b_f = ln(tau - 1)`, `b_i = -b_f`, `tau ~ U(2, t_max)`.
    Chrono { t_max: f64, output: OutputBias },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasScheme {
    pub gates: GateBias,
    /// Standard deviation `s_c` of the candidate bias; `0` keeps `h = 0` a fixed point.
    pub candidate_sd: f64,
}

impl BiasScheme {
    pub fn zero() -> Self {
        Self {
            gates: GateBias::Zero,
            candidate_sd: 0.0,
        }
    }

    pub fn gaussian(s_b: f64) -> Self {
        Self {
            gates: GateBias::Gaussian { sd: s_b },
            candidate_sd: 0.0,
        }
    }

    pub fn chrono(t_max: f64, output: OutputBias) -> Self {
        Self {
            gates: GateBias::Chrono { t_max, output },
            candidate_sd: 0.0,
        }
    }

    pub fn with_candidate_sd(mut self, s_c: f64) -> Self {
        self.candidate_sd = s_c;
        self
    }

    /// Gate-bias standard deviation `s_b` (0 for zero and chrono schemes).
    pub fn gate_sd(&self) -> f64 {
        match self.gates {
            GateBias::Gaussian { sd } => sd,
            _ => 0.0,
        }
    }

    pub fn validate(&self, arch: &ArchitectureSpec) -> Result<()> {
        if !(self.candidate_sd >= 0.0 && self.candidate_sd.is_finite()) {
            return Err(Error::Config(format!(
                "candidate bias sd must be finite and >= 0, got {}",
                self.candidate_sd
            )));
        }
        match self.gates {
            GateBias::Zero => Ok(()),
            GateBias::Gaussian { sd } => {
                if sd >= 0.0 && sd.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "gate bias sd must be finite and >= 0, got {sd}"
                    )))
                }
            }
            GateBias::Chrono { t_max, output } => {
                if arch.kind != ArchKind::Lstm {
                    return Err(Error::Config(format!(
                        "chrono initialization is only defined for LSTM, not {}",
                        arch.kind
                    )));
                }
                if !(t_max > 2.0 && t_max.is_finite()) {
                    return Err(Error::Config(format!("chrono requires T_max > 2, got {t_max}")));
                }
                if let OutputBias::Gaussian { sd } = output {
                    if !(sd >= 0.0 && sd.is_finite()) {
                        return Err(Error::Config(format!(
                            "output bias sd must be finite and >= 0, got {sd}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for BiasScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gates {
            GateBias::Zero => write!(f, "zero")?,
            GateBias::Gaussian { sd } => write!(f, "gaussian(s_b={sd})")?,
            GateBias::Chrono { t_max, output } => match output {
                OutputBias::Zero => write!(f, "chrono(T_max={t_max}, b_o=0)")?,
                OutputBias::Gaussian { sd } => write!(f, "chrono(T_max={t_max}, s_o={sd})")?,
            },
        }
        if self.candidate_sd != 0.0 {
            write!(f, ", s_c={}", self.candidate_sd)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub arch: ArchitectureSpec,
    /// Hidden size N.
    pub n: usize,
    /// Input size K.
    pub k: usize,
    pub scheme: BiasScheme,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(arch: ArchitectureSpec, n: usize, scheme: BiasScheme, seed: u64) -> Self {
        Self {
            arch,
            n,
            k: 1,
            scheme,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::Config(format!(
                "hidden and input sizes must be >= 1 (N={}, K={})",
                self.n, self.k
            )));
        }
        self.scheme.validate(&self.arch)
    }

    /// Configuration of replica `r`: same everything, derived seed.
    pub fn replica(&self, r: usize) -> Self {
        Self {
            seed: derive_seed(self.seed, r as u64),
            ..*self
        }
    }
}

/// `rows x cols` matrix of i.i.d. `N(0, variance)` entries.
pub fn sample_weights(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut SubstreamRng,
) -> Result<Mat> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!(
            "weight matrix dimensions must be >= 1, got {rows}x{cols}"
        )));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Config(format!(
            "weight variance must be positive, got {variance}"
        )));
    }
    let mut m = Mat::zeros(rows, cols);
    fill_gaussian(m.as_mut_slice(), variance.sqrt(), rng);
    Ok(m)
}

fn fill_gaussian(out: &mut [f64], sd: f64, rng: &mut SubstreamRng) {
    for v in out {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

/// Chrono forget-gate biases `ln(tau - 1)`, `tau ~ U(2, t_max)` continuous.
fn chrono_forget(t_max: f64, n: usize, rng: &mut SubstreamRng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let tau = rng.gen_range(2.0..t_max);
            (tau - 1.0).ln()
        })
        .collect()
}

/// Bias vector for `gate` under `scheme`.
///
/// Under chrono, the input-gate bias is tied to the forget-gate bias, so it
/// must be drawn from the forget gate's stream: callers pass the same stream
/// state for both gates and get `b_i = -b_f` entrywise.
pub fn sample_biases(
    scheme: &BiasScheme,
    arch: &ArchitectureSpec,
    gate: Gate,
    n: usize,
    rng: &mut SubstreamRng,
) -> Result<Vec<f64>> {
    scheme.validate(arch)?;
    if !arch.has_gate(gate) {
        return Err(Error::Config(format!(
            "gate '{}' does not belong to {}",
            gate.label(),
            arch.kind
        )));
    }
    let mut b = vec![0.0; n];
    match scheme.gates {
        GateBias::Zero => {}
        GateBias::Gaussian { sd } => {
            if sd > 0.0 {
                fill_gaussian(&mut b, sd, rng);
            }
        }
        GateBias::Chrono { t_max, output } => match gate {
            Gate::Forget => b = chrono_forget(t_max, n, rng),
            Gate::Input => b = chrono_forget(t_max, n, rng).into_iter().map(|x| -x).collect(),
            Gate::Output => {
                if let OutputBias::Gaussian { sd } = output {
                    if sd > 0.0 {
                        fill_gaussian(&mut b, sd, rng);
                    }
                }
            }
            Gate::Update | Gate::Reset => unreachable!("validated: chrono is LSTM-only"),
        },
    }
    Ok(b)
}

/// One replica's sampled weights and biases.
///
/// All recurrent matrices that multiply the same vector are stored as row
/// blocks of a single matrix so one pass computes every pre-activation:
/// `[U; U_f; U_i; U_o]` for LSTM (all act on the visible state), `[U_z; U_r]`
/// for GRU (the candidate `U` acts on `r * h` and is stored separately),
/// `[U]` for RNN.
#[derive(Debug, Clone)]
pub struct DisorderRealization {
    pub arch: ArchitectureSpec,
    pub scheme: BiasScheme,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    stacked: Mat,
    gru_candidate: Option<Mat>,
    candidate_input: Mat,
    candidate_bias: Vec<f64>,
    gate_inputs: Vec<Mat>,
    gate_biases: Vec<Vec<f64>>,
}

impl DisorderRealization {
    fn gate_index(&self, gate: Gate) -> Option<usize> {
        self.arch.gates().iter().position(|&g| g == gate)
    }

    /// Row-block offset of `gate` inside the stacked recurrent matrix.
    fn gate_block(&self, gate: Gate) -> Option<usize> {
        let idx = self.gate_index(gate)?;
        Some(match self.arch.kind {
            ArchKind::Lstm => 1 + idx,
            _ => idx,
        })
    }

    /// Candidate recurrent matrix `U` (N x N).
    pub fn candidate_recurrent(&self) -> MatRef<'_> {
        match &self.gru_candidate {
            Some(u) => u.view(),
            None => self.stacked.row_block(0, self.n),
        }
    }

    pub fn candidate_input(&self) -> &Mat {
        &self.candidate_input
    }

    pub fn candidate_bias(&self) -> &[f64] {
        &self.candidate_bias
    }

    pub fn gate_recurrent(&self, gate: Gate) -> Option<MatRef<'_>> {
        self.gate_block(gate)
            .map(|b| self.stacked.row_block(b * self.n, self.n))
    }

    pub fn gate_input(&self, gate: Gate) -> Option<&Mat> {
        self.gate_index(gate).map(|i| &self.gate_inputs[i])
    }

    pub fn gate_bias(&self, gate: Gate) -> Option<&[f64]> {
        self.gate_index(gate).map(|i| self.gate_biases[i].as_slice())
    }

    /// The stacked matrix acting on the visible state (see type docs).
    pub fn stacked_recurrent(&self) -> MatRef<'_> {
        self.stacked.view()
    }
}

fn bias_stream_label(scheme: &BiasScheme, gate: Gate) -> String {
    match (scheme.gates, gate) {
        (GateBias::Chrono { .. }, Gate::Input) => "b:f".to_string(),
        _ => format!("b:{}", gate.label()),
    }
}

/// Only the gate biases of a replica, bit-identical to those of [`realize`]
/// (same substreams) without sampling any matrix.
pub fn realize_gate_biases(config: &NetworkConfig) -> Result<Vec<(Gate, Vec<f64>)>> {
    config.validate()?;
    config
        .arch
        .gates()
        .iter()
        .map(|&g| {
            let mut rng = substream(config.seed, &bias_stream_label(&config.scheme, g));
            Ok((g, sample_biases(&config.scheme, &config.arch, g, config.n, &mut rng)?))
        })
        .collect()
}

/// Sample every component of a replica from its own substream.
pub fn realize(config: &NetworkConfig) -> Result<DisorderRealization> {
    config.validate()?;
    let (n, k, seed) = (config.n, config.k, config.seed);
    let arch = config.arch;
    let gates = arch.gates();
    let rec_var = 1.0 / n as f64;
    let in_var = 1.0 / k as f64;

    let stacked_blocks = match arch.kind {
        ArchKind::Lstm => 1 + gates.len(),
        ArchKind::Gru => gates.len(),
        ArchKind::Rnn => 1,
    };
    let mut stacked = Mat::zeros(stacked_blocks * n, n);
    let block_len = n * n;
    let mut fill_block = |block: usize, label: &str| {
        let mut rng = substream(seed, label);
        let sd = rec_var.sqrt();
        fill_gaussian(
            &mut stacked.as_mut_slice()[block * block_len..(block + 1) * block_len],
            sd,
            &mut rng,
        );
    };

    let gru_candidate = match arch.kind {
        ArchKind::Gru => {
            for (i, g) in gates.iter().enumerate() {
                fill_block(i, &format!("U:{}", g.label()));
            }
            Some(sample_weights(n, n, rec_var, &mut substream(seed, "U"))?)
        }
        ArchKind::Lstm => {
            fill_block(0, "U");
            for (i, g) in gates.iter().enumerate() {
                fill_block(1 + i, &format!("U:{}", g.label()));
            }
            None
        }
        ArchKind::Rnn => {
            fill_block(0, "U");
            None
        }
    };

    let candidate_input = sample_weights(n, k, in_var, &mut substream(seed, "W"))?;
    let mut candidate_bias = vec![0.0; n];
    if config.scheme.candidate_sd > 0.0 {
        fill_gaussian(
            &mut candidate_bias,
            config.scheme.candidate_sd,
            &mut substream(seed, "b:c"),
        );
    }

    let mut gate_inputs = Vec::with_capacity(gates.len());
    for &g in gates {
        gate_inputs.push(sample_weights(
            n,
            k,
            in_var,
            &mut substream(seed, &format!("W:{}", g.label())),
        )?);
    }
    let gate_biases = realize_gate_biases(config)?
        .into_iter()
        .map(|(_, b)| b)
        .collect();

    Ok(DisorderRealization {
        arch,
        scheme: config.scheme,
        n,
        k,
        seed,
        stacked,
        gru_candidate,
        candidate_input,
        candidate_bias,
        gate_inputs,
        gate_biases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sigmoid;

    #[test]
    fn sample_weights_rejects_bad_input() {
        let mut rng = substream(1, "x");
        assert!(matches!(sample_weights(0, 3, 1.0, &mut rng), Err(Error::Config(_))));
        assert!(matches!(sample_weights(2, 2, 0.0, &mut rng), Err(Error::Config(_))));
        assert!(matches!(sample_weights(2, 2, -1.0, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn sample_weights_is_deterministic() {
        let a = sample_weights(20, 30, 0.5, &mut substream(42, "U")).unwrap();
        let b = sample_weights(20, 30, 0.5, &mut substream(42, "U")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_matrix_variance_within_three_sigma() {
        // Sample variance of M i.i.d. N(0, v) has sd v * sqrt(2 / (M - 1)).
        let n = 2000;
        let v = 1.0 / n as f64;
        let m = sample_weights(n, n, v, &mut substream(3, "U")).unwrap();
        let count = (n * n) as f64;
        let mean = m.as_slice().iter().sum::<f64>() / count;
        let var = m.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
        let sd_var = v * (2.0 / (count - 1.0)).sqrt();
        assert!((var - v).abs() < 3.0 * sd_var, "var {var} vs {v}");
        assert!(mean.abs() < 3.0 * (v / count).sqrt());
    }

    #[test]
    fn single_draw_mean_over_seeds() {
        let draws: Vec<f64> = (0..100_000u64)
            .map(|s| sample_weights(1, 1, 1.0, &mut substream(s, "U")).unwrap().get(0, 0))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 3.0 / (draws.len() as f64).sqrt());
    }

    #[test]
    fn zero_and_degenerate_gaussian_biases_vanish() {
        let lstm = ArchitectureSpec::lstm();
        let mut rng = substream(0, "b");
        for scheme in [BiasScheme::zero(), BiasScheme::gaussian(0.0)] {
            for &g in lstm.gates() {
                assert_eq!(sample_biases(&scheme, &lstm, g, 5, &mut rng).unwrap(), vec![0.0; 5]);
            }
        }
    }

    #[test]
    fn chrono_ties_input_to_forget() {
        let lstm = ArchitectureSpec::lstm();
        let scheme = BiasScheme::chrono(100.0, OutputBias::Zero);
        let bf = sample_biases(&scheme, &lstm, Gate::Forget, 1000, &mut substream(9, "b:f")).unwrap();
        let bi = sample_biases(&scheme, &lstm, Gate::Input, 1000, &mut substream(9, "b:f")).unwrap();
        for (f, i) in bf.iter().zip(&bi) {
            assert_eq!(*i, -*f);
            assert!((sigmoid(*f) + sigmoid(*i) - 1.0).abs() < 1e-12);
            // tau in (2, 100) => b_f in (0, ln 99)
            assert!(*f > 0.0 && *f < 99f64.ln());
        }
    }

    #[test]
    fn chrono_rejected_outside_lstm() {
        let scheme = BiasScheme::chrono(10.0, OutputBias::Zero);
        let gru = ArchitectureSpec::gru();
        let err = sample_biases(&scheme, &gru, Gate::Update, 4, &mut substream(0, "b"));
        assert!(matches!(err, Err(Error::Config(_))));
        let cfg = NetworkConfig::new(gru, 4, scheme, 0);
        assert!(matches!(realize(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn chrono_requires_t_max_above_two() {
        let scheme = BiasScheme::chrono(2.0, OutputBias::Zero);
        assert!(scheme.validate(&ArchitectureSpec::lstm()).is_err());
    }

    #[test]
    fn zero_bias_lstm_realization() {
        let cfg = NetworkConfig::new(ArchitectureSpec::lstm(), 4, BiasScheme::zero(), 7);
        let r = realize(&cfg).unwrap();
        assert_eq!(r.candidate_bias(), &[0.0; 4]);
        for &g in cfg.arch.gates() {
            assert_eq!(r.gate_bias(g).unwrap(), &[0.0; 4]);
            assert_eq!(r.gate_recurrent(g).unwrap().rows(), 4);
        }
        assert_eq!(r.stacked_recurrent().rows(), 16);
        // the four recurrent blocks are distinct samples
        let u = r.candidate_recurrent().to_owned();
        let uf = r.gate_recurrent(Gate::Forget).unwrap().to_owned();
        assert_ne!(u, uf);
    }

    #[test]
    fn different_seeds_differ() {
        let a = realize(&NetworkConfig::new(ArchitectureSpec::lstm(), 4, BiasScheme::zero(), 7)).unwrap();
        let b = realize(&NetworkConfig::new(ArchitectureSpec::lstm(), 4, BiasScheme::zero(), 8)).unwrap();
        assert_ne!(a.candidate_recurrent().to_owned(), b.candidate_recurrent().to_owned());
    }

    #[test]
    fn gru_has_exactly_update_and_reset() {
        let r = realize(&NetworkConfig::new(ArchitectureSpec::gru(), 5, BiasScheme::gaussian(1.0), 1)).unwrap();
        assert!(r.gate_bias(Gate::Update).is_some());
        assert!(r.gate_bias(Gate::Reset).is_some());
        for g in [Gate::Forget, Gate::Input, Gate::Output] {
            assert!(r.gate_bias(g).is_none());
            assert!(r.gate_recurrent(g).is_none());
        }
        assert_eq!(r.candidate_recurrent().rows(), 5);
    }

    #[test]
    fn candidate_sd_does_not_perturb_gate_biases() {
        let base = NetworkConfig::new(ArchitectureSpec::lstm(), 50, BiasScheme::gaussian(1.5), 11);
        let with_c = NetworkConfig {
            scheme: BiasScheme::gaussian(1.5).with_candidate_sd(2.0),
            ..base
        };
        let a = realize(&base).unwrap();
        let b = realize(&with_c).unwrap();
        for &g in base.arch.gates() {
            assert_eq!(a.gate_bias(g), b.gate_bias(g));
        }
        assert_eq!(a.stacked_recurrent().as_slice(), b.stacked_recurrent().as_slice());
        assert!(b.candidate_bias().iter().any(|&x| x != 0.0));
    }
}
