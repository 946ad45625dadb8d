//! The unified gated update
//!
//! ```text
//! h'_i   = A_i [ (1 - alpha_i) h_i + alpha_i phi(c_i) ]
//! c_i    = g sum_j U_ij o_j Psi(h_j) + sum_k W_ik x_k + b_c,i
//! gate_i = sigmoid( g sum_j U^gate_ij v_j + sum_k W^gate_ik x_k + b_gate,i )
//! ```
//!
//! with `v` the visible state (`h` for RNN/GRU, `o * tanh(h)` for LSTM).
//! Gates are evaluated from the current state and the incoming input, then
//! used for the candidate and the state update of the same step. For the LSTM
//! this is the textbook cell: `h` plays the role of the cell state and the
//! output gate from the previous step is carried along with it, since the
//! visible state `o * tanh(h)` needs it.
//!
//! [`Propagator`] advances a batch of trajectories that share one realization
//! but may each have their own gain; every recurrent matrix is streamed once per
//! step for the whole batch.

use crate::arch::{ArchKind, Gate};
use crate::disorder::DisorderRealization;
use crate::error::{Error, Result};
use crate::linalg::mul_batch;

/// Logistic sigmoid, evaluated without overflow for either sign.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hidden state `h_t`, plus the carried output gate for LSTMs.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<f64>,
    /// LSTM only. `None` means "not yet computed": the gate is then taken at
    /// its input-free value `sigmoid(b_o)`, the value every gate has at `h = 0`.
    pub output_gate: Option<Vec<f64>>,
}

impl HiddenState {
    pub fn new(h: Vec<f64>) -> Self {
        Self {
            h,
            output_gate: None,
        }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self::new(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Gate activations for one state, in the architecture's gate order.
#[derive(Debug, Clone, PartialEq)]
pub struct GateValues {
    pub values: Vec<(Gate, Vec<f64>)>,
}

impl GateValues {
    pub fn get(&self, gate: Gate) -> Option<&[f64]> {
        self.values
            .iter()
            .find(|(g, _)| *g == gate)
            .map(|(_, v)| v.as_slice())
    }
}

fn check_dims(real: &DisorderRealization, state: &HiddenState, x: Option<&[f64]>) -> Result<()> {
    if state.h.len() != real.n {
        return Err(Error::Dimension(format!(
            "state has length {}, network has N = {}",
            state.h.len(),
            real.n
        )));
    }
    if let Some(o) = &state.output_gate {
        if o.len() != real.n {
            return Err(Error::Dimension(format!(
                "output gate has length {}, network has N = {}",
                o.len(),
                real.n
            )));
        }
    }
    if let Some(x) = x {
        if x.len() != real.k {
            return Err(Error::Dimension(format!(
                "input has length {}, network has K = {}",
                x.len(),
                real.k
            )));
        }
    }
    Ok(())
}

fn initial_output_gate(real: &DisorderRealization) -> Vec<f64> {
    real.gate_bias(Gate::Output)
        .map(|b| b.iter().map(|&v| sigmoid(v)).collect())
        .unwrap_or_else(|| vec![1.0; real.n])
}

/// Visible state presented to the gates.
pub fn visible_state(real: &DisorderRealization, state: &HiddenState) -> Vec<f64> {
    match real.arch.kind {
        ArchKind::Lstm => {
            let o = state
                .output_gate
                .clone()
                .unwrap_or_else(|| initial_output_gate(real));
            state
                .h
                .iter()
                .zip(&o)
                .map(|(&h, &o)| o * real.arch.psi.apply(h))
                .collect()
        }
        ArchKind::Rnn | ArchKind::Gru => state.h.clone(),
    }
}

/// Gate activations that the next step will use, from state `state` and input `x`.
pub fn gate_values(
    real: &DisorderRealization,
    g: f64,
    state: &HiddenState,
    x: Option<&[f64]>,
) -> Result<GateValues> {
    check_dims(real, state, x)?;
    let vis = visible_state(real, state);
    let n = real.n;
    let mut values = Vec::new();
    let mut pre = vec![0.0; n];
    let mut wx = vec![0.0; n];
    for &gate in real.arch.gates() {
        let u = real.gate_recurrent(gate).expect("gate in arch");
        u.matvec(&vis, &mut pre);
        match x {
            Some(x) => real.gate_input(gate).expect("gate in arch").view().matvec(x, &mut wx),
            None => wx.fill(0.0),
        }
        let b = real.gate_bias(gate).expect("gate in arch");
        let v = (0..n).map(|i| sigmoid(g * pre[i] + wx[i] + b[i])).collect();
        values.push((gate, v));
    }
    Ok(GateValues { values })
}

/// Batched stepper over trajectories sharing one realization.
pub struct Propagator<'a> {
    real: &'a DisorderRealization,
    gains: Vec<f64>,
    n: usize,
    batch: usize,
    /// `batch` state vectors of length `n`, back to back.
    h: Vec<f64>,
    /// LSTM output gates, same layout as `h`.
    o: Vec<f64>,
    vis: Vec<f64>,
    pre: Vec<f64>,
    pre_candidate: Vec<f64>,
    /// Input contributions `W x` for candidate and gates, refreshed per step.
    drive: Vec<f64>,
    steps_taken: usize,
}

impl<'a> Propagator<'a> {
    /// One trajectory per entry of `gains`, each starting from `h0`.
    pub fn new(real: &'a DisorderRealization, gains: &[f64], h0: &HiddenState) -> Result<Self> {
        let starts = vec![h0.clone(); gains.len()];
        Self::with_states(real, gains, &starts)
    }

    pub fn with_states(
        real: &'a DisorderRealization,
        gains: &[f64],
        starts: &[HiddenState],
    ) -> Result<Self> {
        if gains.len() != starts.len() {
            return Err(Error::Dimension(format!(
                "{} gains for {} initial states",
                gains.len(),
                starts.len()
            )));
        }
        if let Some(&g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::Contract(format!("gain must be finite and >= 0, got {g}")));
        }
        let n = real.n;
        let batch = gains.len();
        let mut h = Vec::with_capacity(n * batch);
        let mut o = Vec::new();
        let lstm = real.arch.kind == ArchKind::Lstm;
        let default_o = if lstm { initial_output_gate(real) } else { Vec::new() };
        for s in starts {
            check_dims(real, s, None)?;
            if s.h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract("initial state is not finite".into()));
            }
            h.extend_from_slice(&s.h);
            if lstm {
                o.extend_from_slice(s.output_gate.as_deref().unwrap_or(&default_o));
            }
        }
        let stacked_rows = real.stacked_recurrent().rows();
        let drive_len = n * (1 + real.arch.gates().len());
        Ok(Self {
            real,
            gains: gains.to_vec(),
            n,
            batch,
            h,
            o,
            vis: vec![0.0; n * batch],
            pre: vec![0.0; stacked_rows * batch],
            pre_candidate: if real.arch.kind == ArchKind::Gru {
                vec![0.0; n * batch]
            } else {
                Vec::new()
            },
            drive: vec![0.0; drive_len],
            steps_taken: 0,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Hidden state of trajectory `j`.
    pub fn h(&self, j: usize) -> &[f64] {
        &self.h[j * self.n..(j + 1) * self.n]
    }

    pub fn h_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.h[j * self.n..(j + 1) * self.n]
    }

    /// Carried LSTM output gate of trajectory `j` (empty for other kinds).
    pub fn output_gate(&self, j: usize) -> &[f64] {
        if self.o.is_empty() {
            &[]
        } else {
            &self.o[j * self.n..(j + 1) * self.n]
        }
    }

    pub fn output_gate_mut(&mut self, j: usize) -> &mut [f64] {
        if self.o.is_empty() {
            &mut []
        } else {
            &mut self.o[j * self.n..(j + 1) * self.n]
        }
    }

    /// Whole state buffers `(h, o)`, trajectories back to back; `o` is empty
    /// unless the architecture is an LSTM.
    pub fn buffers_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.h, &mut self.o)
    }

    pub fn state(&self, j: usize) -> HiddenState {
        HiddenState {
            h: self.h(j).to_vec(),
            output_gate: if self.o.is_empty() {
                None
            } else {
                Some(self.output_gate(j).to_vec())
            },
        }
    }

    fn load_drive(&mut self, x: Option<&[f64]>) -> Result<()> {
        let n = self.n;
        match x {
            None => self.drive.fill(0.0),
            Some(x) => {
                if x.len() != self.real.k {
                    return Err(Error::Dimension(format!(
                        "input has length {}, network has K = {}",
                        x.len(),
                        self.real.k
                    )));
                }
                self.real
                    .candidate_input()
                    .view()
                    .matvec(x, &mut self.drive[..n]);
                for (idx, &gate) in self.real.arch.gates().iter().enumerate() {
                    let w = self.real.gate_input(gate).expect("gate in arch");
                    w.view()
                        .matvec(x, &mut self.drive[(idx + 1) * n..(idx + 2) * n]);
                }
            }
        }
        Ok(())
    }

    /// Advance every trajectory by one step with shared input `x` (`None` = autonomous).
    pub fn step(&mut self, x: Option<&[f64]>) -> Result<()> {
        self.load_drive(x)?;
        match self.real.arch.kind {
            ArchKind::Lstm => self.step_lstm(),
            ArchKind::Gru => self.step_gru(),
            ArchKind::Rnn => self.step_rnn(),
        }
        self.steps_taken += 1;
        if self.h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                step: self.steps_taken,
                replica_seed: Some(self.real.seed),
            });
        }
        Ok(())
    }

    fn step_lstm(&mut self) {
        let (n, b) = (self.n, self.batch);
        let psi = self.real.arch.psi;
        let phi = self.real.arch.phi;
        for idx in 0..n * b {
            self.vis[idx] = self.o[idx] * psi.apply(self.h[idx]);
        }
        mul_batch(self.real.stacked_recurrent(), &self.vis, b, &mut self.pre);
        let bc = self.real.candidate_bias();
        let bf = self.real.gate_bias(Gate::Forget).expect("lstm");
        let bi = self.real.gate_bias(Gate::Input).expect("lstm");
        let bo = self.real.gate_bias(Gate::Output).expect("lstm");
        let (dc, rest) = self.drive.split_at(n);
        let (df, rest) = rest.split_at(n);
        let (di, d_o) = rest.split_at(n);
        for j in 0..b {
            let g = self.gains[j];
            for i in 0..n {
                let p = |block: usize| self.pre[(block * n + i) * b + j];
                let c = g * p(0) + dc[i] + bc[i];
                let f = sigmoid(g * p(1) + df[i] + bf[i]);
                let inp = sigmoid(g * p(2) + di[i] + bi[i]);
                let o = sigmoid(g * p(3) + d_o[i] + bo[i]);
                let k = j * n + i;
                self.h[k] = f * self.h[k] + inp * phi.apply(c);
                self.o[k] = o;
            }
        }
    }

    fn step_gru(&mut self) {
        let (n, b) = (self.n, self.batch);
        let psi = self.real.arch.psi;
        let phi = self.real.arch.phi;
        mul_batch(self.real.stacked_recurrent(), &self.h, b, &mut self.pre);
        let bz = self.real.gate_bias(Gate::Update).expect("gru");
        let br = self.real.gate_bias(Gate::Reset).expect("gru");
        let (dc, rest) = self.drive.split_at(n);
        let (dz, dr) = rest.split_at(n);
        // reuse `vis` for z and then r * Psi(h)
        let mut z = std::mem::take(&mut self.vis);
        let mut rh = vec![0.0; n * b];
        for j in 0..b {
            let g = self.gains[j];
            for i in 0..n {
                let k = j * n + i;
                z[k] = sigmoid(g * self.pre[i * b + j] + dz[i] + bz[i]);
                let r = sigmoid(g * self.pre[(n + i) * b + j] + dr[i] + br[i]);
                rh[k] = r * psi.apply(self.h[k]);
            }
        }
        mul_batch(self.real.candidate_recurrent(), &rh, b, &mut self.pre_candidate);
        let bc = self.real.candidate_bias();
        for j in 0..b {
            let g = self.gains[j];
            for i in 0..n {
                let k = j * n + i;
                let c = g * self.pre_candidate[i * b + j] + dc[i] + bc[i];
                self.h[k] = (1.0 - z[k]) * self.h[k] + z[k] * phi.apply(c);
            }
        }
        self.vis = z;
    }

    fn step_rnn(&mut self) {
        let (n, b) = (self.n, self.batch);
        let psi = self.real.arch.psi;
        let phi = self.real.arch.phi;
        for idx in 0..n * b {
            self.vis[idx] = psi.apply(self.h[idx]);
        }
        mul_batch(self.real.stacked_recurrent(), &self.vis, b, &mut self.pre);
        let bc = self.real.candidate_bias();
        let dc = &self.drive[..n];
        for j in 0..b {
            let g = self.gains[j];
            for i in 0..n {
                self.h[j * n + i] = phi.apply(g * self.pre[i * b + j] + dc[i] + bc[i]);
            }
        }
    }
}

/// One step of a single trajectory.
pub fn step(
    real: &DisorderRealization,
    g: f64,
    state: &HiddenState,
    x: Option<&[f64]>,
) -> Result<HiddenState> {
    check_dims(real, state, x)?;
    let mut p = Propagator::new(real, &[g], state)?;
    p.step(x)?;
    Ok(p.state(0))
}

/// Autonomous evolution for `steps` steps, folding over every visited state
/// `h_0, ..., h_T` without storing them.
pub fn run_autonomous_fold<A>(
    real: &DisorderRealization,
    g: f64,
    h0: &HiddenState,
    steps: usize,
    init: A,
    mut f: impl FnMut(A, usize, &[f64]) -> A,
) -> Result<(HiddenState, A)> {
    let mut p = Propagator::new(real, &[g], h0)?;
    let mut acc = f(init, 0, p.h(0));
    for t in 1..=steps {
        p.step(None)?;
        acc = f(acc, t, p.h(0));
    }
    Ok((p.state(0), acc))
}

/// Autonomous evolution with full trajectory storage (`steps + 1` states).
pub fn run_autonomous(
    real: &DisorderRealization,
    g: f64,
    h0: &HiddenState,
    steps: usize,
) -> Result<Vec<HiddenState>> {
    let mut p = Propagator::new(real, &[g], h0)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(p.state(0));
    for _ in 0..steps {
        p.step(None)?;
        out.push(p.state(0));
    }
    Ok(out)
}
