//! Architecture descriptions for the unified gated update.
//!
//! | kind | A      | alpha       | o (modulator) | phi  | Psi  |
//! |------|--------|-------------|---------------|------|------|
//! | RNN  | 1      | 1           | 1             | tanh | id   |
//! | LSTM | f + i  | i / (f + i) | output gate   | tanh | tanh |
//! | GRU  | 1      | z           | reset gate    | tanh | id   |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Rnn,
    Lstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Forget,
    Input,
    Output,
    Update,
    Reset,
}

impl Gate {
    /// Short label used for RNG substreams and output columns.
    pub fn label(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Output => "o",
            Gate::Update => "z",
            Gate::Reset => "r",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Slope at the origin; enters the linearization around `h = 0`.
    pub fn derivative_at_zero(self) -> f64 {
        match self {
            Activation::Tanh | Activation::Identity => 1.0,
        }
    }
}

/// How the state presented to the gates is formed from `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VisibleState {
    Identity,
    OutputGatedTanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: ArchKind,
    /// Candidate nonlinearity.
    pub phi: Activation,
    /// Nonlinearity applied to `h` inside the recurrent drive.
    pub psi: Activation,
}

impl ArchitectureSpec {
    pub fn new(kind: ArchKind) -> Self {
        let psi = match kind {
            ArchKind::Lstm => Activation::Tanh,
            ArchKind::Rnn | ArchKind::Gru => Activation::Identity,
        };
        Self {
            kind,
            phi: Activation::Tanh,
            psi,
        }
    }

    pub fn rnn() -> Self {
        Self::new(ArchKind::Rnn)
    }

    pub fn lstm() -> Self {
        Self::new(ArchKind::Lstm)
    }

    pub fn gru() -> Self {
        Self::new(ArchKind::Gru)
    }

    /// Gate set, in the order used for storage and substream labels.
    pub fn gates(&self) -> &'static [Gate] {
        match self.kind {
            ArchKind::Rnn => &[],
            ArchKind::Lstm => &[Gate::Forget, Gate::Input, Gate::Output],
            ArchKind::Gru => &[Gate::Update, Gate::Reset],
        }
    }

    pub fn has_gate(&self, gate: Gate) -> bool {
        self.gates().contains(&gate)
    }

    pub fn visible_state(&self) -> VisibleState {
        match self.kind {
            ArchKind::Lstm => VisibleState::OutputGatedTanh,
            ArchKind::Rnn | ArchKind::Gru => VisibleState::Identity,
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchKind::Rnn => "rnn",
            ArchKind::Lstm => "lstm",
            ArchKind::Gru => "gru",
        })
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(ArchKind::Rnn),
            "lstm" => Ok(ArchKind::Lstm),
            "gru" => Ok(ArchKind::Gru),
            other => Err(Error::Config(format!(
                "unknown architecture '{other}' (expected rnn, lstm or gru)"
            ))),
        }
    }
}
