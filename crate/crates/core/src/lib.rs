//! Gated recurrent networks as random dynamical systems: disorder sampling,
//! the unified RNN/LSTM/GRU update, Lyapunov and order-parameter estimation,
//! the closed-form critical gain, Jacobian spectra and a Mackey-Glass
//! reservoir benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod arch;
pub mod criterion;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod lyapunov;
pub mod observables;
pub mod quadrature;
pub mod reservoir;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod sweep;

pub use arch::{Activation, ArchKind, ArchitectureSpec, Gate};
pub use disorder::{realize, BiasScheme, DisorderRealization, GateBias, NetworkConfig, OutputBias};
pub use dynamics::{HiddenState, Propagator};
pub use error::{Error, Result};
pub use exec::Exec;
