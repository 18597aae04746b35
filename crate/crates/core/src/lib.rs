//! Exact simulation of piecewise deterministic Markov processes by thinning.
//!
//! The crate is organised around the [`model::PdmpModel`] trait. A model
//! supplies its flow, jump rate, transition kernel and rigorous bounds on
//! the flow; [`bounds`] turns those into piecewise-constant rate envelopes
//! and [`engine`] runs the thinning loop. Two stochastic Hodgkin-Huxley
//! models live in [`hh`], Monte Carlo drivers and statistical checks in
//! [`experiments`], and the `pdmp` binary wraps everything in [`cli`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod hh;
pub mod model;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod testmodels;

pub use bounds::{BoundStrategy, EnvelopeOptions, RateEnvelope};
pub use engine::{simulate_path, SimulationConfig, ThinningStats};
pub use error::{PdmpError, Result};
pub use model::{FlowSegment, HybridState, PdmpModel, PulseCurrent, Trajectory};
pub use rng::RngStream;
