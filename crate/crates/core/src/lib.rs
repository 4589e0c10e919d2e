//! Policy mirror descent with temporal-difference critics on tabular MDPs.
//!
//! The library is generic over the scalar type (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the oracles and bound checks assume.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algo;
pub mod analysis;
pub mod chain;
pub mod error;
pub mod garnet;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod mirror;
pub mod oracle;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type TabularMdp64 = mdp::TabularMdp<f64>;
pub type Policy64 = mdp::Policy<f64>;
pub type MirrorMap64 = mirror::MirrorMap<f64>;
pub type BehaviorModel64 = chain::BehaviorModel<f64>;
pub type MixingEstimate64 = chain::MixingEstimate<f64>;
pub type RunResult64 = algo::RunResult<f64>;
pub type OptimalSolution64 = oracle::OptimalSolution<f64>;
pub type BoundInputs64 = analysis::BoundInputs<f64>;

pub type TabularMdp32 = mdp::TabularMdp<f32>;
pub type Policy32 = mdp::Policy<f32>;
pub type MirrorMap32 = mirror::MirrorMap<f32>;
pub type BehaviorModel32 = chain::BehaviorModel<f32>;
pub type RunResult32 = algo::RunResult<f32>;
