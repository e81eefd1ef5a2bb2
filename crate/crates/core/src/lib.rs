//! Simulation and learning core for FIM-equipped NOMA downlinks assisted by a
//! STAR beyond-diagonal RIS.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiations.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod ris;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ChannelSet64 = geometry::ChannelSet<f64>;
pub type Task64 = geometry::Task<f64>;
pub type Decision64 = metrics::AllocationDecision<f64>;
pub type RisParams64 = ris::StarBdRisParams<f64>;
pub type Env64 = env::FimStarEnv<f64>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Agent64 = agent::MetaSacAgent<f64>;

pub type ChannelSet32 = geometry::ChannelSet<f32>;
pub type Env32 = env::FimStarEnv<f32>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Agent32 = agent::MetaSacAgent<f32>;
