//! Simulation and analysis toolkit for SRDO: synchronous parameter-server
//! gradient descent that tolerates stragglers through gradient coding and
//! bounded-delay stale gradients.
//!
//! The numerical core is generic over a [`Real`] scalar (`f32` or `f64`).
//! Experiment-level code (traces, aggregation, CLI plumbing) works in `f64`.

// `!(x >= 0.0)` checks are deliberate (they reject NaN) and matrix code
// indexes by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod codec;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod io;
pub mod problem;
pub mod rng;
pub mod topology;
pub mod trace;

use std::fmt::{Debug, Display};

pub use error::{Error, Result};

/// Scalar type the numerical core is generic over.
pub trait Real:
    nalgebra::RealField
    + Copy
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type CodingScheme = codec::CodingScheme<f64>;
pub type PartitionedProblem = problem::PartitionedProblem<f64>;
pub type WeightMatrix = topology::WeightMatrix<f64>;
pub type EngineState = engine::EngineState<f64>;

pub type CodingScheme32 = codec::CodingScheme<f32>;
pub type PartitionedProblem32 = problem::PartitionedProblem<f32>;
