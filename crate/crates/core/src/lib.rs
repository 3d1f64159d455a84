//! Online linear optimization with bandit feedback.
//!
//! The crate provides two families of strategies:
//!
//! - [`exp2`]: exponential weights over a finite action set, mixed with the
//!   exploration distribution given by John's ellipsoid ([`geometry`]).
//! - [`osmd`]: online stochastic mirror descent, instantiated for the
//!   hypercube ([`hypercube`]) and the Euclidean ball ([`ball`]).
//!
//! [`env`] holds action sets, adversaries, best-action oracles and regret
//! accounting. Everything here is `no_std` with `alloc`; file formats,
//! parallel replicates and the command line live in the `banlin` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ball;
pub mod env;
mod error;
pub mod exp2;
pub mod geometry;
pub mod hypercube;
pub mod math;
pub mod numlin;
pub mod osmd;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::ball::BallPolicy;
    pub use crate::env::{
        best_action, regret_report, run_trajectory, ActionSet, Adversary, Environment, LossSet,
        Policy, RegretReport, RoundRecord, TheoremBound, Tuning,
    };
    pub use crate::exp2::{Exp2Policy, Exp2State, ExpertsGame, ExpertsParams};
    pub use crate::geometry::{john_weights, mvee, preprocess, JohnExploration};
    pub use crate::hypercube::HypercubePolicy;
    pub use crate::osmd::{OsmdState, Regularizer};
    pub use crate::{Error, Result};
}
