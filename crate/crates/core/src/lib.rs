//! Simulator for Network-GIANT, a fully distributed Newton-type method.
//!
//! Each agent `i` holds a strongly convex local cost `f_i`, an iterate
//! `x_i`, its previous local gradient `g_i` and a gradient tracker `w_i`.
//! Per iteration the trackers are mixed with a doubly stochastic matrix
//! `P`, every agent solves against its own Hessian to get a Newton-type
//! direction from the tracked gradient, and the damped local steps are mixed
//! again. The crate also ships decentralized gradient descent and gradient
//! tracking as baselines, diagnostics that check the method's averaged
//! dynamics numerically, and a config-driven experiment harness.

pub mod algorithms;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod objectives;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
