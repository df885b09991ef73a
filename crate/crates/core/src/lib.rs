//! Non-local Eikonal equations on kernel-weighted geometric graphs.
//!
//! Point clouds are sampled from closed-form manifolds ([`manifold`]),
//! connected into `ε`-graphs with kernel weights ([`kernel`], [`graph`]),
//! and evolved with a monotone forward-Euler scheme ([`solver`]). The
//! [`reference`] module supplies exact and shortest-path reference
//! solutions, and [`harness`] runs convergence sweeps and Monte-Carlo
//! checks of the random-graph construction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod manifold;
pub mod reference;
pub mod solver;
pub mod spatial;

pub use error::{Error, Result};
