//! Compositional construction of control barrier certificates and hybrid
//! controllers enforcing ω-regular specifications on networks of
//! discrete-time control subsystems.
//!
//! The pipeline: complement the specification automaton and decompose it
//! into partition buckets ([`automata`]); find a local barrier certificate
//! per subsystem and bucket ([`synthesis`], [`barrier`]); check that the
//! local gains compose under a small-gain condition ([`comparison`]); and
//! run the resulting hybrid controller on the network ([`policy`]).

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod automata;
pub mod barrier;
pub mod cli;
pub mod comparison;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod policy;
pub mod poly;
pub mod synthesis;
pub mod system;

pub use error::{Error, Result};
