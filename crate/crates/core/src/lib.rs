//! Reversible 2×2 block cellular automaton toolkit.
//!
//! * [`ca`] simulates the automaton exactly, forward and backward.
//! * [`linops`] expresses one automaton step as a state-dependent affine
//!   operator over GF(2) and lowers strided convolutions to dense matrices.
//! * [`nn`] is a small double-precision CNN stack with hand-written
//!   backpropagation.
//! * [`learn`] trains networks on automaton data and runs the rollout and
//!   commutativity experiments.
//! * [`io`] holds the plain-text grid and trajectory formats.

pub mod ca;
mod error;
pub mod io;
pub mod learn;
pub mod linops;
pub mod nn;

pub use error::{Error, Result};
