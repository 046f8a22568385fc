//! Finite-resolution quantum state simulation and bounded hypercomputation
//! experiments.
//!
//! Amplitudes live on a grid of `mu` bits per amplitude ([`fixedpoint`]).
//! States evolve by exact unitary application followed by a truncating commit
//! ([`statevec`]); superpositions that outgrow `2^mu` terms collapse
//! probabilistically ([`collapse`]). On top of that engine sit the
//! experiments: Diophantine ground-state decisions ([`diophantine`]), bounded
//! Turing machines and fields ([`turingfield`]), halting-probability lower
//! bounds and rotation estimates ([`chaitin`]) and log-space resource
//! estimates ([`resources`]).

pub mod chaitin;
pub mod collapse;
pub mod diophantine;
pub mod error;
pub mod fixedpoint;
pub mod resources;
pub mod rng;
pub mod statevec;
pub mod turingfield;

pub use error::{Error, Result};
