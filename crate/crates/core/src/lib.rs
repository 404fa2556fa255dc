//! Numerical engine for the branching structure of unitary quantum
//! dynamics.
//!
//! * [`hilbert`]: dense states, operators, tensor products, evolution and
//!   projector families.
//! * [`relstate`]: Schmidt decomposition and relative states.
//! * [`automaton`]: a measuring automaton with memory, its branch
//!   ensembles and frequency statistics.
//! * [`histories`]: chain operators, the decoherence functional,
//!   coarse-graining, conditional probabilities and branch trees.
//! * [`quasiclassical`]: split-step grid dynamics, Ehrenfest tracking and
//!   the two-slit history space.

pub mod error;
pub mod hilbert;
pub mod automaton;
pub mod histories;
pub mod quasiclassical;
pub mod relstate;

pub use error::{Error, Result};
