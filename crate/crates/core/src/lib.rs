//! Simulation of an iterated CNOT + post-selection qubit protocol.
//!
//! Pairs of identical qubits pass through a CNOT gate, the target is
//! measured, and the control is kept only on outcome `0`. Followed by the
//! single-qubit unitary `U_L`, one round acts on pure states as the Lattès map
//! `f_L(z) = (z² + i)/(i z² + 1)` on the Riemann sphere, and on mixed states
//! as a nonlinear map of the Bloch ball.
//!
//! * [`riemann`]: pure-state maps on the extended complex plane.
//! * [`bloch`]: density matrices, the Bloch-ball map and its inverse branches.
//! * [`oracle`]: brute-force two-qubit simulation used as ground truth.
//! * [`experiments`]: seeded Monte Carlo convergence studies.
//! * [`cli`]: the `lattes` command-line front end.

pub mod bloch;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod riemann;

pub use bloch::{BlochVector, DensityMatrix2, MixedCycle};
pub use error::{Error, Result};
pub use riemann::{ExtendedComplex, PureCycle, Stability};
