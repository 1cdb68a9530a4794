//! Simulation of an angle-of-incidence tolerant ("multimode") time-bin qubit
//! analyzer and verification of polarization/time-bin entanglement.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: closed-form ray model of the unbalanced Michelson analyzer
//!   and the relay-optics ray-transfer identity.
//! * [`waveoptics`]: scalar-field generalization (angular-spectrum
//!   propagation, overlap visibility, speckle surrogate).
//! * [`quantum`]: dense Hermitian linear algebra on the 2×2 / 2×3 spaces.
//! * [`states`]: hybrid entangled state, depolarization channel and the
//!   visibility observables.
//! * [`measurement`]: Alice's projective and Bob's lossy time-bin POVMs.
//! * [`chsh`]: count-based expectation values, drift scans and the CHSH
//!   parameter.
//! * [`verify`]: the PPT feasibility program and the classical boundary.
//! * [`analysis`]: scenario sweeps combining the modules above.
//! * [`cli`]: the `mmtqa` command-line front end.

pub mod analysis;
pub mod chsh;
pub mod cli;
mod error;
pub mod geometry;
pub mod measurement;
pub mod quantum;
pub mod states;
pub mod units;
pub mod verify;
pub mod waveoptics;

pub use error::{Error, Result};
