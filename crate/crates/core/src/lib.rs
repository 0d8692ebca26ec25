//! Simulation of zero-temperature quantum memories built from the disordered
//! Majorana chain.
//!
//! The crate is organised bottom-up:
//!
//! * [`skewlin`] real antisymmetric linear algebra (canonical form, exponential, Pfaffian);
//! * [`chain`] one-particle Hamiltonians and disorder potentials;
//! * [`gaussian`] fermionic Gaussian states, syndrome sampling and Wick contractions;
//! * [`decoder`] minimum-weight decoding of the stabilizer syndrome;
//! * [`storage`] storage fidelity, exact and Monte Carlo, and storage times;
//! * [`localization`] Lyapunov exponents and effective localization lengths;
//! * [`oracle`] a dense many-body simulator used for cross-checks at small sizes;
//! * [`experiment`] configuration and drivers behind the command line tool.

pub mod chain;
pub mod decoder;
mod eigen;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod gaussian;
pub mod localization;
pub mod oracle;
pub mod skewlin;
pub mod storage;

pub use error::{Error, Result};
