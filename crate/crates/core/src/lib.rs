//! Simulation of non-unitary operator dynamics through a decomposition into
//! at most four unitaries.
//!
//! Any square operator `M` splits into Hermitian and anti-Hermitian parts
//! `M = S + A`, each realized as the average of two exactly unitary
//! exponentials at a small expansion parameter ε; the circuits therefore run
//! only unitary gates, and the finite-ε operator `sin(εS)/ε + sinh(εA)/ε`
//! converges to `M` at rate O(ε²). The crate provides:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigendecomposition, and
//!   unitary matrix exponentials;
//! - [`decomposition`]: the four-unitary block set, the block-diagonal
//!   multiplexed operator and adding rotation, and Richardson extrapolation
//!   of the ε → 0 limit;
//! - [`statevector`]: an exact statevector simulator with multiplexed
//!   (uniformly controlled) gates and seeded multinomial shot sampling;
//! - [`channels`]: generalized amplitude damping Kraus channels and the
//!   exact classical operator-sum oracle;
//! - [`experiment`]: the end-to-end population-dynamics pipeline with
//!   circuit-level seeding, repetitions and ε-extrapolation;
//! - [`trace`]: trace output (TSV and JSON) and error metrics;
//! - [`validation`]: the backend-independent property suite.

pub mod channels;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod statevector;
pub mod trace;
pub mod validation;

pub use error::{Error, Result};
