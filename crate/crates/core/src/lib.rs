//! Secret-key-assisted private classical communication over cq wiretap
//! channels.
//!
//! The crate models channels `x ↦ σ_x^{BE}` whose output is shared between a
//! legitimate receiver (B) and an eavesdropper (E), computes the trade-off
//! region between private data rate and secret-key consumption, and simulates
//! the finite-blocklength coding protocol behind the achievability claims:
//! random codebooks, XOR encryption against a shared key, pretty-good
//! measurement decoding, and explicit trace-distance security measurement.
//!
//! Modules:
//! - [`linalg`]: dense complex Hermitian kernel (deterministic Jacobi
//!   eigensolver, partial trace, trace distance).
//! - [`channels`]: cq wiretap channels, Kraus channels and their isometric
//!   extensions, JSON channel files.
//! - [`information`]: von Neumann entropy, Holevo quantities, coherent
//!   information.
//! - [`typicality`]: typical sets/projectors and numeric verification of
//!   their defining bounds.
//! - [`region`]: rate-region feasibility, corner points, boundary sampling.
//! - [`protocol`]: the finite-blocklength code: pairing, codebooks,
//!   pretty-good measurement, obfuscation error, security distance.
//! - [`ri`]: a minimal resource-inequality calculus over channels, secret
//!   keys, and private bits.

pub mod budget;
pub mod channels;
pub mod error;
pub mod information;
pub mod linalg;
pub mod protocol;
pub mod region;
pub mod ri;
pub mod rng;
pub mod sample;
pub mod typicality;

pub use error::{Error, Result};
pub use linalg::{Complex64, ComplexMatrix, ComplexVector, DensityOperator, SystemLayout};
