//! Streaming interactive proofs over F_p, p = 2^61 - 1.
//!
//! Protocols: non-interactive F2 and matrix-vector checks with an
//! NTT-accelerated prover, GKR circuit checking with wide gates, and
//! linearization-based protocols for F0 and wildcard pattern matching.

pub mod circuit;
pub mod field;
pub mod gkr;
pub mod lin;
pub mod mle;
pub mod ni;
pub mod pfa;
pub mod run;
pub mod stream;
pub mod sumcheck;
pub mod transport;

pub use field::Fe;
