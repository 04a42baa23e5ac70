//! Tandem-duplication distance between binary sequences and their
//! square-free roots.
//!
//! Every binary sequence deduplicates to a unique root in
//! {0, 1, 01, 10, 010, 101}. This crate computes the exact distance f(s)
//! (minimum duplications from the root), worst-case tables f(n) and
//! root-restricted variants, partial distances f(n, m), the approximate
//! distance f_beta where each copy may corrupt a beta-fraction of symbols,
//! constructive beta-repeat finding for beta > 1/2, sequence families with
//! known distance behavior (de Bruijn, Thue-Morse, Fibonacci, binary
//! D0L-systems), and numeric evaluation of the distance bounds.
//!
//! All sequence values are immutable and all operations are pure functions;
//! everything can be shared freely across threads. Table construction
//! parallelizes internally and is deterministic for any worker count.

pub mod approx;
pub mod bounds;
mod error;
pub mod exact;
pub mod generators;
pub mod seq;

pub use error::{Error, Result};
pub use seq::{
    apply_dedup, apply_dup, is_normal, validate_steps, Beta, BinarySeq, DedupProcess, DedupStep,
    KeepSide, Root, TandemRepeat,
};
