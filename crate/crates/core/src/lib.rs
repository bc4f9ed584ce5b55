//! Sparse recovery from linear sketches.
//!
//! The pipeline: signed expander sketches with median estimation form weak
//! layers; a recursion tree of shrinking domains glued by list-recoverable
//! codes identifies heavy hitters in sublinear time; weak layers are stacked
//! into a top-level system. A dense-algebra verifier covers the reflection
//! lower-bound construction.

pub mod codes;
pub mod error;
pub mod expander;
pub mod field;
pub mod harness;
pub mod hash;
pub mod lowerbound;
pub mod recursive;
pub mod seed;
pub mod sparse;
pub mod toplevel;
pub mod weak;

pub use error::{Error, Result};
pub use seed::SeedTree;
pub use sparse::SparseVector;
