//! Inner tube volumes of graph-directed sprays.
//!
//! The tube volume is computed two ways: as a residue sum over the complex
//! dimensions (zeros of `det(I - A(s))`) and the integer poles, and exactly,
//! by unrolling the self-similarity relation over weighted paths of the graph.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dimensions;
pub mod error;
pub mod exppoly;
pub mod generator;
pub mod graph;
pub mod oracle;
pub mod quad;
pub mod spectral;
pub mod tube;
pub mod validation;

pub use error::{Error, Result};
