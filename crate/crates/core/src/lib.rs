//! Point sets in Euclidean space whose pairwise distances are separated by
//! at least one, with diameter well below the square of their size.
//!
//! The pipeline: a Singer perfect difference set modulo `m = q^2 + q + 1`
//! labels `q + 1` points on a weighted product of regular `m`-gons; the
//! distance between two points depends only on the cyclic separation of
//! their labels, and every separation occurs exactly once.

pub mod analysis;
pub mod embedding;
pub mod error;
pub mod finite_field;
pub mod format;
pub mod manifest;
pub mod optimizer;
pub mod pipeline;
pub mod profile;
pub mod singer;

pub use error::{Error, Result};
