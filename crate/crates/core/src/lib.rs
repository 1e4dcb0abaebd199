//! Error-correcting output codes for multiclass reduction, with tools for
//! choosing *which* codeword each class receives.
//!
//! The crate is split by concern:
//!
//! * [`data`] holds datasets, the sparse text reader and synthetic generators.
//! * [`codebook`] holds sign matrices, their generators and structural statistics.
//! * [`wltls`] builds layered coding graphs with exactly `K` source-sink paths
//!   and decodes over them in time linear in the number of edges.
//! * [`metrics`] turns confusion matrices, class means or embeddings into class
//!   distance matrices, and builds class taxonomies.
//! * [`assignment`] scores codeword-to-class assignments and searches for good ones.
//! * [`learners`] provides the binary base learners.
//! * [`engine`] is the reduction itself: label induction, ensemble training,
//!   loss-based decoding and the training-error bound.
//! * [`harness`] runs the assignment studies on top of everything else.

pub mod assignment;
pub mod codebook;
pub mod data;
pub mod engine;
mod error;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod wltls;

pub use error::{Error, Result};
