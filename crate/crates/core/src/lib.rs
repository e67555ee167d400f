//! Resource-spreading recommenders on bipartite user-object networks.
//!
//! The crate covers the whole experimental pipeline:
//!
//! * [`ingest`] parses interaction files, coarse-grains ratings to unary links
//!   and draws probe splits;
//! * [`graph`] stores the bipartite network;
//! * [`algorithms`] scores objects with GRank, USim, ProbS, HeatS and their
//!   hybrids;
//! * [`metrics`] measures link recovery, precision/recall enhancement,
//!   personalization and surprisal;
//! * [`harness`] runs comparisons, λ sweeps and λ optimization;
//! * [`runner`] ties everything to a serializable [`runner::RunConfig`] and
//!   writes reproducible output directories.

pub mod algorithms;
pub mod error;
pub mod graph;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod runner;

pub use algorithms::{Algorithm, Base, HybridSpec, HybridVariant, ScoreAssignment, Scorer};
pub use error::{Error, Result};
pub use graph::{BipartiteGraph, GraphStats, ObjectId, UserId};
pub use ingest::{Dataset, ProbeSplit, Schema, SplitMethod};
pub use metrics::{AveragingMode, EvalReport};

/// Recommendation list length used unless configured otherwise.
pub const DEFAULT_LIST_LEN: usize = 20;
