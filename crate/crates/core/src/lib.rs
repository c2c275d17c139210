//! Co-purchase product networks and the mini-categories hidden in them.
//!
//! The pipeline runs: [`ingest`] the catalog and sales log, count
//! co-purchases within a day window ([`cooccur`]), binarize them into a simple
//! [`graph`], prune staples and small components, extract structural
//! [`tiles`] (stars, linear chains, clique-percolation communities), pick an
//! essential subset by greedy [`coverage`], and summarize with [`metrics`].
//! [`synth`] generates data with known structure; [`pipeline`] wires it all
//! together and writes the report.

pub mod config;
pub mod cooccur;
pub mod coverage;
mod error;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod numfmt;
pub mod pipeline;
pub mod synth;
pub mod tiles;

pub use error::{Error, Result, StageContext};
