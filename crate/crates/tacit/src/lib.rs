//! tacit: surface the implicit evaluative criteria latent in a judged corpus.
//!
//! A judge model is pushed to explain pairwise quality differences by
//! iteratively generating and self-consistently verifying natural-language
//! hypotheses; the resulting posterior hypothesis distribution is contrasted
//! against the judge's data-free prior and against what human reviewers
//! actually wrote.
//!
//! The pipeline stages, each its own module:
//!
//! - [`corpus`]: ingest judged records, venue score statistics, and the
//!   significance-gapped pairwise dataset.
//! - [`judge`]: provider-agnostic judge client with prompt templates,
//!   verdict parsing, retries, rate limiting, and content-addressed caching.
//! - [`search`]: the iterative hypothesis search loop with 3-fold
//!   confidence-weighted voting and position randomization.
//! - [`prior`]: data-free prior elicitation and prior-frequency windows.
//! - [`annotate`]: mapping human review comments onto the hypothesis set.
//! - [`stats`]: OLS, correlations, shift ranks, attention shares, trends.
//! - [`sim`]: synthetic worlds with planted criteria and a scripted judge,
//!   for deterministic end-to-end validation.
//! - [`ingest`]: thin review-platform fetch client and sidecar merging.
//! - [`report`] / [`cli`]: analysis bundles, exports, and the command-line
//!   pipeline.
//!
//! Runnable walkthroughs live in `examples/`; start with
//! `cargo run --example end_to_end_simulation -p tacit`.

pub mod annotate;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod hashing;
pub mod ingest;
pub mod judge;
pub mod prior;
pub mod report;
pub mod search;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
