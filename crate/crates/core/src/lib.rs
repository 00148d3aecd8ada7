//! Predictive web prefetching driven by access-log mining.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`log_ingest`] parses Common/Combined Log Format lines and filters them
//!    down to page views; [`sessionizer`] splits each client's stream on an
//!    inactivity gap.
//! 2. [`roughset`] keeps the sessions that fall in the lower approximation of
//!    a high-dwell target set, and [`markov_miner`] turns them into k-order
//!    Markov rules with exact rational confidences, stored in a
//!    [`rule_repo::RuleRepository`].
//! 3. [`prefetch_agent`] replays requests through a per-group agent that
//!    follows rule sequences and loads its hint list into an LRU cache;
//!    [`metrics`] aggregates the replay into a [`metrics::SimReport`].
//!
//! Counting code is generic over the integer type through [`Count`]; the
//! aliases below fix it to `u64`, which is what the CLI uses.

pub mod config;
pub mod error;
pub mod intern;
pub mod log_ingest;
pub mod markov_miner;
pub mod metrics;
pub mod num;
pub mod prefetch_agent;
pub mod roughset;
pub mod rule_repo;
pub mod sessionizer;
pub mod synth;

pub use error::{Error, Result};
pub use intern::{Interner, PageId};
pub use num::Count;

/// Exact rule confidence over `u64` counts.
pub type Confidence = num_rational::Ratio<u64>;
/// Pattern-count table over `u64` counts.
pub type Counts = markov_miner::SequenceCounts<u64>;
/// Markov rule with `u64` support.
pub type Rule = markov_miner::MarkovRule<u64>;
/// Rule repository over `u64` counts.
pub type Repository = rule_repo::RuleRepository<u64>;
/// Mining parameters over `u64` counts.
pub type MiningParams = markov_miner::MiningParams<u64>;
