//! Probabilistic prediction of instant-runoff (IRV) elections.
//!
//! Given independent distributions of vote totals for every ballot ranking,
//! [`engine::win_vector`] computes the probability of every elimination
//! sequence and of every candidate winning. The other modules feed that
//! engine (distribution algebra, ballot ingestion, scenario builders) or
//! check it (exact tabulation and brute-force oracles).

pub mod cli;
pub mod dist;
pub mod domain;
pub mod engine;
pub mod error;
pub mod formats;
pub mod ingest;
pub mod models;
pub mod oracle;
pub mod tabulator;

pub use dist::{BucketDomain, ConvolveStrategy, DiscreteDist, Discretization};
pub use domain::{Candidate, CandidateId, CandidateSet, EliminationOrder, Ranking, Roster};
pub use engine::{ElectionModel, EliminationTree, WinVector};
pub use error::{Error, Result};
pub use tabulator::{TallyMap, TiePolicy};
