//! parakb: a query engine for knowledge bases whose data and queries may
//! both be erroneous.
//!
//! The pipeline: parse weighted facts and rules ([`parse`]), expand them to
//! a fixed point with why-provenance and minimal inconsistent subsets
//! ([`grounding`]), answer queries exactly or through a compiler that
//! rewrites and grounds them ([`query`]), match approximately and summarize
//! similar evidence ([`matching`]), and rank every candidate answer by its
//! possible-world probability over a factor graph ([`worlds`]). Brute-force
//! reference implementations for differential testing live in [`oracle`].
//!
//! All numeric code is generic over [`scalar::Scalar`]; the crate root
//! exports `f64` aliases, which the CLI and the corpus tests use.

pub mod config;
pub mod grounding;
pub mod kb;
pub mod matching;
pub mod oracle;
pub mod parse;
pub mod query;
pub mod scalar;
pub mod skolem;
pub mod worlds;

pub use grounding::{GroundedKB, ProvenanceMap, Substitution, SupportSet};
pub use kb::{Atom, Constant, Term};
pub use matching::{HypGraph, SummaryGraph};
pub use query::Candidate;
pub use worlds::World;

/// Scalar type used by the command-line tools and the shipped corpus.
pub type DefaultScalar = f64;

pub type Fact = kb::Fact<DefaultScalar>;
pub type Rule = kb::Rule<DefaultScalar>;
pub type RuleWeight = kb::RuleWeight<DefaultScalar>;
pub type KnowledgeBase = kb::KnowledgeBase<DefaultScalar>;
pub type Query = kb::Query;

pub type EngineConfig = config::EngineConfig<DefaultScalar>;
pub type SimilarityConfig = config::SimilarityConfig<DefaultScalar>;

pub type CompiledQuery = query::CompiledQuery<DefaultScalar>;
pub type Hypothesis = query::Hypothesis<DefaultScalar>;
pub type ScoredSummary = query::ScoredSummary<DefaultScalar>;

pub type Factor = worlds::Factor<DefaultScalar>;
pub type FactorGraph = worlds::FactorGraph<DefaultScalar>;
pub type RankedAnswer = worlds::RankedAnswer<DefaultScalar>;
