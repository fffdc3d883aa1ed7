//! Context-aware venue recommendation: word-embedding preference models,
//! a 13-feature ranking vector, learning to rank and TREC-style evaluation.

pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod features;
pub mod ltr;
pub mod preference;
pub mod pipeline;
pub mod synthetic;
