//! Verification workbench for ternary words with factor complexity `2n+1`
//! and no factor of exponent `5/2` or greater.

pub mod analysis;
pub mod certificate;
pub mod cli;
pub mod error;
pub mod limits;
pub mod search;
pub mod structure;
pub mod word;

pub use analysis::{Rational, RepetitionWitness};
pub use error::{Error, Result};
pub use search::{AvoidanceSpec, SearchOutcome, SearchStatus};
pub use word::{Letter, Morphism, Permutation, Word};
