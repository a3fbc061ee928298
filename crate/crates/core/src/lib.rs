//! Two-level dynamic rankings for ambiguous queries.
//!
//! ```
//! use dynrank::io::{load_corpus, LoadOptions};
//! use dynrank::{greedy_two_level, GainSpec, GreedyOptions, ShapeParams};
//!
//! let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy.corpus");
//! let cases = load_corpus(path.as_ref(), &LoadOptions::default())?;
//! let spec: GainSpec = "sqrt".parse()?;
//! let shape = ShapeParams::new(5, 2)?;
//! let ranking = greedy_two_level(&cases[0], &spec, &shape, GreedyOptions::default())?;
//! let utility = dynrank::gains::dynamic_utility_expected(&ranking, &cases[0], &spec)?;
//! assert!(utility > 0.0);
//! # Ok::<(), dynrank::Error>(())
//! ```

pub mod baselines;
pub mod cli;
pub mod error;
pub mod features;
pub mod gains;
pub mod greedy;
pub mod io;
pub mod learn;
pub mod ranking;
pub mod synth;
pub mod toy;
pub mod usermodel;

pub use error::{Error, Result};
pub use gains::{ConcaveGain, DiscountSchedule, GainSpec, Objective};
pub use greedy::{greedy_two_level, GreedyOptions};
pub use ranking::{
    Document, DocumentId, IntentDistribution, JudgmentMatrix, QueryCase, Row, ShapeParams,
    TwoLevelRanking,
};
