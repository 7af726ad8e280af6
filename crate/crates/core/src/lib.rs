//! Cause-effect inference for pairs of scalar variables.

pub mod anm;
pub mod cep;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod gp;
pub mod igci;
pub mod kernel;
pub mod methods;
pub mod mixture;
pub mod optim;
pub mod pair;
pub mod runner;
pub mod simgen;
pub mod stats;
mod table;

pub use error::{Error, Result};
pub use pair::{split_train_test, standardize, Direction, PairSample, ScorePair, SplitMode};
