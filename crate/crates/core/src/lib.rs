//! Desk-scale laboratory for pathwise stochastic calculus and superhedging
//! on prediction sets.
//!
//! The crate has three layers:
//!
//! * pathwise objects on discretized continuous paths — threshold-crossing
//!   partitions, discrete iterated integrals, a pathwise quadratic variation,
//!   and simple-strategy integrals ([`paths`], [`calculus`]);
//! * declarative prediction sets with tolerance-annotated membership checks
//!   and the coercive growth-function construction ([`prediction`]);
//! * finite scenario trees carrying martingale transition measures, the dual
//!   valuation sup over measures, and the primal superhedging linear program
//!   ([`tree`], [`dual`], [`primal`]).
//!
//! Everything is deterministic: samplers take explicit seeds and all
//! reductions run in fixed order.

pub mod calculus;
pub mod dual;
pub mod error;
pub mod paths;
pub mod prediction;
pub mod primal;
pub mod sim;
pub mod tree;

pub use error::{Error, Result};
pub use paths::{lift, DiscretePath, HolderEstimate, LiftedPath, TimeGrid};
