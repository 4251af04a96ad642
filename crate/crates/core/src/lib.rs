//! Proportional multiwinner voting under ranked preferences.
//!
//! The crate covers proportionality for solid coalitions (PSC), Phragmén's
//! Ordered Rule and its fractional variant, dependent rounding of the
//! fractional outcome into a lottery over PSC committees, candidate
//! monotonicity audits and a randomized apportionment scheme built on top of
//! the same pipeline.
//!
//! All arithmetic is exact: probabilities, eating times and demands are
//! [`Rational`] values backed by arbitrary-precision integers.

pub mod apportionment;
pub mod coalitions;
mod error;
pub mod model;
pub mod monotonicity;
pub mod phragmen;
pub mod rounding;
pub mod stats;

pub use error::{Error, ParseErrorKind, Result};
pub use model::{
    parse_instance, parse_instance_with, serialize_instance, Ballot, Committee, CompletionPolicy,
    FractionalCommittee, Instance, Rational,
};

/// Default upper bound on the number of committees (or search states) an
/// enumeration may visit.
pub const DEFAULT_CAP: u64 = 1_000_000;
