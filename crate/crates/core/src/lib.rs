//! Ultrasonic beacon placement for indoor drone localization.
//!
//! The library finds the smallest set of ceiling/wall beacon sites giving
//! every point of a drone flight volume line-of-sight coverage from at least
//! four beacons, then moves those beacons to lower the average geometric
//! dilution of precision (GDOP). Trilateration, exhaustive and LP-based
//! oracles and a Monte-Carlo localization simulator are included to check
//! the results.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait)]

pub mod coverage;
pub mod document;
pub mod ea;
pub mod error;
pub mod gdop;
pub mod geometry;
pub mod localization;
pub mod oracle;
pub mod pipeline;
pub mod plan_file;
pub mod problem;
pub mod sim;
pub mod stage1;
pub mod stage2;

pub use error::{PlacementError, Result};
