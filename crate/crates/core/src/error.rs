use thiserror::Error;

use crate::coverage::BeaconPlacement;

/// Errors produced by the placement library.
#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("{0} domain is empty at the requested resolution")]
    EmptyDomain(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("target coincides with beacon {index}")]
    CoincidentPoint { index: usize },

    #[error("infeasible: {uncovered} drone point(s) reachable by fewer than {k} candidate sites")]
    Infeasible { uncovered: usize, k: usize },

    #[error("{stage} did not converge within {generations} generations")]
    NonConvergence {
        stage: &'static str,
        generations: usize,
        best: Option<Box<BeaconPlacement>>,
    },

    #[error("instance has {sites} candidate sites, exhaustive limit is {max}")]
    InstanceTooLarge { sites: usize, max: usize },

    #[error("point {point} is covered by {covering} beacon(s), at least 4 are required")]
    InsufficientCoverage { point: usize, covering: usize },
}

pub type Result<T> = std::result::Result<T, PlacementError>;
