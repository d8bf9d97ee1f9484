//! Configuration and helpers shared by both evolutionary stages.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PlacementError, Result};

/// Evolutionary search parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EaConfig {
    /// Offspring generated per generation.
    pub population_size: usize,
    /// Individuals kept as parents each generation.
    pub survivor_count: usize,
    /// Required number of covering beacons per flight point.
    pub k_target: usize,
    /// Minimum k-coverage fraction an output placement must reach.
    pub coverage_threshold: f64,
    /// Upper bound on average GDOP for the refined placement.
    pub gdop_threshold: f64,
    pub seed: u64,
    /// Generation budget per coverage stage (and for refinement).
    pub max_generations: usize,
    /// Probability that a refinement offspring gets a positional mutation.
    pub mutation_rate: f64,
    /// Weight of beam waste against saturated coverage in the growth fitness.
    pub waste_weight: f64,
}

/// Average-GDOP threshold used when full coverage is required.
pub const STRICT_GDOP_THRESHOLD: f64 = 20.0;
/// Average-GDOP threshold used when coverage may be relaxed.
pub const RELAXED_GDOP_THRESHOLD: f64 = 5.0;

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            population_size: 250,
            survivor_count: 5,
            k_target: 4,
            coverage_threshold: 1.0,
            gdop_threshold: STRICT_GDOP_THRESHOLD,
            seed: 0,
            max_generations: 500,
            mutation_rate: 0.1,
            waste_weight: 0.1,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(PlacementError::Validation { what: "EA config", reason });
        if self.population_size == 0 || self.survivor_count == 0 {
            return bad("population and survivor counts must be positive".into());
        }
        if self.survivor_count > self.population_size || !self.population_size.is_multiple_of(self.survivor_count) {
            return bad(format!(
                "survivor count {} must divide population size {}",
                self.survivor_count, self.population_size
            ));
        }
        if self.k_target == 0 {
            return bad("k must be positive".into());
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return bad(format!("coverage threshold {} must lie in (0, 1]", self.coverage_threshold));
        }
        if !(self.gdop_threshold > 0.0) {
            return bad(format!("GDOP threshold {} must be positive", self.gdop_threshold));
        }
        if self.max_generations == 0 {
            return bad("max generations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad(format!("mutation rate {} must lie in [0, 1]", self.mutation_rate));
        }
        if !(self.waste_weight >= 0.0) {
            return bad("waste weight must be nonnegative".into());
        }
        Ok(())
    }
}

/// Independent generator for one offspring slot. Streams are keyed by
/// `(tag, generation, slot)` so evaluation order never changes results.
pub(crate) fn substream(seed: u64, tag: u64, generation: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.rotate_left(17));
    rng.set_stream(generation << 32 | slot);
    rng
}

/// Drops later entries whose sorted site set repeats an earlier one.
pub(crate) fn dedup_by_sites<T>(items: Vec<T>, sites: impl Fn(&T) -> &[usize]) -> Vec<T> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .filter(|it| {
            let mut key = sites(it).to_vec();
            key.sort_unstable();
            seen.insert(key)
        })
        .collect()
}
