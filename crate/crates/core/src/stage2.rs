//! Refinement stage: keep the beacon count fixed and move beacons until the
//! average GDOP drops below the threshold while coverage holds.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coverage::{per_k_fractions, BeaconPlacement};
use crate::ea::{dedup_by_sites, substream, EaConfig};
use crate::error::{PlacementError, Result};
use crate::problem::PlacementProblem;

const CROSSOVER_TAG: u64 = 0x6_0002;

/// Refinement fitness: coverage clipped at the threshold (higher better),
/// then average GDOP over covered points (lower better).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage2Score {
    pub coverage: f64,
    pub gdop_avg: f64,
}

impl Stage2Score {
    /// `Greater` means `self` ranks higher.
    pub fn cmp(&self, other: &Self) -> Ordering {
        self.coverage
            .total_cmp(&other.coverage)
            .then(other.gdop_avg.total_cmp(&self.gdop_avg))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub sites: Vec<usize>,
    pub score: Stage2Score,
    /// Unclipped coverage fractions for `k = 1..=k_target`.
    pub per_k_fractions: Vec<f64>,
    /// Mean GDOP over every point, under-covered points at the cap.
    pub gdop_avg_all: f64,
}

impl Candidate {
    pub fn coverage(&self, k: usize) -> f64 {
        self.per_k_fractions[k - 1]
    }

    pub fn meets(&self, config: &EaConfig) -> bool {
        self.coverage(config.k_target) >= config.coverage_threshold && self.score.gdop_avg <= config.gdop_threshold
    }
}

pub fn stage2_fitness(problem: &PlacementProblem, sites: &[usize], config: &EaConfig) -> Candidate {
    let counts = problem.bc.covering_counts(sites);
    let per_k = per_k_fractions(&counts, config.k_target);
    let field = problem.gdop_field(sites).expect("refinement needs geometry");
    Candidate {
        sites: sites.to_vec(),
        score: Stage2Score {
            coverage: per_k[config.k_target - 1].min(config.coverage_threshold),
            gdop_avg: field.covered_average,
        },
        per_k_fractions: per_k,
        gdop_avg_all: field.average,
    }
}

/// Stable sort by score, best first; ties keep input order.
pub fn rank(mut pool: Vec<Candidate>) -> Vec<Candidate> {
    pool.sort_by(|a, b| b.score.cmp(&a.score));
    pool
}

fn sorted_by_position(problem: &PlacementProblem, sites: &[usize]) -> Vec<usize> {
    let g = problem.geometry.as_ref().expect("refinement needs geometry");
    let mut v = sites.to_vec();
    v.sort_by(|&a, &b| {
        let (pa, pb) = (g.beacons.sites[a].position, g.beacons.sites[b].position);
        pa.x.total_cmp(&pb.x)
            .then(pa.y.total_cmp(&pb.y))
            .then(pa.z.total_cmp(&pb.z))
    });
    v
}

/// Uniform crossover over position-sorted beacon lists. A gene already
/// present in the child is replaced by the other parent's gene, and if that
/// also repeats, by a random free site on the same surface.
pub fn crossover<R: Rng + ?Sized>(problem: &PlacementProblem, a: &[usize], b: &[usize], rng: &mut R) -> Vec<usize> {
    assert_eq!(a.len(), b.len(), "crossover parents must have equal size");
    let a = sorted_by_position(problem, a);
    let b = sorted_by_position(problem, b);
    let mut child: Vec<usize> = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let (first, second) = if rng.random::<bool>() { (a[i], b[i]) } else { (b[i], a[i]) };
        if !child.contains(&first) {
            child.push(first);
        } else if !child.contains(&second) {
            child.push(second);
        } else {
            let surface = problem.surfaces[first];
            let free: Vec<usize> = (0..problem.n_sites())
                .filter(|&s| problem.surfaces[s] == surface && !child.contains(&s) && !a.contains(&s) && !b.contains(&s))
                .collect();
            let pick = free
                .choose(rng)
                .copied()
                .or_else(|| (0..problem.n_sites()).find(|s| !child.contains(s)))
                .expect("more candidate sites than beacons");
            child.push(pick);
        }
    }
    child
}

/// Moves one random beacon by a Gaussian step of one lattice cell on its
/// surface, clamped to the surface. Returns the input unchanged if no free
/// neighbour is found.
pub fn mutate<R: Rng + ?Sized>(problem: &PlacementProblem, sites: &[usize], rng: &mut R) -> Vec<usize> {
    let g = problem.geometry.as_ref().expect("refinement needs geometry");
    let mut out = sites.to_vec();
    if out.is_empty() {
        return out;
    }
    let slot = rng.random_range(0..out.len());
    let site = out[slot];
    let surface = g.beacons.sites[site].surface;
    let lattice = g.beacons.lattice(surface);
    let (iu, iv) = g.beacons.cells[site];
    for _ in 0..8 {
        let du: f64 = StandardNormal.sample(rng);
        let dv: f64 = StandardNormal.sample(rng);
        let nu = (iu as f64 + du).round().clamp(0.0, (lattice.u.len() - 1) as f64) as usize;
        let nv = (iv as f64 + dv).round().clamp(0.0, (lattice.v.len() - 1) as f64) as usize;
        if let Some(next) = g.beacons.site_at(surface, nu, nv) {
            if next != site && !out.contains(&next) {
                out[slot] = next;
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Stage2Outcome {
    pub best: Candidate,
    /// Final survivors, best first (the first equals `best`).
    pub alternatives: Vec<Candidate>,
    pub generations: usize,
    /// Best average GDOP after each generation, starting with the input.
    pub gdop_history: Vec<f64>,
}

impl Stage2Outcome {
    pub fn placement(&self, problem: &PlacementProblem) -> BeaconPlacement {
        problem.placement(&self.best.sites).expect("refinement needs geometry")
    }
}

/// Evolves equal-size candidates until one satisfies both the coverage
/// threshold and the GDOP threshold.
pub fn run_stage2(candidates: &[Vec<usize>], problem: &PlacementProblem, config: &EaConfig) -> Result<Stage2Outcome> {
    config.validate()?;
    if problem.geometry.is_none() {
        return Err(PlacementError::Validation {
            what: "refinement input",
            reason: "problem has no geometry".into(),
        });
    }
    let n = match candidates.first() {
        Some(c) => c.len(),
        None => {
            return Err(PlacementError::Validation {
                what: "refinement input",
                reason: "no candidates".into(),
            })
        }
    };
    if candidates.iter().any(|c| c.len() != n) {
        return Err(PlacementError::Validation {
            what: "refinement input",
            reason: "candidates differ in beacon count".into(),
        });
    }
    let c = config.survivor_count;
    let pool: Vec<Candidate> = candidates
        .par_iter()
        .map(|s| stage2_fitness(problem, s, config))
        .collect();
    let mut population = rank(dedup_by_sites(pool, |c| &c.sites));
    population.truncate(c);
    let mut history = vec![population[0].score.gdop_avg];
    let mut generation = 0usize;

    while !population[0].meets(config) {
        if generation == config.max_generations {
            return Err(PlacementError::NonConvergence {
                stage: "GDOP refinement",
                generations: generation,
                best: problem.placement(&population[0].sites).map(Box::new),
            });
        }
        generation += 1;
        let pairs = population.len().saturating_sub(1).max(1);
        let parents = &population;
        let children: Vec<Candidate> = (0..config.population_size)
            .into_par_iter()
            .map(|slot| {
                let mut rng = substream(config.seed, CROSSOVER_TAG, generation as u64, slot as u64);
                let j = slot % pairs;
                let a = &parents[j].sites;
                let b = &parents[(j + 1).min(parents.len() - 1)].sites;
                let mut child = crossover(problem, a, b, &mut rng);
                if rng.random::<f64>() < config.mutation_rate {
                    child = mutate(problem, &child, &mut rng);
                }
                stage2_fitness(problem, &child, config)
            })
            .collect();
        let mut pool = population.clone();
        pool.extend(children);
        population = rank(dedup_by_sites(pool, |c| &c.sites));
        population.truncate(c);
        history.push(population[0].score.gdop_avg);
    }

    Ok(Stage2Outcome {
        best: population[0].clone(),
        alternatives: population,
        generations: generation,
        gdop_history: history,
    })
}
