//! Growth stage: find the smallest beacon set giving every flight point
//! `k` covering beacons.
//!
//! Each generation every survivor spawns `P / S` offspring by appending one
//! random site, sampled round-robin over the mount surfaces. Offspring and
//! their parents are ranked together and the best `S` survive. Coverage is
//! raised one level at a time, `k = 1, 2, ..., k_target`.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rayon::prelude::*;

use crate::coverage::per_k_fractions;
use crate::ea::{dedup_by_sites, substream, EaConfig};
use crate::error::{PlacementError, Result};
use crate::problem::PlacementProblem;

const GROWTH_TAG: u64 = 0x6_0001;

/// Lexicographic growth fitness; higher is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Score {
    /// Fraction of points with at least `current_k` covering beacons.
    pub k_fraction: f64,
    /// Saturated coverage toward `k_target` less weighted beam waste.
    pub coverage: f64,
    /// Negated average GDOP once the final level is complete, else `-inf`.
    pub neg_gdop: f64,
}

impl Stage1Score {
    pub fn cmp(&self, other: &Self) -> Ordering {
        self.k_fraction
            .total_cmp(&other.k_fraction)
            .then(self.coverage.total_cmp(&other.coverage))
            .then(self.neg_gdop.total_cmp(&other.neg_gdop))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    /// Indices into the problem's candidate sites.
    pub sites: Vec<usize>,
    pub fitness: Stage1Score,
    /// Coverage fraction for `k = 1..=k_target`.
    pub per_k_fractions: Vec<f64>,
}

impl Individual {
    pub fn k_fraction(&self, k: usize) -> f64 {
        self.per_k_fractions[k - 1]
    }
}

/// Scores a site set at coverage level `current_k`.
pub fn stage1_fitness(problem: &PlacementProblem, sites: &[usize], current_k: usize, config: &EaConfig) -> Individual {
    let counts = problem.bc.covering_counts(sites);
    score_counts(problem, sites, &counts, current_k, config)
}

fn score_counts(
    problem: &PlacementProblem,
    sites: &[usize],
    counts: &[u32],
    current_k: usize,
    config: &EaConfig,
) -> Individual {
    let kt = config.k_target;
    let per_k = per_k_fractions(counts, kt.max(current_k));
    let k_fraction = per_k[current_k - 1];
    let n = counts.len().max(1) as f64;
    let saturated = counts.iter().map(|&c| (c as usize).min(kt) as f64).sum::<f64>() / (kt as f64 * n);
    let complete = current_k == kt && k_fraction >= 1.0;
    let (coverage, neg_gdop) = if complete {
        let gdop = problem
            .gdop_field(sites)
            .map_or(0.0, |f| f.covered_average);
        (1.0, -gdop)
    } else {
        let waste = if sites.is_empty() {
            0.0
        } else {
            sites.iter().map(|&i| problem.waste[i]).sum::<f64>() / sites.len() as f64
        };
        (saturated - config.waste_weight * waste, f64::NEG_INFINITY)
    };
    Individual {
        sites: sites.to_vec(),
        fitness: Stage1Score {
            k_fraction,
            coverage,
            neg_gdop,
        },
        per_k_fractions: per_k[..kt].to_vec(),
    }
}

/// The `s` best individuals, best first. Ties go to fewer beacons, then to
/// the earlier entry.
pub fn select_survivors(scored: Vec<Individual>, s: usize) -> Vec<Individual> {
    let mut indexed: Vec<(usize, Individual)> = scored.into_iter().enumerate().collect();
    indexed.sort_by(|(ia, a), (ib, b)| {
        b.fitness
            .cmp(&a.fitness)
            .then(a.sites.len().cmp(&b.sites.len()))
            .then(ia.cmp(ib))
    });
    indexed.into_iter().take(s).map(|(_, ind)| ind).collect()
}

/// Each parent yields `population / parents.len()` children with one extra
/// site. Child `m` of a parent draws from surface `m mod #surfaces`.
pub fn spawn_offspring(
    parents: &[Individual],
    problem: &PlacementProblem,
    population: usize,
    seed: u64,
    generation: u64,
) -> Vec<Vec<usize>> {
    let surfaces = problem.sites_by_surface();
    let per_parent = population / parents.len().max(1);
    (0..parents.len() * per_parent)
        .into_par_iter()
        .map(|slot| {
            let parent = &parents[slot / per_parent];
            let m = slot % per_parent;
            let mut rng = substream(seed, GROWTH_TAG, generation, slot as u64);
            let mut child = parent.sites.clone();
            for attempt in 0..surfaces.len() {
                let pool = &surfaces[(m + attempt) % surfaces.len()];
                let free: Vec<usize> = pool.iter().copied().filter(|i| !parent.sites.contains(i)).collect();
                if let Some(&site) = free.choose(&mut rng) {
                    child.push(site);
                    break;
                }
            }
            child
        })
        .collect()
}

/// Best-of-generation record.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub k: usize,
    pub generation: usize,
    pub best: Stage1Score,
    pub best_beacons: usize,
}

#[derive(Debug, Clone)]
pub struct Stage1Outcome {
    /// Placements with the minimal beacon count found, best first. The first
    /// reaches full `k_target` coverage; the rest reach the coverage threshold.
    pub candidates: Vec<Individual>,
    pub beacon_count: usize,
    pub generations: usize,
    pub history: Vec<GenerationRecord>,
}

fn evaluate_all(
    problem: &PlacementProblem,
    children: Vec<Vec<usize>>,
    k: usize,
    config: &EaConfig,
) -> Vec<Individual> {
    children
        .into_par_iter()
        .map(|sites| stage1_fitness(problem, &sites, k, config))
        .collect()
}

/// Runs the staged growth search.
pub fn run_stage1(problem: &PlacementProblem, config: &EaConfig) -> Result<Stage1Outcome> {
    config.validate()?;
    if problem.n_points() == 0 {
        return Err(PlacementError::EmptyDomain("drone"));
    }
    if problem.n_sites() == 0 {
        return Err(PlacementError::EmptyDomain("beacon"));
    }
    let kt = config.k_target;
    let uncovered = problem.bc.column_sums().iter().filter(|&&c| c < kt).count();
    if uncovered > 0 {
        return Err(PlacementError::Infeasible { uncovered, k: kt });
    }

    let p = config.population_size;
    let s = config.survivor_count;
    let mut generation = 0u64;
    let mut history = Vec::new();

    // Generation zero: P single-beacon individuals.
    let seedling = Individual {
        sites: Vec::new(),
        fitness: stage1_fitness(problem, &[], 1, config).fitness,
        per_k_fractions: vec![0.0; kt],
    };
    let first = spawn_offspring(&vec![seedling; s], problem, p, config.seed, generation);
    let scored = dedup_by_sites(evaluate_all(problem, first, 1, config), |i| &i.sites);
    let mut survivors = select_survivors(scored, s);
    history.push(GenerationRecord {
        k: 1,
        generation: 0,
        best: survivors[0].fitness,
        best_beacons: survivors[0].sites.len(),
    });

    for k in 1..=kt {
        survivors = select_survivors(
            survivors.iter().map(|i| stage1_fitness(problem, &i.sites, k, config)).collect(),
            s,
        );
        let mut stage_generations = 0;
        while survivors[0].k_fraction(k) < 1.0 {
            if stage_generations == config.max_generations {
                return Err(PlacementError::NonConvergence {
                    stage: "coverage growth",
                    generations: stage_generations,
                    best: problem.placement(&survivors[0].sites).map(Box::new),
                });
            }
            generation += 1;
            stage_generations += 1;
            let children = spawn_offspring(&survivors, problem, p, config.seed, generation);
            let mut pool = survivors.clone();
            pool.extend(evaluate_all(problem, children, k, config));
            survivors = select_survivors(dedup_by_sites(pool, |i| &i.sites), s);
            history.push(GenerationRecord {
                k,
                generation: generation as usize,
                best: survivors[0].fitness,
                best_beacons: survivors[0].sites.len(),
            });
        }
    }

    let n = survivors[0].sites.len();
    let candidates: Vec<Individual> = survivors
        .into_iter()
        .enumerate()
        .filter(|(rank, ind)| {
            *rank == 0 || (ind.sites.len() == n && ind.k_fraction(kt) >= config.coverage_threshold)
        })
        .map(|(_, ind)| ind)
        .collect();
    Ok(Stage1Outcome {
        candidates,
        beacon_count: n,
        generations: generation as usize,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::ConnectivityMatrix;

    fn score(k_fraction: f64, coverage: f64, neg_gdop: f64, sites: Vec<usize>) -> Individual {
        Individual {
            sites,
            fitness: Stage1Score {
                k_fraction,
                coverage,
                neg_gdop,
            },
            per_k_fractions: vec![k_fraction; 4],
        }
    }

    #[test]
    fn fraction_dominates() {
        let a = score(0.9, 0.0, f64::NEG_INFINITY, vec![0]);
        let b = score(0.8, 1.0, -1.0, vec![1]);
        let top = select_survivors(vec![b, a.clone()], 1);
        assert_eq!(top[0], a);
    }

    #[test]
    fn waste_breaks_ties() {
        // Two sites covering the same single point; site 1 wastes half its beam.
        let bc = ConnectivityMatrix::from_rows(&[vec![true], vec![true]]);
        let mut problem = PlacementProblem::from_matrix(bc);
        problem.waste = vec![0.0, 0.5];
        let cfg = EaConfig {
            k_target: 2,
            ..EaConfig::default()
        };
        let a = stage1_fitness(&problem, &[0], 1, &cfg);
        let b = stage1_fitness(&problem, &[1], 1, &cfg);
        assert_eq!(a.fitness.k_fraction, b.fitness.k_fraction);
        assert_eq!(a.fitness.cmp(&b.fitness), Ordering::Greater);
    }

    #[test]
    fn gdop_breaks_ties_when_complete() {
        let a = score(1.0, 1.0, -3.0, vec![0, 1, 2, 3]);
        let b = score(1.0, 1.0, -8.0, vec![4, 5, 6, 7]);
        let top = select_survivors(vec![b, a.clone()], 1);
        assert_eq!(top[0], a);
    }

    #[test]
    fn selection_ties() {
        let same: Vec<Individual> = (0..6).map(|i| score(0.5, 0.5, 0.0, vec![i])).collect();
        let top = select_survivors(same.clone(), 3);
        assert_eq!(top, same[..3].to_vec());
        assert_eq!(select_survivors(same.clone(), 6), same);

        let longer = score(0.5, 0.5, 0.0, vec![1, 2]);
        let shorter = score(0.5, 0.5, 0.0, vec![3]);
        assert_eq!(select_survivors(vec![longer, shorter.clone()], 1)[0], shorter);
    }

    #[test]
    fn offspring_shape_and_determinism() {
        let bc = ConnectivityMatrix::from_rows(&vec![vec![true; 3]; 40]);
        let problem = PlacementProblem::from_matrix(bc);
        let parents: Vec<Individual> = (0..5).map(|i| score(0.0, 0.0, 0.0, vec![i, i + 5, i + 10])).collect();
        let kids = spawn_offspring(&parents, &problem, 250, 7, 1);
        assert_eq!(kids.len(), 250);
        for (slot, kid) in kids.iter().enumerate() {
            let parent = &parents[slot / 50];
            assert_eq!(kid.len(), 4);
            assert_eq!(&kid[..3], parent.sites.as_slice());
            assert!(!parent.sites.contains(&kid[3]));
            assert_eq!(problem.surfaces[kid[3]].index(), slot % 50 % 5);
        }
        assert_eq!(kids, spawn_offspring(&parents, &problem, 250, 7, 1));
        assert_ne!(kids, spawn_offspring(&parents, &problem, 250, 8, 1));
    }

    #[test]
    fn infeasible_point_is_reported() {
        let mut rows = vec![vec![true, true]; 5];
        for r in rows.iter_mut().skip(3) {
            r[1] = false;
        }
        let problem = PlacementProblem::from_matrix(ConnectivityMatrix::from_rows(&rows));
        let err = run_stage1(&problem, &EaConfig::default()).unwrap_err();
        assert!(matches!(err, PlacementError::Infeasible { uncovered: 1, k: 4 }));
    }

    #[test]
    fn all_true_needs_k_sites() {
        let problem = PlacementProblem::from_matrix(ConnectivityMatrix::from_rows(&vec![vec![true; 4]; 10]));
        let out = run_stage1(&problem, &EaConfig::default()).unwrap();
        assert_eq!(out.beacon_count, 4);
        assert_eq!(out.candidates[0].k_fraction(4), 1.0);
    }
}
