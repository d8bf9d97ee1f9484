//! Growth followed by refinement, packaged as a placement document.

use std::time::Instant;

use crate::document::{compute_metrics, BeaconRecord, ConfigEcho, PlacementDocument, RunInfo, Timing};
use crate::ea::EaConfig;
use crate::error::Result;
use crate::geometry::{FloorPlan, GridSpec};
use crate::plan_file::SensorSpec;
use crate::problem::PlacementProblem;
use crate::stage1::{run_stage1, Stage1Outcome};
use crate::stage2::{run_stage2, Stage2Outcome};

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub problem: PlacementProblem,
    pub growth: Stage1Outcome,
    pub refinement: Stage2Outcome,
    /// Timing is left unset; callers add it when writing the file.
    pub document: PlacementDocument,
}

pub fn solve(plan: &FloorPlan, sensor: &SensorSpec, grid: GridSpec, config: &EaConfig) -> Result<SolveOutput> {
    let problem = PlacementProblem::build(plan.clone(), sensor.model()?, grid)?;
    solve_problem(problem, sensor, config)
}

pub fn solve_problem(problem: PlacementProblem, sensor: &SensorSpec, config: &EaConfig) -> Result<SolveOutput> {
    let growth = run_stage1(&problem, config)?;
    let seeds: Vec<Vec<usize>> = growth.candidates.iter().map(|c| c.sites.clone()).collect();
    let refinement = run_stage2(&seeds, &problem, config)?;
    let g = problem.geometry.as_ref().expect("built from geometry");
    let placement = refinement.placement(&problem);
    let metrics = compute_metrics(&g.plan, &g.model, &g.grid, &placement, config.k_target)?;
    let mut document = PlacementDocument::new(&g.plan, &placement, metrics, ConfigEcho::new(config, &g.grid, sensor));
    document.run = Some(RunInfo {
        growth_generations: growth.generations,
        refinement_generations: refinement.generations,
        gdop_history: refinement.gdop_history.clone(),
        alternatives: refinement
            .alternatives
            .iter()
            .skip(1)
            .map(|c| {
                problem
                    .placement(&c.sites)
                    .expect("built from geometry")
                    .sites
                    .iter()
                    .map(BeaconRecord::from_site)
                    .collect()
            })
            .collect(),
    });
    Ok(SolveOutput {
        problem,
        growth,
        refinement,
        document,
    })
}

/// Timing block for a run that started at `start`.
pub fn timing_since(start: Instant) -> Timing {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Timing {
        wall_clock_s: start.elapsed().as_secs_f64(),
        timestamp: format!("unix:{now}"),
    }
}
