//! Sweeps sensor-model parameters and reports placement counts for the
//! bundled room sizes.
//!
//! Usage: calibrate RANGE HALF_ANGLE TILT RING AZ_OFFSET CLEARANCE [SEEDS] [REFINE]

use std::time::Instant;

use beaconplace::ea::EaConfig;
use beaconplace::geometry::{FloorPlan, GridSpec, SensorModel};
use beaconplace::oracle::lower_bound_parts;
use beaconplace::problem::PlacementProblem;
use beaconplace::stage1::run_stage1;
use beaconplace::stage2::run_stage2;

fn main() {
    let a: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let model = SensorModel::ring_array(a[0], a[1], a[2], a[3] as usize, a[4]).unwrap();
    let grid = GridSpec {
        clearance_m: Some(a[5]),
        ..GridSpec::default()
    };
    let seeds = a.get(6).copied().unwrap_or(1.0) as u64;
    let refine = a.get(7).copied().unwrap_or(0.0) > 0.0;
    let mut line = format!("{:?}", &a[..6]);
    for (w, d) in [(3.0, 3.0), (5.0, 5.0)] {
        let plan = FloorPlan::empty(w, d, 4.0).unwrap();
        let problem = PlacementProblem::build(plan, model.clone(), grid).unwrap();
        let lb = match lower_bound_parts(&problem.bc, 4) {
            Ok(lb) => format!("lp={:.2}", lb.lp_value),
            Err(e) => format!("{e}"),
        };
        let t = Instant::now();
        let mut counts = Vec::new();
        for seed in 0..seeds {
            let cfg = EaConfig { seed, ..EaConfig::default() };
            match run_stage1(&problem, &cfg) {
                Ok(out) => {
                    counts.push(out.beacon_count.to_string());
                    if refine {
                        let sites: Vec<Vec<usize>> = out.candidates.iter().map(|c| c.sites.clone()).collect();
                        for (cov, g) in [(1.0, 20.0), (0.96, 5.0)] {
                            let cfg2 = EaConfig { coverage_threshold: cov, gdop_threshold: g, ..cfg.clone() };
                            match run_stage2(&sites, &problem, &cfg2) {
                                Ok(o) => eprintln!(
                                    "  {w}x{d} seed {seed} g{g}: avg={:.2} all={:.2} cov={:.3} gens={}",
                                    o.best.score.gdop_avg,
                                    o.best.gdop_avg_all,
                                    o.best.coverage(4),
                                    o.generations
                                ),
                                Err(e) => eprintln!("  {w}x{d} seed {seed} g{g}: {e}"),
                            }
                        }
                    }
                }
                Err(_) => counts.push("x".into()),
            }
        }
        line += &format!(
            " | {w}x{d} {lb} N=[{}] {:.0}s",
            counts.join(","),
            t.elapsed().as_secs_f64()
        );
    }
    println!("{line}");
}
