//! Monte-Carlo localization: perturb true ranges with Gaussian noise,
//! trilaterate, and compare the RMSE with `σr·GDOP`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::BeaconPlacement;
use crate::error::{PlacementError, Result};
use crate::gdop::gdop_at;
use crate::geometry::{beacon_covers, FloorPlan, SensorModel, Vec3};
use crate::localization::{trilaterate_refined, RangeMeasurement, TrilaterationProblem};

/// Trials per RNG stream; trials are drawn in chunks of this size.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub position: [f64; 3],
    pub per_point_rmse: f64,
    /// `σr · GDOP`.
    pub predicted_sigma: f64,
    pub gdop: f64,
    /// `per_point_rmse / predicted_sigma`.
    pub ratio: f64,
    pub trials: usize,
    pub sigma_r: f64,
    pub covering: usize,
}

/// Simulates one target against an explicit beacon set. `stream` separates
/// the random draws of different targets sharing a seed.
pub fn simulate_point(beacons: &[Vec3], target: &Vec3, sigma_r: f64, trials: usize, seed: u64, stream: u64) -> Result<SimReport> {
    if !(sigma_r >= 0.0) || !sigma_r.is_finite() {
        return Err(PlacementError::Validation {
            what: "simulation",
            reason: format!("sigma_r must be finite and nonnegative, got {sigma_r}"),
        });
    }
    if trials == 0 {
        return Err(PlacementError::Validation {
            what: "simulation",
            reason: "at least one trial is required".into(),
        });
    }
    let gdop = gdop_at(target, beacons)?.value;
    let truth: Vec<f64> = beacons.iter().map(|b| (b - target).norm()).collect();
    let noise = Normal::new(0.0, sigma_r).expect("validated sigma");
    let chunks = trials.div_ceil(CHUNK);
    let sq_err: f64 = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream << 32 | c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut acc = 0.0;
            for _ in 0..n {
                let m = beacons
                    .iter()
                    .zip(&truth)
                    .map(|(b, &d)| RangeMeasurement::new(*b, (d + noise.sample(&mut rng)).max(0.0)))
                    .collect::<Result<Vec<_>>>()?;
                let est = trilaterate_refined(&TrilaterationProblem::new(m)?)?;
                acc += (est - target).norm_squared();
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    let rmse = (sq_err / trials as f64).sqrt();
    let predicted = sigma_r * gdop;
    Ok(SimReport {
        position: [target.x, target.y, target.z],
        per_point_rmse: rmse,
        predicted_sigma: predicted,
        gdop,
        ratio: if predicted > 0.0 { rmse / predicted } else { 0.0 },
        trials,
        sigma_r,
        covering: beacons.len(),
    })
}

/// Simulates every point against the placement beacons that cover it.
pub fn simulate_localization(
    placement: &BeaconPlacement,
    points: &[Vec3],
    sigma_r: f64,
    trials: usize,
    seed: u64,
    plan: &FloorPlan,
    model: &SensorModel,
) -> Result<Vec<SimReport>> {
    points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let covering: Vec<Vec3> = placement
                .sites
                .iter()
                .filter(|s| beacon_covers(model, s, p, plan))
                .map(|s| s.position)
                .collect();
            if covering.len() < 4 {
                return Err(PlacementError::InsufficientCoverage {
                    point: j,
                    covering: covering.len(),
                });
            }
            simulate_point(&covering, p, sigma_r, trials, seed, j as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Vec<Vec3> {
        vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ]
    }

    #[test]
    fn noiseless_trials_recover_the_target() {
        let r = simulate_point(&tetra(), &Vec3::zeros(), 0.0, 50, 1, 0).unwrap();
        assert!(r.per_point_rmse < 1e-12);
        assert_eq!(r.predicted_sigma, 0.0);
    }

    #[test]
    fn tetrahedron_ratio_near_one() {
        let r = simulate_point(&tetra(), &Vec3::zeros(), 0.01, 20_000, 7, 0).unwrap();
        assert!((r.gdop - 1.5).abs() < 1e-9);
        assert!((0.9..1.1).contains(&r.ratio), "ratio {}", r.ratio);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = simulate_point(&tetra(), &Vec3::new(0.1, 0.0, 0.2), 0.01, 3000, 5, 2).unwrap();
        let b = simulate_point(&tetra(), &Vec3::new(0.1, 0.0, 0.2), 0.01, 3000, 5, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(simulate_point(&tetra(), &Vec3::zeros(), -0.1, 10, 0, 0).is_err());
        assert!(simulate_point(&tetra(), &Vec3::zeros(), 0.1, 0, 0, 0).is_err());
    }
}
