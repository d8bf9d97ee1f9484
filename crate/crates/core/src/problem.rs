//! A discretized placement instance: domains, sensor model and the
//! precomputed connectivity matrix the solvers index into.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coverage::{build_connectivity, BeaconPlacement, ConnectivityMatrix};
use crate::error::Result;
use crate::gdop::{gdop_at_covered, GdopField};
use crate::geometry::{
    discretize_domains, line_of_sight, BeaconDomain, DroneDomain, FloorPlan, GridSpec, SensorModel, Surface, Vec3,
};

/// Samples drawn inside each beacon's beam to estimate footprint waste.
pub const WASTE_SAMPLES: usize = 200;
const WASTE_SEED: u64 = 0x05EE_D0FB_EAC0;

/// Physical side of a placement instance.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub plan: FloorPlan,
    pub model: SensorModel,
    pub grid: GridSpec,
    pub drone: DroneDomain,
    pub beacons: BeaconDomain,
}

#[derive(Debug, Clone)]
pub struct PlacementProblem {
    pub bc: ConnectivityMatrix,
    /// Mount surface of each candidate site.
    pub surfaces: Vec<Surface>,
    /// Fraction of each site's beam volume falling outside the flight domain.
    pub waste: Vec<f64>,
    /// Absent for purely combinatorial instances built from a matrix.
    pub geometry: Option<Geometry>,
}

impl PlacementProblem {
    pub fn build(plan: FloorPlan, model: SensorModel, grid: GridSpec) -> Result<Self> {
        let (drone, beacons) = discretize_domains(&plan, &grid)?;
        let bc = build_connectivity(&beacons, &drone, &model, &plan);
        let waste = beacons
            .sites
            .par_iter()
            .enumerate()
            .map(|(i, site)| beam_waste(&plan, &model, drone.clearance_m, site, i as u64))
            .collect();
        let surfaces = beacons.sites.iter().map(|s| s.surface).collect();
        Ok(Self {
            bc,
            surfaces,
            waste,
            geometry: Some(Geometry {
                plan,
                model,
                grid,
                drone,
                beacons,
            }),
        })
    }

    /// Combinatorial instance; site `i` is assigned to surface `i mod 5`.
    pub fn from_matrix(bc: ConnectivityMatrix) -> Self {
        let surfaces = (0..bc.n_sites()).map(|i| Surface::ALL[i % Surface::ALL.len()]).collect();
        let waste = vec![0.0; bc.n_sites()];
        Self {
            bc,
            surfaces,
            waste,
            geometry: None,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.bc.n_sites()
    }

    pub fn n_points(&self) -> usize {
        self.bc.n_points()
    }

    /// Site indices per surface, empty surfaces dropped.
    pub fn sites_by_surface(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); Surface::ALL.len()];
        for (i, s) in self.surfaces.iter().enumerate() {
            out[s.index()].push(i);
        }
        out.retain(|v| !v.is_empty());
        out
    }

    pub fn placement(&self, selection: &[usize]) -> Option<BeaconPlacement> {
        self.geometry
            .as_ref()
            .map(|g| BeaconPlacement::from_indices(&g.beacons, selection))
    }

    /// GDOP field for a selection, coverage taken from the connectivity matrix.
    pub fn gdop_field(&self, selection: &[usize]) -> Option<GdopField> {
        let g = self.geometry.as_ref()?;
        let mut per_point = Vec::with_capacity(self.n_points());
        let mut covering = Vec::with_capacity(self.n_points());
        let mut buf: Vec<Vec3> = Vec::with_capacity(selection.len());
        for (j, p) in g.drone.points.iter().enumerate() {
            buf.clear();
            buf.extend(
                selection
                    .iter()
                    .filter(|&&i| self.bc.get(i, j))
                    .map(|&i| g.beacons.sites[i].position),
            );
            per_point.push(gdop_at_covered(p, &buf));
            covering.push(buf.len());
        }
        Some(GdopField::from_results(per_point, covering))
    }
}

/// Monte-Carlo estimate of how much of a site's beam misses the flight domain.
fn beam_waste(plan: &FloorPlan, model: &SensorModel, clearance: f64, site: &crate::geometry::BeaconSite, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(WASTE_SEED);
    rng.set_stream(index);
    let range = model.range_m();
    let mut accepted = 0usize;
    let mut wasted = 0usize;
    let mut attempts = 0usize;
    while accepted < WASTE_SAMPLES && attempts < WASTE_SAMPLES * 1000 {
        attempts += 1;
        let dir = Vec3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let norm = dir.norm();
        if norm < 1e-12 {
            continue;
        }
        let dir = dir / norm;
        if !model.local_in_beam(&site.to_local(&dir)) {
            continue;
        }
        let r = range * rng.random::<f64>().cbrt();
        let p = site.position + dir * r;
        let in_room = plan.room().contains(&p);
        if in_room && (plan.in_obstacle(&p) || !line_of_sight(plan, &site.position, &p)) {
            continue;
        }
        accepted += 1;
        if !(in_room && DroneDomain::region_contains(plan, clearance, &p)) {
            wasted += 1;
        }
    }
    if accepted == 0 {
        1.0
    } else {
        wasted as f64 / accepted as f64
    }
}
