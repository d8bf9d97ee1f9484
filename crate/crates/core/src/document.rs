//! JSON placement documents and their consistency check.

use serde::{Deserialize, Serialize};

use crate::coverage::BeaconPlacement;
use crate::ea::EaConfig;
use crate::error::{PlacementError, Result};
use crate::gdop::{classify_band, gdop_field, GdopBand, GDOP_CAP};
use crate::geometry::{discretize_domains, BeaconSite, FloorPlan, GridSpec, SensorModel, Surface, Vec3};
use crate::plan_file::SensorSpec;

pub const DOCUMENT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Absolute tolerance when comparing stored and recomputed metrics.
pub const METRIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconRecord {
    pub surface: String,
    pub position: [f64; 3],
    pub normal: [f64; 3],
}

impl BeaconRecord {
    pub fn from_site(site: &BeaconSite) -> Self {
        Self {
            surface: site.surface.name().to_string(),
            position: site.position.into(),
            normal: site.normal.into(),
        }
    }

    pub fn to_site(&self) -> Result<BeaconSite> {
        let surface = Surface::from_name(&self.surface)
            .ok_or_else(|| PlacementError::Parse(format!("unknown surface {:?}", self.surface)))?;
        let mut site = BeaconSite::on_surface(surface, Vec3::from(self.position));
        site.normal = Vec3::from(self.normal);
        Ok(site)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub beacon_count: usize,
    /// Fraction of flight points with at least `k` covering beacons, `k = 1, 2, ...`.
    pub per_k_coverage: Vec<f64>,
    /// Mean GDOP over points with at least four covering beacons.
    pub gdop_avg: f64,
    /// Mean GDOP over all points, under-covered points counted at the cap.
    pub gdop_avg_all: f64,
    pub band: GdopBand,
}

/// Computes the document metrics of `placement` from geometry alone.
pub fn compute_metrics(
    plan: &FloorPlan,
    model: &SensorModel,
    grid: &GridSpec,
    placement: &BeaconPlacement,
    k_max: usize,
) -> Result<Metrics> {
    let (drone, _) = discretize_domains(plan, grid)?;
    let field = gdop_field(&drone, placement, plan, model);
    let n = field.covering.len().max(1) as f64;
    let per_k = (1..=k_max)
        .map(|k| field.covering.iter().filter(|&&c| c >= k).count() as f64 / n)
        .collect();
    Ok(Metrics {
        beacon_count: placement.len(),
        per_k_coverage: per_k,
        gdop_avg: field.covered_average,
        gdop_avg_all: field.average,
        band: classify_band(field.covered_average).unwrap_or(GdopBand::Bad),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub seed: u64,
    pub population_size: usize,
    pub survivor_count: usize,
    pub k_target: usize,
    pub coverage_threshold: f64,
    pub gdop_threshold: f64,
    pub max_generations: usize,
    pub mutation_rate: f64,
    pub waste_weight: f64,
    pub drone_res_m: f64,
    pub beacon_res_m: f64,
    pub clearance_m: f64,
    pub sensor: SensorSpec,
}

impl ConfigEcho {
    pub fn new(config: &EaConfig, grid: &GridSpec, sensor: &SensorSpec) -> Self {
        Self {
            seed: config.seed,
            population_size: config.population_size,
            survivor_count: config.survivor_count,
            k_target: config.k_target,
            coverage_threshold: config.coverage_threshold,
            gdop_threshold: config.gdop_threshold,
            max_generations: config.max_generations,
            mutation_rate: config.mutation_rate,
            waste_weight: config.waste_weight,
            drone_res_m: grid.drone_res_m,
            beacon_res_m: grid.beacon_res_m,
            clearance_m: grid.clearance(),
            sensor: *sensor,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            drone_res_m: self.drone_res_m,
            beacon_res_m: self.beacon_res_m,
            clearance_m: Some(self.clearance_m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub growth_generations: usize,
    pub refinement_generations: usize,
    /// Best average GDOP after each refinement generation.
    pub gdop_history: Vec<f64>,
    /// Other placements with the same beacon count, best first.
    pub alternatives: Vec<Vec<BeaconRecord>>,
}

/// Run-dependent fields ignored by determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub wall_clock_s: f64,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub room: [f64; 3],
    pub beacons: Vec<BeaconRecord>,
    pub metrics: Metrics,
    pub config: ConfigEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl PlacementDocument {
    pub fn new(plan: &FloorPlan, placement: &BeaconPlacement, metrics: Metrics, config: ConfigEcho) -> Self {
        Self {
            schema_version: DOCUMENT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            room: [plan.width(), plan.depth(), plan.height()],
            beacons: placement.sites.iter().map(BeaconRecord::from_site).collect(),
            metrics,
            config,
            run: None,
            timing: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| PlacementError::Parse(e.to_string()))?;
        if doc.schema_version != DOCUMENT_SCHEMA_VERSION {
            return Err(PlacementError::Parse(format!(
                "unsupported schema_version {} (expected {DOCUMENT_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    pub fn placement(&self) -> Result<BeaconPlacement> {
        self.beacons
            .iter()
            .map(BeaconRecord::to_site)
            .collect::<Result<Vec<_>>>()
            .map(BeaconPlacement::new)
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        self.config.sensor.model()
    }

    /// Recomputes every derived field against `plan` and reports each check.
    pub fn validate(&self, plan: &FloorPlan) -> ValidationReport {
        let mut report = ValidationReport::default();
        let room = [plan.width(), plan.depth(), plan.height()];
        let room_ok = self.room == room;
        report.push(
            "room_dimensions",
            room_ok,
            format!("document {:?}, plan {:?}", self.room, room),
        );
        if !room_ok {
            return report;
        }
        let placement = match self.placement() {
            Ok(p) => p,
            Err(e) => {
                report.push("beacon_records", false, e.to_string());
                return report;
            }
        };
        match placement.validate(plan) {
            Ok(()) => report.push("beacon_domain", true, format!("{} beacon(s) on legal mounts", placement.len())),
            Err(e) => {
                report.push("beacon_domain", false, e.to_string());
                return report;
            }
        }
        report.push(
            "beacon_count",
            self.metrics.beacon_count == placement.len(),
            format!("stored {}, actual {}", self.metrics.beacon_count, placement.len()),
        );
        let model = match self.sensor_model() {
            Ok(m) => m,
            Err(e) => {
                report.push("sensor_model", false, e.to_string());
                return report;
            }
        };
        let k_max = self.metrics.per_k_coverage.len();
        let m = match compute_metrics(plan, &model, &self.config.grid(), &placement, k_max) {
            Ok(m) => m,
            Err(e) => {
                report.push("drone_domain", false, e.to_string());
                return report;
            }
        };
        for (k, (stored, actual)) in self.metrics.per_k_coverage.iter().zip(&m.per_k_coverage).enumerate() {
            report.push(
                "per_k_coverage",
                close(*stored, *actual),
                format!("k={}: stored {stored}, recomputed {actual}", k + 1),
            );
        }
        report.push(
            "gdop_avg",
            close(self.metrics.gdop_avg, m.gdop_avg),
            format!("stored {}, recomputed {}", self.metrics.gdop_avg, m.gdop_avg),
        );
        report.push(
            "gdop_avg_all",
            close(self.metrics.gdop_avg_all, m.gdop_avg_all),
            format!("stored {}, recomputed {}", self.metrics.gdop_avg_all, m.gdop_avg_all),
        );
        report.push(
            "band",
            self.metrics.band == m.band,
            format!("stored {}, recomputed {}", self.metrics.band, m.band),
        );
        report
    }
}

fn close(a: f64, b: f64) -> bool {
    if a >= GDOP_CAP && b >= GDOP_CAP {
        return true;
    }
    (a - b).abs() <= METRIC_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: &'static str, ok: bool, detail: String) {
        self.checks.push(Check { name, ok, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (FloorPlan, PlacementDocument) {
        let plan = FloorPlan::empty(3.0, 3.0, 4.0).unwrap();
        let grid = GridSpec {
            drone_res_m: 0.5,
            beacon_res_m: 0.5,
            clearance_m: Some(0.5),
        };
        let sites = [(1.25, 1.25), (1.75, 1.25), (1.25, 1.75), (1.75, 1.75)]
            .map(|(x, y)| BeaconSite::on_surface(Surface::Ceiling, Vec3::new(x, y, 4.0)));
        let placement = BeaconPlacement::new(sites.to_vec());
        let sensor = SensorSpec::default();
        let m = compute_metrics(&plan, &sensor.model().unwrap(), &grid, &placement, 4).unwrap();
        let doc = PlacementDocument::new(&plan, &placement, m, ConfigEcho::new(&EaConfig::default(), &grid, &sensor));
        (plan, doc)
    }

    #[test]
    fn round_trip_validates() {
        let (plan, doc) = fixture();
        let back = PlacementDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let r = back.validate(&plan);
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn tampered_gdop_fails_with_recomputed_value() {
        let (plan, mut doc) = fixture();
        let original = doc.metrics.gdop_avg;
        doc.metrics.gdop_avg += 1.0;
        let r = doc.validate(&plan);
        let f: Vec<_> = r.failures().collect();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].name, "gdop_avg");
        assert!(f[0].detail.contains(&original.to_string()));
    }

    #[test]
    fn beacon_outside_domain_fails() {
        let (plan, mut doc) = fixture();
        doc.beacons[0].position = [1.25, 0.0, 1.0];
        doc.beacons[0].surface = "wall-south".into();
        doc.beacons[0].normal = [0.0, 1.0, 0.0];
        let r = doc.validate(&plan);
        assert_eq!(r.failures().next().unwrap().name, "beacon_domain");
    }

    #[test]
    fn wrong_room_fails() {
        let (_, doc) = fixture();
        let other = FloorPlan::empty(5.0, 5.0, 4.0).unwrap();
        assert_eq!(doc.validate(&other).failures().next().unwrap().name, "room_dimensions");
    }

    #[test]
    fn strict_parsing() {
        let (_, doc) = fixture();
        let mut v: serde_json::Value = serde_json::from_str(&doc.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(PlacementDocument::parse(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&doc.to_json()).unwrap();
        v["schema_version"] = serde_json::json!(9);
        assert!(PlacementDocument::parse(&v.to_string()).is_err());
    }
}
