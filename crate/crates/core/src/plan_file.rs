//! TOML floor-plan files.
//!
//! ```toml
//! schema_version = 1
//! name = "office"            # optional
//!
//! [room]
//! width = 4.0
//! depth = 4.0
//! height = 4.0
//!
//! [[obstacles]]              # zero or more
//! min = [1.0, 1.0, 0.0]
//! max = [2.0, 2.0, 1.0]
//!
//! [sensor]                   # optional, every field optional
//! range_m = 3.0
//! cone_half_angle_deg = 75.9
//! array_tilt_deg = 0.0
//! array_ring_count = 0
//! array_azimuth_offset_deg = 0.0
//!
//! [resolution]               # optional, every field optional
//! drone_m = 0.25
//! beacon_m = 0.25
//! clearance_m = 0.5
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PlacementError, Result};
use crate::geometry::{
    Aabb, FloorPlan, GridSpec, SensorModel, Vec3, DEFAULT_AZIMUTH_OFFSET_DEG, DEFAULT_HALF_ANGLE_DEG, DEFAULT_RANGE_M,
    DEFAULT_RING_COUNT, DEFAULT_TILT_DEG,
};

pub const PLAN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Ring-array beam parameters; see [`SensorModel::ring_array`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub range_m: f64,
    pub cone_half_angle_deg: f64,
    pub array_tilt_deg: f64,
    pub array_ring_count: usize,
    pub array_azimuth_offset_deg: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            range_m: DEFAULT_RANGE_M,
            cone_half_angle_deg: DEFAULT_HALF_ANGLE_DEG,
            array_tilt_deg: DEFAULT_TILT_DEG,
            array_ring_count: DEFAULT_RING_COUNT,
            array_azimuth_offset_deg: DEFAULT_AZIMUTH_OFFSET_DEG,
        }
    }
}

impl SensorSpec {
    pub fn model(&self) -> Result<SensorModel> {
        SensorModel::ring_array(
            self.range_m,
            self.cone_half_angle_deg,
            self.array_tilt_deg,
            self.array_ring_count,
            self.array_azimuth_offset_deg,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSpec {
    pub drone_m: Option<f64>,
    pub beacon_m: Option<f64>,
    pub clearance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub room: RoomSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionSpec>,
}

impl PlanFile {
    pub fn parse(text: &str) -> Result<Self> {
        let plan: PlanFile = toml::from_str(text).map_err(|e| PlacementError::Parse(e.to_string()))?;
        if plan.schema_version != PLAN_SCHEMA_VERSION {
            return Err(PlacementError::Parse(format!(
                "unsupported schema_version {} (expected {PLAN_SCHEMA_VERSION})",
                plan.schema_version
            )));
        }
        plan.floor_plan()?;
        plan.sensor_spec().model()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlacementError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            PlacementError::Parse(msg) => PlacementError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan files always serialize")
    }

    pub fn floor_plan(&self) -> Result<FloorPlan> {
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| Aabb::new(Vec3::from(o.min), Vec3::from(o.max)))
            .collect();
        FloorPlan::new(self.room.width, self.room.depth, self.room.height, obstacles)
    }

    pub fn sensor_spec(&self) -> SensorSpec {
        self.sensor.unwrap_or_default()
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        self.sensor_spec().model()
    }

    /// Resolutions from the file, falling back to library defaults.
    pub fn grid_spec(&self) -> GridSpec {
        let mut g = GridSpec::default();
        if let Some(r) = self.resolution {
            if let Some(v) = r.drone_m {
                g.drone_res_m = v;
            }
            if let Some(v) = r.beacon_m {
                g.beacon_res_m = v;
            }
            if r.clearance_m.is_some() {
                g.clearance_m = r.clearance_m;
            }
        }
        g
    }
}

/// Reads and validates a floor-plan file.
pub fn load_floor_plan(path: &Path) -> Result<FloorPlan> {
    PlanFile::load(path)?.floor_plan()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\n[room]\nwidth = 3.0\ndepth = 3.0\nheight = 4.0\n";

    #[test]
    fn minimal_plan_uses_defaults() {
        let p = PlanFile::parse(MINIMAL).unwrap();
        let plan = p.floor_plan().unwrap();
        assert_eq!((plan.width(), plan.depth(), plan.height()), (3.0, 3.0, 4.0));
        assert!(plan.obstacles().is_empty());
        assert_eq!(p.sensor_model().unwrap(), SensorModel::default());
        assert_eq!(p.grid_spec(), GridSpec::default());
    }

    #[test]
    fn full_plan_round_trips() {
        let text = format!(
            "{MINIMAL}[[obstacles]]\nmin = [1.0, 1.0, 0.0]\nmax = [2.0, 2.0, 1.0]\n\
             [sensor]\nrange_m = 5.0\n[resolution]\ndrone_m = 0.5\nclearance_m = 0.25\n"
        );
        let p = PlanFile::parse(&text).unwrap();
        assert_eq!(p.floor_plan().unwrap().obstacles().len(), 1);
        assert_eq!(p.sensor_model().unwrap().range_m(), 5.0);
        assert_eq!(p.sensor_spec().cone_half_angle_deg, DEFAULT_HALF_ANGLE_DEG);
        let g = p.grid_spec();
        assert_eq!((g.drone_res_m, g.beacon_res_m, g.clearance_m), (0.5, 0.25, Some(0.25)));
        assert_eq!(PlanFile::parse(&p.to_toml()).unwrap(), p);
    }

    #[test]
    fn unknown_fields_are_rejected_with_location() {
        let err = PlanFile::parse(&format!("{MINIMAL}colour = \"red\"\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("colour") && msg.contains("line"), "{msg}");
        assert!(PlanFile::parse("schema_version = 1\n[room]\nwidth = 3.0\ndepth = 3.0\nheight = 4.0\nfloor = 1\n").is_err());
        assert!(PlanFile::parse(&format!("{MINIMAL}[sensor]\nrange = 3.0\n")).is_err());
    }

    #[test]
    fn invalid_contents_are_rejected() {
        assert!(PlanFile::parse(&MINIMAL.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(PlanFile::parse(&MINIMAL.replace("width = 3.0", "width = -3.0")).is_err());
        let outside = format!("{MINIMAL}[[obstacles]]\nmin = [2.0, 2.0, 0.0]\nmax = [4.0, 2.5, 1.0]\n");
        assert!(PlanFile::parse(&outside).is_err());
        assert!(PlanFile::parse(&format!("{MINIMAL}[sensor]\ncone_half_angle_deg = 95.0\n")).is_err());
    }
}
