//! Floor plans, flight/mount domains, line of sight and the single-beacon
//! coverage predicate.
//!
//! Coordinates are meters in a room frame with the floor at `z = 0` and the
//! room occupying `[0, width] x [0, depth] x [0, height]`.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{PlacementError, Result};

pub type Vec3 = Vector3<f64>;

const EPS: f64 = 1e-9;

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] - EPS && other.max[a] <= self.max[a] + EPS)
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb::new(self.min - m, self.max + m)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Slab test for the open segment `(p, q)`. Touching a face, edge or
    /// corner counts as a hit.
    pub fn blocks_segment(&self, p: &Vec3, q: &Vec3) -> bool {
        let d = q - p;
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for a in 0..3 {
            if d[a].abs() < 1e-15 {
                if p[a] < self.min[a] || p[a] > self.max[a] {
                    return false;
                }
            } else {
                let inv = 1.0 / d[a];
                let mut t0 = (self.min[a] - p[a]) * inv;
                let mut t1 = (self.max[a] - p[a]) * inv;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_enter = t_enter.max(t0);
                t_exit = t_exit.min(t1);
                if t_enter > t_exit {
                    return false;
                }
            }
        }
        t_enter < 1.0 && t_exit > 0.0
    }
}

/// Room bounding box plus opaque box obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    room: Aabb,
    obstacles: Vec<Aabb>,
}

impl FloorPlan {
    pub fn new(width: f64, depth: f64, height: f64, obstacles: Vec<Aabb>) -> Result<Self> {
        for (name, v) in [("width", width), ("depth", depth), ("height", height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlacementError::Validation {
                    what: "room",
                    reason: format!("{name} must be positive, got {v}"),
                });
            }
        }
        let room = Aabb::new(Vec3::zeros(), Vec3::new(width, depth, height));
        for (i, ob) in obstacles.iter().enumerate() {
            if (0..3).any(|a| !(ob.min[a] < ob.max[a])) {
                return Err(PlacementError::Validation {
                    what: "obstacle",
                    reason: format!("obstacle {i} has min corner not below max corner"),
                });
            }
            if !room.contains_box(ob) {
                return Err(PlacementError::Validation {
                    what: "obstacle",
                    reason: format!("obstacle {i} extends outside the room"),
                });
            }
        }
        Ok(Self { room, obstacles })
    }

    /// Empty room.
    pub fn empty(width: f64, depth: f64, height: f64) -> Result<Self> {
        Self::new(width, depth, height, Vec::new())
    }

    pub fn room(&self) -> &Aabb {
        &self.room
    }

    pub fn obstacles(&self) -> &[Aabb] {
        &self.obstacles
    }

    pub fn width(&self) -> f64 {
        self.room.max.x
    }

    pub fn depth(&self) -> f64 {
        self.room.max.y
    }

    pub fn height(&self) -> f64 {
        self.room.max.z
    }

    pub fn in_obstacle(&self, p: &Vec3) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn smallest_dimension(&self) -> f64 {
        self.width().min(self.depth()).min(self.height())
    }
}

/// True iff the open segment `(p, q)` misses every obstacle.
pub fn line_of_sight(plan: &FloorPlan, p: &Vec3, q: &Vec3) -> bool {
    !plan.obstacles.iter().any(|o| o.blocks_segment(p, q))
}

/// Mountable room surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Surface {
    Ceiling,
    /// Wall at `y = 0`.
    WallSouth,
    /// Wall at `x = width`.
    WallEast,
    /// Wall at `y = depth`.
    WallNorth,
    /// Wall at `x = 0`.
    WallWest,
}

impl Surface {
    pub const ALL: [Surface; 5] = [
        Surface::Ceiling,
        Surface::WallSouth,
        Surface::WallEast,
        Surface::WallNorth,
        Surface::WallWest,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Surface::Ceiling => "ceiling",
            Surface::WallSouth => "wall-south",
            Surface::WallEast => "wall-east",
            Surface::WallNorth => "wall-north",
            Surface::WallWest => "wall-west",
        }
    }

    pub fn from_name(name: &str) -> Option<Surface> {
        Surface::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Inward unit normal.
    pub fn normal(self) -> Vec3 {
        match self {
            Surface::Ceiling => Vec3::new(0.0, 0.0, -1.0),
            Surface::WallSouth => Vec3::new(0.0, 1.0, 0.0),
            Surface::WallEast => Vec3::new(-1.0, 0.0, 0.0),
            Surface::WallNorth => Vec3::new(0.0, -1.0, 0.0),
            Surface::WallWest => Vec3::new(1.0, 0.0, 0.0),
        }
    }

    /// Azimuth reference for the sensor array. Walls use `up x normal`, so a
    /// rotation about the vertical axis carries one wall's frame onto the next.
    pub fn tangent(self) -> Vec3 {
        match self {
            Surface::Ceiling => Vec3::x(),
            s => Vec3::z().cross(&s.normal()),
        }
    }

    /// Maps in-surface coordinates `(u, v)` to a room position. `u` runs
    /// along the surface's horizontal axis, `v` is `y` on the ceiling and `z`
    /// on walls.
    pub fn position(self, plan: &FloorPlan, u: f64, v: f64) -> Vec3 {
        match self {
            Surface::Ceiling => Vec3::new(u, v, plan.height()),
            Surface::WallSouth => Vec3::new(u, 0.0, v),
            Surface::WallEast => Vec3::new(plan.width(), u, v),
            Surface::WallNorth => Vec3::new(u, plan.depth(), v),
            Surface::WallWest => Vec3::new(0.0, u, v),
        }
    }

    pub fn coords(self, p: &Vec3) -> (f64, f64) {
        match self {
            Surface::Ceiling => (p.x, p.y),
            Surface::WallSouth | Surface::WallNorth => (p.x, p.z),
            Surface::WallEast | Surface::WallWest => (p.y, p.z),
        }
    }

    /// Which surface (if any) a point lies on, checked in `ALL` order.
    pub fn containing(plan: &FloorPlan, p: &Vec3) -> Option<Surface> {
        let tol = 1e-9;
        let half = plan.height() / 2.0;
        let inside = |v: f64, hi: f64| v >= -tol && v <= hi + tol;
        let wall_z = p.z >= half - tol && p.z <= plan.height() + tol;
        if (p.z - plan.height()).abs() <= tol && inside(p.x, plan.width()) && inside(p.y, plan.depth()) {
            return Some(Surface::Ceiling);
        }
        if !wall_z {
            return None;
        }
        if p.y.abs() <= tol && inside(p.x, plan.width()) {
            Some(Surface::WallSouth)
        } else if (p.x - plan.width()).abs() <= tol && inside(p.y, plan.depth()) {
            Some(Surface::WallEast)
        } else if (p.y - plan.depth()).abs() <= tol && inside(p.x, plan.width()) {
            Some(Surface::WallNorth)
        } else if p.x.abs() <= tol && inside(p.y, plan.depth()) {
            Some(Surface::WallWest)
        } else {
            None
        }
    }
}

/// A mounting position with its orientation frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconSite {
    pub position: Vec3,
    /// Inward unit normal of the mount surface; the array's forward axis.
    pub normal: Vec3,
    /// Unit vector orthogonal to `normal` fixing the array's azimuth zero.
    pub tangent: Vec3,
    pub surface: Surface,
}

impl BeaconSite {
    pub fn on_surface(surface: Surface, position: Vec3) -> Self {
        Self {
            position,
            normal: surface.normal(),
            tangent: surface.tangent(),
            surface,
        }
    }

    /// Expresses a world direction in the site's local frame (x = tangent,
    /// y = normal x tangent, z = normal).
    pub fn to_local(&self, dir: &Vec3) -> Vec3 {
        let bitangent = self.normal.cross(&self.tangent);
        Vec3::new(dir.dot(&self.tangent), dir.dot(&bitangent), dir.dot(&self.normal))
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        let bitangent = self.normal.cross(&self.tangent);
        self.tangent * local.x + bitangent * local.y + self.normal * local.z
    }
}

/// Beam model of one beacon (a multi-sensor array).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    range_m: f64,
    cone_half_angle_deg: f64,
    cos_half_angle: f64,
    /// Sensor axes in the site's local frame (z = mount normal).
    array_directions: Vec<Vec3>,
}

/// Calibrated array defaults. See the README for how they were chosen.
pub const DEFAULT_RANGE_M: f64 = 3.0;
pub const DEFAULT_HALF_ANGLE_DEG: f64 = 75.9;
pub const DEFAULT_TILT_DEG: f64 = 0.0;
pub const DEFAULT_RING_COUNT: usize = 0;
pub const DEFAULT_AZIMUTH_OFFSET_DEG: f64 = 0.0;

impl SensorModel {
    pub fn new(range_m: f64, cone_half_angle_deg: f64, array_directions: Vec<Vec3>) -> Result<Self> {
        if !(range_m.is_finite() && range_m > 0.0) {
            return Err(PlacementError::Validation {
                what: "sensor model",
                reason: format!("range must be positive, got {range_m}"),
            });
        }
        if !(cone_half_angle_deg > 0.0 && cone_half_angle_deg < 90.0) {
            return Err(PlacementError::Validation {
                what: "sensor model",
                reason: format!("cone half-angle must lie in (0, 90) degrees, got {cone_half_angle_deg}"),
            });
        }
        if array_directions.is_empty() {
            return Err(PlacementError::Validation {
                what: "sensor model",
                reason: "array needs at least one direction".into(),
            });
        }
        if let Some(d) = array_directions.iter().find(|d| (d.norm() - 1.0).abs() > 1e-9) {
            return Err(PlacementError::Validation {
                what: "sensor model",
                reason: format!("array direction {d:?} is not unit length"),
            });
        }
        Ok(Self {
            range_m,
            cone_half_angle_deg,
            cos_half_angle: cone_half_angle_deg.to_radians().cos(),
            array_directions,
        })
    }

    /// A forward sensor on the mount normal plus `ring_count` sensors tilted
    /// `tilt_deg` away from it, evenly spaced in azimuth starting at
    /// `azimuth_offset_deg`.
    pub fn ring_array(
        range_m: f64,
        cone_half_angle_deg: f64,
        tilt_deg: f64,
        ring_count: usize,
        azimuth_offset_deg: f64,
    ) -> Result<Self> {
        if !(0.0..=90.0).contains(&tilt_deg) {
            return Err(PlacementError::Validation {
                what: "sensor model",
                reason: format!("array tilt must lie in [0, 90] degrees, got {tilt_deg}"),
            });
        }
        let mut dirs = vec![Vec3::z()];
        let tilt = tilt_deg.to_radians();
        for j in 0..ring_count {
            let az = azimuth_offset_deg.to_radians() + std::f64::consts::TAU * j as f64 / ring_count as f64;
            dirs.push(Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos()).normalize());
        }
        Self::new(range_m, cone_half_angle_deg, dirs)
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    pub fn cone_half_angle_deg(&self) -> f64 {
        self.cone_half_angle_deg
    }

    pub fn array_directions(&self) -> &[Vec3] {
        &self.array_directions
    }

    pub fn with_range(&self, range_m: f64) -> Result<Self> {
        Self::new(range_m, self.cone_half_angle_deg, self.array_directions.clone())
    }

    /// Range and beam test only (no line of sight).
    pub fn in_beam(&self, site: &BeaconSite, point: &Vec3) -> bool {
        let d = point - site.position;
        let dist = d.norm();
        if dist <= EPS || dist > self.range_m {
            return false;
        }
        let local = site.to_local(&(d / dist));
        self.local_in_beam(&local)
    }

    /// Whether a local-frame unit direction falls inside some sensor cone.
    pub fn local_in_beam(&self, local_dir: &Vec3) -> bool {
        self.array_directions
            .iter()
            .any(|a| a.dot(local_dir) >= self.cos_half_angle - 1e-12)
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        Self::ring_array(
            DEFAULT_RANGE_M,
            DEFAULT_HALF_ANGLE_DEG,
            DEFAULT_TILT_DEG,
            DEFAULT_RING_COUNT,
            DEFAULT_AZIMUTH_OFFSET_DEG,
        )
        .expect("default sensor model is valid")
    }
}

/// Whether a beacon at `site` reaches `point`: in range, inside a sensor
/// cone and with a clear line of sight.
pub fn beacon_covers(model: &SensorModel, site: &BeaconSite, point: &Vec3, plan: &FloorPlan) -> bool {
    model.in_beam(site, point) && line_of_sight(plan, &site.position, point)
}

/// Discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub drone_res_m: f64,
    pub beacon_res_m: f64,
    /// Minimum distance between flight points and walls, ceiling and
    /// obstacles. `None` means half a drone cell.
    pub clearance_m: Option<f64>,
}

pub const DEFAULT_RESOLUTION_M: f64 = 0.25;
pub const DEFAULT_CLEARANCE_M: f64 = 0.5;

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            drone_res_m: DEFAULT_RESOLUTION_M,
            beacon_res_m: DEFAULT_RESOLUTION_M,
            clearance_m: Some(DEFAULT_CLEARANCE_M),
        }
    }
}

impl GridSpec {
    pub fn clearance(&self) -> f64 {
        self.clearance_m.unwrap_or(self.drone_res_m / 2.0)
    }
}

/// Discretized flight volume.
#[derive(Debug, Clone, PartialEq)]
pub struct DroneDomain {
    pub points: Vec<Vec3>,
    pub resolution_m: f64,
    pub clearance_m: f64,
}

impl DroneDomain {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether `p` lies in the continuous flight region this domain samples.
    pub fn region_contains(plan: &FloorPlan, clearance: f64, p: &Vec3) -> bool {
        let c = clearance;
        let tol = 1e-9;
        p.x >= c - tol
            && p.x <= plan.width() - c + tol
            && p.y >= c - tol
            && p.y <= plan.depth() - c + tol
            && p.z >= plan.height() / 2.0 - tol
            && p.z <= plan.height() - c + tol
            && !plan.obstacles().iter().any(|o| o.inflate(c).contains(p))
    }
}

/// Regular lattice on one mount surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceLattice {
    pub surface: Surface,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Discretized candidate beacon sites.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconDomain {
    pub sites: Vec<BeaconSite>,
    pub resolution_m: f64,
    /// Lattice cell `(iu, iv)` of each site.
    pub cells: Vec<(usize, usize)>,
    pub lattices: Vec<SurfaceLattice>,
    lookup: HashMap<(Surface, usize, usize), usize>,
}

impl BeaconDomain {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site_at(&self, surface: Surface, iu: usize, iv: usize) -> Option<usize> {
        self.lookup.get(&(surface, iu, iv)).copied()
    }

    pub fn lattice(&self, surface: Surface) -> &SurfaceLattice {
        &self.lattices[surface.index()]
    }

    /// Site indices grouped by surface in `Surface::ALL` order.
    pub fn by_surface(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); Surface::ALL.len()];
        for (i, s) in self.sites.iter().enumerate() {
            out[s.surface.index()].push(i);
        }
        out
    }

    /// Nearest lattice site to `p` (exact match first, else nearest by distance).
    pub fn nearest_site(&self, p: &Vec3) -> Option<usize> {
        self.sites
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.position - p)
                    .norm_squared()
                    .total_cmp(&(b.1.position - p).norm_squared())
            })
            .map(|(i, _)| i)
    }
}

/// Lattice of `res`-spaced values covering `[lo, hi]`, centered in the interval.
pub fn centered_lattice(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    if hi < lo - EPS {
        return Vec::new();
    }
    let span = (hi - lo).max(0.0);
    let n = (span / res + 1e-9).floor() as usize + 1;
    let start = lo + (span - (n - 1) as f64 * res) / 2.0;
    (0..n).map(|i| start + i as f64 * res).collect()
}

/// Samples the flight domain (upper half of the room, kept `clearance`
/// away from surfaces) and the mount domain (ceiling plus upper-half walls).
pub fn discretize_domains(plan: &FloorPlan, spec: &GridSpec) -> Result<(DroneDomain, BeaconDomain)> {
    let smallest = plan.smallest_dimension();
    for (name, r) in [("drone", spec.drone_res_m), ("beacon", spec.beacon_res_m)] {
        if !(r > 0.0 && r <= smallest + EPS) {
            return Err(PlacementError::Validation {
                what: "resolution",
                reason: format!("{name} resolution {r} must lie in (0, {smallest}]"),
            });
        }
    }
    let c = spec.clearance();
    if !(c >= 0.0) {
        return Err(PlacementError::Validation {
            what: "clearance",
            reason: format!("clearance must be nonnegative, got {c}"),
        });
    }

    let (w, d, h) = (plan.width(), plan.depth(), plan.height());
    let dr = spec.drone_res_m;
    let xs = centered_lattice(c, w - c, dr);
    let ys = centered_lattice(c, d - c, dr);
    let zs = centered_lattice(h / 2.0, h - c, dr);
    let mut points = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                let p = Vec3::new(x, y, z);
                if !plan.obstacles().iter().any(|o| o.inflate(c).contains(&p)) {
                    points.push(p);
                }
            }
        }
    }
    if points.is_empty() {
        return Err(PlacementError::EmptyDomain("drone"));
    }
    let drone = DroneDomain {
        points,
        resolution_m: dr,
        clearance_m: c,
    };

    let br = spec.beacon_res_m;
    let along_x = centered_lattice(br / 2.0, w - br / 2.0, br);
    let along_y = centered_lattice(br / 2.0, d - br / 2.0, br);
    let wall_z = centered_lattice(h / 2.0 + br / 2.0, h - br / 2.0, br);
    let mut sites = Vec::new();
    let mut cells = Vec::new();
    let mut lookup = HashMap::new();
    let mut lattices = Vec::new();
    for surface in Surface::ALL {
        let (u, v) = match surface {
            Surface::Ceiling => (along_x.clone(), along_y.clone()),
            Surface::WallSouth | Surface::WallNorth => (along_x.clone(), wall_z.clone()),
            Surface::WallEast | Surface::WallWest => (along_y.clone(), wall_z.clone()),
        };
        for (iv, &vv) in v.iter().enumerate() {
            for (iu, &uu) in u.iter().enumerate() {
                let pos = surface.position(plan, uu, vv);
                if plan.in_obstacle(&pos) {
                    continue;
                }
                lookup.insert((surface, iu, iv), sites.len());
                sites.push(BeaconSite::on_surface(surface, pos));
                cells.push((iu, iv));
            }
        }
        lattices.push(SurfaceLattice { surface, u, v });
    }
    if sites.is_empty() {
        return Err(PlacementError::EmptyDomain("beacon"));
    }
    let beacons = BeaconDomain {
        sites,
        resolution_m: br,
        cells,
        lattices,
        lookup,
    };
    Ok((drone, beacons))
}
