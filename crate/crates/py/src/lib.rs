//! Python bindings.

use std::path::PathBuf;

use beaconplace::coverage::{build_connectivity, k_coverage_fraction, ConnectivityMatrix};
use beaconplace::document::PlacementDocument;
use beaconplace::ea::{EaConfig, RELAXED_GDOP_THRESHOLD, STRICT_GDOP_THRESHOLD};
use beaconplace::gdop;
use beaconplace::geometry::{self, Aabb, GridSpec, Vec3};
use beaconplace::localization::{self, RangeMeasurement, TrilaterationProblem};
use beaconplace::oracle;
use beaconplace::pipeline;
use beaconplace::plan_file::{PlanFile, SensorSpec};
use beaconplace::problem::PlacementProblem;
use beaconplace::sim;
use beaconplace::PlacementError;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(beaconplace, BeaconPlacementError, PyValueError);
create_exception!(beaconplace, InfeasibleError, BeaconPlacementError);
create_exception!(beaconplace, NonConvergenceError, BeaconPlacementError);
create_exception!(beaconplace, DegenerateGeometryError, BeaconPlacementError);

fn to_py(e: PlacementError) -> PyErr {
    let msg = e.to_string();
    match e {
        PlacementError::Infeasible { .. } => InfeasibleError::new_err(msg),
        PlacementError::NonConvergence { .. } => NonConvergenceError::new_err(msg),
        PlacementError::DegenerateGeometry(_) | PlacementError::CoincidentPoint { .. } => {
            DegenerateGeometryError::new_err(msg)
        }
        _ => BeaconPlacementError::new_err(msg),
    }
}

type P3 = (f64, f64, f64);

fn v3(p: P3) -> Vec3 {
    Vec3::new(p.0, p.1, p.2)
}

fn t3(v: &Vec3) -> P3 {
    (v.x, v.y, v.z)
}

#[pyclass(name = "FloorPlan", frozen, from_py_object)]
#[derive(Clone)]
struct PyFloorPlan {
    inner: geometry::FloorPlan,
    sensor: Option<SensorSpec>,
    grid: GridSpec,
}

#[pymethods]
impl PyFloorPlan {
    #[new]
    #[pyo3(signature = (width, depth, height, obstacles = Vec::new()))]
    fn new(width: f64, depth: f64, height: f64, obstacles: Vec<(P3, P3)>) -> PyResult<Self> {
        let obstacles = obstacles.into_iter().map(|(a, b)| Aabb::new(v3(a), v3(b))).collect();
        Ok(Self {
            inner: geometry::FloorPlan::new(width, depth, height, obstacles).map_err(to_py)?,
            sensor: None,
            grid: GridSpec::default(),
        })
    }

    /// Loads a TOML plan file, keeping its sensor and resolution settings.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let f = PlanFile::load(&path).map_err(to_py)?;
        Ok(Self {
            inner: f.floor_plan().map_err(to_py)?,
            sensor: f.sensor,
            grid: f.grid_spec(),
        })
    }

    #[getter]
    fn dimensions(&self) -> P3 {
        (self.inner.width(), self.inner.depth(), self.inner.height())
    }

    #[getter]
    fn obstacles(&self) -> Vec<(P3, P3)> {
        self.inner.obstacles().iter().map(|o| (t3(&o.min), t3(&o.max))).collect()
    }

    fn line_of_sight(&self, p: P3, q: P3) -> bool {
        geometry::line_of_sight(&self.inner, &v3(p), &v3(q))
    }

    fn __repr__(&self) -> String {
        format!(
            "FloorPlan({}, {}, {}, obstacles={})",
            self.inner.width(),
            self.inner.depth(),
            self.inner.height(),
            self.inner.obstacles().len()
        )
    }
}

#[pyclass(name = "SensorModel", frozen, from_py_object)]
#[derive(Clone)]
struct PySensorModel {
    spec: SensorSpec,
}

#[pymethods]
impl PySensorModel {
    #[new]
    #[pyo3(signature = (
        range_m = geometry::DEFAULT_RANGE_M,
        cone_half_angle_deg = geometry::DEFAULT_HALF_ANGLE_DEG,
        array_tilt_deg = geometry::DEFAULT_TILT_DEG,
        array_ring_count = geometry::DEFAULT_RING_COUNT,
        array_azimuth_offset_deg = geometry::DEFAULT_AZIMUTH_OFFSET_DEG,
    ))]
    fn new(
        range_m: f64,
        cone_half_angle_deg: f64,
        array_tilt_deg: f64,
        array_ring_count: usize,
        array_azimuth_offset_deg: f64,
    ) -> PyResult<Self> {
        let spec = SensorSpec {
            range_m,
            cone_half_angle_deg,
            array_tilt_deg,
            array_ring_count,
            array_azimuth_offset_deg,
        };
        spec.model().map_err(to_py)?;
        Ok(Self { spec })
    }

    #[getter]
    fn range_m(&self) -> f64 {
        self.spec.range_m
    }

    #[getter]
    fn cone_half_angle_deg(&self) -> f64 {
        self.spec.cone_half_angle_deg
    }

    /// Whether a beacon mounted at `position` on `surface` covers `point`.
    fn covers(&self, plan: &PyFloorPlan, surface: &str, position: P3, point: P3) -> PyResult<bool> {
        let s = geometry::Surface::from_name(surface)
            .ok_or_else(|| BeaconPlacementError::new_err(format!("unknown surface {surface:?}")))?;
        let site = geometry::BeaconSite::on_surface(s, v3(position));
        let model = self.spec.model().map_err(to_py)?;
        Ok(geometry::beacon_covers(&model, &site, &v3(point), &plan.inner))
    }
}

fn sensor_or_plan(sensor: Option<&PySensorModel>, plan: &PyFloorPlan) -> SensorSpec {
    sensor.map(|s| s.spec).or(plan.sensor).unwrap_or_default()
}

fn grid_for(plan: &PyFloorPlan, drone_res: Option<f64>, beacon_res: Option<f64>, clearance: Option<f64>) -> GridSpec {
    let mut g = plan.grid;
    if let Some(v) = drone_res {
        g.drone_res_m = v;
    }
    if let Some(v) = beacon_res {
        g.beacon_res_m = v;
    }
    if clearance.is_some() {
        g.clearance_m = clearance;
    }
    g
}

/// Discretized instance: flight points, mount sites and their connectivity.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: PlacementProblem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (plan, sensor = None, drone_res = None, beacon_res = None, clearance = None))]
    fn new(
        py: Python<'_>,
        plan: &PyFloorPlan,
        sensor: Option<&PySensorModel>,
        drone_res: Option<f64>,
        beacon_res: Option<f64>,
        clearance: Option<f64>,
    ) -> PyResult<Self> {
        let model = sensor_or_plan(sensor, plan).model().map_err(to_py)?;
        let grid = grid_for(plan, drone_res, beacon_res, clearance);
        let fp = plan.inner.clone();
        let inner = py.detach(|| PlacementProblem::build(fp, model, grid)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.inner.n_sites()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn points(&self) -> Vec<P3> {
        let g = self.inner.geometry.as_ref().expect("built from geometry");
        g.drone.points.iter().map(t3).collect()
    }

    /// `(surface, position)` of every candidate site.
    #[getter]
    fn sites(&self) -> Vec<(String, P3)> {
        let g = self.inner.geometry.as_ref().expect("built from geometry");
        g.beacons
            .sites
            .iter()
            .map(|s| (s.surface.name().to_string(), t3(&s.position)))
            .collect()
    }

    fn k_coverage(&self, selection: Vec<usize>, k: usize) -> PyResult<f64> {
        check_selection(&selection, self.inner.n_sites())?;
        if k == 0 {
            return Err(BeaconPlacementError::new_err("k must be positive"));
        }
        Ok(k_coverage_fraction(&self.inner.bc, &selection, k))
    }

    /// Average GDOP over points covered by at least four selected sites.
    fn gdop_avg(&self, selection: Vec<usize>) -> PyResult<f64> {
        check_selection(&selection, self.inner.n_sites())?;
        Ok(self.inner.gdop_field(&selection).expect("built from geometry").covered_average)
    }

    #[pyo3(signature = (k = 4))]
    fn lower_bound<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyDict>> {
        bounds_dict(py, &self.inner.bc, k)
    }
}

fn check_selection(selection: &[usize], n: usize) -> PyResult<()> {
    match selection.iter().find(|&&i| i >= n) {
        Some(i) => Err(BeaconPlacementError::new_err(format!("site index {i} out of range ({n} sites)"))),
        None => Ok(()),
    }
}

fn bounds_dict<'py>(py: Python<'py>, bc: &ConnectivityMatrix, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let bc = bc.clone();
    let lb = py.detach(move || oracle::lower_bound_parts(&bc, k)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("counting", lb.counting)?;
    d.set_item("lp_value", lb.lp_value)?;
    d.set_item("lp", lb.lp)?;
    d.set_item("value", lb.value())?;
    Ok(d)
}

/// Result of a full solve.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    doc: PlacementDocument,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn beacon_count(&self) -> usize {
        self.doc.metrics.beacon_count
    }

    /// `(surface, position, normal)` per beacon.
    #[getter]
    fn beacons(&self) -> Vec<(String, P3, P3)> {
        self.doc
            .beacons
            .iter()
            .map(|b| {
                let p = b.position;
                let n = b.normal;
                (b.surface.clone(), (p[0], p[1], p[2]), (n[0], n[1], n[2]))
            })
            .collect()
    }

    #[getter]
    fn per_k_coverage(&self) -> Vec<f64> {
        self.doc.metrics.per_k_coverage.clone()
    }

    #[getter]
    fn gdop_avg(&self) -> f64 {
        self.doc.metrics.gdop_avg
    }

    #[getter]
    fn band(&self) -> String {
        self.doc.metrics.band.to_string()
    }

    fn to_json(&self) -> String {
        self.doc.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(beacons={}, gdop_avg={:.3}, band={})",
            self.doc.metrics.beacon_count, self.doc.metrics.gdop_avg, self.doc.metrics.band
        )
    }
}

#[pyfunction]
#[pyo3(signature = (
    plan, sensor = None, seed = 0, population = 250, survivors = 5, k = 4,
    coverage_threshold = 1.0, gdop_threshold = None, max_generations = 500,
    drone_res = None, beacon_res = None, clearance = None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    plan: &PyFloorPlan,
    sensor: Option<&PySensorModel>,
    seed: u64,
    population: usize,
    survivors: usize,
    k: usize,
    coverage_threshold: f64,
    gdop_threshold: Option<f64>,
    max_generations: usize,
    drone_res: Option<f64>,
    beacon_res: Option<f64>,
    clearance: Option<f64>,
) -> PyResult<PySolution> {
    let spec = sensor_or_plan(sensor, plan);
    let grid = grid_for(plan, drone_res, beacon_res, clearance);
    let config = EaConfig {
        population_size: population,
        survivor_count: survivors,
        k_target: k,
        coverage_threshold,
        gdop_threshold: gdop_threshold.unwrap_or(if coverage_threshold < 1.0 {
            RELAXED_GDOP_THRESHOLD
        } else {
            STRICT_GDOP_THRESHOLD
        }),
        seed,
        max_generations,
        ..EaConfig::default()
    };
    let fp = plan.inner.clone();
    let out = py
        .detach(move || pipeline::solve(&fp, &spec, grid, &config))
        .map_err(to_py)?;
    Ok(PySolution { doc: out.document })
}

/// Checks a placement JSON document against a plan; returns `(name, ok, detail)` per check.
#[pyfunction]
fn validate_placement(plan: &PyFloorPlan, document_json: &str) -> PyResult<Vec<(String, bool, String)>> {
    let doc = PlacementDocument::parse(document_json).map_err(to_py)?;
    Ok(doc
        .validate(&plan.inner)
        .checks
        .into_iter()
        .map(|c| (c.name.to_string(), c.ok, c.detail))
        .collect())
}

/// `(value, band, singular)`.
#[pyfunction]
fn gdop_at(target: P3, beacons: Vec<P3>) -> PyResult<(f64, String, bool)> {
    let b: Vec<Vec3> = beacons.into_iter().map(v3).collect();
    let r = gdop::gdop_at(&v3(target), &b).map_err(to_py)?;
    Ok((r.value, r.band.to_string(), r.singular))
}

#[pyfunction]
fn classify_band(value: f64) -> PyResult<String> {
    Ok(gdop::classify_band(value).map_err(to_py)?.to_string())
}

#[pyfunction]
fn crb_2d(beacon_angles_rad: Vec<f64>, sigma_r: f64) -> PyResult<f64> {
    gdop::crb_2d(&gdop::Crb2dInput {
        beacon_angles_rad,
        sigma_r,
    })
    .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (time_of_flight_s, speed_of_sound_mps = localization::SPEED_OF_SOUND_MPS))]
fn range_from_toa(time_of_flight_s: f64, speed_of_sound_mps: f64) -> PyResult<f64> {
    localization::range_from_toa(time_of_flight_s, speed_of_sound_mps).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (beacons, distances, weights = None))]
fn trilaterate(beacons: Vec<P3>, distances: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<P3> {
    if beacons.len() != distances.len() || weights.as_ref().is_some_and(|w| w.len() != beacons.len()) {
        return Err(BeaconPlacementError::new_err("beacons, distances and weights differ in length"));
    }
    let m = beacons
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let w = weights.as_ref().map_or(1.0, |w| w[i]);
            RangeMeasurement::weighted(v3(*b), distances[i], w)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let p = TrilaterationProblem::new(m).map_err(to_py)?;
    Ok(t3(&localization::trilaterate(&p).map_err(to_py)?))
}

fn matrix(rows: &[Vec<bool>]) -> PyResult<ConnectivityMatrix> {
    if rows.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(BeaconPlacementError::new_err("connectivity rows differ in length"));
    }
    Ok(ConnectivityMatrix::from_rows(rows))
}

/// Exhaustive minimum k-cover of a site-by-point boolean matrix. Returns
/// `(count, sites)` or `None` when infeasible.
#[pyfunction]
#[pyo3(signature = (rows, k, max_sites = oracle::DEFAULT_MAX_SITES))]
fn brute_force_min_cover(py: Python<'_>, rows: Vec<Vec<bool>>, k: usize, max_sites: usize) -> PyResult<Option<(usize, Vec<usize>)>> {
    let bc = matrix(&rows)?;
    py.detach(move || oracle::brute_force_min_cover(&bc, k, max_sites))
        .map_err(to_py)
}

#[pyfunction]
fn lower_bound<'py>(py: Python<'py>, rows: Vec<Vec<bool>>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    bounds_dict(py, &matrix(&rows)?, k)
}

/// Monte-Carlo RMSE of trilateration at `target` against `σr·GDOP`.
#[pyfunction]
#[pyo3(signature = (beacons, target, sigma_r, trials, seed = 0))]
fn simulate_point<'py>(
    py: Python<'py>,
    beacons: Vec<P3>,
    target: P3,
    sigma_r: f64,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let b: Vec<Vec3> = beacons.into_iter().map(v3).collect();
    let t = v3(target);
    let r = py
        .detach(move || sim::simulate_point(&b, &t, sigma_r, trials, seed, 0))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("rmse", r.per_point_rmse)?;
    d.set_item("predicted_sigma", r.predicted_sigma)?;
    d.set_item("gdop", r.gdop)?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("trials", r.trials)?;
    Ok(d)
}

/// Connectivity rows for a plan, for use with the oracle functions.
#[pyfunction]
#[pyo3(signature = (plan, sensor = None, drone_res = None, beacon_res = None, clearance = None))]
fn connectivity(
    plan: &PyFloorPlan,
    sensor: Option<&PySensorModel>,
    drone_res: Option<f64>,
    beacon_res: Option<f64>,
    clearance: Option<f64>,
) -> PyResult<Vec<Vec<bool>>> {
    let model = sensor_or_plan(sensor, plan).model().map_err(to_py)?;
    let grid = grid_for(plan, drone_res, beacon_res, clearance);
    let (drone, beacons) = geometry::discretize_domains(&plan.inner, &grid).map_err(to_py)?;
    let bc = build_connectivity(&beacons, &drone, &model, &plan.inner);
    Ok((0..bc.n_sites())
        .map(|i| (0..bc.n_points()).map(|j| bc.get(i, j)).collect())
        .collect())
}

#[pymodule(name = "beaconplace")]
fn beaconplace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", beaconplace::document::TOOL_VERSION)?;
    m.add("BeaconPlacementError", py.get_type::<BeaconPlacementError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add("NonConvergenceError", py.get_type::<NonConvergenceError>())?;
    m.add("DegenerateGeometryError", py.get_type::<DegenerateGeometryError>())?;
    m.add_class::<PyFloorPlan>()?;
    m.add_class::<PySensorModel>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(validate_placement, m)?)?;
    m.add_function(wrap_pyfunction!(gdop_at, m)?)?;
    m.add_function(wrap_pyfunction!(classify_band, m)?)?;
    m.add_function(wrap_pyfunction!(crb_2d, m)?)?;
    m.add_function(wrap_pyfunction!(range_from_toa, m)?)?;
    m.add_function(wrap_pyfunction!(trilaterate, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_min_cover, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_point, m)?)?;
    m.add_function(wrap_pyfunction!(connectivity, m)?)?;
    Ok(())
}
