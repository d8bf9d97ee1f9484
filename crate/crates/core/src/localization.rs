//! Range measurement and closed-form 3D trilateration.

use nalgebra::{DMatrix, DVector};

use crate::error::{PlacementError, Result};
use crate::geometry::Vec3;

/// Condition number of `AᵀWA` above which the geometry is treated as degenerate.
pub const DEGENERATE_CONDITION: f64 = 1e12;
pub const SPEED_OF_SOUND_MPS: f64 = 343.0;

/// `d = c·t`.
pub fn range_from_toa(time_of_flight_s: f64, speed_of_sound_mps: f64) -> Result<f64> {
    if !(time_of_flight_s >= 0.0) || !time_of_flight_s.is_finite() {
        return Err(PlacementError::Domain(format!(
            "time of flight must be finite and nonnegative, got {time_of_flight_s}"
        )));
    }
    if !(speed_of_sound_mps > 0.0) || !speed_of_sound_mps.is_finite() {
        return Err(PlacementError::Domain(format!(
            "speed of sound must be positive, got {speed_of_sound_mps}"
        )));
    }
    Ok(speed_of_sound_mps * time_of_flight_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub beacon_position: Vec3,
    pub distance_m: f64,
    /// Measurement quality, e.g. an SNR ratio. Defaults to 1.
    pub weight: f64,
}

impl RangeMeasurement {
    pub fn new(beacon_position: Vec3, distance_m: f64) -> Result<Self> {
        Self::weighted(beacon_position, distance_m, 1.0)
    }

    pub fn weighted(beacon_position: Vec3, distance_m: f64, weight: f64) -> Result<Self> {
        if !(distance_m >= 0.0) || !distance_m.is_finite() {
            return Err(PlacementError::Validation {
                what: "range measurement",
                reason: format!("distance must be finite and nonnegative, got {distance_m}"),
            });
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(PlacementError::Validation {
                what: "range measurement",
                reason: format!("weight must be finite and nonnegative, got {weight}"),
            });
        }
        Ok(Self {
            beacon_position,
            distance_m,
            weight,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrilaterationProblem {
    measurements: Vec<RangeMeasurement>,
}

impl TrilaterationProblem {
    pub fn new(measurements: Vec<RangeMeasurement>) -> Result<Self> {
        if measurements.len() < 4 {
            return Err(PlacementError::Validation {
                what: "trilateration problem",
                reason: format!("at least 4 measurements are required, got {}", measurements.len()),
            });
        }
        Ok(Self { measurements })
    }

    pub fn measurements(&self) -> &[RangeMeasurement] {
        &self.measurements
    }

    /// Noiseless, unit-weight ranges from `beacons` to `target`.
    pub fn exact(beacons: &[Vec3], target: &Vec3) -> Result<Self> {
        let m = beacons
            .iter()
            .map(|b| RangeMeasurement::new(*b, (b - target).norm()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(m)
    }
}

/// Linear system from differencing every range equation against the last:
/// row `i` is `2(s_n − s_i)ᵀx = d_i² − d_n² − |s_i|² + |s_n|²`.
pub fn linear_system(problem: &TrilaterationProblem) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let m = problem.measurements();
    let last = m[m.len() - 1];
    let sn = last.beacon_position;
    let rows = m.len() - 1;
    let mut a = DMatrix::zeros(rows, 3);
    let mut b = DVector::zeros(rows);
    let mut w = DVector::zeros(rows);
    for (i, mi) in m[..rows].iter().enumerate() {
        let si = mi.beacon_position;
        let diff = 2.0 * (sn - si);
        a[(i, 0)] = diff.x;
        a[(i, 1)] = diff.y;
        a[(i, 2)] = diff.z;
        b[i] = mi.distance_m.powi(2) - last.distance_m.powi(2) - si.norm_squared() + sn.norm_squared();
        w[i] = mi.weight;
    }
    (a, b, w)
}

/// Weighted least-squares position `x = (AᵀWA)⁻¹AᵀWb`, solved through a QR
/// factorization of `W^½A`.
pub fn trilaterate(problem: &TrilaterationProblem) -> Result<Vec3> {
    let (a, b, w) = linear_system(problem);
    let sw = w.map(f64::sqrt);
    let wa = DMatrix::from_fn(a.nrows(), 3, |i, j| a[(i, j)] * sw[i]);
    let wb = b.component_mul(&sw);
    solve_least_squares(wa, wb)
}

fn solve_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec3> {
    let s = a.singular_values();
    let max = s.max();
    let min = s.min();
    if !(max > 0.0) || !(min > 0.0) {
        return Err(PlacementError::DegenerateGeometry("normal matrix is singular".into()));
    }
    let cond = (max / min).powi(2);
    if !(cond <= DEGENERATE_CONDITION) {
        return Err(PlacementError::DegenerateGeometry(format!(
            "normal matrix condition number {cond:.3e} exceeds {DEGENERATE_CONDITION:e}"
        )));
    }
    // Full column rank is established above, so Householder QR is safe.
    let qr = a.qr();
    let x = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * b))
        .ok_or_else(|| PlacementError::DegenerateGeometry("triangular factor is singular".into()))?;
    Ok(Vec3::new(x[0], x[1], x[2]))
}

/// Closed-form estimate refined by Gauss-Newton steps on the range residuals,
/// `x₊ = x + (HᵀWH)⁻¹HᵀW(d − |s − x|)` with `H` the unit vectors from the
/// beacons to `x`. Steps are halved until the weighted residual drops. To
/// first order the error covariance is `σ²(HᵀH)⁻¹`.
pub fn trilaterate_refined(problem: &TrilaterationProblem) -> Result<Vec3> {
    const MAX_STEPS: usize = 50;
    const MAX_HALVINGS: usize = 30;
    let m = problem.measurements();
    let scale = m.iter().map(|mi| mi.distance_m).fold(1.0, f64::max);
    let cost = |x: &Vec3| -> f64 {
        m.iter()
            .map(|mi| mi.weight * (mi.distance_m - (x - mi.beacon_position).norm()).powi(2))
            .sum()
    };
    let mut x = trilaterate(problem)?;
    let mut fx = cost(&x);
    for _ in 0..MAX_STEPS {
        let mut h = DMatrix::zeros(m.len(), 3);
        let mut r = DVector::zeros(m.len());
        for (i, mi) in m.iter().enumerate() {
            let delta = x - mi.beacon_position;
            let dist = delta.norm();
            if dist < 1e-12 {
                return Err(PlacementError::CoincidentPoint { index: i });
            }
            let sw = mi.weight.sqrt();
            let u = delta / dist;
            h[(i, 0)] = u.x * sw;
            h[(i, 1)] = u.y * sw;
            h[(i, 2)] = u.z * sw;
            r[i] = (mi.distance_m - dist) * sw;
        }
        let mut step = solve_least_squares(h, r)?;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let next = x + step;
            let f = cost(&next);
            if f <= fx {
                x = next;
                fx = f;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.norm() <= 1e-12 * scale {
            break;
        }
    }
    Ok(x)
}
