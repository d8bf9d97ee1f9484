//! Geometric dilution of precision.
//!
//! With unit-variance, uncorrelated range errors and no clock term, the
//! position covariance is `Q = (CᵀC)⁻¹` where row `i` of `C` is the unit
//! vector from the receiver to beacon `i`. GDOP is `sqrt(trace(Q))`.

use std::fmt;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::coverage::BeaconPlacement;
use crate::error::{PlacementError, Result};
use crate::geometry::{beacon_covers, DroneDomain, FloorPlan, SensorModel, Vec3};

/// Value reported for singular or under-covered points.
pub const GDOP_CAP: f64 = 1e6;
/// `CᵀC` condition numbers above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Geometry quality bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GdopBand {
    MeasurementErrorOrRedundancy,
    Ideal,
    VeryGood,
    Good,
    Medium,
    Sufficient,
    Bad,
}

impl GdopBand {
    pub fn label(self) -> &'static str {
        match self {
            GdopBand::MeasurementErrorOrRedundancy => "measurement-error-or-redundancy",
            GdopBand::Ideal => "ideal",
            GdopBand::VeryGood => "very-good",
            GdopBand::Good => "good",
            GdopBand::Medium => "medium",
            GdopBand::Sufficient => "sufficient",
            GdopBand::Bad => "bad",
        }
    }
}

impl fmt::Display for GdopBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Band lookup: `<1`, `=1`, `(1,2]`, `(2,5]`, `(5,10]`, `(10,20]`, `>20`.
pub fn classify_band(value: f64) -> Result<GdopBand> {
    if !(value > 0.0) {
        return Err(PlacementError::Domain(format!("GDOP must be positive, got {value}")));
    }
    Ok(if value < 1.0 {
        GdopBand::MeasurementErrorOrRedundancy
    } else if value == 1.0 {
        GdopBand::Ideal
    } else if value <= 2.0 {
        GdopBand::VeryGood
    } else if value <= 5.0 {
        GdopBand::Good
    } else if value <= 10.0 {
        GdopBand::Medium
    } else if value <= 20.0 {
        GdopBand::Sufficient
    } else {
        GdopBand::Bad
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdopResult {
    pub value: f64,
    pub band: GdopBand,
    pub singular: bool,
}

impl GdopResult {
    pub fn capped() -> Self {
        Self {
            value: GDOP_CAP,
            band: GdopBand::Bad,
            singular: true,
        }
    }
}

/// Stacks unit vectors from `target` to each beacon.
pub fn direction_cosine_matrix(target: &Vec3, beacons: &[Vec3]) -> Result<DMatrix<f64>> {
    let mut c = DMatrix::zeros(beacons.len(), 3);
    for (i, b) in beacons.iter().enumerate() {
        let d = b - target;
        let r = d.norm();
        if r == 0.0 {
            return Err(PlacementError::CoincidentPoint { index: i });
        }
        let u = d / r;
        for a in 0..3 {
            c[(i, a)] = u[a];
        }
    }
    Ok(c)
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
pub(crate) fn symmetric_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let q = m.trace() / 3.0;
    if p1 == 0.0 {
        let mut e = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        e.sort_by(f64::total_cmp);
        return e;
    }
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (m - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(f64::total_cmp);
    e
}

/// GDOP from an accumulated `CᵀC`.
pub(crate) fn gdop_from_normal(ctc: &Matrix3<f64>) -> GdopResult {
    let ev = symmetric_eigenvalues(ctc);
    let (lo, hi) = (ev[0], ev[2]);
    if !(lo > 0.0) || hi / lo > SINGULAR_CONDITION {
        return GdopResult::capped();
    }
    let value: f64 = ev.iter().map(|l| 1.0 / l).sum::<f64>().sqrt();
    if !value.is_finite() || value > GDOP_CAP {
        return GdopResult::capped();
    }
    GdopResult {
        value,
        band: classify_band(value).expect("positive"),
        singular: false,
    }
}

/// `CᵀC` for unit directions from `target` to the given beacons.
pub(crate) fn normal_matrix<'a>(target: &Vec3, beacons: impl IntoIterator<Item = &'a Vec3>) -> Result<Matrix3<f64>> {
    let mut ctc = Matrix3::zeros();
    for (i, b) in beacons.into_iter().enumerate() {
        let d = b - target;
        let r = d.norm();
        if r == 0.0 {
            return Err(PlacementError::CoincidentPoint { index: i });
        }
        let u = d / r;
        ctc += u * u.transpose();
    }
    Ok(ctc)
}

/// GDOP at `target` from the given beacons (all of them are used).
pub fn gdop_at(target: &Vec3, beacons: &[Vec3]) -> Result<GdopResult> {
    let ctc = normal_matrix(target, beacons)?;
    if beacons.len() < 3 {
        return Ok(GdopResult::capped());
    }
    Ok(gdop_from_normal(&ctc))
}

/// Per-point GDOP over a drone domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GdopField {
    pub per_point: Vec<GdopResult>,
    /// Number of beacons covering each point.
    pub covering: Vec<usize>,
    /// Mean over every point, capped values included.
    pub average: f64,
    /// Mean over points reached by at least four beacons.
    pub covered_average: f64,
    pub fraction_singular: f64,
}

impl GdopField {
    pub(crate) fn from_results(per_point: Vec<GdopResult>, covering: Vec<usize>) -> Self {
        let n = per_point.len();
        let mut sum = 0.0;
        let mut covered_sum = 0.0;
        let mut covered = 0usize;
        let mut singular = 0usize;
        for (r, &c) in per_point.iter().zip(&covering) {
            sum += r.value;
            if c >= 4 {
                covered_sum += r.value;
                covered += 1;
            }
            if r.singular {
                singular += 1;
            }
        }
        let average = if n == 0 { GDOP_CAP } else { sum / n as f64 };
        let covered_average = if covered == 0 { GDOP_CAP } else { covered_sum / covered as f64 };
        Self {
            per_point,
            covering,
            average,
            covered_average,
            fraction_singular: if n == 0 { 1.0 } else { singular as f64 / n as f64 },
        }
    }

    pub fn len(&self) -> usize {
        self.per_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_point.is_empty()
    }
}

/// GDOP at a point from exactly the beacons in `placement` covering it;
/// fewer than four covering beacons marks the point singular.
pub fn gdop_at_covered(target: &Vec3, covering: &[Vec3]) -> GdopResult {
    if covering.len() < 4 {
        return GdopResult::capped();
    }
    match normal_matrix(target, covering) {
        Ok(ctc) => gdop_from_normal(&ctc),
        Err(_) => GdopResult::capped(),
    }
}

/// GDOP field evaluated directly from geometry (no connectivity matrix).
pub fn gdop_field(domain: &DroneDomain, placement: &BeaconPlacement, plan: &FloorPlan, model: &SensorModel) -> GdopField {
    use rayon::prelude::*;
    let (per_point, covering): (Vec<_>, Vec<_>) = domain
        .points
        .par_iter()
        .map(|p| {
            let cov: Vec<Vec3> = placement
                .sites
                .iter()
                .filter(|s| beacon_covers(model, s, p, plan))
                .map(|s| s.position)
                .collect();
            (gdop_at_covered(p, &cov), cov.len())
        })
        .unzip();
    GdopField::from_results(per_point, covering)
}

/// Input to the planar range-only Cramér-Rao bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Crb2dInput {
    pub beacon_angles_rad: Vec<f64>,
    pub sigma_r: f64,
}

/// `σ_r · sqrt(N / Σ_{k<j} |sin(θ_k − θ_j)|)`.
pub fn crb_2d(input: &Crb2dInput) -> Result<f64> {
    let n = input.beacon_angles_rad.len();
    if n < 2 {
        return Err(PlacementError::Domain(format!("need at least 2 beacons, got {n}")));
    }
    if !(input.sigma_r > 0.0) {
        return Err(PlacementError::Domain(format!("sigma_r must be positive, got {}", input.sigma_r)));
    }
    let th = &input.beacon_angles_rad;
    let mut sum = 0.0;
    for k in 0..n {
        for j in k + 1..n {
            sum += (th[k] - th[j]).sin().abs();
        }
    }
    if sum < 1e-12 {
        return Err(PlacementError::DegenerateGeometry(
            "all bearings are identical or opposite".into(),
        ));
    }
    Ok(input.sigma_r * (n as f64 / sum).sqrt())
}

/// Planar DOP from the trace of the 2x2 information matrix,
/// `σ_r · sqrt(N / Σ_{k<j} sin²(θ_k − θ_j))`.
pub fn dop_2d_trace(input: &Crb2dInput) -> Result<f64> {
    let n = input.beacon_angles_rad.len();
    if n < 2 || !(input.sigma_r > 0.0) {
        return Err(PlacementError::Domain("need at least 2 beacons and sigma_r > 0".into()));
    }
    let th = &input.beacon_angles_rad;
    let mut sum = 0.0;
    for k in 0..n {
        for j in k + 1..n {
            sum += (th[k] - th[j]).sin().powi(2);
        }
    }
    if sum < 1e-12 {
        return Err(PlacementError::DegenerateGeometry(
            "all bearings are identical or opposite".into(),
        ));
    }
    Ok(input.sigma_r * (n as f64 / sum).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_cosines() {
        let c = direction_cosine_matrix(&Vec3::zeros(), &[Vec3::new(0.0, 0.0, 5.0)]).unwrap();
        assert_eq!(c.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
        let c = direction_cosine_matrix(&Vec3::zeros(), &[Vec3::x(), Vec3::y(), Vec3::z()]).unwrap();
        assert_eq!(c, DMatrix::identity(3, 3));
        let err = direction_cosine_matrix(&Vec3::repeat(1.0), &[Vec3::repeat(1.0)]).unwrap_err();
        assert!(matches!(err, PlacementError::CoincidentPoint { index: 0 }));
    }

    #[test]
    fn unit_axes_give_sqrt3() {
        let r = gdop_at(&Vec3::zeros(), &[Vec3::x(), Vec3::y(), Vec3::z()]).unwrap();
        assert!((r.value - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.band, GdopBand::VeryGood);
        assert!(!r.singular);
    }

    #[test]
    fn coplanar_is_singular() {
        let b = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -2.0, 0.0),
        ];
        let r = gdop_at(&Vec3::zeros(), &b).unwrap();
        assert!(r.singular);
        assert_eq!(r.band, GdopBand::Bad);
        assert_eq!(r.value, GDOP_CAP);
    }

    #[test]
    fn bands() {
        let cases = [
            (0.5, GdopBand::MeasurementErrorOrRedundancy),
            (1.0, GdopBand::Ideal),
            (1.5, GdopBand::VeryGood),
            (2.0, GdopBand::VeryGood),
            (2.8, GdopBand::Good),
            (5.0, GdopBand::Good),
            (7.0, GdopBand::Medium),
            (15.0, GdopBand::Sufficient),
            (20.0, GdopBand::Sufficient),
            (25.0, GdopBand::Bad),
        ];
        for (v, b) in cases {
            assert_eq!(classify_band(v).unwrap(), b, "value {v}");
        }
        assert!(classify_band(0.0).is_err());
        assert!(classify_band(-3.0).is_err());
    }

    #[test]
    fn eigenvalues_match_nalgebra() {
        let m = Matrix3::new(4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0);
        let mut ref_ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ref_ev.sort_by(f64::total_cmp);
        let ev = symmetric_eigenvalues(&m);
        for i in 0..3 {
            assert!((ev[i] - ref_ev[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn crb_values() {
        let deg = |v: &[f64]| v.iter().map(|d: &f64| d.to_radians()).collect::<Vec<_>>();
        let tri = crb_2d(&Crb2dInput {
            beacon_angles_rad: deg(&[0.0, 120.0, 240.0]),
            sigma_r: 1.0,
        })
        .unwrap();
        assert!((tri - (3.0 / (3.0 * 3f64.sqrt() / 2.0)).sqrt()).abs() < 1e-12);
        assert!((tri - 1.0746).abs() < 1e-4);

        let right = crb_2d(&Crb2dInput {
            beacon_angles_rad: deg(&[0.0, 90.0, 180.0]),
            sigma_r: 1.0,
        })
        .unwrap();
        assert!((right - 1.5f64.sqrt()).abs() < 1e-12);

        let same = crb_2d(&Crb2dInput {
            beacon_angles_rad: deg(&[0.0, 0.0]),
            sigma_r: 2.0,
        });
        assert!(matches!(same, Err(PlacementError::DegenerateGeometry(_))));
    }

    #[test]
    fn crb_equals_sigma_when_sum_matches_count() {
        // Bearings 0/90/180/270: four unit pairs and two opposite pairs, Σ = 4 = N.
        let v = crb_2d(&Crb2dInput {
            beacon_angles_rad: vec![0.0, 90f64.to_radians(), 180f64.to_radians(), 270f64.to_radians()],
            sigma_r: 0.7,
        })
        .unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn trace_form_differs_from_abs_sine_form() {
        let input = Crb2dInput {
            beacon_angles_rad: vec![0.0, 0.5, 2.0],
            sigma_r: 1.0,
        };
        let a = crb_2d(&input).unwrap();
        let b = dop_2d_trace(&input).unwrap();
        assert!(a > 0.0 && b > 0.0);
        assert!((a - b).abs() > 1e-6);
    }
}
