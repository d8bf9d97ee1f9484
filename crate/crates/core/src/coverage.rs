//! Beacon-to-point connectivity and k-coverage fractions.

use rayon::prelude::*;

use crate::error::{PlacementError, Result};
use crate::geometry::{beacon_covers, BeaconDomain, BeaconSite, DroneDomain, FloorPlan, SensorModel, Surface};

/// Dense `|B| x |D|` bit matrix; row `i` holds the points site `i` covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    n_sites: usize,
    n_points: usize,
    words: usize,
    bits: Vec<u64>,
}

impl ConnectivityMatrix {
    pub fn new(n_sites: usize, n_points: usize) -> Self {
        let words = n_points.div_ceil(64);
        Self {
            n_sites,
            n_points,
            words,
            bits: vec![0; n_sites * words],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let n_points = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(rows.len(), n_points);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_points, "ragged connectivity rows");
            for (j, &b) in row.iter().enumerate() {
                if b {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn get(&self, site: usize, point: usize) -> bool {
        self.bits[site * self.words + point / 64] >> (point % 64) & 1 == 1
    }

    pub fn set(&mut self, site: usize, point: usize, value: bool) {
        let w = &mut self.bits[site * self.words + point / 64];
        let mask = 1u64 << (point % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row(&self, site: usize) -> &[u64] {
        &self.bits[site * self.words..(site + 1) * self.words]
    }

    pub fn row_sum(&self, site: usize) -> usize {
        self.row(site).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.n_points];
        for i in 0..self.n_sites {
            self.accumulate(i, &mut sums);
        }
        sums
    }

    /// Sites covering `point`.
    pub fn column(&self, point: usize) -> Vec<usize> {
        (0..self.n_sites).filter(|&i| self.get(i, point)).collect()
    }

    /// Adds row `site` into per-point counters.
    pub fn accumulate<T: Copy + std::ops::AddAssign + From<u8>>(&self, site: usize, counts: &mut [T]) {
        for (w, &word) in self.row(site).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                counts[w * 64 + b] += T::from(1u8);
                bits &= bits - 1;
            }
        }
    }

    /// Per-point number of covering sites among `selection`.
    pub fn covering_counts(&self, selection: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_points];
        for &i in selection {
            self.accumulate(i, &mut counts);
        }
        counts
    }
}

/// Builds the connectivity matrix from the coverage predicate, parallel over sites.
pub fn build_connectivity(
    beacons: &BeaconDomain,
    drone: &DroneDomain,
    model: &SensorModel,
    plan: &FloorPlan,
) -> ConnectivityMatrix {
    let n_points = drone.points.len();
    let words = n_points.div_ceil(64);
    let rows: Vec<Vec<u64>> = beacons
        .sites
        .par_iter()
        .map(|site| {
            let mut row = vec![0u64; words];
            for (j, p) in drone.points.iter().enumerate() {
                if beacon_covers(model, site, p, plan) {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect();
    ConnectivityMatrix {
        n_sites: beacons.sites.len(),
        n_points,
        words,
        bits: rows.concat(),
    }
}

fn fraction_at_least(counts: &[u32], k: usize) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().filter(|&&c| c as usize >= k).count() as f64 / counts.len() as f64
}

/// Fraction of drone points covered by at least `k` selected sites.
pub fn k_coverage_fraction(bc: &ConnectivityMatrix, selection: &[usize], k: usize) -> f64 {
    assert!(k >= 1, "k must be positive");
    fraction_at_least(&bc.covering_counts(selection), k)
}

/// Fraction of drone points covered by at least one selected site.
pub fn total_coverage(bc: &ConnectivityMatrix, selection: &[usize]) -> f64 {
    k_coverage_fraction(bc, selection, 1)
}

/// `[f(1), ..., f(k_max)]` from precomputed counts.
pub fn per_k_fractions(counts: &[u32], k_max: usize) -> Vec<f64> {
    (1..=k_max).map(|k| fraction_at_least(counts, k)).collect()
}

/// A selected set of beacon sites.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeaconPlacement {
    pub sites: Vec<BeaconSite>,
}

impl BeaconPlacement {
    pub fn new(sites: Vec<BeaconSite>) -> Self {
        Self { sites }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn from_indices(domain: &BeaconDomain, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| domain.sites[i]).collect())
    }

    /// Checks every site lies on the ceiling or an upper-half wall with the
    /// matching inward normal, and that no two sites coincide.
    pub fn validate(&self, plan: &FloorPlan) -> Result<()> {
        for (i, s) in self.sites.iter().enumerate() {
            match Surface::containing(plan, &s.position) {
                Some(surface) if (surface.normal() - s.normal).norm() < 1e-9 => {}
                Some(_) => {
                    return Err(PlacementError::Validation {
                        what: "beacon orientation",
                        reason: format!("beacon {i} normal does not point into the room"),
                    })
                }
                None => {
                    return Err(PlacementError::Validation {
                        what: "beacon domain",
                        reason: format!(
                            "beacon {i} at ({:.3}, {:.3}, {:.3}) is not on the ceiling or an upper-half wall",
                            s.position.x, s.position.y, s.position.z
                        ),
                    })
                }
            }
            if plan.in_obstacle(&s.position) {
                return Err(PlacementError::Validation {
                    what: "beacon domain",
                    reason: format!("beacon {i} is inside an obstacle"),
                });
            }
            for (j, o) in self.sites[..i].iter().enumerate() {
                if (o.position - s.position).norm() < 1e-9 {
                    return Err(PlacementError::Validation {
                        what: "beacon placement",
                        reason: format!("beacons {j} and {i} coincide"),
                    });
                }
            }
        }
        Ok(())
    }
}
