//! Exact and relaxed reference solutions for the k-cover problem.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus};
use rayon::prelude::*;

use crate::coverage::ConnectivityMatrix;
use crate::error::{PlacementError, Result};

pub const DEFAULT_MAX_SITES: usize = 25;

/// Minimum-cardinality site set giving every point at least `k` covering
/// sites, or `None` when even all sites fall short.
pub fn brute_force_min_cover(bc: &ConnectivityMatrix, k: usize, max_sites: usize) -> Result<Option<(usize, Vec<usize>)>> {
    let n = bc.n_sites();
    if n > max_sites {
        return Err(PlacementError::InstanceTooLarge { sites: n, max: max_sites });
    }
    if bc.column_sums().iter().any(|&c| c < k) {
        return Ok(None);
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..bc.n_points()).filter(|&j| bc.get(i, j)).collect())
        .collect();
    if bc.n_points() == 0 || k == 0 {
        return Ok(Some((0, Vec::new())));
    }
    for size in k..=n {
        // Split on the first chosen site so sizes enumerate in parallel.
        let found = (0..n).into_par_iter().find_map_first(|first| {
            let mut counts = vec![0u32; bc.n_points()];
            let mut chosen = Vec::with_capacity(size);
            search(&rows, k as u32, size, first, &mut counts, &mut chosen)
        });
        if let Some(sel) = found {
            return Ok(Some((size, sel)));
        }
    }
    Ok(None)
}

fn search(rows: &[Vec<usize>], k: u32, size: usize, site: usize, counts: &mut [u32], chosen: &mut Vec<usize>) -> Option<Vec<usize>> {
    chosen.push(site);
    for &j in &rows[site] {
        counts[j] += 1;
    }
    let remaining = (size - chosen.len()) as u32;
    let mut result = None;
    if counts.iter().all(|&c| c + remaining >= k) {
        if remaining == 0 {
            result = Some(chosen.clone());
        } else {
            for next in site + 1..rows.len() {
                if rows.len() - next < remaining as usize {
                    break;
                }
                if let Some(r) = search(rows, k, size, next, counts, chosen) {
                    result = Some(r);
                    break;
                }
            }
        }
    }
    for &j in &rows[site] {
        counts[j] -= 1;
    }
    chosen.pop();
    result
}

/// Components of the lower bound on the number of sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// `⌈k·|D| / max row sum⌉`.
    pub counting: usize,
    /// Optimum of the covering LP with `0 ≤ x ≤ 1`.
    pub lp_value: f64,
    pub lp: usize,
}

impl LowerBound {
    pub fn value(&self) -> usize {
        self.counting.max(self.lp)
    }
}

pub fn lower_bound(bc: &ConnectivityMatrix, k: usize) -> Result<usize> {
    lower_bound_parts(bc, k).map(|b| b.value())
}

pub fn lower_bound_parts(bc: &ConnectivityMatrix, k: usize) -> Result<LowerBound> {
    let sums = bc.column_sums();
    let uncovered = sums.iter().filter(|&&c| c < k).count();
    if uncovered > 0 {
        return Err(PlacementError::Infeasible { uncovered, k });
    }
    let n_points = bc.n_points();
    let max_row = (0..bc.n_sites()).map(|i| bc.row_sum(i)).max().unwrap_or(0);
    let counting = if n_points == 0 || k == 0 {
        0
    } else {
        (k * n_points).div_ceil(max_row)
    };
    let lp_value = covering_lp(bc, k)?;
    let lp = (lp_value - 1e-6).ceil().max(0.0) as usize;
    Ok(LowerBound { counting, lp_value, lp })
}

/// Points added to the restricted LP per round of constraint generation.
const CUT_BATCH: usize = 256;

/// `min Σx  s.t.  Σ_{i covers j} x_i ≥ k, 0 ≤ x ≤ 1` by constraint
/// generation: the LP is solved over a subset of points, the solution is
/// checked against every point and violated points are added until none
/// remain.
///
/// The returned value is the weak-duality bound of the last restricted dual,
/// so it never exceeds the true optimum even when the solver stops short.
fn covering_lp(bc: &ConnectivityMatrix, k: usize) -> Result<f64> {
    if bc.n_points() == 0 || k == 0 {
        return Ok(0.0);
    }
    let columns: Vec<Vec<usize>> = (0..bc.n_points()).map(|j| bc.column(j)).collect();
    // Seed with the hardest points (fewest covering sites).
    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by_key(|&j| (columns[j].len(), j));
    let mut active: Vec<usize> = order.into_iter().take(CUT_BATCH).collect();
    let mut in_active = vec![false; columns.len()];
    for &j in &active {
        in_active[j] = true;
    }
    let k = k as f64;
    loop {
        let (x, y) = restricted_lp(bc.n_sites(), &columns, &active, k)?;
        let mut violated: Vec<(f64, usize)> = (0..columns.len())
            .into_par_iter()
            .filter(|&j| !in_active[j])
            .filter_map(|j| {
                let gap = k - columns[j].iter().map(|&i| x[i]).sum::<f64>();
                (gap > 1e-6).then_some((gap, j))
            })
            .collect();
        if violated.is_empty() {
            return Ok(dual_bound(bc.n_sites(), &columns, &active, &y, k));
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, j) in violated.iter().take(CUT_BATCH) {
            in_active[j] = true;
            active.push(j);
        }
    }
}

/// `kΣy − Σ max(0, load_i − 1)` for any `y ≥ 0` on the active points.
fn dual_bound(n_sites: usize, columns: &[Vec<usize>], active: &[usize], y: &[f64], k: f64) -> f64 {
    let mut load = vec![0.0; n_sites];
    let mut total = 0.0;
    for (&j, &yj) in active.iter().zip(y) {
        let yj = yj.max(0.0);
        total += yj;
        for &i in &columns[j] {
            load[i] += yj;
        }
    }
    k * total - load.iter().map(|l| (l - 1.0).max(0.0)).sum::<f64>()
}

/// Primal `x` per site and dual `y` per active point of the LP restricted
/// to `active`, as `Ax + s = b, s ≥ 0` with rows `−Σx ≤ −k`, `x ≤ 1`, `−x ≤ 0`.
fn restricted_lp(n_sites: usize, columns: &[Vec<usize>], active: &[usize], k: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let np = active.len();
    let m = np + 2 * n_sites;
    let nnz: usize = active.iter().map(|&j| columns[j].len()).sum::<usize>() + 2 * n_sites;
    let (mut rows, mut cols, mut vals) = (Vec::with_capacity(nnz), Vec::with_capacity(nnz), Vec::with_capacity(nnz));
    for (r, &j) in active.iter().enumerate() {
        for &i in &columns[j] {
            rows.push(r);
            cols.push(i);
            vals.push(-1.0);
        }
    }
    for i in 0..n_sites {
        rows.extend([np + i, np + n_sites + i]);
        cols.extend([i, i]);
        vals.extend([1.0, -1.0]);
    }
    let a = CscMatrix::new_from_triplets(m, n_sites, rows, cols, vals);
    let mut b = vec![-k; np];
    b.extend(std::iter::repeat_n(1.0, n_sites));
    b.extend(std::iter::repeat_n(0.0, n_sites));
    let p = CscMatrix::<f64>::zeros((n_sites, n_sites));
    let q = vec![1.0; n_sites];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .map_err(|e| PlacementError::Domain(format!("lp settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &[NonnegativeConeT(m)], settings)
        .map_err(|e| PlacementError::Domain(format!("lp setup: {e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        other => return Err(PlacementError::Domain(format!("covering lp stopped: {other:?}"))),
    }
    Ok((solver.solution.x.clone(), solver.solution.z[..np].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n_sites: usize, n_points: usize) -> ConnectivityMatrix {
        ConnectivityMatrix::from_rows(&vec![vec![true; n_points]; n_sites])
    }

    #[test]
    fn all_true_needs_exactly_k() {
        let bc = full(7, 5);
        assert_eq!(brute_force_min_cover(&bc, 4, 25).unwrap().unwrap().0, 4);
        assert_eq!(lower_bound(&bc, 4).unwrap(), 4);
    }

    #[test]
    fn three_coverers_is_infeasible_for_k4() {
        let mut rows = vec![vec![true; 3]; 6];
        for r in rows.iter_mut().skip(3) {
            r[1] = false;
        }
        let bc = ConnectivityMatrix::from_rows(&rows);
        assert_eq!(brute_force_min_cover(&bc, 4, 25).unwrap(), None);
        assert!(matches!(
            lower_bound(&bc, 4),
            Err(PlacementError::Infeasible { uncovered: 1, k: 4 })
        ));
    }

    #[test]
    fn too_many_sites() {
        assert!(matches!(
            brute_force_min_cover(&full(26, 1), 1, 25),
            Err(PlacementError::InstanceTooLarge { sites: 26, max: 25 })
        ));
    }

    #[test]
    fn disjoint_blocks_add_up() {
        // Two groups of points, each reachable only from its own 5 sites.
        let mut rows = Vec::new();
        for g in 0..2 {
            for _ in 0..5 {
                rows.push((0..4).map(|j| j / 2 == g).collect());
            }
        }
        let bc = ConnectivityMatrix::from_rows(&rows);
        assert_eq!(brute_force_min_cover(&bc, 3, 25).unwrap().unwrap().0, 6);
        let lb = lower_bound_parts(&bc, 3).unwrap();
        assert!((lb.lp_value - 6.0).abs() < 1e-5);
        assert_eq!(lb.counting, 6);
    }

    #[test]
    fn lp_beats_counting_on_fractional_triangle() {
        // Points {0,1}, {1,2}, {0,2} covered by sites; k=1 gives LP 1.5 → 2.
        let bc = ConnectivityMatrix::from_rows(&[
            vec![true, false, true],
            vec![true, true, false],
            vec![false, true, true],
        ]);
        let lb = lower_bound_parts(&bc, 1).unwrap();
        assert!((lb.lp_value - 1.5).abs() < 1e-5);
        assert_eq!(lb.value(), 2);
        assert_eq!(brute_force_min_cover(&bc, 1, 25).unwrap().unwrap().0, 2);
    }
}
