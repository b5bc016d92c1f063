//! Discrete (medoid) k-median on weighted point sets.
//!
//! Centers are always members of the point set. The cost of a clustering is
//! `Σ w_i · ‖x_i − c(i)‖^p`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise;

/// Converged (or iteration-capped) k-median solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Point indices of the centers, one per cluster slot.
    pub centers: Vec<usize>,
    /// Cluster slot of every point.
    pub assignment: Vec<usize>,
    pub cost: f64,
    pub iterations: usize,
    /// Cost after every assignment step, starting from the initial centers.
    pub cost_history: Vec<f64>,
}

impl ClusterModel {
    pub fn initial_cost(&self) -> f64 {
        self.cost_history[0]
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `w · ‖x − c‖^p` for every pair, precomputed.
#[derive(Debug, Clone)]
struct CostTable {
    n: usize,
    weights: Vec<f64>,
    /// Row-major `‖x_i − x_j‖^p`.
    dist: Vec<f64>,
}

impl CostTable {
    fn new(points: &[Vec<f64>], weights: &[f64], p: u32) -> Result<CostTable> {
        let n = points.len();
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: weights.len(),
            });
        }
        if let Some(dim) = points.first().map(Vec::len) {
            if let Some(bad) = points.iter().find(|x| x.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.len(),
                });
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
        }
        if !(p == 1 || p == 2) {
            return Err(Error::InvalidConfig(format!("distance exponent must be 1 or 2, got {p}")));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(&points[i], &points[j]).powi(p as i32);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(CostTable {
            n,
            weights: weights.to_vec(),
            dist,
        })
    }

    #[inline]
    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Nearest center slot per point (ties: lowest slot) and total cost.
    fn assign(&self, centers: &[usize]) -> (Vec<usize>, f64) {
        let mut cost = 0.0;
        let assignment = (0..self.n)
            .map(|i| {
                let mut best = 0;
                let mut best_d = self.d(i, centers[0]);
                for (slot, &c) in centers.iter().enumerate().skip(1) {
                    let d = self.d(i, c);
                    if d < best_d {
                        best = slot;
                        best_d = d;
                    }
                }
                cost += self.weights[i] * best_d;
                best
            })
            .collect();
        (assignment, cost)
    }

    fn cost_of(&self, centers: &[usize]) -> f64 {
        self.assign(centers).1
    }

    /// Weighted 1-medoid of `members` (ties: lowest index).
    fn medoid(&self, members: &[usize]) -> (usize, f64) {
        let mut best = (members[0], f64::INFINITY);
        for &c in members {
            let cost: f64 = members.iter().map(|&x| self.weights[x] * self.d(x, c)).sum();
            if cost < best.1 || (cost == best.1 && c < best.0) {
                best = (c, cost);
            }
        }
        best
    }
}

fn validate_centers(table: &CostTable, k: usize, centers: &[usize]) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if table.n < k {
        return Err(Error::InsufficientPoints {
            have: table.n,
            need: k,
        });
    }
    if centers.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: centers.len(),
        });
    }
    for (i, &c) in centers.iter().enumerate() {
        if c >= table.n {
            return Err(Error::InvalidConfig(format!("center index {c} out of range")));
        }
        if centers[..i].contains(&c) {
            return Err(Error::InvalidConfig(format!("center index {c} repeated")));
        }
    }
    Ok(())
}

/// Medoid alternation from `centers`. Slot `pinned`, if given, never moves.
fn alternate(
    table: &CostTable,
    mut centers: Vec<usize>,
    pinned: Option<usize>,
    max_iter: usize,
) -> ClusterModel {
    let k = centers.len();
    let (mut assignment, mut cost) = table.assign(&centers);
    let mut history = vec![cost];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;

        // Re-seed empty clusters with the point paying the most.
        if reseed_empty(table, &mut centers, &assignment, pinned) {
            (assignment, cost) = table.assign(&centers);
            history.push(cost);
        }

        let mut members = vec![Vec::new(); k];
        for (i, &slot) in assignment.iter().enumerate() {
            members[slot].push(i);
        }
        let mut changed = false;
        for slot in 0..k {
            if Some(slot) == pinned || members[slot].is_empty() {
                continue;
            }
            let current: f64 = members[slot]
                .iter()
                .map(|&x| table.weights[x] * table.d(x, centers[slot]))
                .sum();
            let (candidate, cand_cost) = table.medoid(&members[slot]);
            // Strict improvement only, so ties cannot cycle.
            if cand_cost < current && !centers.contains(&candidate) {
                centers[slot] = candidate;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        (assignment, cost) = table.assign(&centers);
        history.push(cost);
    }
    ClusterModel {
        centers,
        assignment,
        cost,
        iterations,
        cost_history: history,
    }
}

fn reseed_empty(
    table: &CostTable,
    centers: &mut [usize],
    assignment: &[usize],
    pinned: Option<usize>,
) -> bool {
    let k = centers.len();
    let mut used = vec![false; k];
    for &slot in assignment {
        used[slot] = true;
    }
    let mut changed = false;
    for slot in 0..k {
        if used[slot] || Some(slot) == pinned {
            continue;
        }
        // Farthest point by weighted cost to its current center; ties lowest index.
        let mut best: Option<(usize, f64)> = None;
        for i in 0..table.n {
            if centers.contains(&i) {
                continue;
            }
            let c = table.weights[i] * table.d(i, centers[assignment[i]]);
            if c > 0.0 && best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        if let Some((i, _)) = best {
            centers[slot] = i;
            changed = true;
        }
    }
    changed
}

/// Best-improvement single swaps on top of `model`: replace one center by a
/// non-center whenever that strictly lowers the cost, re-running the
/// alternation after each accepted swap. Slot `pinned` is never swapped.
fn swap_search(table: &CostTable, mut model: ClusterModel, pinned: Option<usize>, max_iter: usize) -> ClusterModel {
    let k = model.centers.len();
    let mut history = std::mem::take(&mut model.cost_history);
    for _ in 0..max_iter {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in (0..k).filter(|&s| Some(s) != pinned) {
            for cand in 0..table.n {
                if model.centers.contains(&cand) {
                    continue;
                }
                let mut trial = model.centers.clone();
                trial[slot] = cand;
                let cost = table.cost_of(&trial);
                let bar = best.map_or(model.cost, |b| b.2);
                if cost < bar - 1e-12 * model.cost.abs().max(1e-300) {
                    best = Some((slot, cand, cost));
                }
            }
        }
        let Some((slot, cand, _)) = best else { break };
        let mut centers = model.centers.clone();
        centers[slot] = cand;
        let next = alternate(table, centers, pinned, max_iter);
        history.extend(next.cost_history.iter().copied());
        model = ClusterModel {
            iterations: model.iterations + next.iterations,
            ..next
        };
    }
    model.cost_history = history;
    model
}

/// k-median seeded with `initial` (point indices). Alternates between
/// assigning each point to its nearest center and moving each center to its
/// cluster's weighted medoid, then polishes the result with single swaps.
pub fn kmedian(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    initial: &[usize],
    max_iter: usize,
    p: u32,
) -> Result<ClusterModel> {
    let table = CostTable::new(points, weights, p)?;
    validate_centers(&table, k, initial)?;
    let max_iter = max_iter.max(1);
    let model = alternate(&table, initial.to_vec(), None, max_iter);
    Ok(swap_search(&table, model, None, max_iter))
}

/// Greedy BUILD seeding: repeatedly add the point that lowers cost the most.
fn greedy_build(table: &CostTable, k: usize) -> Vec<usize> {
    let mut centers: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; table.n];
    for _ in 0..k {
        let mut best = (usize::MAX, f64::INFINITY);
        for c in 0..table.n {
            if centers.contains(&c) {
                continue;
            }
            let cost: f64 = (0..table.n)
                .map(|i| table.weights[i] * nearest[i].min(table.d(i, c)))
                .sum();
            if cost < best.1 {
                best = (c, cost);
            }
        }
        let c = best.0;
        centers.push(c);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(table.d(i, c));
        }
    }
    centers
}

/// Non-private k-median approximation: greedy seeding followed by the same
/// alternation and swap search as [`kmedian`].
pub fn local_search_kmedian(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    max_iter: usize,
    p: u32,
) -> Result<ClusterModel> {
    let table = CostTable::new(points, weights, p)?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if table.n < k {
        return Err(Error::InsufficientPoints {
            have: table.n,
            need: k,
        });
    }
    let max_iter = max_iter.max(1);
    let model = alternate(&table, greedy_build(&table, k), None, max_iter);
    Ok(swap_search(&table, model, None, max_iter))
}

/// k-median with `pinned` held as a permanent center in slot 0.
///
/// The other `k − 1` centers start from the members of `initial` other than
/// `pinned`; if `pinned` is not among them, the one nearest to it is dropped.
/// Missing centers (when `initial` is short) are drawn uniformly from the
/// remaining points using `seed`.
#[allow(clippy::too_many_arguments)]
pub fn fixed_center_kmedian(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    pinned: usize,
    initial: &[usize],
    seed: u64,
    max_iter: usize,
    p: u32,
) -> Result<ClusterModel> {
    let table = CostTable::new(points, weights, p)?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if table.n < k {
        return Err(Error::InsufficientPoints {
            have: table.n,
            need: k,
        });
    }
    if pinned >= table.n {
        return Err(Error::InvalidConfig(format!("pinned index {pinned} out of range")));
    }
    let mut others: Vec<usize> = Vec::new();
    for &c in initial {
        if c != pinned && c < table.n && !others.contains(&c) {
            others.push(c);
        }
    }
    while others.len() > k - 1 {
        let (pos, _) = others
            .iter()
            .enumerate()
            .min_by(|a, b| table.d(pinned, *a.1).total_cmp(&table.d(pinned, *b.1)))
            .expect("non-empty");
        others.remove(pos);
    }
    if others.len() < k - 1 {
        let mut pool: Vec<usize> = (0..table.n)
            .filter(|&i| i != pinned && !others.contains(&i))
            .collect();
        pool.shuffle(&mut noise::rng(seed));
        others.extend(pool.into_iter().take(k - 1 - others.len()));
    }
    let mut centers = vec![pinned];
    centers.extend(others);
    let max_iter = max_iter.max(1);
    let model = alternate(&table, centers, Some(0), max_iter);
    Ok(swap_search(&table, model, Some(0), max_iter))
}

/// Clustering cost of fixed `centers` (point indices) without any updates.
pub fn cost_with_centers(points: &[Vec<f64>], weights: &[f64], centers: &[usize], p: u32) -> Result<f64> {
    let table = CostTable::new(points, weights, p)?;
    validate_centers(&table, centers.len(), centers)?;
    Ok(table.cost_of(centers))
}

/// `k` distinct point indices drawn uniformly at random.
pub fn uniform_centers(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if n < k {
        return Err(Error::InsufficientPoints { have: n, need: k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut noise::rng(seed));
    idx.truncate(k);
    Ok(idx)
}

/// Gonzalez seeding: a random first center, then repeatedly the point
/// farthest from all chosen centers (lowest index on ties).
pub fn farthest_point_centers(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if n < k {
        return Err(Error::InsufficientPoints { have: n, need: k });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let first = uniform_centers(n, 1, seed)?[0];
    let mut centers = vec![first];
    let mut gap: Vec<f64> = points.iter().map(|x| euclidean(x, &points[first])).collect();
    while centers.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, &d) in gap.iter().enumerate() {
            if !centers.contains(&i) && d > best.1 {
                best = (i, d);
            }
        }
        let c = best.0;
        centers.push(c);
        for (g, x) in gap.iter_mut().zip(points) {
            *g = g.min(euclidean(x, &points[c]));
        }
    }
    Ok(centers)
}
