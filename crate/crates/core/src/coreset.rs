//! Critical-set generation: random projection, rescaling into the unit
//! ball, a private weighted coreset, and the scaled cost estimate.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmedian;
use crate::noise;

/// Private weighted point set standing in for the embedded vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Input indices that fell into each released point's cell. Not private;
    /// kept for diagnostics only.
    #[serde(skip)]
    pub source_indices: Option<Vec<Vec<usize>>>,
    /// Scaled cost estimate `cost(S_ε)`; zero until [`estimate_cost`] runs.
    pub cost_s_eps: f64,
    pub epsilon_consumed: f64,
}

impl CriticalSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    /// Number of points being reduced.
    pub n: usize,
    /// Source dimension.
    pub d: usize,
    /// Target dimension.
    pub d_prime: usize,
    pub beta: f64,
    pub alpha: f64,
    /// Distance exponent, 1 or 2.
    pub p: u32,
    /// Distortion constant `λ_{p,α/2}` of the underlying coreset construction.
    pub lambda_p_alpha: f64,
}

impl ReductionParams {
    /// Defaults for `n` points in dimension `d`: `d′ = min(d, 20)`,
    /// `α = 0.5`, `β = 0.1`, `p = 1`, `λ_{p,α/2} = 1`.
    pub fn with_defaults(n: usize, d: usize) -> ReductionParams {
        ReductionParams {
            n,
            d,
            d_prime: d.min(20),
            beta: 0.1,
            alpha: 0.5,
            p: 1,
            lambda_p_alpha: 1.0,
        }
    }

    /// Grid resolution `ζ = 0.01·(α / (10·λ_{p,α/2}))^{p/2}`.
    pub fn zeta(&self) -> f64 {
        0.01 * (self.alpha / (10.0 * self.lambda_p_alpha)).powf(self.p as f64 / 2.0)
    }

    /// Rescaling factor `Λ = sqrt(0.01·d / (ln(n/β)·d′))`.
    pub fn big_lambda(&self) -> f64 {
        (0.01 * self.d as f64 / ((self.n as f64 / self.beta).ln() * self.d_prime as f64)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("need at least one point".into());
        }
        if self.d_prime == 0 || self.d_prime > self.d {
            return bad(format!("d' must lie in [1, {}], got {}", self.d, self.d_prime));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.p == 1 || self.p == 2) {
            return bad(format!("p must be 1 or 2, got {}", self.p));
        }
        if !(self.lambda_p_alpha > 0.0 && self.lambda_p_alpha.is_finite()) {
            return bad("lambda_p_alpha must be positive".into());
        }
        Ok(())
    }
}

/// Seeded Gaussian projection `ℝ^d → ℝ^{d′}` with entries `N(0, 1/d′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProjection {
    d: usize,
    d_prime: usize,
    /// Row-major `d′ × d`.
    entries: Vec<f64>,
}

impl RandomProjection {
    pub fn new(d: usize, d_prime: usize, seed: u64) -> RandomProjection {
        let mut rng = noise::rng(seed);
        let var = 1.0 / d_prime as f64;
        let entries = (0..d * d_prime).map(|_| noise::gaussian(&mut rng, var)).collect();
        RandomProjection { d, d_prime, entries }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        Ok((0..self.d_prime)
            .map(|r| {
                let row = &self.entries[r * self.d..(r + 1) * self.d];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect())
    }
}

/// `Λ·x̃` if `‖x̃‖ ≤ 1/Λ`, else the zero vector.
pub fn rescale(projected: &[f64], big_lambda: f64) -> Vec<f64> {
    let norm = kmedian::euclidean(projected, &vec![0.0; projected.len()]);
    if norm <= 1.0 / big_lambda {
        projected.iter().map(|v| v * big_lambda).collect()
    } else {
        vec![0.0; projected.len()]
    }
}

/// Projects every point to `d′` dimensions and rescales it into the unit
/// ball; points too long to fit are replaced by the origin.
pub fn reduce_and_rescale(points: &[Vec<f64>], params: &ReductionParams, seed: u64) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::InsufficientPoints { have: 0, need: 1 });
    }
    let proj = RandomProjection::new(params.d, params.d_prime, seed);
    let big_lambda = params.big_lambda();
    points
        .iter()
        .map(|x| proj.apply(x).map(|t| rescale(&t, big_lambda)))
        .collect()
}

/// A private coreset construction over points in the unit ball.
pub trait CoresetBuilder {
    fn build(&self, points: &[Vec<f64>], seed: u64) -> Result<CriticalSet>;
}

/// Single-resolution noisy grid: cells of side `cell_width`, each occupied
/// cell's count perturbed by `Lap(2/ε)`, and only cells whose noisy count
/// reaches `2·(2/ε)·ln(1/β)` released as (cell center, noisy count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyGridCoreset {
    pub cell_width: f64,
    pub epsilon: f64,
    pub beta: f64,
}

impl NoisyGridCoreset {
    pub fn laplace_scale(&self) -> f64 {
        if noise::privacy_disabled(self.epsilon) {
            0.0
        } else {
            2.0 / self.epsilon
        }
    }

    pub fn threshold(&self) -> f64 {
        2.0 * self.laplace_scale() * (1.0 / self.beta).ln()
    }

    fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.cell_width).floor() as i64).collect()
    }
}

impl CoresetBuilder for NoisyGridCoreset {
    fn build(&self, points: &[Vec<f64>], seed: u64) -> Result<CriticalSet> {
        noise::validate_epsilon(self.epsilon)?;
        if !(self.cell_width > 0.0 && self.cell_width.is_finite()) {
            return Err(Error::InvalidConfig("cell width must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig("beta must lie in (0, 1)".into()));
        }
        let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for (i, x) in points.iter().enumerate() {
            cells.entry(self.cell_of(x)).or_default().push(i);
        }
        let mut rng = noise::rng(seed);
        let scale = self.laplace_scale();
        let threshold = self.threshold();
        let mut out = CriticalSet {
            points: Vec::new(),
            weights: Vec::new(),
            source_indices: Some(Vec::new()),
            cost_s_eps: 0.0,
            epsilon_consumed: self.epsilon,
        };
        for (cell, members) in cells {
            let noisy = members.len() as f64 + noise::laplace(&mut rng, scale);
            if noisy >= threshold && noisy > 0.0 {
                out.points
                    .push(cell.iter().map(|&c| (c as f64 + 0.5) * self.cell_width).collect());
                out.weights.push(noisy);
                if let Some(src) = out.source_indices.as_mut() {
                    src.push(members);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyCoreset);
        }
        Ok(out)
    }
}

/// Builds the noisy-grid critical set with cell width `zeta`.
pub fn private_coreset(points: &[Vec<f64>], zeta: f64, epsilon: f64, beta: f64, seed: u64) -> Result<CriticalSet> {
    NoisyGridCoreset {
        cell_width: zeta,
        epsilon,
        beta,
    }
    .build(points, seed)
}

/// `(ln(n/β)/0.01)^{p/2}`, the factor lifting reduced-space costs back to
/// the original scale.
pub fn cost_multiplier(n: usize, beta: f64, p: u32) -> f64 {
    ((n as f64 / beta).ln() / 0.01).powf(p as f64 / 2.0)
}

/// Runs the non-private local-search k-median on the coreset, stores
/// `multiplier · cost` in `coreset.cost_s_eps`, and returns it along with
/// the underlying solution.
pub fn estimate_cost(
    coreset: &mut CriticalSet,
    k: usize,
    n: usize,
    beta: f64,
    p: u32,
) -> Result<(f64, kmedian::ClusterModel)> {
    if coreset.len() < k {
        return Err(Error::InsufficientPoints {
            have: coreset.len(),
            need: k,
        });
    }
    let model = kmedian::local_search_kmedian(&coreset.points, &coreset.weights, k, 100, p)?;
    coreset.cost_s_eps = cost_multiplier(n, beta, p) * model.cost;
    Ok((coreset.cost_s_eps, model))
}

/// `weight<TAB>c1,…,cd′` per line.
pub fn write_coreset<W: Write>(set: &CriticalSet, mut out: W) -> std::io::Result<()> {
    for (w, x) in set.weights.iter().zip(&set.points) {
        let cs: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{w:e}\t{}", cs.join(","))?;
    }
    Ok(())
}
