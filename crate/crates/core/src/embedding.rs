//! Gaussian-perturbed spectral embedding of the SDP Gram matrix.

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::noise;

/// Parameters of the Gaussian mechanism applied to `n·D^{1/2} X₁ D^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// `f64::INFINITY` disables the noise.
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    /// Edge count of the input graph.
    pub m: usize,
}

impl NoiseSpec {
    /// Per-entry variance `24(λ+3)·m·ln(2/δ)/ε²`; zero when privacy is disabled.
    pub fn variance(&self) -> f64 {
        if noise::privacy_disabled(self.epsilon) {
            return 0.0;
        }
        24.0 * (self.lambda + 3.0) * self.m as f64 * (2.0 / self.delta).ln()
            / (self.epsilon * self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        noise::validate_epsilon(self.epsilon)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("edge count must be positive".into()));
        }
        Ok(())
    }
}

/// Which end of the spectrum of `X₂` supplies the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenOrder {
    Smallest,
    #[default]
    Largest,
}

impl std::str::FromStr for EigenOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smallest" => Ok(EigenOrder::Smallest),
            "largest" => Ok(EigenOrder::Largest),
            other => Err(Error::InvalidConfig(format!("unknown eigen order `{other}`"))),
        }
    }
}

/// Global scale applied to `F` before it enters the critical-set stage.
///
/// With unit eigenvectors every coordinate is of order `1/√(n·d̄)`, far below
/// the grid resolution of the critical set. `Volume` multiplies by `√(2m)`,
/// which maps the degree-proportional direction to coordinate 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingScale {
    Unit,
    #[default]
    Volume,
}

impl EmbeddingScale {
    pub fn factor(self, g: &Graph) -> f64 {
        match self {
            EmbeddingScale::Unit => 1.0,
            EmbeddingScale::Volume => (2.0 * g.edge_count() as f64).sqrt(),
        }
    }
}

impl std::str::FromStr for EmbeddingScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(EmbeddingScale::Unit),
            "volume" => Ok(EmbeddingScale::Volume),
            other => Err(Error::InvalidConfig(format!("unknown embedding scale `{other}`"))),
        }
    }
}

impl EmbeddingMap {
    /// Multiplies every coordinate by `factor`.
    pub fn scaled(mut self, factor: f64) -> EmbeddingMap {
        for c in &mut self.coords {
            for v in c.iter_mut() {
                *v *= factor;
            }
        }
        self
    }
}

/// Per-vertex `k`-dimensional coordinates `F(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMap {
    pub dimension: usize,
    pub coords: Vec<Vec<f64>>,
    /// Eigenvalues behind each coordinate axis, in selection order.
    pub eigenvalues: Vec<f64>,
    /// Largest `‖X₂f − μf‖₂` over the selected eigenpairs.
    pub max_residual: f64,
}

/// Matrix of i.i.d. `N(0, spec.variance())` entries, filled row by row
/// from a ChaCha stream seeded with `seed`.
pub fn gaussian_noise_matrix(n: usize, spec: &NoiseSpec, seed: u64) -> DMatrix<f64> {
    let variance = spec.variance();
    if variance == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let mut rng = noise::rng(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] = noise::gaussian(&mut rng, variance);
        }
    }
    w
}

/// `(X₂ + X₂ᵀ)/2` with `X₂ = n·D^{1/2} X₁ D^{1/2} + W`.
pub fn perturbed_gram(x1: &DMatrix<f64>, g: &Graph, spec: &NoiseSpec, seed: u64) -> DMatrix<f64> {
    let n = g.vertex_count();
    let nf = n as f64;
    let sqrt_d: Vec<f64> = g.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    let w = gaussian_noise_matrix(n, spec, seed);
    let x2 = DMatrix::from_fn(n, n, |i, j| nf * sqrt_d[i] * x1[(i, j)] * sqrt_d[j] + w[(i, j)]);
    (&x2 + x2.transpose()) * 0.5
}

const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Embeds every vertex as `F(u) = d(u)^{-1/2}·(f₁(u), …, f_k(u))`, where the
/// `f_i` are unit eigenvectors of the perturbed Gram matrix.
///
/// Eigenvector signs are fixed so that the first entry of magnitude above
/// `1e-12` is positive; equal eigenvalues keep the solver's column order.
pub fn spectral_embed(
    x1: &DMatrix<f64>,
    g: &Graph,
    k: usize,
    spec: &NoiseSpec,
    order: EigenOrder,
    seed: u64,
) -> Result<EmbeddingMap> {
    let n = g.vertex_count();
    if x1.nrows() != n || x1.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x1.nrows(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k must lie in [1, {n}], got {k}")));
    }
    spec.validate()?;
    g.require_no_isolated()?;

    let x2 = perturbed_gram(x1, g, spec, seed);
    let eig = x2.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        let ord = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
        let ord = match order {
            EigenOrder::Smallest => ord,
            EigenOrder::Largest => ord.reverse(),
        };
        if ord == Ordering::Equal {
            a.cmp(&b)
        } else {
            ord
        }
    });

    let scale = x2.norm();
    let mut max_residual: f64 = 0.0;
    let mut vectors = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &c in idx.iter().take(k) {
        let mut f = eig.eigenvectors.column(c).into_owned();
        let norm = f.norm();
        if norm > 0.0 {
            f /= norm;
        }
        if let Some(first) = f.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                f = -f;
            }
        }
        let mu = eig.eigenvalues[c];
        let residual = (&x2 * &f - &f * mu).norm();
        max_residual = max_residual.max(residual);
        vectors.push(f);
        eigenvalues.push(mu);
    }
    let tolerance = RESIDUAL_TOLERANCE * scale;
    if max_residual > tolerance {
        return Err(Error::EigensolveFailure {
            residual: max_residual,
            tolerance,
        });
    }

    let coords = (0..n)
        .map(|u| {
            let s = (g.degree(u) as f64).powf(-0.5);
            vectors.iter().map(|f| s * f[u]).collect()
        })
        .collect();
    Ok(EmbeddingMap {
        dimension: k,
        coords,
        eigenvalues,
        max_residual,
    })
}

/// `vertex<TAB>c1,…,ck` per line, using external vertex ids.
pub fn write_embedding<W: Write>(emb: &EmbeddingMap, g: &Graph, mut out: W) -> std::io::Result<()> {
    for (u, c) in emb.coords.iter().enumerate() {
        let cs: Vec<String> = c.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}\t{}", g.external_id(u), cs.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve_sdp, SdpConfig};

    fn spec(epsilon: f64, m: usize) -> NoiseSpec {
        NoiseSpec {
            epsilon,
            delta: 1e-5,
            lambda: 1.0,
            m,
        }
    }

    fn two_triangles() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn variance_formula() {
        let s = spec(1.0, 100);
        let expected = 24.0 * 4.0 * 100.0 * (2e5f64).ln();
        assert!((s.variance() - expected).abs() < 1e-9);
        assert!((expected - 117_178.297).abs() < 1e-3);
        assert_eq!(spec(f64::INFINITY, 100).variance(), 0.0);
        let half = spec(2.0, 100);
        assert!((half.variance() * 4.0 - expected).abs() < 1e-9);
    }

    #[test]
    fn noise_disabled_is_zero() {
        let w = gaussian_noise_matrix(5, &spec(f64::INFINITY, 10), 1);
        assert_eq!(w, DMatrix::zeros(5, 5));
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let s = spec(1.0, 10);
        assert_eq!(gaussian_noise_matrix(4, &s, 9), gaussian_noise_matrix(4, &s, 9));
        assert_ne!(gaussian_noise_matrix(4, &s, 9), gaussian_noise_matrix(4, &s, 10));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(0.0, 1).validate().is_err());
        assert!(NoiseSpec { delta: 1.0, ..spec(1.0, 1) }.validate().is_err());
        assert!(spec(1.0, 0).validate().is_err());
        assert!(spec(f64::INFINITY, 1).validate().is_ok());
    }

    #[test]
    fn regular_graph_degenerate_spectrum() {
        // X₁ = I/n on a 2-regular graph gives X₂ = 2I.
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let x1 = DMatrix::<f64>::identity(5, 5) / 5.0;
        let s = spec(f64::INFINITY, g.edge_count());
        for order in [EigenOrder::Smallest, EigenOrder::Largest] {
            let emb = spectral_embed(&x1, &g, 3, &s, order, 0).unwrap();
            assert!(emb.max_residual <= 1e-8);
            assert!(emb.eigenvalues.iter().all(|&mu| (mu - 2.0).abs() < 1e-12));
            // Undo the degree scaling and check orthonormality.
            let f: Vec<Vec<f64>> = (0..3)
                .map(|a| emb.coords.iter().map(|c| c[a] * 2f64.sqrt()).collect())
                .collect();
            for a in 0..3 {
                for b in 0..3 {
                    let dot: f64 = f[a].iter().zip(&f[b]).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn selected_eigenvalues_match_dense_oracle() {
        let g = Graph::from_edges(
            8,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (2, 6)],
        )
        .unwrap();
        let x1 = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.125 } else { 0.01 * ((i + j) % 3) as f64 });
        let s = spec(2.0, g.edge_count());
        let x2 = perturbed_gram(&x1, &g, &s, 4);
        let mut all: Vec<f64> = x2.symmetric_eigenvalues().iter().copied().collect();
        all.sort_by(f64::total_cmp);
        let small = spectral_embed(&x1, &g, 3, &s, EigenOrder::Smallest, 4).unwrap();
        let large = spectral_embed(&x1, &g, 3, &s, EigenOrder::Largest, 4).unwrap();
        for i in 0..3 {
            assert!((small.eigenvalues[i] - all[i]).abs() < 1e-8 * x2.norm());
            assert!((large.eigenvalues[i] - all[7 - i]).abs() < 1e-8 * x2.norm());
        }
        assert!(small.max_residual <= 1e-8 * x2.norm());
    }

    #[test]
    fn two_triangles_separate_noise_free() {
        let g = two_triangles();
        let sol = solve_sdp(&g, &SdpConfig::default()).unwrap();
        let s = spec(f64::INFINITY, g.edge_count());
        let emb = spectral_embed(&sol.x1, &g, 2, &s, EigenOrder::Largest, 0).unwrap();
        let c = &emb.coords;
        let mut within: f64 = 0.0;
        let mut between = f64::INFINITY;
        for u in 0..6 {
            for v in (u + 1)..6 {
                let d = dist(&c[u], &c[v]);
                if u / 3 == v / 3 {
                    within = within.max(d);
                } else {
                    between = between.min(d);
                }
            }
        }
        assert!(within < between, "within {within} between {between}");
    }

    #[test]
    fn smallest_order_does_not_separate_two_triangles() {
        // The bottom of the spectrum is the within-triangle contrast space,
        // which is why the embedding defaults to the top of the spectrum.
        let g = two_triangles();
        let sol = solve_sdp(&g, &SdpConfig::default()).unwrap();
        let s = spec(f64::INFINITY, g.edge_count());
        let emb = spectral_embed(&sol.x1, &g, 2, &s, EigenOrder::Smallest, 0).unwrap();
        let sums: Vec<f64> = (0..2)
            .map(|a| emb.coords[0..3].iter().map(|c| c[a]).sum::<f64>())
            .collect();
        // Each selected eigenvector sums to zero inside a triangle.
        assert!(sums.iter().all(|s| s.abs() < 1e-8));
    }

    #[test]
    fn embedding_deterministic_and_finite() {
        let g = two_triangles();
        let x1 = DMatrix::<f64>::identity(6, 6) / 6.0;
        let s = spec(1.0, g.edge_count());
        let a = spectral_embed(&x1, &g, 2, &s, EigenOrder::Smallest, 77).unwrap();
        let b = spectral_embed(&x1, &g, 2, &s, EigenOrder::Smallest, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.coords.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(a.coords.len(), 6);
    }

    #[test]
    fn equivariant_under_relabelling() {
        let g = Graph::from_edges(
            7,
            &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6), (3, 5)],
        )
        .unwrap();
        let perm = [3, 6, 0, 5, 1, 4, 2];
        let h = g.permuted(&perm).unwrap();
        let cfg = SdpConfig::default();
        let xg = solve_sdp(&g, &cfg).unwrap().x1;
        let xh = solve_sdp(&h, &cfg).unwrap().x1;
        let s = spec(f64::INFINITY, g.edge_count());
        let eg = spectral_embed(&xg, &g, 2, &s, EigenOrder::Largest, 0).unwrap();
        let eh = spectral_embed(&xh, &h, 2, &s, EigenOrder::Largest, 0).unwrap();
        for (u, &pu) in perm.iter().enumerate() {
            for a in 0..2 {
                // Eigenvectors are unique only up to sign.
                let x = eg.coords[u][a];
                let y = eh.coords[pu][a];
                assert!((x.abs() - y.abs()).abs() < 1e-5, "u={u} a={a}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = two_triangles();
        let s = spec(1.0, 6);
        let x1 = DMatrix::<f64>::identity(6, 6) / 6.0;
        assert!(spectral_embed(&x1, &g, 0, &s, EigenOrder::Largest, 0).is_err());
        assert!(spectral_embed(&x1, &g, 7, &s, EigenOrder::Largest, 0).is_err());
        assert!(matches!(
            spectral_embed(&DMatrix::zeros(5, 5), &g, 2, &s, EigenOrder::Largest, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let iso = Graph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(matches!(
            spectral_embed(&DMatrix::zeros(3, 3), &iso, 1, &spec(1.0, 1), EigenOrder::Largest, 0),
            Err(Error::DegreeZero { vertex: 2 })
        ));
    }

    #[test]
    fn dump_format() {
        let g = two_triangles();
        let emb = EmbeddingMap {
            dimension: 2,
            coords: vec![vec![0.5, -1.0]; 6],
            eigenvalues: vec![1.0, 0.0],
            max_residual: 0.0,
        };
        let mut buf = Vec::new();
        write_embedding(&emb, &g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("0\t5e-1,-1e0"));
        assert_eq!(text.lines().count(), 6);
    }
}
