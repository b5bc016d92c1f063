//! Matrix-form SDP relaxation of the balanced graph cut.
//!
//! Minimises `⟨L_G, X⟩ + n/(λm)·‖D^{1/2} X D^{1/2}‖_F²` over
//!
//! ```text
//! D = { ⟨D_G L_V D_G, X⟩ ≥ θ,  X ⪰ 0,  X ≥ 0,  X_ii = 1/n }
//! ```
//!
//! with `L_V = nI − J`, the Laplacian of the complete graph on `V`. The
//! threshold is `θ = b·m²/n + Σd² − 4m²/n`; on the slice `X_ii = 1/n` this
//! is exactly the vector-form constraint `Σ_{u,v} ‖ū − v̄‖² d(u)d(v) ≥ 2bm²`
//! under `X_uv = ū·v̄/n`. For regular graphs it reduces to `b·m²/n`.
//!
//! The solver is projected gradient descent with backtracking; projection
//! onto `D` is Dykstra's algorithm cycling over the four constraint sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian_and_degrees, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpConfig {
    /// Trade-off coefficient λ between cut cost and the degree-weighted regulariser.
    pub lambda: f64,
    /// Volume-balance lower bound.
    pub b: f64,
    pub max_iterations: usize,
    /// Initial gradient step in units of `1/Lipschitz`.
    pub step_size: f64,
    pub feasibility_tolerance: f64,
    /// Stop once the relative objective decrease of an accepted step falls below this.
    pub objective_tolerance: f64,
    /// Dykstra cycles allowed per projection.
    pub projection_cycles: usize,
}

impl Default for SdpConfig {
    fn default() -> Self {
        SdpConfig {
            lambda: 1.0,
            b: 0.4,
            max_iterations: 5000,
            step_size: 1.0,
            feasibility_tolerance: 1e-6,
            objective_tolerance: 1e-8,
            projection_cycles: 500,
        }
    }
}

impl SdpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive and finite");
        }
        if !self.b.is_finite() {
            return bad("b must be finite");
        }
        if self.max_iterations == 0 || self.projection_cycles == 0 {
            return bad("iteration limits must be at least 1");
        }
        if self.step_size.is_nan() || self.step_size <= 0.0 {
            return bad("step size must be positive");
        }
        if [self.feasibility_tolerance, self.objective_tolerance]
            .iter()
            .any(|t| t.is_nan() || *t <= 0.0)
        {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

/// Constraint residuals of a candidate Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `max_i |X_ii − 1/n|`
    pub diag_residual: f64,
    pub min_eigenvalue: f64,
    pub min_entry: f64,
    /// `⟨D L_V D, X⟩ − θ`; negative when the volume constraint is violated.
    pub volume_slack: f64,
}

impl Feasibility {
    /// Volume slack is compared relative to `max(1, |θ|)`.
    pub fn within(&self, tol: f64, threshold: f64) -> bool {
        self.diag_residual <= tol
            && self.min_eigenvalue >= -tol
            && self.min_entry >= -tol
            && self.volume_slack >= -tol * threshold.abs().max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct GramSolution {
    pub x1: DMatrix<f64>,
    pub objective_value: f64,
    pub feasibility: Feasibility,
    pub iterations: usize,
    /// Objective of every accepted iterate, starting with the initial point.
    pub objective_history: Vec<f64>,
    /// Objective tolerance reached with a feasible iterate.
    pub converged: bool,
    /// Feasibility residuals within tolerance.
    pub feasible: bool,
    pub volume_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: DMatrix<f64>,
    pub feasibility: Feasibility,
    pub cycles: usize,
    pub converged: bool,
}

/// Precomputed data of one SDP instance.
#[derive(Debug, Clone)]
pub(crate) struct SdpProblem {
    n: usize,
    laplacian: DMatrix<f64>,
    /// `d_i d_j`
    degree_outer: DMatrix<f64>,
    /// `n / (λm)`
    reg_coef: f64,
    /// `D L_V D = n D² − d dᵀ`
    volume_normal: DMatrix<f64>,
    volume_normal_sq: f64,
    volume_threshold: f64,
}

impl SdpProblem {
    pub(crate) fn new(g: &Graph, lambda: f64, b: f64) -> SdpProblem {
        let n = g.vertex_count();
        let nf = n as f64;
        let m = g.edge_count() as f64;
        let (laplacian, _) = laplacian_and_degrees(g);
        let d = DVector::from_iterator(n, g.degrees().iter().map(|&x| x as f64));
        let degree_outer = &d * d.transpose();
        let mut volume_normal = -&degree_outer;
        for i in 0..n {
            volume_normal[(i, i)] += nf * d[i] * d[i];
        }
        let sum_d2 = d.norm_squared();
        SdpProblem {
            n,
            laplacian,
            reg_coef: nf / (lambda * m),
            volume_normal_sq: volume_normal.norm_squared(),
            volume_normal,
            degree_outer,
            volume_threshold: volume_threshold(g, b, sum_d2),
        }
    }

    pub(crate) fn objective(&self, x: &DMatrix<f64>) -> f64 {
        let cut = self.laplacian.dot(x);
        let reg: f64 = x
            .iter()
            .zip(self.degree_outer.iter())
            .map(|(xij, w)| w * xij * xij)
            .sum();
        cut + self.reg_coef * reg
    }

    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = self.laplacian.clone();
        for ((gij, xij), w) in g.iter_mut().zip(x.iter()).zip(self.degree_outer.iter()) {
            *gij += 2.0 * self.reg_coef * w * xij;
        }
        g
    }

    fn lipschitz(&self) -> f64 {
        let wmax = self.degree_outer.max();
        (2.0 * self.reg_coef * wmax).max(f64::MIN_POSITIVE)
    }

    pub(crate) fn feasibility(&self, x: &DMatrix<f64>) -> Feasibility {
        let target = 1.0 / self.n as f64;
        let diag_residual = x
            .diagonal()
            .iter()
            .map(|v| (v - target).abs())
            .fold(0.0, f64::max);
        let sym = (x + x.transpose()) * 0.5;
        let min_eigenvalue = sym.symmetric_eigenvalues().min();
        Feasibility {
            diag_residual,
            min_eigenvalue,
            min_entry: x.min(),
            volume_slack: self.volume_normal.dot(x) - self.volume_threshold,
        }
    }

    fn project_volume(&self, x: &mut DMatrix<f64>) {
        let slack = self.volume_normal.dot(x) - self.volume_threshold;
        if slack < 0.0 && self.volume_normal_sq > 0.0 {
            *x += &self.volume_normal * (-slack / self.volume_normal_sq);
        }
    }

    fn project_diag(&self, x: &mut DMatrix<f64>) {
        let target = 1.0 / self.n as f64;
        for i in 0..self.n {
            x[(i, i)] = target;
        }
    }

    /// Dykstra's alternating projection onto the feasible region, starting at `y`.
    pub(crate) fn project(&self, y: &DMatrix<f64>, cycles: usize, tol: f64) -> Projection {
        let n = self.n;
        let mut x = (y + y.transpose()) * 0.5;
        let quick = self.cheap_residuals(&x);
        if quick.within(tol, self.volume_threshold) && is_psd(&x) {
            let feasibility = self.feasibility(&x);
            return Projection {
                matrix: x,
                feasibility,
                cycles: 0,
                converged: true,
            };
        }
        // One correction term per constraint set.
        let mut corr = [
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
        ];
        let mut used = 0;
        let mut converged = false;
        for cycle in 1..=cycles {
            used = cycle;
            let previous = x.clone();
            for (set, c) in corr.iter_mut().enumerate() {
                let before = &x + &*c;
                let mut after = before.clone();
                match set {
                    0 => self.project_volume(&mut after),
                    1 => after.apply(|v| *v = v.max(0.0)),
                    2 => self.project_diag(&mut after),
                    _ => project_psd(&mut after),
                }
                *c = before - &after;
                x = after;
            }
            // Feasible is not enough: Dykstra iterates can enter the region
            // well before they reach the projection point.
            let moved = (&x - &previous).amax();
            // Last set is the PSD cone, so only the cheap residuals need checking.
            if moved <= tol * STATIONARY_FACTOR
                && self.cheap_residuals(&x).within(tol, self.volume_threshold)
            {
                converged = true;
                break;
            }
        }
        let feasibility = self.feasibility(&x);
        Projection {
            converged: converged && feasibility.within(tol, self.volume_threshold),
            matrix: x,
            feasibility,
            cycles: used,
        }
    }

    fn cheap_residuals(&self, x: &DMatrix<f64>) -> Feasibility {
        let target = 1.0 / self.n as f64;
        Feasibility {
            diag_residual: x
                .diagonal()
                .iter()
                .map(|v| (v - target).abs())
                .fold(0.0, f64::max),
            min_eigenvalue: 0.0,
            min_entry: x.min(),
            volume_slack: self.volume_normal.dot(x) - self.volume_threshold,
        }
    }
}

/// A projection counts as converged once no entry moves by more than this
/// fraction of the feasibility tolerance over a full cycle.
const STATIONARY_FACTOR: f64 = 1e-2;

/// `θ = b·m²/n + Σd² − 4m²/n`.
fn volume_threshold(g: &Graph, b: f64, sum_d2: f64) -> f64 {
    let n = g.vertex_count() as f64;
    let m = g.edge_count() as f64;
    b * m * m / n + sum_d2 - 4.0 * m * m / n
}

fn is_psd(x: &DMatrix<f64>) -> bool {
    let n = x.nrows();
    let shift = 1e-14 * x.diagonal().amax().max(1.0);
    let shifted = x + DMatrix::identity(n, n) * shift;
    shifted.cholesky().is_some()
}

/// Euclidean projection onto the PSD cone by clipping negative eigenvalues.
fn project_psd(x: &mut DMatrix<f64>) {
    if is_psd(x) {
        return;
    }
    let sym = (&*x + x.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * clipped[j]);
    let mut out = &scaled * v.transpose();
    // Re-symmetrise away round-off.
    out = (&out + out.transpose()) * 0.5;
    *x = out;
}

fn check_dims(x: &DMatrix<f64>, g: &Graph) -> Result<()> {
    let n = g.vertex_count();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if x.nrows() != n { x.nrows() } else { x.ncols() },
        });
    }
    Ok(())
}

/// `⟨L_G, X⟩ + n/(λm)·‖D^{1/2} X D^{1/2}‖_F²`.
pub fn objective(x: &DMatrix<f64>, g: &Graph, lambda: f64) -> Result<f64> {
    check_dims(x, g)?;
    Ok(SdpProblem::new(g, lambda, 0.0).objective(x))
}

/// Residuals of `x` against the feasible region for volume bound `b`.
pub fn feasibility(x: &DMatrix<f64>, g: &Graph, b: f64) -> Result<Feasibility> {
    check_dims(x, g)?;
    Ok(SdpProblem::new(g, 1.0, b).feasibility(x))
}

/// Threshold `θ` of the volume half-space for this graph and `b`.
pub fn volume_bound(g: &Graph, b: f64) -> f64 {
    let sum_d2: f64 = g.degrees().iter().map(|&d| (d * d) as f64).sum();
    volume_threshold(g, b, sum_d2)
}

/// Projects `x` approximately onto the feasible region. A projection that
/// runs out of cycles is returned with `converged = false`.
pub fn project_feasible(
    x: &DMatrix<f64>,
    g: &Graph,
    b: f64,
    cycles: usize,
    tolerance: f64,
) -> Result<Projection> {
    check_dims(x, g)?;
    Ok(SdpProblem::new(g, 1.0, b).project(x, cycles, tolerance))
}

/// Solves the relaxation from `X⁰ = I/n`. Deterministic.
pub fn solve_sdp(g: &Graph, cfg: &SdpConfig) -> Result<GramSolution> {
    cfg.validate()?;
    let problem = SdpProblem::new(g, cfg.lambda, cfg.b);
    let n = g.vertex_count();
    let tol = cfg.feasibility_tolerance;
    let theta = problem.volume_threshold;

    let start = DMatrix::<f64>::identity(n, n) / n as f64;
    let first = problem.project(&start, cfg.projection_cycles, tol);
    let mut x = first.matrix;
    let mut feas = first.feasibility;
    let mut f = problem.objective(&x);
    let mut history = vec![f];

    let lipschitz = problem.lipschitz();
    let max_step = cfg.step_size / lipschitz;
    let min_step = max_step * 1e-12;
    let mut step = max_step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let grad = problem.gradient(&x);
        let mut accepted = None;
        while step >= min_step {
            let trial = &x - &grad * step;
            let proj = problem.project(&trial, cfg.projection_cycles, tol);
            let diff = &proj.matrix - &x;
            let f_new = problem.objective(&proj.matrix);
            let model = f + grad.dot(&diff) + diff.norm_squared() / (2.0 * step);
            let feasible = proj.feasibility.within(tol, theta);
            if f_new <= model + 1e-15 * f.abs().max(1.0) && f_new <= f && feasible {
                accepted = Some((proj, f_new));
                break;
            }
            step *= 0.5;
        }
        let Some((proj, f_new)) = accepted else {
            // No descent step exists at machine resolution: stationary.
            converged = feas.within(tol, theta);
            break;
        };
        let decrease = f - f_new;
        x = proj.matrix;
        feas = proj.feasibility;
        f = f_new;
        history.push(f);
        if decrease <= cfg.objective_tolerance * f.abs().max(1.0) {
            converged = true;
            break;
        }
        step = (step * 2.0).min(max_step);
    }

    let feasible = feas.within(tol, theta);
    if !feasible {
        log::warn!(
            "sdp: returned iterate violates feasibility tolerance {tol:e}: {feas:?}"
        );
    }
    Ok(GramSolution {
        objective_value: f,
        feasibility: feas,
        iterations,
        objective_history: history,
        converged: converged && feasible,
        feasible,
        volume_threshold: theta,
        x1: x,
    })
}

/// Row-major text dump: a `n n` header line, then one row per line.
pub fn write_matrix<W: std::io::Write>(x: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", x.nrows(), x.ncols())?;
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format!("{:e}", x[(i, j)])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Partition;
    use crate::noise;
    use rand_distr::{Distribution, StandardNormal};

    fn two_triangles() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    #[test]
    fn objective_single_edge_identity() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let x = DMatrix::<f64>::identity(2, 2) / 2.0;
        // ⟨L, I/2⟩ = 1;  (2/1)·(1/4 + 1/4) = 1.
        assert!((objective(&x, &g, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(objective(&DMatrix::zeros(2, 2), &g, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn objective_regulariser_scales_with_inverse_lambda() {
        let g = two_triangles();
        let x = DMatrix::from_fn(6, 6, |i, j| 0.01 * (1 + i + 2 * j) as f64);
        let cut = objective(&x, &g, f64::INFINITY).unwrap();
        let r1 = objective(&x, &g, 1.0).unwrap() - cut;
        let r2 = objective(&x, &g, 2.0).unwrap() - cut;
        assert!((r1 / 2.0 - r2).abs() < 1e-12);
        assert!(matches!(
            objective(&DMatrix::zeros(3, 3), &g, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn volume_threshold_matches_vector_form() {
        // Irregular graph; unit vectors ū, X = ū·v̄/n.
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (3, 4), (1, 2)]).unwrap();
        let n = 5;
        let m = g.edge_count() as f64;
        let mut rng = noise::rng(3);
        for b in [0.1, 0.4, 0.8] {
            for _ in 0..20 {
                let vecs: Vec<DVector<f64>> = (0..n)
                    .map(|_| {
                        let v = DVector::from_fn(3, |_, _| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            z.abs()
                        });
                        v.normalize()
                    })
                    .collect();
                let x = DMatrix::from_fn(n, n, |i, j| vecs[i].dot(&vecs[j]) / n as f64);
                let mut lhs_vec = 0.0;
                for u in 0..n {
                    for v in 0..n {
                        lhs_vec += (&vecs[u] - &vecs[v]).norm_squared()
                            * (g.degree(u) * g.degree(v)) as f64;
                    }
                }
                let vector_form = lhs_vec - 2.0 * b * m * m;
                let slack = feasibility(&x, &g, b).unwrap().volume_slack;
                // Both slacks agree up to the positive factor 2n.
                assert!((vector_form - 2.0 * n as f64 * slack).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn regular_graph_threshold_is_bm2_over_n() {
        let g = two_triangles();
        let theta = volume_bound(&g, 0.45);
        assert!((theta - 0.45 * 36.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn projection_fixed_point() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let x = DMatrix::<f64>::identity(3, 3) / 3.0;
        let p = project_feasible(&x, &g, 0.05, 100, 1e-9).unwrap();
        assert!((&p.matrix - &x).amax() < 1e-9);
        assert!(p.converged);
    }

    #[test]
    fn projection_clips_negative_entry() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut x = DMatrix::<f64>::identity(3, 3) / 3.0;
        x[(0, 1)] = -0.1;
        x[(1, 0)] = -0.1;
        let p = project_feasible(&x, &g, 0.05, 500, 1e-6).unwrap();
        assert!(p.matrix.min() >= -1e-6);
        assert!(p.converged);
    }

    #[test]
    fn projection_of_random_symmetric_matrix() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)])
            .unwrap();
        let mut rng = noise::rng(5);
        let a = DMatrix::from_fn(6, 6, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.3 * z
        });
        let x = (&a + a.transpose()) * 0.5;
        let p = project_feasible(&x, &g, 0.3, 500, 1e-6).unwrap();
        let f = p.feasibility;
        assert!(p.converged, "{f:?} after {} cycles", p.cycles);
        assert!(f.diag_residual <= 1e-6);
        assert!(f.min_eigenvalue >= -1e-6);
        assert!(f.min_entry >= -1e-6);
        assert!(f.volume_slack >= -1e-6 * volume_bound(&g, 0.3).abs().max(1.0));
    }

    #[test]
    fn two_triangles_beats_partition_matrix() {
        let g = two_triangles();
        let cfg = SdpConfig {
            b: 0.45,
            ..SdpConfig::default()
        };
        let sol = solve_sdp(&g, &cfg).unwrap();
        assert!(sol.feasible && sol.converged);
        let xp = Partition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap().gram_matrix();
        assert!(feasibility(&xp, &g, 0.45).unwrap().within(1e-12, 1.0));
        let fp = objective(&xp, &g, 1.0).unwrap();
        assert!(sol.objective_value <= fp + 1e-6, "{} vs {fp}", sol.objective_value);
        // Along X_P·t + (1−t)·I/n the optimum is t = 3/4 with value 23/12.
        assert!(sol.objective_value <= 23.0 / 12.0 + 1e-6);
    }

    #[test]
    fn objective_history_non_increasing() {
        let g = Graph::from_edges(7, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6)])
            .unwrap();
        let sol = solve_sdp(&g, &SdpConfig::default()).unwrap();
        assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(sol.objective_history.len() >= 2);
    }

    #[test]
    fn infeasible_constraints_are_flagged_not_fatal() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let cfg = SdpConfig {
            b: 3.0,
            max_iterations: 50,
            projection_cycles: 50,
            ..SdpConfig::default()
        };
        let sol = solve_sdp(&g, &cfg).unwrap();
        assert!(!sol.feasible);
        assert!(!sol.converged);
        assert!(sol.objective_value.is_finite());
    }

    #[test]
    fn reported_residuals_match_recomputation() {
        let g = two_triangles();
        let sol = solve_sdp(&g, &SdpConfig::default()).unwrap();
        let again = feasibility(&sol.x1, &g, 0.4).unwrap();
        assert!((again.diag_residual - sol.feasibility.diag_residual).abs() <= 1e-12);
        assert!((again.min_eigenvalue - sol.feasibility.min_eigenvalue).abs() <= 1e-12);
        assert!((again.min_entry - sol.feasibility.min_entry).abs() <= 1e-12);
        assert!((again.volume_slack - sol.feasibility.volume_slack).abs() <= 1e-12);
        assert!((&sol.x1 - sol.x1.transpose()).amax() <= 1e-9);
    }

    #[test]
    fn deterministic() {
        let g = two_triangles();
        let a = solve_sdp(&g, &SdpConfig::default()).unwrap();
        let b = solve_sdp(&g, &SdpConfig::default()).unwrap();
        assert_eq!(a.x1, b.x1);
        assert_eq!(a.objective_history, b.objective_history);
    }

    #[test]
    fn config_validation() {
        assert!(SdpConfig { lambda: 0.0, ..SdpConfig::default() }.validate().is_err());
        assert!(SdpConfig { max_iterations: 0, ..SdpConfig::default() }.validate().is_err());
        assert!(SdpConfig { feasibility_tolerance: 0.0, ..SdpConfig::default() }.validate().is_err());
        assert!(SdpConfig::default().validate().is_ok());
    }

    #[test]
    fn matrix_dump_format() {
        let mut buf = Vec::new();
        write_matrix(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2 2\n1e0 5e-1\n5e-1 1e0\n");
    }
}
