//! End-to-end orchestration with privacy accounting and the result document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coreset::{self, CriticalSet, ReductionParams};
use crate::embedding::{self, EigenOrder, EmbeddingScale, NoiseSpec};
use crate::error::{Error, Result, Stage};
use crate::explain::{explanation, Explanation, ExplanationSet};
use crate::graph::{Graph, Partition};
use crate::hst;
use crate::kmedian::{self, euclidean, ClusterModel};
use crate::metrics::MetricsReport;
use crate::noise::{self, derive_seed};
use crate::sdp::{self, GramSolution, SdpConfig};

pub const SCHEMA_VERSION: u32 = 1;

// Seed streams derived from the master seed, one per randomised stage.
const STREAM_EMBEDDING: u64 = 1;
const STREAM_PROJECTION: u64 = 2;
const STREAM_CORESET: u64 = 3;
const STREAM_HST: u64 = 4;
const STREAM_QUERY_BASE: u64 = 1 << 32;

/// Per-stage privacy parameters under basic sequential composition.
///
/// An epsilon of `f64::INFINITY` switches the corresponding noise off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub embedding_epsilon: f64,
    pub delta: f64,
    pub coreset_epsilon: f64,
    pub hst_epsilon: f64,
}

impl PrivacyBudget {
    /// Splits a total ε as ε/2 for the embedding, ε/4 for the critical set
    /// and ε/4 for the tree.
    pub fn split(epsilon: f64, delta: f64) -> Result<PrivacyBudget> {
        let budget = PrivacyBudget {
            embedding_epsilon: epsilon / 2.0,
            delta,
            coreset_epsilon: epsilon / 4.0,
            hst_epsilon: epsilon / 4.0,
        };
        budget.validate()?;
        Ok(budget)
    }

    /// No noise anywhere. Must be requested explicitly.
    pub fn disabled() -> PrivacyBudget {
        PrivacyBudget {
            embedding_epsilon: f64::INFINITY,
            delta: 1e-5,
            coreset_epsilon: f64::INFINITY,
            hst_epsilon: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        noise::validate_epsilon(self.embedding_epsilon)?;
        noise::validate_epsilon(self.coreset_epsilon)?;
        noise::validate_epsilon(self.hst_epsilon)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn total_epsilon(&self) -> f64 {
        self.embedding_epsilon + self.coreset_epsilon + self.hst_epsilon
    }

    pub fn total_delta(&self) -> f64 {
        self.delta
    }

    pub fn privacy_disabled(&self) -> bool {
        noise::privacy_disabled(self.embedding_epsilon)
            && noise::privacy_disabled(self.coreset_epsilon)
            && noise::privacy_disabled(self.hst_epsilon)
    }

    pub fn report(&self) -> BudgetReport {
        let finite = |e: f64| e.is_finite().then_some(e);
        BudgetReport {
            embedding_epsilon: finite(self.embedding_epsilon),
            coreset_epsilon: finite(self.coreset_epsilon),
            hst_epsilon: finite(self.hst_epsilon),
            total_epsilon: finite(self.total_epsilon()),
            total_delta: self.total_delta(),
            privacy_disabled: self.privacy_disabled(),
        }
    }
}

/// JSON form of [`PrivacyBudget`]; unbounded epsilons are written as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub embedding_epsilon: Option<f64>,
    pub coreset_epsilon: Option<f64>,
    pub hst_epsilon: Option<f64>,
    pub total_epsilon: Option<f64>,
    pub total_delta: f64,
    pub privacy_disabled: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub k: usize,
    pub budget: PrivacyBudget,
    pub sdp: SdpConfig,
    pub eigen_order: EigenOrder,
    pub embedding_scale: EmbeddingScale,
    /// Cost exponent, 1 (k-median) or 2.
    pub p: u32,
    pub alpha: f64,
    pub beta: f64,
    /// Projection dimension; `None` means `min(k, 20)`.
    pub d_prime: Option<usize>,
    pub lambda_p_alpha: f64,
    pub kmedian_max_iter: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(k: usize, budget: PrivacyBudget, seed: u64) -> PipelineConfig {
        PipelineConfig {
            k,
            budget,
            sdp: SdpConfig::default(),
            eigen_order: EigenOrder::default(),
            embedding_scale: EmbeddingScale::default(),
            p: 1,
            alpha: 0.5,
            beta: 0.1,
            d_prime: None,
            lambda_p_alpha: 1.0,
            kmedian_max_iter: 100,
            seed,
        }
    }

    pub fn reduction_params(&self, n: usize) -> ReductionParams {
        ReductionParams {
            n,
            d: self.k,
            d_prime: self.d_prime.unwrap_or(self.k.min(20)),
            beta: self.beta,
            alpha: self.alpha,
            p: self.p,
            lambda_p_alpha: self.lambda_p_alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub diag_residual: f64,
    pub min_eigenvalue: f64,
    pub min_entry: f64,
    pub volume_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sdp: SdpDiagnostics,
    pub eigenvalues: Vec<f64>,
    pub eigen_residual: f64,
    pub zeta: f64,
    pub big_lambda: f64,
    pub critical_set_size: usize,
    pub critical_set_weight: f64,
    pub baseline_cost: f64,
    pub hst_depth: u32,
    pub hst_nodes: usize,
    pub initial_centers: Vec<usize>,
    pub initial_cost: f64,
    pub kmedian_iterations: usize,
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub partition: Partition,
    pub model: ClusterModel,
    pub critical_set: CriticalSet,
    /// Reduced and rescaled vertex coordinates, the space the partition is
    /// extended in.
    pub vertex_points: Vec<Vec<f64>>,
    pub explanations: ExplanationSet,
    pub budget: PrivacyBudget,
    pub diagnostics: Diagnostics,
}

impl PipelineOutput {
    /// Coordinates of the final centers.
    pub fn center_points(&self) -> Vec<Vec<f64>> {
        self.model
            .centers
            .iter()
            .map(|&c| self.critical_set.points[c].clone())
            .collect()
    }

    pub fn document(&self, g: &Graph, cfg: &PipelineConfig) -> ResultDocument {
        ResultDocument {
            schema_version: SCHEMA_VERSION,
            k: cfg.k,
            seed: cfg.seed,
            vertex_ids: g.external_ids().to_vec(),
            assignment: self.partition.assignment().to_vec(),
            centers: self.center_points(),
            cost: self.model.cost,
            explanations: self.explanations.entries.clone(),
            budget: self.budget.report(),
            diagnostics: self.diagnostics.clone(),
            metrics: None,
        }
    }
}

/// Serialised pipeline result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub k: usize,
    pub seed: u64,
    /// External id of each vertex, aligned with `assignment`.
    pub vertex_ids: Vec<u64>,
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub cost: f64,
    pub explanations: BTreeMap<u64, Explanation>,
    pub budget: BudgetReport,
    pub diagnostics: Diagnostics,
    /// Agreement with ground-truth labels, when they were supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
}

/// Runs every stage from the SDP onwards. `queries` are dense vertex indices.
pub fn run_pipeline(g: &Graph, queries: &[usize], cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let gram = solve(g, cfg)?;
    run_with_gram(g, &gram, queries, cfg)
}

/// Solves the SDP stage only, so that its (noise-free) output can be shared
/// across several private runs.
pub fn solve(g: &Graph, cfg: &PipelineConfig) -> Result<GramSolution> {
    sdp::solve_sdp(g, &cfg.sdp).map_err(|e| e.at(Stage::Sdp))
}

/// Runs the pipeline from a precomputed SDP solution.
pub fn run_with_gram(
    g: &Graph,
    gram: &GramSolution,
    queries: &[usize],
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let n = g.vertex_count();
    let k = cfg.k;
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k must lie in [1, {n}], got {k}")));
    }
    if let Some(&q) = queries.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidConfig(format!("query vertex {q} is not in the graph")));
    }
    if !(cfg.p == 1 || cfg.p == 2) {
        return Err(Error::InvalidConfig(format!("p must be 1 or 2, got {}", cfg.p)));
    }
    cfg.budget.validate()?;
    let budget = cfg.budget;
    let seed = cfg.seed;

    let spec = NoiseSpec {
        epsilon: budget.embedding_epsilon,
        delta: budget.delta,
        lambda: cfg.sdp.lambda,
        m: g.edge_count(),
    };
    let emb = embedding::spectral_embed(
        &gram.x1,
        g,
        k,
        &spec,
        cfg.eigen_order,
        derive_seed(seed, STREAM_EMBEDDING),
    )
    .map_err(|e| e.at(Stage::Embedding))?
    .scaled(cfg.embedding_scale.factor(g));

    let params = cfg.reduction_params(n);
    let critical = |e: Error| e.at(Stage::CriticalSet);
    let vertex_points =
        coreset::reduce_and_rescale(&emb.coords, &params, derive_seed(seed, STREAM_PROJECTION)).map_err(critical)?;
    let mut critical_set = coreset::private_coreset(
        &vertex_points,
        params.zeta(),
        budget.coreset_epsilon,
        cfg.beta,
        derive_seed(seed, STREAM_CORESET),
    )
    .map_err(critical)?;
    let (baseline, _) = coreset::estimate_cost(&mut critical_set, k, n, cfg.beta, cfg.p).map_err(critical)?;
    log::debug!(
        "critical set: {} points, baseline cost {baseline:.6}",
        critical_set.len()
    );

    let (tree, init) = hst::initial_centers(
        &critical_set.points,
        &critical_set.weights,
        k,
        budget.hst_epsilon,
        derive_seed(seed, STREAM_HST),
    )
    .map_err(|e| e.at(Stage::Hst))?;

    let model = kmedian::kmedian(
        &critical_set.points,
        &critical_set.weights,
        k,
        &init.centers,
        cfg.kmedian_max_iter,
        cfg.p,
    )
    .map_err(|e| e.at(Stage::KMedian))?;

    let centers: Vec<&[f64]> = model.centers.iter().map(|&c| critical_set.points[c].as_slice()).collect();
    let assignment = vertex_points.iter().map(|x| nearest(x, &centers)).collect();
    let partition = Partition::new(assignment, k).map_err(|e| e.at(Stage::KMedian))?;

    let mut explanations = ExplanationSet::default();
    let candidates: Vec<&[f64]> = critical_set.points.iter().map(Vec::as_slice).collect();
    for (qi, &q) in queries.iter().enumerate() {
        let pinned = nearest(&vertex_points[q], &candidates);
        let fixed = kmedian::fixed_center_kmedian(
            &critical_set.points,
            &critical_set.weights,
            k,
            pinned,
            &model.centers,
            derive_seed(seed, STREAM_QUERY_BASE + qi as u64),
            cfg.kmedian_max_iter,
            cfg.p,
        )
        .map_err(|e| e.at(Stage::Explanation))?;
        explanations.entries.insert(
            g.external_id(q),
            Explanation {
                exp_value: explanation(baseline, fixed.cost, n, cfg.beta, cfg.p),
                fixed_cost: fixed.cost,
                baseline_cost: baseline,
            },
        );
    }

    let diagnostics = Diagnostics {
        sdp: SdpDiagnostics {
            objective: gram.objective_value,
            iterations: gram.iterations,
            converged: gram.converged,
            feasible: gram.feasible,
            diag_residual: gram.feasibility.diag_residual,
            min_eigenvalue: gram.feasibility.min_eigenvalue,
            min_entry: gram.feasibility.min_entry,
            volume_slack: gram.feasibility.volume_slack,
        },
        eigenvalues: emb.eigenvalues.clone(),
        eigen_residual: emb.max_residual,
        zeta: params.zeta(),
        big_lambda: params.big_lambda(),
        critical_set_size: critical_set.len(),
        critical_set_weight: critical_set.total_weight(),
        baseline_cost: baseline,
        hst_depth: tree.depth,
        hst_nodes: tree.nodes.len(),
        initial_centers: init.centers.clone(),
        initial_cost: model.initial_cost(),
        kmedian_iterations: model.iterations,
        cost_history: model.cost_history.clone(),
    };

    Ok(PipelineOutput {
        partition,
        model,
        critical_set,
        vertex_points,
        explanations,
        budget,
        diagnostics,
    })
}

/// Index of the nearest candidate; ties go to the lowest index.
pub fn nearest(x: &[f64], candidates: &[&[f64]]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let d = euclidean(x, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}
