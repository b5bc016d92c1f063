//! Private k-median initialisation from a 2-HST.
//!
//! The tree is built by pivot-ball partitioning with the radius halving at
//! every level. Node counts are perturbed with level-dependent Laplace
//! noise, high-scoring nodes without ancestor/descendant conflicts become
//! subtree roots, and each root greedily descends to a leaf.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmedian::euclidean;
use crate::noise;

/// Depth cap; deeper trees would need more than f64 resolution anyway.
const MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HstNode {
    /// Creation index; also the tie-breaker everywhere in this module.
    pub id: usize,
    pub level: u32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub point_indices: Vec<usize>,
    /// Pivot that seeded this cluster.
    pub representative: usize,
    /// Sum of the weights of `point_indices`.
    pub true_count: f64,
    pub noisy_count: f64,
    pub score: f64,
}

impl HstNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Arena of nodes; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HstTree {
    pub nodes: Vec<HstNode>,
    /// Depth `L`; the root sits at level `L`.
    pub depth: u32,
    /// Diameter `Δ` of the point set.
    pub delta: f64,
    pub seed: u64,
    /// Whether [`noisy_scores`] has run.
    pub scored: bool,
}

impl HstTree {
    pub fn root(&self) -> &HstNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &HstNode {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &HstNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Radius bound `Δ/2^{L−h}` of a node at level `h`.
    pub fn radius_at(&self, level: u32) -> f64 {
        self.delta / 2f64.powi((self.depth - level) as i32)
    }

    /// True when `ancestor` lies strictly above `node`.
    pub fn is_ancestor(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = self.nodes[node].parent;
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    /// Indented text dump: level, count, noisy count, score.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, indent)) = stack.pop() {
            let n = &self.nodes[id];
            let _ = writeln!(
                out,
                "{:indent$}level={} count={} noisy={:.6} score={:.6} points={}",
                "",
                n.level,
                n.true_count,
                n.noisy_count,
                n.score,
                n.point_indices.len(),
                indent = indent * 2
            );
            for &c in n.children.iter().rev() {
                stack.push((c, indent + 1));
            }
        }
        out
    }
}

/// Depth `L = max(1, ⌊log₂(Δ/ρ)⌋ + 1)` where `ρ` is the smallest positive
/// pairwise distance, so that level-0 balls cannot hold two distinct points.
pub fn hst_depth(delta: f64, min_gap: f64) -> u32 {
    if !(delta > 0.0 && min_gap > 0.0) {
        return 0;
    }
    let levels = (delta / min_gap).log2().floor() + 1.0;
    (levels.max(1.0) as u32).min(MAX_DEPTH)
}

/// Builds a 2-HST over `points`; `weights` feed the node counts.
pub fn build_hst(points: &[Vec<f64>], weights: &[f64], seed: u64) -> Result<HstTree> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InsufficientPoints { have: 0, need: 1 });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    let mut delta: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&points[i], &points[j]);
            delta = delta.max(d);
            if d > 0.0 {
                min_gap = min_gap.min(d);
            }
        }
    }
    let depth = hst_depth(delta, min_gap);
    let mut rng = noise::rng(seed);
    let root_rep = rng.random_range(0..n);
    let mut tree = HstTree {
        nodes: Vec::new(),
        depth,
        delta,
        seed,
        scored: false,
    };
    let all: Vec<usize> = (0..n).collect();
    grow(&mut tree, points, weights, all, root_rep, depth, None, &mut rng);
    Ok(tree)
}

#[allow(clippy::too_many_arguments)]
fn grow(
    tree: &mut HstTree,
    points: &[Vec<f64>],
    weights: &[f64],
    members: Vec<usize>,
    representative: usize,
    level: u32,
    parent: Option<usize>,
    rng: &mut noise::Rng,
) -> usize {
    let id = tree.nodes.len();
    let true_count = members.iter().map(|&i| weights[i]).sum();
    tree.nodes.push(HstNode {
        id,
        level,
        parent,
        children: Vec::new(),
        point_indices: members.clone(),
        representative,
        true_count,
        noisy_count: true_count,
        score: true_count * 2f64.powi(level as i32),
    });
    if members.len() == 1 || level == 0 {
        return id;
    }

    let radius = tree.radius_at(level - 1);
    let mut order = members.clone();
    order.shuffle(rng);
    let mut claimed = vec![false; order.len()];
    let position = |i: usize| members.iter().position(|&m| m == i).expect("member");
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for &pivot in &order {
        if claimed[position(pivot)] {
            continue;
        }
        let mut cluster = Vec::new();
        for (slot, &c) in members.iter().enumerate() {
            if !claimed[slot] && euclidean(&points[pivot], &points[c]) <= radius {
                claimed[slot] = true;
                cluster.push(c);
            }
        }
        clusters.push((pivot, cluster));
    }
    for (pivot, cluster) in clusters {
        let child = grow(tree, points, weights, cluster, pivot, level - 1, Some(id), rng);
        tree.nodes[id].children.push(child);
    }
    id
}

/// Sets `N_v = count + Lap(2^{L−h_v}/ε)` and `score = N_v·2^{h_v}` on every
/// node. Nothing is clamped, so scores may go negative.
pub fn noisy_scores(tree: &mut HstTree, epsilon: f64, seed: u64) -> Result<()> {
    noise::validate_epsilon(epsilon)?;
    let disabled = noise::privacy_disabled(epsilon);
    let mut rng = noise::rng(seed);
    let depth = tree.depth;
    for node in &mut tree.nodes {
        let scale = if disabled {
            0.0
        } else {
            2f64.powi((depth - node.level) as i32) / epsilon
        };
        node.noisy_count = node.true_count + noise::laplace(&mut rng, scale);
        node.score = node.noisy_count * 2f64.powi(node.level as i32);
    }
    tree.scored = true;
    Ok(())
}

/// Picks `k` nodes by score such that none is an ancestor of another.
///
/// Each pass adds the best `k − |selected|` unseen nodes, then drops every
/// selected node that has a selected descendant. Dropped nodes never return.
pub fn select_subtree_roots(tree: &HstTree, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let leaves = tree.leaves().count();
    if leaves < k {
        return Err(Error::InsufficientCandidates { found: leaves, need: k });
    }
    let mut ranked: Vec<usize> = (0..tree.nodes.len()).collect();
    ranked.sort_by(|&a, &b| {
        tree.nodes[b]
            .score
            .total_cmp(&tree.nodes[a].score)
            .then(a.cmp(&b))
    });
    let mut next = ranked.into_iter();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    // Every pass consumes at least one unseen node, so this bound always
    // suffices when the tree has k leaves.
    let max_passes = (4 * k).max(tree.nodes.len());
    let mut passes = 0;
    while selected.len() < k {
        if passes == max_passes {
            return Err(Error::InsufficientCandidates {
                found: selected.len(),
                need: k,
            });
        }
        passes += 1;
        let want = k - selected.len();
        let fresh: Vec<usize> = next.by_ref().take(want).collect();
        if fresh.is_empty() {
            return Err(Error::InsufficientCandidates {
                found: selected.len(),
                need: k,
            });
        }
        selected.extend(fresh);
        let snapshot = selected.clone();
        selected.retain(|&v| !snapshot.iter().any(|&w| w != v && tree.is_ancestor(v, w)));
    }
    Ok(selected)
}

/// Initial centers: one leaf per subtree root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    /// Point indices (leaf representatives).
    pub centers: Vec<usize>,
    pub leaves: Vec<usize>,
    pub source_nodes: Vec<usize>,
}

/// From each root, steps to the child with the largest noisy count until a
/// leaf is reached.
pub fn descend_to_leaves(tree: &HstTree, roots: &[usize]) -> CenterSet {
    let mut centers = Vec::with_capacity(roots.len());
    let mut leaves = Vec::with_capacity(roots.len());
    for &root in roots {
        let mut v = root;
        while !tree.nodes[v].is_leaf() {
            let children = &tree.nodes[v].children;
            let mut best = children[0];
            for &c in &children[1..] {
                let (nc, nb) = (tree.nodes[c].noisy_count, tree.nodes[best].noisy_count);
                if nc > nb || (nc == nb && c < best) {
                    best = c;
                }
            }
            v = best;
        }
        leaves.push(v);
        centers.push(tree.nodes[v].representative);
    }
    CenterSet {
        centers,
        leaves,
        source_nodes: roots.to_vec(),
    }
}

/// Builds, scores and searches the HST in one go.
pub fn initial_centers(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(HstTree, CenterSet)> {
    let mut tree = build_hst(points, weights, noise::derive_seed(seed, 0))?;
    noisy_scores(&mut tree, epsilon, noise::derive_seed(seed, 1))?;
    let roots = select_subtree_roots(&tree, k)?;
    let centers = descend_to_leaves(&tree, &roots);
    Ok((tree, centers))
}
