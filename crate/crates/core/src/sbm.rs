//! Stochastic block model graphs with planted labels.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};
use crate::noise;

/// Samples every pair independently: `p_in` inside a block, `p_out` across.
///
/// Vertices left without edges are attached to a uniformly chosen member of
/// their own block (any other vertex for singleton blocks), in index order,
/// with the same random stream.
pub fn generate_sbm(blocks: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, Partition)> {
    let unit = |p: f64| (0.0..=1.0).contains(&p);
    if !unit(p_in) || !unit(p_out) {
        return Err(Error::InvalidConfig("edge probabilities must lie in [0, 1]".into()));
    }
    if p_in <= p_out {
        return Err(Error::InvalidConfig(format!(
            "p_in ({p_in}) must exceed p_out ({p_out})"
        )));
    }
    if blocks.is_empty() || blocks.contains(&0) {
        return Err(Error::InvalidConfig("blocks must be non-empty and positive".into()));
    }
    let n: usize = blocks.iter().sum();
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two vertices".into()));
    }
    let labels: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();

    let mut rng = noise::rng(seed);
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
                degree[u] += 1;
                degree[v] += 1;
            }
        }
    }

    let starts: Vec<usize> = blocks
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect();
    for u in 0..n {
        if degree[u] > 0 {
            continue;
        }
        let b = labels[u];
        let v = if blocks[b] > 1 {
            let offset = rng.random_range(0..blocks[b] - 1);
            let v = starts[b] + offset;
            if v >= u {
                v + 1
            } else {
                v
            }
        } else {
            let v = rng.random_range(0..n - 1);
            if v >= u {
                v + 1
            } else {
                v
            }
        };
        log::debug!("vertex {u} had no edges; attached to {v}");
        edges.push((u.min(v), u.max(v)));
        degree[u] += 1;
        degree[v] += 1;
    }

    let g = Graph::from_edges(n, &edges)?;
    let truth = Partition::new(labels, blocks.len())?;
    Ok((g, truth))
}
