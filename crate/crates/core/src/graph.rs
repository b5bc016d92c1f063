//! Undirected simple graphs, edge-list ingestion, Laplacians and the
//! volume-balance parameter.

use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeFormat {
    Tsv,
    Csv,
}

impl EdgeFormat {
    /// Picks the format from a file extension, defaulting to TSV.
    pub fn from_path(path: &std::path::Path) -> EdgeFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EdgeFormat::Csv,
            _ => EdgeFormat::Tsv,
        }
    }

    fn split(self, line: &str) -> Vec<&str> {
        match self {
            // Tabs are canonical, but runs of spaces are common enough in the wild.
            EdgeFormat::Tsv => line.split_whitespace().collect(),
            EdgeFormat::Csv => line.split(',').map(str::trim).collect(),
        }
    }
}

impl FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(EdgeFormat::Tsv),
            "csv" => Ok(EdgeFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown edge format `{other}`"))),
        }
    }
}

/// An undirected simple graph on the dense vertex set `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Sorted, `u < v`.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbour lists.
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
    /// External id of each dense vertex.
    external_ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph from dense edges. Duplicates collapse; self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut set = BTreeSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u == v {
                return Err(Error::SelfLoop {
                    line: i + 1,
                    vertex: u as u64,
                });
            }
            let bound = u.max(v);
            if bound >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: bound + 1,
                });
            }
            set.insert((u.min(v), u.max(v)));
        }
        if set.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degrees = adjacency.iter().map(Vec::len).collect();
        Ok(Graph {
            n,
            edges,
            adjacency,
            degrees,
            external_ids: (0..n as u64).collect(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// External id that dense vertex `u` was loaded from.
    pub fn external_id(&self, u: usize) -> u64 {
        self.external_ids[u]
    }

    pub fn external_ids(&self) -> &[u64] {
        &self.external_ids
    }

    /// Dense index of an external id, if present.
    pub fn dense_id(&self, external: u64) -> Option<usize> {
        self.external_ids.iter().position(|&e| e == external)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// First vertex with degree zero, if any.
    pub fn isolated_vertex(&self) -> Option<usize> {
        self.degrees.iter().position(|&d| d == 0)
    }

    /// Fails with [`Error::DegreeZero`] when an isolated vertex exists.
    pub fn require_no_isolated(&self) -> Result<()> {
        match self.isolated_vertex() {
            Some(vertex) => Err(Error::DegreeZero { vertex }),
            None => Ok(()),
        }
    }

    /// Returns a copy with vertices relabelled: old vertex `u` becomes `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        let edges: Vec<_> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Graph::from_edges(self.n, &edges)
    }
}

fn parse_edges(text: &str, format: EdgeFormat) -> Result<Vec<(u64, u64)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || Error::MalformedLine {
            line: line_no,
            content: raw.to_string(),
        };
        let tokens = format.split(line);
        if tokens.len() != 2 {
            return Err(malformed());
        }
        let u: u64 = tokens[0].parse().map_err(|_| malformed())?;
        let v: u64 = tokens[1].parse().map_err(|_| malformed())?;
        if u == v {
            return Err(Error::SelfLoop {
                line: line_no,
                vertex: u,
            });
        }
        out.push((u, v));
    }
    if out.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(out)
}

/// Parses an edge list whose ids are already dense: `n = 1 + max id`.
pub fn load_graph(text: &str, format: EdgeFormat) -> Result<Graph> {
    let raw = parse_edges(text, format)?;
    let max_id = raw.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0);
    let n = usize::try_from(max_id)
        .ok()
        .and_then(|m| m.checked_add(1))
        .ok_or_else(|| Error::InvalidConfig(format!("vertex id {max_id} too large")))?;
    let edges: Vec<_> = raw.iter().map(|&(u, v)| (u as usize, v as usize)).collect();
    Graph::from_edges(n, &edges)
}

/// Parses an edge list with arbitrary (sparse) ids, remapping them to `0..n`
/// in order of first appearance. The mapping is kept in
/// [`Graph::external_ids`].
pub fn load_graph_remapped(text: &str, format: EdgeFormat) -> Result<Graph> {
    let raw = parse_edges(text, format)?;
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut external = Vec::new();
    let mut intern = |id: u64| {
        *index.entry(id).or_insert_with(|| {
            external.push(id);
            external.len() - 1
        })
    };
    let edges: Vec<_> = raw.iter().map(|&(u, v)| (intern(u), intern(v))).collect();
    let mut g = Graph::from_edges(external.len(), &edges)?;
    g.external_ids = external;
    Ok(g)
}

/// `L_G = D_G - A_G` and `D_G`, both dense.
pub fn laplacian_and_degrees(g: &Graph) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = g.vertex_count();
    let mut lap = DMatrix::zeros(n, n);
    let mut deg = DMatrix::zeros(n, n);
    for u in 0..n {
        let d = g.degree(u) as f64;
        lap[(u, u)] = d;
        deg[(u, u)] = d;
    }
    for &(u, v) in g.edges() {
        lap[(u, v)] = -1.0;
        lap[(v, u)] = -1.0;
    }
    (lap, deg)
}

/// Hard assignment of vertices to clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Partition> {
        if k == 0 {
            return Err(Error::InvalidPartition("k must be positive".into()));
        }
        if let Some((v, &c)) = assignment.iter().enumerate().find(|(_, &c)| c >= k) {
            return Err(Error::InvalidPartition(format!(
                "vertex {v} assigned to cluster {c}, but k = {k}"
            )));
        }
        Ok(Partition { assignment, k })
    }

    /// Builds a partition from arbitrary labels, numbering clusters in
    /// order of first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(labels: &[T]) -> Partition {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition {
            k: ids.len().max(1),
            assignment,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// True when every cluster id in `0..k` is used.
    pub fn is_complete(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }

    /// Normalised partition Gram matrix: `1/n` for same-cluster pairs, else 0.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let n = self.assignment.len();
        let w = 1.0 / n as f64;
        DMatrix::from_fn(n, n, |i, j| {
            if self.assignment[i] == self.assignment[j] {
                w
            } else {
                0.0
            }
        })
    }
}

/// Parses `vertex<sep>label` lines. Blank lines and `#` comments are skipped.
pub fn parse_labels(text: &str, format: EdgeFormat) -> Result<Vec<(u64, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens = format.split(line);
        let malformed = || Error::MalformedLine {
            line: idx + 1,
            content: raw.to_string(),
        };
        if tokens.len() != 2 {
            return Err(malformed());
        }
        let ext: u64 = tokens[0].parse().map_err(|_| malformed())?;
        out.push((ext, tokens[1].to_string()));
    }
    Ok(out)
}

/// Builds a partition aligned with `ids` from parsed labels. Every id needs a
/// label and every label must name one of the ids; later lines win.
pub fn partition_for_ids(ids: &[u64], labels: &[(u64, String)]) -> Result<Partition> {
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut slots: Vec<Option<&str>> = vec![None; ids.len()];
    for (ext, label) in labels {
        let v = index
            .get(ext)
            .ok_or_else(|| Error::LabelMismatch(format!("vertex {ext} is not in the graph")))?;
        slots[*v] = Some(label);
    }
    let labels: Vec<&str> = slots
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| Error::LabelMismatch(format!("vertex {} has no label", ids[v]))))
        .collect::<Result<_>>()?;
    Ok(Partition::from_labels(&labels))
}

/// Parses a `vertex<sep>label` file into a partition over the vertices of
/// `g`, resolving external ids.
pub fn load_labels(text: &str, format: EdgeFormat, g: &Graph) -> Result<Partition> {
    partition_for_ids(g.external_ids(), &parse_labels(text, format)?)
}

/// Volume of each cluster: the sum of its vertex degrees.
pub fn cluster_volumes(g: &Graph, p: &Partition) -> Result<Vec<usize>> {
    if p.len() != g.vertex_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} vertices, graph has {}",
            p.len(),
            g.vertex_count()
        )));
    }
    let mut vol = vec![0usize; p.k()];
    for (u, &c) in p.assignment().iter().enumerate() {
        vol[c] += g.degree(u);
    }
    Ok(vol)
}

/// `b = 1 - (Σ vol(C_i)²) / (2m²)`, returned unclamped.
pub fn balance_parameter(g: &Graph, p: &Partition) -> Result<f64> {
    let vol = cluster_volumes(g, p)?;
    let m = g.edge_count() as f64;
    let sum_sq: f64 = vol.iter().map(|&v| (v as f64).powi(2)).sum();
    Ok(1.0 - sum_sq / (2.0 * m * m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn loads_path() {
        let g = load_graph("0\t1\n1\t2", EdgeFormat::Tsv).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees(), &[1, 2, 1]);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = load_graph("0\t1\n0\t1\n1,0", EdgeFormat::Tsv);
        assert!(matches!(g, Err(Error::MalformedLine { line: 3, .. })));
        let g = load_graph("0\t1\n0\t1\n1\t0", EdgeFormat::Tsv).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            load_graph("0\t0", EdgeFormat::Tsv),
            Err(Error::SelfLoop { line: 1, vertex: 0 })
        ));
        assert!(matches!(
            load_graph("# nothing\n\n", EdgeFormat::Tsv),
            Err(Error::EmptyGraph)
        ));
        assert!(matches!(
            load_graph("0\tx", EdgeFormat::Tsv),
            Err(Error::MalformedLine { .. })
        ));
        assert!(matches!(
            load_graph("0,1,2", EdgeFormat::Csv),
            Err(Error::MalformedLine { .. })
        ));
        assert!(matches!(
            load_graph("-1,2", EdgeFormat::Csv),
            Err(Error::MalformedLine { .. })
        ));
    }

    #[test]
    fn csv_and_comments() {
        let g = load_graph("# header\n0, 1\n2,1\n", EdgeFormat::Csv).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn remaps_sparse_ids_by_first_appearance() {
        let g = load_graph_remapped("100\t7\n7\t42\n", EdgeFormat::Tsv).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.external_ids(), &[100, 7, 42]);
        assert_eq!(g.dense_id(42), Some(2));
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
    }

    #[test]
    fn isolated_vertices_detected() {
        let g = load_graph("0\t2", EdgeFormat::Tsv).unwrap();
        assert_eq!(g.isolated_vertex(), Some(1));
        assert!(matches!(
            g.require_no_isolated(),
            Err(Error::DegreeZero { vertex: 1 })
        ));
    }

    #[test]
    fn laplacian_of_triangle_and_edge() {
        let k3 = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let (l, d) = laplacian_and_degrees(&k3);
        let expected = DMatrix::<f64>::identity(3, 3) * 2.0
            - (DMatrix::from_element(3, 3, 1.0) - DMatrix::identity(3, 3));
        assert_eq!(l, expected);
        assert_eq!(d, DMatrix::identity(3, 3) * 2.0);

        let e = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let (l, _) = laplacian_and_degrees(&e);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn path_laplacian_null_vector() {
        // Dense eigensolve as oracle.
        let g = load_graph("0\t1\n1\t2", EdgeFormat::Tsv).unwrap();
        let (l, _) = laplacian_and_degrees(&g);
        let eig = l.clone().symmetric_eigen();
        let (imin, &min) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(min.abs() < 1e-12);
        let v = eig.eigenvectors.column(imin);
        let s = v[0];
        assert!(v.iter().all(|x| (x - s).abs() < 1e-12));
        let ones = nalgebra::DVector::from_element(3, 1.0);
        assert!((l * ones).amax() < 1e-12);
    }

    #[test]
    fn balance_parameter_values() {
        let c4 = cycle(4);
        let one = Partition::new(vec![0; 4], 1).unwrap();
        assert!((balance_parameter(&c4, &one).unwrap() - -1.0).abs() < 1e-15);

        // Adjacent pairs {0,1} and {2,3}: vol 4 each, m = 4.
        let halves = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        assert!(balance_parameter(&c4, &halves).unwrap().abs() < 1e-15);

        // Equal volumes m + m always give 1 - 2m²/2m² = 0.
        let two_tri =
            Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let p = Partition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        assert!(balance_parameter(&two_tri, &p).unwrap().abs() < 1e-15);

        let short = Partition::new(vec![0, 0], 1).unwrap();
        assert!(matches!(
            balance_parameter(&c4, &short),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn balanced_k_partition_balance() {
        // Equal volumes 2m/k: b = 1 - 2/k.
        for k in 1..=6usize {
            let g = cycle(4 * k);
            let p = Partition::new((0..4 * k).map(|v| v / 4).collect(), k).unwrap();
            let b = balance_parameter(&g, &p).unwrap();
            assert!((b - (1.0 - 2.0 / k as f64)).abs() < 1e-12, "k={k} b={b}");
        }
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
        assert!(Partition::new(vec![], 0).is_err());
        let p = Partition::new(vec![0, 0, 2], 3).unwrap();
        assert!(!p.is_complete());
        assert_eq!(p.sizes(), vec![2, 0, 1]);
        let q = Partition::from_labels(&["b", "a", "b"]);
        assert_eq!(q.assignment(), &[0, 1, 0]);
        assert_eq!(q.k(), 2);
    }

    #[test]
    fn labels_resolve_external_ids() {
        let g = load_graph_remapped("10\t20\n20\t30", EdgeFormat::Tsv).unwrap();
        let p = load_labels("30\tx\n10\ty\n20\ty\n", EdgeFormat::Tsv, &g).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 1]);
        assert!(matches!(
            load_labels("10\ty\n", EdgeFormat::Tsv, &g),
            Err(Error::LabelMismatch(_))
        ));
        assert!(matches!(
            load_labels("99\ty\n", EdgeFormat::Tsv, &g),
            Err(Error::LabelMismatch(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn degree_sum_is_twice_edges(raw in proptest::collection::vec((0usize..30, 0usize..30), 1..80)) {
            let edges: Vec<_> = raw.into_iter().filter(|(u, v)| u != v).collect();
            proptest::prop_assume!(!edges.is_empty());
            let g = Graph::from_edges(30, &edges).unwrap();
            proptest::prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.edge_count());
            let (l, _) = laplacian_and_degrees(&g);
            for i in 0..30 {
                proptest::prop_assert!(l.row(i).sum().abs() < 1e-12);
            }
        }
    }
}
