//! Undirected graphs in CSR layout, normalized adjacency operators, and the
//! good/bad edge bookkeeping used to measure and edit structural noise.
//!
//! An edge is *good* when both endpoints carry the same label and *bad*
//! otherwise; the noise rate of a labeled graph is `|bad| / |edges|`.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    /// Each undirected edge once, as `(min, max)`, sorted.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Graph {
    /// Builds a deduplicated undirected graph. `(u, v)` and `(v, u)` are the
    /// same edge; self-pairs and out-of-range ids are rejected.
    pub fn new(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Graph> {
        let mut edges = Vec::with_capacity(pairs.len());
        for &(u, v) in pairs {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::input(format!("self-edge ({u}, {u}) is not allowed")));
            }
            edges.push((u.min(v), u.max(v)));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Graph::from_canonical_edges(num_nodes, edges))
    }

    fn from_canonical_edges(num_nodes: usize, edges: Vec<(usize, usize)>) -> Graph {
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..num_nodes].to_vec();
        let mut targets = vec![0usize; offsets[num_nodes]];
        for &(u, v) in &edges {
            targets[cursor[u]] = v;
            cursor[u] += 1;
            targets[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..num_nodes {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Graph {
            num_nodes,
            edges,
            offsets,
            targets,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbors of `i`, without `i` itself.
    #[inline]
    pub fn neighbor_slice(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Sorted neighbor list; with `include_self`, `i` is merged in at its
    /// sorted position (the `A + I` neighborhood).
    pub fn neighbors(&self, i: usize, include_self: bool) -> Vec<usize> {
        let mut out = self.neighbor_slice(i).to_vec();
        if include_self {
            let pos = out.partition_point(|&j| j < i);
            out.insert(pos, i);
        }
        out
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_targets(&self) -> &[usize] {
        &self.targets
    }

    /// Component id per node, numbered in order of first appearance.
    pub fn connected_components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.num_nodes];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.num_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbor_slice(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn num_components(&self) -> usize {
        self.connected_components()
            .into_iter()
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Same node set, with `removed` edges dropped.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Graph {
        let mut drop: Vec<(usize, usize)> =
            removed.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        drop.sort_unstable();
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|e| drop.binary_search(e).is_err())
            .collect();
        Graph::from_canonical_edges(self.num_nodes, edges)
    }
}

/// Alias kept for call sites that read better as a free function.
pub fn build_graph(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Graph> {
    Graph::new(num_nodes, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `D^-1/2 (A+I) D^-1/2`
    Symmetric,
    /// `D^-1 (A+I)`
    RowStochastic,
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" | "sym" => Ok(NormalizationMode::Symmetric),
            "row_stochastic" | "row-stochastic" | "row" => Ok(NormalizationMode::RowStochastic),
            other => Err(Error::input(format!("unknown normalization mode `{other}`"))),
        }
    }
}

/// Sparse normalized adjacency with self-loops, degrees taken in `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    mode: NormalizationMode,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph, mode: NormalizationMode) -> NormalizedAdjacency {
        let n = g.num_nodes();
        let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(g.csr_targets().len() + n);
        let mut values = Vec::with_capacity(g.csr_targets().len() + n);
        indptr.push(0);
        for u in 0..n {
            for v in g.neighbors(u, true) {
                let w = match mode {
                    NormalizationMode::Symmetric => 1.0 / (deg[u] * deg[v]).sqrt(),
                    NormalizationMode::RowStochastic => 1.0 / deg[u],
                };
                indices.push(v);
                values.push(w);
            }
            indptr.push(indices.len());
        }
        NormalizedAdjacency {
            n,
            mode,
            indptr,
            indices,
            values,
        }
    }

    pub fn mode(&self) -> NormalizationMode {
        self.mode
    }

    /// Self-loops are always present in this crate.
    pub fn self_loops(&self) -> bool {
        true
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Stored value at `(r, c)`, zero if absent.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    /// `Â · h`, rows accumulated in CSR order.
    pub fn spmm(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        if h.rows() != self.n {
            return Err(Error::input(format!(
                "adjacency is {n}x{n} but the dense operand has {} rows",
                h.rows(),
                n = self.n
            )));
        }
        let mut out = DenseMatrix::zeros(self.n, h.cols());
        for r in 0..self.n {
            let o_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (o, &x) in o_row.iter_mut().zip(h.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `Âᵀ · h`. Equal to `spmm` in symmetric mode.
    pub fn spmm_transpose(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        if h.rows() != self.n {
            return Err(Error::input(format!(
                "adjacency is {n}x{n} but the dense operand has {} rows",
                h.rows(),
                n = self.n
            )));
        }
        let mut out = DenseMatrix::zeros(self.n, h.cols());
        for r in 0..self.n {
            let h_row = h.row(r);
            for (c, v) in self.row(r) {
                for (o, &x) in out.row_mut(c).iter_mut().zip(h_row) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `Â^k · h`, applied iteratively.
    pub fn propagate(&self, h: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
        let mut cur = h.clone();
        for _ in 0..k {
            cur = self.spmm(&cur)?;
        }
        Ok(cur)
    }
}

pub fn normalize(g: &Graph, mode: NormalizationMode) -> NormalizedAdjacency {
    NormalizedAdjacency::new(g, mode)
}

pub fn spmm(adj: &NormalizedAdjacency, h: &DenseMatrix) -> Result<DenseMatrix> {
    adj.spmm(h)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgePartition {
    pub good_edges: Vec<(usize, usize)>,
    pub bad_edges: Vec<(usize, usize)>,
}

pub fn classify_edges(g: &Graph, labels: &[usize]) -> Result<EdgePartition> {
    if labels.len() != g.num_nodes() {
        return Err(Error::input(format!(
            "{} labels for a graph of {} nodes",
            labels.len(),
            g.num_nodes()
        )));
    }
    let (good_edges, bad_edges) = g
        .edges()
        .iter()
        .copied()
        .partition(|&(u, v)| labels[u] == labels[v]);
    Ok(EdgePartition {
        good_edges,
        bad_edges,
    })
}

pub fn noise_rate(g: &Graph, labels: &[usize]) -> Result<f64> {
    let part = classify_edges(g, labels)?;
    if g.num_edges() == 0 {
        return Err(Error::UndefinedRate);
    }
    Ok(part.bad_edges.len() as f64 / g.num_edges() as f64)
}

/// Slack when comparing a requested rate with the current one, so that
/// passing back a rate that was computed from this graph is always accepted.
const RATE_SLACK: f64 = 1e-12;

/// Removes uniformly chosen bad edges, one at a time, until the noise rate is
/// at most `target_rate`. Good edges are never touched. An edgeless graph is
/// returned unchanged for any target in `[0, 1]`.
pub fn reduce_noise(g: &Graph, labels: &[usize], target_rate: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&target_rate) {
        return Err(Error::input(format!(
            "target noise rate {target_rate} is outside [0, 1]"
        )));
    }
    let part = classify_edges(g, labels)?;
    let total = g.num_edges();
    if total == 0 {
        return Ok(g.clone());
    }
    let bad = part.bad_edges.len();
    let current = bad as f64 / total as f64;
    if target_rate > current + RATE_SLACK {
        return Err(Error::input(format!(
            "target noise rate {target_rate:.6} exceeds the current rate {current:.6}; \
             noise can only be reduced"
        )));
    }
    let mut removed = 0;
    while bad - removed > 0 && ((bad - removed) as f64 / (total - removed) as f64) > target_rate {
        removed += 1;
    }
    if removed == 0 {
        return Ok(g.clone());
    }
    let mut candidates = part.bad_edges;
    let mut rng = seeded(seed);
    candidates.shuffle(&mut rng);
    candidates.truncate(removed);
    Ok(g.without_edges(&candidates))
}

/// Parses the whitespace-separated `u v` edge list. Lines starting with `#`
/// are comments; a `# nodes: N` comment fixes the node count, otherwise it is
/// `max id + 1`.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut declared = None;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("nodes:") {
                declared = Some(n.trim().parse::<usize>().map_err(|e| {
                    Error::input(format!("line {}: bad node count: {e}", lineno + 1))
                })?);
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::input(format!(
                "line {}: expected `u v`, got `{line}`",
                lineno + 1
            )));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::input(format!("line {}: bad node id `{s}`: {e}", lineno + 1)))
        };
        pairs.push((parse(a)?, parse(b)?));
    }
    let inferred = pairs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = declared.unwrap_or(inferred);
    Ok((n, pairs))
}

pub fn format_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nodes: {}", g.num_nodes());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn read_edge_list(path: &Path) -> Result<Graph> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    let (n, pairs) =
        parse_edge_list(&text).map_err(|e| Error::ingestion(path, e.to_string()))?;
    Graph::new(n, &pairs).map_err(|e| Error::ingestion(path, e.to_string()))
}

pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    std::fs::write(path, format_edge_list(g)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, &[(0, 1), (1, 2)]).unwrap()
    }

    /// Five edges over six nodes, two of them crossing labels.
    fn toy() -> (Graph, Vec<usize>) {
        let g = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        // labels: 0 0 0 1 1 0 -> (2,3) and (4,5) are bad
        (g, vec![0, 0, 0, 1, 1, 0])
    }

    #[test]
    fn build_xor_structure() {
        let g = Graph::new(4, &[(0, 3), (1, 2)]).unwrap();
        assert!((0..4).all(|i| g.degree(i) == 1));
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn build_edgeless_and_dedup() {
        let g = Graph::new(3, &[]).unwrap();
        assert!((0..3).all(|i| g.neighbor_slice(i).is_empty()));
        let g = Graph::new(3, &[(0, 1), (1, 0), (1, 2)]).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.degree(1), 2);
    }

    #[test]
    fn build_rejects_bad_pairs() {
        assert!(matches!(Graph::new(3, &[(0, 3)]), Err(Error::Input(_))));
        assert!(matches!(Graph::new(3, &[(1, 1)]), Err(Error::Input(_))));
    }

    #[test]
    fn csr_round_trip() {
        let (g, _) = toy();
        let rebuilt: Vec<(usize, usize)> = (0..g.num_nodes())
            .flat_map(|u| g.neighbor_slice(u).iter().map(move |&v| (u, v)))
            .collect();
        assert_eq!(Graph::new(g.num_nodes(), &rebuilt).unwrap(), g);
    }

    #[test]
    fn normalize_edgeless_is_identity() {
        let g = Graph::new(3, &[]).unwrap();
        for mode in [NormalizationMode::Symmetric, NormalizationMode::RowStochastic] {
            assert_eq!(normalize(&g, mode).to_dense(), DenseMatrix::identity(3));
        }
    }

    #[test]
    fn normalize_path_symmetric() {
        let a = normalize(&path3(), NormalizationMode::Symmetric);
        assert_eq!(a.entry(0, 0), 0.5);
        assert!((a.entry(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.entry(2, 2), 0.5);
        assert!((a.entry(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.entry(0, 2), 0.0);
    }

    #[test]
    fn normalize_path_row_stochastic() {
        let a = normalize(&path3(), NormalizationMode::RowStochastic);
        for c in 0..3 {
            assert!((a.entry(1, c) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spmm_examples() {
        let xor = Graph::new(4, &[(0, 3), (1, 2)]).unwrap();
        let h = DenseMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let p = normalize(&xor, NormalizationMode::Symmetric).spmm(&h).unwrap();
        for r in 0..4 {
            assert_eq!(p.row(r), &[0.5, 0.5]);
        }

        let ident = normalize(&Graph::new(4, &[]).unwrap(), NormalizationMode::Symmetric);
        assert_eq!(ident.spmm(&h).unwrap(), h);

        let col = DenseMatrix::from_vec(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let out = normalize(&path3(), NormalizationMode::RowStochastic)
            .spmm(&col)
            .unwrap();
        assert_eq!(out.get(0, 0), 0.5);
        assert!((out.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.get(2, 0), 0.0);

        assert!(ident.spmm(&DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn classify_and_rate() {
        let xor = Graph::new(4, &[(0, 3), (1, 2)]).unwrap();
        let part = classify_edges(&xor, &[0, 1, 1, 0]).unwrap();
        assert_eq!((part.good_edges.len(), part.bad_edges.len()), (2, 0));
        assert_eq!(noise_rate(&xor, &[0, 1, 1, 0]).unwrap(), 0.0);

        let two = Graph::new(2, &[(0, 1)]).unwrap();
        let part = classify_edges(&two, &[0, 1]).unwrap();
        assert_eq!((part.good_edges.len(), part.bad_edges.len()), (0, 1));

        let (g, y) = toy();
        let part = classify_edges(&g, &y).unwrap();
        assert_eq!((part.good_edges.len(), part.bad_edges.len()), (3, 2));
        assert_eq!(noise_rate(&g, &y).unwrap(), 0.4);

        assert!(classify_edges(&g, &[0, 1]).is_err());
        assert!(matches!(
            noise_rate(&Graph::new(2, &[]).unwrap(), &[0, 0]),
            Err(Error::UndefinedRate)
        ));
    }

    #[test]
    fn reduce_noise_greedy_rule() {
        let (g, y) = toy();
        // 1/4 = 0.25 is still above 0.2, so both bad edges go.
        let r = reduce_noise(&g, &y, 0.2, 3).unwrap();
        assert_eq!(r.num_edges(), 3);
        assert_eq!(noise_rate(&r, &y).unwrap(), 0.0);
        // 0.25 is reachable with one removal.
        let r = reduce_noise(&g, &y, 0.25, 3).unwrap();
        assert_eq!(r.num_edges(), 4);
        assert_eq!(noise_rate(&r, &y).unwrap(), 0.25);
    }

    #[test]
    fn reduce_noise_noop_and_errors() {
        let (g, y) = toy();
        let rate = noise_rate(&g, &y).unwrap();
        assert_eq!(reduce_noise(&g, &y, rate, 1).unwrap(), g);
        assert!(matches!(reduce_noise(&g, &y, 0.5, 1), Err(Error::Input(_))));
        assert!(reduce_noise(&g, &y, -0.1, 1).is_err());
    }

    #[test]
    fn reduce_noise_is_seeded() {
        let (g, y) = toy();
        let a = reduce_noise(&g, &y, 0.25, 11).unwrap();
        let b = reduce_noise(&g, &y, 0.25, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn neighbors_examples() {
        let g = path3();
        assert_eq!(g.neighbors(1, false), vec![0, 2]);
        assert_eq!(g.neighbors(1, true), vec![0, 1, 2]);
        let lone = Graph::new(2, &[]).unwrap();
        assert_eq!(lone.neighbors(1, true), vec![1]);
    }

    #[test]
    fn edge_list_text_round_trip() {
        let (g, _) = toy();
        let text = format_edge_list(&g);
        let (n, pairs) = parse_edge_list(&text).unwrap();
        assert_eq!(Graph::new(n, &pairs).unwrap(), g);

        let (n, pairs) = parse_edge_list("# comment\n0 2\n\n1   2\n").unwrap();
        assert_eq!((n, pairs), (3, vec![(0, 2), (1, 2)]));
        assert!(parse_edge_list("0 1 2\n").is_err());
        assert!(parse_edge_list("0 x\n").is_err());
    }

    #[test]
    fn components() {
        let g = Graph::new(5, &[(0, 1), (3, 4)]).unwrap();
        assert_eq!(g.num_components(), 3);
    }
}
