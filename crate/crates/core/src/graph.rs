//! Weighted interaction graphs: random generators, normalization and the
//! plain-text CSV format used by the CLI.
//!
//! Generators draw from a `ChaCha8Rng` seeded with `seed_from_u64(seed)`.
//! Draw order is fixed so seeds replay across runs:
//!
//! * ER: node pairs `(i, j)` with `i < j` are scanned row-major. One
//!   `f64` in `[0, 1)` decides the edge (`u < p`); an accepted edge draws its
//!   weight immediately as `w_min + (w_max - w_min) * u'`.
//! * SF: the seed clique's edges are created row-major with one weight draw
//!   each. Every later node picks `m_attach` distinct targets, one `f64`
//!   per pick, by walking the cumulative degree of the not-yet-picked
//!   candidates in index order; then the picked targets are sorted and one
//!   weight is drawn per new edge.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SindyError};

/// Directed weighted adjacency; `adjacency[(i, j)]` is the weight of the edge `i -> j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adjacency: DMatrix<f64>,
    directed: bool,
}

impl WeightedGraph {
    /// Validates and wraps an adjacency matrix.
    pub fn new(adjacency: DMatrix<f64>, directed: bool) -> Result<Self> {
        let (rows, cols) = adjacency.shape();
        if rows != cols {
            return Err(SindyError::NonSquare { rows, cols });
        }
        if rows == 0 {
            return Err(SindyError::Parameter("graph needs at least one node".into()));
        }
        for i in 0..rows {
            for j in 0..cols {
                let w = adjacency[(i, j)];
                if !w.is_finite() {
                    return Err(SindyError::Parameter(format!(
                        "non-finite edge weight at row {i}, column {j}"
                    )));
                }
                if w < 0.0 {
                    return Err(SindyError::NegativeWeight { row: i, col: j, value: w });
                }
            }
            if adjacency[(i, i)] != 0.0 {
                return Err(SindyError::Parameter(format!(
                    "self-loop weight at node {i} must be 0"
                )));
            }
        }
        if !directed && adjacency != adjacency.transpose() {
            return Err(SindyError::Parameter(
                "undirected graph requires a symmetric adjacency matrix".into(),
            ));
        }
        Ok(Self { adjacency, directed })
    }

    /// Graph with `n_nodes` nodes and no edges.
    pub fn empty(n_nodes: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(n_nodes, n_nodes), false)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.adjacency[(from, to)]
    }

    /// Number of edges; undirected edges are counted once.
    pub fn edge_count(&self) -> usize {
        let n = self.n_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.adjacency[(i, j)] > 0.0 && (self.directed || i < j) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Number of incident edges per node (in + out for directed graphs).
    pub fn degrees(&self) -> Vec<usize> {
        let n = self.n_nodes();
        (0..n)
            .map(|i| {
                let out = (0..n).filter(|&j| self.adjacency[(i, j)] > 0.0).count();
                if self.directed {
                    out + (0..n).filter(|&j| self.adjacency[(j, i)] > 0.0).count()
                } else {
                    out
                }
            })
            .collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.adjacency.iter().cloned().fold(0.0, f64::max)
    }

    /// Copy of the graph with every edge weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.adjacency * factor, self.directed)
    }

    /// Adjacency divided by the global maximum weight, with a unit diagonal.
    ///
    /// Entries are in `[0, 1]`. The diagonal is 1 because a node's own state
    /// always enters its own dynamics.
    pub fn normalized_adjacency(&self) -> DMatrix<f64> {
        let max = self.max_weight();
        let mut norm = if max > 0.0 {
            &self.adjacency / max
        } else {
            DMatrix::zeros(self.n_nodes(), self.n_nodes())
        };
        norm.fill_diagonal(1.0);
        norm
    }

    /// Returns true when every node can reach every other node, ignoring direction.
    pub fn is_weakly_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && (self.adjacency[(u, v)] > 0.0 || self.adjacency[(v, u)] > 0.0) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_csv_string(&self) -> String {
        let n = self.n_nodes();
        let mut out = format!("n={},directed={}\n", n, u8::from(self.directed));
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{}", self.adjacency[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the graph CSV format; `origin` only labels error messages.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, column: usize, message: String| SindyError::Parse {
            path: origin.to_path_buf(),
            line,
            column,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, 1, "empty graph file".into()))?;
        let mut n = None;
        let mut directed = None;
        for (col, field) in header.split(',').enumerate() {
            let (key, value) = field
                .trim()
                .split_once('=')
                .ok_or_else(|| parse_err(hline + 1, col + 1, format!("expected key=value, got {field:?}")))?;
            match key.trim() {
                "n" => {
                    n = Some(value.trim().parse::<usize>().map_err(|e| {
                        parse_err(hline + 1, col + 1, format!("bad node count {value:?}: {e}"))
                    })?)
                }
                "directed" => {
                    directed = Some(match value.trim() {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(parse_err(
                                hline + 1,
                                col + 1,
                                format!("directed must be 0 or 1, got {other:?}"),
                            ))
                        }
                    })
                }
                other => {
                    return Err(parse_err(hline + 1, col + 1, format!("unknown header key {other:?}")))
                }
            }
        }
        let n = n.ok_or_else(|| parse_err(hline + 1, 1, "header is missing n=<int>".into()))?;
        let directed =
            directed.ok_or_else(|| parse_err(hline + 1, 1, "header is missing directed=<0|1>".into()))?;

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (lineno, line) in lines {
            let mut row = Vec::new();
            for (col, field) in line.split(',').enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    parse_err(lineno + 1, col + 1, format!("not a number: {:?}", field.trim()))
                })?;
                if v < 0.0 {
                    return Err(parse_err(lineno + 1, col + 1, format!("negative edge weight {v}")));
                }
                row.push(v);
            }
            rows.push(row);
        }
        let cols = rows.first().map_or(0, Vec::len);
        if rows.len() != n || rows.iter().any(|r| r.len() != cols) || cols != rows.len() {
            let width = rows.iter().map(Vec::len).max().unwrap_or(0);
            return Err(SindyError::NonSquare { rows: rows.len(), cols: width });
        }
        let adjacency = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(adjacency, directed)
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SindyError::io(path, e))?;
    WeightedGraph::from_csv_str(&text, path)
}

pub fn save_graph(graph: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph.to_csv_string()).map_err(|e| SindyError::io(path, e))
}

/// Maps flat state-variable indices to `(node, slot)` pairs, node-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateVariableMap {
    n_nodes: usize,
    vars_per_node: usize,
}

impl StateVariableMap {
    pub fn new(n_nodes: usize, vars_per_node: usize) -> Result<Self> {
        if n_nodes == 0 || vars_per_node == 0 {
            return Err(SindyError::Parameter(
                "state map needs at least one node and one variable per node".into(),
            ));
        }
        Ok(Self { n_nodes, vars_per_node })
    }

    /// Two variables per node: real and imaginary part of an oscillator.
    pub fn planar(n_nodes: usize) -> Result<Self> {
        Self::new(n_nodes, 2)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn vars_per_node(&self) -> usize {
        self.vars_per_node
    }

    /// Total number of state variables `K`.
    pub fn n_vars(&self) -> usize {
        self.n_nodes * self.vars_per_node
    }

    pub fn node_of(&self, var: usize) -> usize {
        debug_assert!(var < self.n_vars());
        var / self.vars_per_node
    }

    pub fn slot_of(&self, var: usize) -> usize {
        var % self.vars_per_node
    }

    pub fn index_of(&self, node: usize, slot: usize) -> usize {
        node * self.vars_per_node + slot
    }

    pub fn state_indices_of(&self, node: usize) -> std::ops::Range<usize> {
        node * self.vars_per_node..(node + 1) * self.vars_per_node
    }

    /// `x<node>`/`y<node>` for planar maps, `s<node>_<slot>` otherwise.
    pub fn var_name(&self, var: usize) -> String {
        let (node, slot) = (self.node_of(var), self.slot_of(var));
        if self.vars_per_node == 2 {
            format!("{}{}", if slot == 0 { 'x' } else { 'y' }, node)
        } else {
            format!("s{node}_{slot}")
        }
    }

    pub fn var_names(&self) -> Vec<String> {
        (0..self.n_vars()).map(|i| self.var_name(i)).collect()
    }
}

fn check_weight_range(weight_range: (f64, f64)) -> Result<()> {
    let (lo, hi) = weight_range;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
        return Err(SindyError::Parameter(format!(
            "weight range must satisfy 0 <= w_min <= w_max, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

fn draw_weight(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Undirected Erdős–Rényi graph with uniform random edge weights.
pub fn generate_er(
    n_nodes: usize,
    edge_prob: f64,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<WeightedGraph> {
    if n_nodes == 0 {
        return Err(SindyError::Parameter("n_nodes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(SindyError::Parameter(format!(
            "edge probability must lie in [0, 1], got {edge_prob}"
        )));
    }
    check_weight_range(weight_range)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = DMatrix::zeros(n_nodes, n_nodes);
    for i in 0..n_nodes {
        for j in (i + 1)..n_nodes {
            if rng.gen::<f64>() < edge_prob {
                let w = draw_weight(&mut rng, weight_range);
                adj[(i, j)] = w;
                adj[(j, i)] = w;
            }
        }
    }
    WeightedGraph::new(adj, false)
}

/// Undirected Barabási–Albert preferential-attachment graph.
pub fn generate_sf(
    n_nodes: usize,
    m_attach: usize,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<WeightedGraph> {
    if m_attach == 0 || m_attach >= n_nodes {
        return Err(SindyError::Parameter(format!(
            "attachment count must satisfy 1 <= m < n_nodes, got m = {m_attach}, n = {n_nodes}"
        )));
    }
    check_weight_range(weight_range)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = DMatrix::zeros(n_nodes, n_nodes);
    let mut degree = vec![0usize; n_nodes];
    let seed_size = m_attach + 1;
    for i in 0..seed_size {
        for j in (i + 1)..seed_size {
            let w = draw_weight(&mut rng, weight_range);
            adj[(i, j)] = w;
            adj[(j, i)] = w;
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    for new in seed_size..n_nodes {
        let mut candidates: Vec<usize> = (0..new).collect();
        let mut targets = Vec::with_capacity(m_attach);
        for _ in 0..m_attach {
            let total: usize = candidates.iter().map(|&c| degree[c]).sum();
            let r = rng.gen::<f64>() * total as f64;
            let mut acc = 0.0;
            let mut pick = candidates.len() - 1;
            for (pos, &c) in candidates.iter().enumerate() {
                acc += degree[c] as f64;
                if r < acc {
                    pick = pos;
                    break;
                }
            }
            targets.push(candidates.remove(pick));
        }
        targets.sort_unstable();
        for &t in &targets {
            let w = draw_weight(&mut rng, weight_range);
            adj[(new, t)] = w;
            adj[(t, new)] = w;
            degree[new] += 1;
            degree[t] += 1;
        }
    }
    WeightedGraph::new(adj, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_case() -> WeightedGraph {
        let a = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 1., 0., 1., 0.]);
        WeightedGraph::new(a, false).unwrap()
    }

    #[test]
    fn er_extremes() {
        let g = generate_er(5, 0.0, (0.3, 0.9), 1).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = generate_er(5, 1.0, (1.0, 1.0), 7).unwrap();
        assert_eq!(g.edge_count(), 10);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g.weight(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn er_replays_documented_draw_order() {
        // Independent replay of the row-major Bernoulli/weight draws.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut expected_edges = 0;
        for i in 0..5 {
            for _j in (i + 1)..5 {
                if rng.gen::<f64>() < 0.3 {
                    expected_edges += 1;
                    let _ = rng.gen::<f64>();
                }
            }
        }
        let g = generate_er(5, 0.3, (0.1, 0.5), 42).unwrap();
        assert_eq!(g.edge_count(), expected_edges);
        for &w in g.adjacency().iter().filter(|w| **w > 0.0) {
            assert!((0.1..=0.5).contains(&w));
        }
    }

    #[test]
    fn er_rejects_bad_parameters() {
        assert!(matches!(generate_er(5, 1.5, (0.1, 0.2), 0), Err(SindyError::Parameter(_))));
        assert!(matches!(generate_er(5, 0.5, (0.3, 0.2), 0), Err(SindyError::Parameter(_))));
    }

    #[test]
    fn sf_small_cases() {
        let g = generate_sf(3, 2, (1.0, 1.0), 1).unwrap();
        assert_eq!(g.edge_count(), 3);
        let g = generate_sf(10, 1, (0.1, 0.2), 5).unwrap();
        assert_eq!(g.edge_count(), 9);
        assert!(g.is_weakly_connected());
        assert!(matches!(generate_sf(4, 4, (0.1, 0.2), 0), Err(SindyError::Parameter(_))));
    }

    #[test]
    fn sf_has_hubs() {
        let g = generate_sf(50, 2, (1.0, 1.0), 9).unwrap();
        let mut deg = g.degrees();
        deg.sort_unstable();
        let median = (deg[24] + deg[25]) as f64 / 2.0;
        assert!(*deg.last().unwrap() as f64 > median);
        assert_eq!(g.edge_count(), 3 + 2 * 47);
    }

    #[test]
    fn normalization() {
        let g = WeightedGraph::empty(2).unwrap();
        assert_eq!(g.normalized_adjacency(), DMatrix::identity(2, 2));

        let n = simple_case().normalized_adjacency();
        let expected = DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 1., 1., 0., 1., 1.]);
        assert_eq!(n, expected);

        let a = DMatrix::from_row_slice(3, 3, &[0., 0.2, 0., 0.2, 0., 0.4, 0., 0.4, 0.]);
        let n = WeightedGraph::new(a, false).unwrap().normalized_adjacency();
        assert_eq!(n[(0, 1)], 0.5);
        assert_eq!(n[(1, 2)], 1.0);
    }

    #[test]
    fn csv_errors() {
        let p = Path::new("g.csv");
        let err = WeightedGraph::from_csv_str("n=2,directed=0\n0,1,0\n1,0,0\n", p).unwrap_err();
        assert!(matches!(err, SindyError::NonSquare { rows: 2, cols: 3 }));
        let err = WeightedGraph::from_csv_str("n=2,directed=1\n0,-1\n1,0\n", p).unwrap_err();
        match err {
            SindyError::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let err = WeightedGraph::from_csv_str("n=2,directed=0\n0,x\n1,0\n", p).unwrap_err();
        assert!(matches!(err, SindyError::Parse { line: 2, column: 2, .. }));
    }

    #[test]
    fn csv_roundtrip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let g = generate_er(6, 0.5, (0.05, 0.2), 3).unwrap();
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
        save_graph(&simple_case(), &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), simple_case());
    }

    #[test]
    fn state_map_lookups() {
        let m = StateVariableMap::planar(3).unwrap();
        assert_eq!(m.n_vars(), 6);
        for node in 0..3 {
            for v in m.state_indices_of(node) {
                assert_eq!(m.node_of(v), node);
            }
        }
        assert_eq!(m.var_names(), ["x0", "y0", "x1", "y1", "x2", "y2"]);
        let m = StateVariableMap::new(2, 3).unwrap();
        assert_eq!(m.var_name(4), "s1_1");
    }
}
