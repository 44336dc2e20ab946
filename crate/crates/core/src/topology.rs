//! Communication graphs and doubly stochastic mixing matrices.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{projected_spectral_norm, Matrix};
use crate::rng;

/// Tolerance on row and column sums in [`validate_mixing`].
pub const SUM_TOL: f64 = 1e-12;
/// Tolerance on `|P_ij - P_ji|` in [`validate_mixing`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// `σ₂` must be below `1 - SPECTRAL_MARGIN` to count as mixing.
pub const SPECTRAL_MARGIN: f64 = 1e-10;

pub const MAX_ER_RETRIES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Ring,
    Complete,
    Star,
    Grid,
    ErdosRenyi,
}

/// Undirected simple graph on nodes `0..n`. Edges are stored as `(i, j)`
/// with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an edge list; self-loops are rejected and
    /// duplicate or reversed pairs are merged. Connectivity is not required.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParams(format!("edge ({i}, {j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::InvalidParams(format!("self-loop at node {i}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Graph { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// One `i j` line per edge, 0-indexed, sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }
}

/// `rows x cols` lattice with `rows * cols == n`, `rows` the largest divisor
/// of `n` not exceeding `√n`.
fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = 1;
    let mut r = 1;
    while r * r <= n {
        if n % r == 0 {
            rows = r;
        }
        r += 1;
    }
    (rows, n / rows)
}

pub fn make_graph(kind: GraphKind, n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 1 {
        return Err(Error::InvalidParams("n must be >= 1".into()));
    }
    let edges: Vec<(usize, usize)> = match kind {
        GraphKind::Ring => match n {
            1 => vec![],
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        },
        GraphKind::Complete => (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect(),
        GraphKind::Star => (1..n).map(|j| (0, j)).collect(),
        GraphKind::Grid => {
            let (rows, cols) = grid_shape(n);
            let mut e = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let u = r * cols + c;
                    if c + 1 < cols {
                        e.push((u, u + 1));
                    }
                    if r + 1 < rows {
                        e.push((u, u + cols));
                    }
                }
            }
            e
        }
        GraphKind::ErdosRenyi => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParams(format!("edge probability must be in (0, 1], got {p}")));
            }
            let mut rng = rng::seeded(seed);
            for _ in 0..MAX_ER_RETRIES {
                let mut e = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.gen::<f64>() < p {
                            e.push((i, j));
                        }
                    }
                }
                let g = Graph::from_edges(n, e)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            return Err(Error::ConnectivityFailure(MAX_ER_RETRIES));
        }
    };
    Graph::from_edges(n, edges)
}

/// Consensus weights. Construction only checks the shape; use
/// [`validate_mixing`] for the doubly stochastic and spectral conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix(Matrix);

impl MixingMatrix {
    pub fn new(p: Matrix) -> Result<Self> {
        if !p.is_square() || p.rows() == 0 {
            return Err(Error::InvalidParams(format!(
                "mixing matrix must be square and non-empty, got {}x{}",
                p.rows(),
                p.cols()
            )));
        }
        Ok(MixingMatrix(p))
    }

    /// `(1/n) 11ᵀ`
    pub fn uniform(n: usize) -> Self {
        MixingMatrix(Matrix::from_fn(n, n, |_, _| 1.0 / n as f64))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `P^k` as a mixing matrix.
    pub fn power(&self, k: usize) -> Result<MixingMatrix> {
        Ok(MixingMatrix(self.0.power(k)?))
    }

    /// `σ₂(P)`, the largest singular value of `P - (1/n)11ᵀ`.
    pub fn second_singular_value(&self) -> Result<f64> {
        crate::numerics::second_singular_value(&self.0)
    }
}

/// Metropolis-Hastings weights: `1/(1 + max(deg_i, deg_j))` on edges, the
/// remainder on the diagonal.
pub fn metropolis_weights(g: &Graph) -> MixingMatrix {
    let n = g.n();
    let deg = g.degrees();
    let mut p = Matrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        p[(i, j)] = w;
        p[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| p[(i, j)]).sum();
        p[(i, i)] = 1.0 - off;
    }
    MixingMatrix(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured violation (or, for the spectral check, `σ₂` itself).
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<14} {}  (deviation {:.3e})",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.deviation
            )?;
        }
        Ok(())
    }
}

pub fn validate_mixing(p: &Matrix, g: &Graph) -> ValidationReport {
    let n = g.n();
    let mut checks = Vec::new();
    if p.shape() != (n, n) {
        checks.push(CheckResult {
            name: "shape",
            passed: false,
            deviation: f64::NAN,
        });
        return ValidationReport { checks };
    }

    let min_entry = p.as_slice().iter().fold(f64::INFINITY, |m, v| m.min(*v));
    checks.push(CheckResult {
        name: "nonnegative",
        passed: min_entry >= 0.0,
        deviation: (-min_entry).max(0.0),
    });

    let mut off_graph = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j && !g.has_edge(i, j) {
                off_graph = off_graph.max(p[(i, j)].abs());
            }
        }
    }
    checks.push(CheckResult {
        name: "sparsity",
        passed: off_graph == 0.0,
        deviation: off_graph,
    });

    let asym = p.asymmetry().unwrap_or(f64::INFINITY);
    checks.push(CheckResult {
        name: "symmetric",
        passed: asym <= SYMMETRY_TOL,
        deviation: asym,
    });

    let row_dev = p.row_sums().iter().fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
    checks.push(CheckResult {
        name: "row_sums",
        passed: row_dev <= SUM_TOL,
        deviation: row_dev,
    });

    let col_dev = p.column_sums().iter().fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
    checks.push(CheckResult {
        name: "column_sums",
        passed: col_dev <= SUM_TOL,
        deviation: col_dev,
    });

    let sigma2 = projected_spectral_norm(p);
    checks.push(CheckResult {
        name: "sigma2",
        passed: sigma2 < 1.0 - SPECTRAL_MARGIN,
        deviation: sigma2,
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_edges() {
        let g = make_graph(GraphKind::Ring, 4, 0.0, 0).unwrap();
        let expected: BTreeSet<_> = [(0, 1), (1, 2), (2, 3), (0, 3)].into_iter().collect();
        assert_eq!(g.edges(), &expected);
    }

    #[test]
    fn complete_edge_count() {
        assert_eq!(make_graph(GraphKind::Complete, 3, 0.0, 0).unwrap().edges().len(), 3);
    }

    #[test]
    fn erdos_renyi_deterministic() {
        let a = make_graph(GraphKind::ErdosRenyi, 10, 0.5, 17).unwrap();
        let b = make_graph(GraphKind::ErdosRenyi, 10, 0.5, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
    }

    #[test]
    fn erdos_renyi_gives_up() {
        // p tiny on 30 nodes: never connected
        assert_eq!(
            make_graph(GraphKind::ErdosRenyi, 30, 1e-9, 1),
            Err(Error::ConnectivityFailure(MAX_ER_RETRIES))
        );
    }

    #[test]
    fn invalid_params() {
        assert!(matches!(make_graph(GraphKind::Ring, 0, 0.0, 0), Err(Error::InvalidParams(_))));
        assert!(matches!(make_graph(GraphKind::ErdosRenyi, 5, 0.0, 0), Err(Error::InvalidParams(_))));
        assert!(matches!(make_graph(GraphKind::ErdosRenyi, 5, 1.5, 0), Err(Error::InvalidParams(_))));
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn grid_uses_exact_factorization() {
        assert_eq!(grid_shape(12), (3, 4));
        assert_eq!(grid_shape(16), (4, 4));
        assert_eq!(grid_shape(7), (1, 7));
        let g = make_graph(GraphKind::Grid, 6, 0.0, 0).unwrap();
        // 2 x 3 lattice: 2*2 horizontal + 3 vertical
        assert_eq!(g.edges().len(), 7);
        assert!(g.is_connected());
    }

    #[test]
    fn metropolis_small_cases() {
        let g = Graph::from_edges(1, []).unwrap();
        assert_eq!(metropolis_weights(&g).matrix(), &Matrix::identity(1));

        let g = make_graph(GraphKind::Complete, 3, 0.0, 0).unwrap();
        let p = metropolis_weights(&g);
        for v in p.matrix().as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(
            metropolis_weights(&g).matrix(),
            &Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]])
        );
    }

    #[test]
    fn validation_catches_bad_matrices() {
        let g = make_graph(GraphKind::Ring, 5, 0.0, 0).unwrap();
        let report = validate_mixing(&metropolis_weights(&g).into_matrix(), &g);
        assert!(report.all_passed(), "{report}");

        let report = validate_mixing(&Matrix::identity(5), &g);
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert_eq!(failed, vec!["sigma2"]);
        assert!((report.get("sigma2").unwrap().deviation - 1.0).abs() < 1e-12);

        // row-stochastic, not symmetric: path 0-1-2
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let p = Matrix::from_rows(&[[0.5, 0.5, 0.0], [0.2, 0.6, 0.2], [0.0, 0.5, 0.5]]);
        let report = validate_mixing(&p, &g);
        assert!(report.get("row_sums").unwrap().passed);
        assert!(!report.get("symmetric").unwrap().passed);
        assert!(!report.get("column_sums").unwrap().passed);

        // weight on a non-edge
        let p = Matrix::from_fn(3, 3, |_, _| 1.0 / 3.0);
        assert!(!validate_mixing(&p, &g).get("sparsity").unwrap().passed);

        let report = validate_mixing(&Matrix::identity(2), &g);
        assert_eq!(report.checks[0].name, "shape");
        assert!(!report.all_passed());
    }

    #[test]
    fn edge_list_format() {
        let g = make_graph(GraphKind::Star, 3, 0.0, 0).unwrap();
        assert_eq!(g.to_edge_list(), "0 1\n0 2\n");
    }

    #[test]
    fn complete_metropolis_is_uniform_average() {
        for n in 1..12 {
            let g = make_graph(GraphKind::Complete, n, 0.0, 0).unwrap();
            let p = metropolis_weights(&g);
            let u = MixingMatrix::uniform(n);
            assert!((p.matrix() - u.matrix()).max_abs() < 1e-15);
            assert!(p.second_singular_value().unwrap() < 1e-12);
        }
    }
}
