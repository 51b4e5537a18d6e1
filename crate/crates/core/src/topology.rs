//! Communication graphs and consensus (mixing) matrices.
//!
//! Graphs are undirected with 0-based node ids. Self-connections are never
//! stored in the edge set: every node implicitly talks to itself through the
//! diagonal of its mixing matrix.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::SimRng;

/// Default number of full point-set redraws for the random sphere graph.
pub const SPHERE_MAX_ATTEMPTS: usize = 1000;

/// Tolerance for row / column sums and symmetry of mixing matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("{kind} graph needs at least {min} nodes, got {n}")]
    InvalidSize { kind: &'static str, n: usize, min: usize },
    #[error("angle threshold must lie in (0, pi], got {0}")]
    InvalidThreshold(f64),
    #[error("no connected sphere graph found after {attempts} attempts")]
    ConnectivityFailure { attempts: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("mixing matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("consensus contraction factor {rho} is not below 1")]
    NotPrimitive { rho: f64 },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Ring,
    Complete,
    Sphere,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Ring => "ring",
            GraphKind::Complete => "complete",
            GraphKind::Sphere => "sphere",
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ring" => Ok(GraphKind::Ring),
            "complete" => Ok(GraphKind::Complete),
            "sphere" | "random" | "random-sphere" => Ok(GraphKind::Sphere),
            other => Err(format!("unknown graph kind `{other}`")),
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Undirected simple graph. Edges are stored as `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    kind: GraphKind,
}

impl Graph {
    /// Build from an arbitrary edge list. Self-loops are dropped and
    /// duplicates merged. Panics on out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, kind: GraphKind) -> Self {
        let set: BTreeSet<(usize, usize)> = edges
            .into_iter()
            .filter(|(i, j)| i != j)
            .map(|(i, j)| {
                assert!(i < n && j < n, "edge ({i}, {j}) out of range for n = {n}");
                (i.min(j), i.max(j))
            })
            .collect();
        Graph { n, edges: set.into_iter().collect(), kind }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    /// Plain-text dump: first line `n`, then one `i j 1` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j} 1");
        }
        s
    }

    pub fn from_text(text: &str, kind: GraphKind) -> Result<Self, TopologyError> {
        let (n, triples) = parse_triples(text)?;
        let mut edges = Vec::new();
        for (line, i, j, _) in triples {
            if i == j {
                return Err(TopologyError::Parse { line, msg: "self-loop in edge list".into() });
            }
            edges.push((i, j));
        }
        Ok(Graph::from_edges(n, edges, kind))
    }
}

/// Cycle on `n >= 3` nodes.
pub fn gen_ring(n: usize) -> Result<Graph, TopologyError> {
    if n < 3 {
        return Err(TopologyError::InvalidSize { kind: "ring", n, min: 3 });
    }
    Ok(Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)), GraphKind::Ring))
}

/// All `n(n-1)/2` pairs.
pub fn gen_complete(n: usize) -> Result<Graph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::InvalidSize { kind: "complete", n, min: 2 });
    }
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    Ok(Graph::from_edges(n, edges, GraphKind::Complete))
}

/// Uniform point on the unit 2-sphere.
pub fn sample_s2(rng: &mut SimRng) -> [f64; 3] {
    loop {
        let p: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r > 0.0 {
            return [p[0] / r, p[1] / r, p[2] / r];
        }
    }
}

/// Great-circle distance between two unit vectors.
pub fn angular_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    c.clamp(-1.0, 1.0).acos()
}

/// Link `n` uniform points on the sphere whose angular distance is below
/// `angle_threshold`. The whole point set is redrawn until the graph is
/// connected, at most [`SPHERE_MAX_ATTEMPTS`] times.
pub fn gen_random_sphere_graph(n: usize, angle_threshold: f64, rng: &mut SimRng) -> Result<Graph, TopologyError> {
    gen_random_sphere_graph_with_attempts(n, angle_threshold, rng, SPHERE_MAX_ATTEMPTS)
}

pub fn gen_random_sphere_graph_with_attempts(
    n: usize,
    angle_threshold: f64,
    rng: &mut SimRng,
    max_attempts: usize,
) -> Result<Graph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::InvalidSize { kind: "sphere", n, min: 2 });
    }
    if !(angle_threshold > 0.0 && angle_threshold <= PI) {
        return Err(TopologyError::InvalidThreshold(angle_threshold));
    }
    for _ in 0..max_attempts {
        let pts: Vec<[f64; 3]> = (0..n).map(|_| sample_s2(rng)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if angular_distance(&pts[i], &pts[j]) < angle_threshold {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges(n, edges, GraphKind::Sphere);
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(TopologyError::ConnectivityFailure { attempts: max_attempts })
}

/// Doubly stochastic mixing matrix with its consensus contraction factor
/// `rho = ||W - 11^T/n||` (spectral norm).
#[derive(Debug, Clone)]
pub struct ConsensusMatrix {
    n: usize,
    w: Vec<f64>,
    rho: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

/// Result of the contraction-factor computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGap {
    pub rho: f64,
    /// `rho >= 1`: mixing does not contract toward the average.
    pub violated: bool,
}

impl ConsensusMatrix {
    /// Validate a dense row-major matrix and compute its contraction factor.
    /// A factor `>= 1` is allowed here and reported by [`Self::spectral_gap`].
    pub fn from_dense(n: usize, w: Vec<f64>) -> Result<Self, TopologyError> {
        if w.len() != n * n || n == 0 {
            return Err(TopologyError::NotDoublyStochastic(format!("expected {n}x{n} entries, got {}", w.len())));
        }
        for (idx, &v) in w.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(TopologyError::NotDoublyStochastic(format!(
                    "entry ({}, {}) = {v} is negative or non-finite",
                    idx / n,
                    idx % n
                )));
            }
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| w[i * n + j]).sum();
            let col: f64 = (0..n).map(|j| w[j * n + i]).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                return Err(TopologyError::NotDoublyStochastic(format!("row {i} sums to {row}")));
            }
            if (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(TopologyError::NotDoublyStochastic(format!("column {i} sums to {col}")));
            }
        }
        let rho = deviation_norm(n, &w);
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| w[i * n + j] > 0.0).map(|j| (j, w[i * n + j])).collect())
            .collect();
        Ok(ConsensusMatrix { n, w, rho, rows })
    }

    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n * n];
        (0..n).for_each(|i| w[i * n + i] = 1.0);
        Self::from_dense(n, w).expect("identity is doubly stochastic")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn dense(&self) -> &[f64] {
        &self.w
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Nonzero entries `(j, w_ij)` of row `i`, including the diagonal.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn spectral_gap(&self) -> SpectralGap {
        spectral_gap(self)
    }

    /// Error unless `rho < 1`.
    pub fn require_contraction(&self) -> Result<(), TopologyError> {
        if self.rho < 1.0 {
            Ok(())
        } else {
            Err(TopologyError::NotPrimitive { rho: self.rho })
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Mix `rows` (one vector per node): `out_i = sum_j w_ij rows_j`.
    pub fn mix_into(&self, i: usize, rows: &[Vec<f64>], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(j, wij) in &self.rows[i] {
            crate::linalg::axpy(wij, &rows[j], out);
        }
    }

    /// Plain-text dump: first line `n`, then `i j w_ij` for every nonzero entry
    /// with `i <= j`. Weights carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(s, "{i} {j} {v:.16e}");
                }
            }
        }
        s
    }

    /// Inverse of [`Self::to_text`]; the lower triangle is filled by symmetry.
    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        let (n, triples) = parse_triples(text)?;
        let mut w = vec![0.0; n * n];
        for (_, i, j, v) in triples {
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
        Self::from_dense(n, w)
    }
}

/// Spectral norm of `W - 11^T/n`, flagged when it is not below 1.
pub fn spectral_gap(w: &ConsensusMatrix) -> SpectralGap {
    SpectralGap { rho: w.rho, violated: w.rho >= 1.0 }
}

/// Metropolis-Hastings weights: `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges,
/// diagonal takes the remaining mass.
pub fn metropolis_weights(g: &Graph) -> Result<ConsensusMatrix, TopologyError> {
    if !g.is_connected() {
        return Err(TopologyError::Disconnected);
    }
    let n = g.n();
    let deg = g.degrees();
    let mut w = vec![0.0; n * n];
    for &(i, j) in g.edges() {
        let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[i * n + j] = v;
        w[j * n + i] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[i * n + j]).sum();
        w[i * n + i] = 1.0 - off;
    }
    let cm = ConsensusMatrix::from_dense(n, w)?;
    cm.require_contraction()?;
    Ok(cm)
}

fn deviation_norm(n: usize, w: &[f64]) -> f64 {
    let inv = 1.0 / n as f64;
    let a = DMatrix::from_fn(n, n, |i, j| w[i * n + j] - inv);
    let symmetric = (0..n).all(|i| (i + 1..n).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= STOCHASTIC_TOL));
    if symmetric {
        let sym = (&a + a.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        a.singular_values().iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

type Triple = (usize, usize, usize, f64);

fn parse_triples(text: &str) -> Result<(usize, Vec<Triple>), TopologyError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hl, header) = lines.next().ok_or(TopologyError::Parse { line: 1, msg: "empty input".into() })?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|e| TopologyError::Parse { line: hl + 1, msg: format!("bad node count: {e}") })?;
    let mut out = Vec::new();
    for (ln, l) in lines {
        let line = ln + 1;
        let mut it = l.split_whitespace();
        let mut field = |name: &str| it.next().ok_or(TopologyError::Parse { line, msg: format!("missing {name}") });
        let i: usize = field("i")?.parse().map_err(|e| TopologyError::Parse { line, msg: format!("{e}") })?;
        let j: usize = field("j")?.parse().map_err(|e| TopologyError::Parse { line, msg: format!("{e}") })?;
        let v: f64 = field("weight")?.parse().map_err(|e| TopologyError::Parse { line, msg: format!("{e}") })?;
        if i >= n || j >= n {
            return Err(TopologyError::Parse { line, msg: format!("index out of range for n = {n}") });
        }
        out.push((line, i, j, v));
    }
    Ok((n, out))
}
