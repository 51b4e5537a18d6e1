//! Sigmoid squared-loss benchmark and query-counted value oracles.
//!
//! Node `i` owns `m` samples `(a_ij, y_ij)` and the local loss
//! `F_i(x; j) = (y_ij - sigmoid(x^T a_ij))^2`. Algorithms see only values
//! through [`LocalObjectives::sample_loss`] wrapped in a [`NodeOracle`]
//! that counts every call. The exact global value and gradient are for
//! metrics only and never touch a ledger.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::estimator::ValueOracle;
use crate::linalg::{axpy, dot, sigmoid};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("problem sizes must be positive (n = {n}, m = {m}, d = {d})")]
    InvalidSize { n: usize, m: usize, d: usize },
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("sample index {0} out of range")]
    SampleOutOfRange(usize),
    #[error("expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("problem dump parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Read access to per-node stochastic losses `F_i(x; sample)`.
pub trait LocalObjectives: Sync {
    fn num_nodes(&self) -> usize;
    fn dim(&self) -> usize;
    /// Size of the sample space each stochastic draw ranges over.
    fn num_samples(&self) -> usize;
    /// Uncounted evaluation. Callers inside algorithms go through [`NodeOracle`].
    fn sample_loss(&self, node: usize, x: &[f64], sample: usize) -> f64;
}

/// Exact network-average objective and gradient, used for metrics.
pub trait GlobalObjective: LocalObjectives {
    /// Exact local objective `f_i(x)`.
    fn node_value(&self, node: usize, x: &[f64]) -> f64;
    /// Exact local gradient `grad f_i(x)`.
    fn node_gradient(&self, node: usize, x: &[f64]) -> Vec<f64>;

    fn global_value(&self, x: &[f64]) -> f64 {
        let n = self.num_nodes();
        (0..n).map(|i| self.node_value(i, x)).sum::<f64>() / n as f64
    }

    fn global_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.num_nodes();
        let mut g = vec![0.0; self.dim()];
        for i in 0..n {
            axpy(1.0, &self.node_gradient(i, x), &mut g);
        }
        g.iter_mut().for_each(|v| *v /= n as f64);
        g
    }
}

/// Per-node function-value query counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryLedger {
    per_node: Vec<u64>,
}

impl QueryLedger {
    pub fn new(n: usize) -> Self {
        QueryLedger { per_node: vec![0; n] }
    }

    pub fn per_node(&self) -> &[u64] {
        &self.per_node
    }

    pub fn node(&self, i: usize) -> u64 {
        self.per_node[i]
    }

    pub fn total(&self) -> u64 {
        self.per_node.iter().sum()
    }

    pub fn record(&mut self, i: usize, queries: u64) {
        self.per_node[i] += queries;
    }

    /// Largest per-node count; equals every node's count for the synchronous
    /// algorithms in this crate.
    pub fn max_per_node(&self) -> u64 {
        self.per_node.iter().copied().max().unwrap_or(0)
    }
}

/// Counting value oracle for one node. Its counter is owned by the node's
/// execution context and merged into a [`QueryLedger`] at the barrier.
pub struct NodeOracle<'a, P: ?Sized> {
    problem: &'a P,
    node: usize,
    queries: u64,
}

impl<'a, P: LocalObjectives + ?Sized> NodeOracle<'a, P> {
    pub fn new(problem: &'a P, node: usize) -> Self {
        NodeOracle { problem, node, queries: 0 }
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Full local average `f_i(x) = (1/m) sum_j F_i(x; j)`; costs `m` queries.
    pub fn local_average(&mut self, x: &[f64]) -> f64 {
        let m = self.problem.num_samples();
        let mut acc = 0.0;
        for j in 0..m {
            acc += self.value(x, j);
        }
        acc / m as f64
    }
}

impl<P: LocalObjectives + ?Sized> ValueOracle for NodeOracle<'_, P> {
    fn value(&mut self, x: &[f64], sample: usize) -> f64 {
        self.queries += 1;
        self.problem.sample_loss(self.node, x, sample)
    }
}

/// Synthetic logistic squared-loss instance. Features are stored node-major,
/// then sample, then coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    n: usize,
    m: usize,
    d: usize,
    seed: u64,
    features: Vec<f64>,
    labels: Vec<f64>,
    reference: Vec<f64>,
}

/// Label rule: 1 iff `sigmoid(reference^T a) >= 0.5`, i.e. iff the logit is nonnegative.
pub fn label_for(reference: &[f64], a: &[f64]) -> f64 {
    if dot(reference, a) >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `n` nodes with `m` standard-normal samples each in dimension `d`,
/// labeled by the all-ones reference point.
pub fn synth_problem(n: usize, m: usize, d: usize, seed: u64) -> Result<ProblemInstance, ProblemError> {
    if n == 0 || m == 0 || d == 0 {
        return Err(ProblemError::InvalidSize { n, m, d });
    }
    let mut rng = stream_rng(seed, stream::PROBLEM);
    let features: Vec<f64> = (0..n * m * d).map(|_| rng.sample(StandardNormal)).collect();
    ProblemInstance::from_features(n, m, d, seed, features)
}

impl ProblemInstance {
    /// Build from explicit features; labels follow the all-ones reference rule.
    pub fn from_features(n: usize, m: usize, d: usize, seed: u64, features: Vec<f64>) -> Result<Self, ProblemError> {
        if n == 0 || m == 0 || d == 0 {
            return Err(ProblemError::InvalidSize { n, m, d });
        }
        if features.len() != n * m * d {
            return Err(ProblemError::DimensionMismatch { expected: n * m * d, got: features.len() });
        }
        let reference = vec![1.0; d];
        let labels = features.chunks_exact(d).map(|a| label_for(&reference, a)).collect();
        Ok(ProblemInstance { n, m, d, seed, features, labels, reference })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn feature(&self, i: usize, j: usize) -> &[f64] {
        let off = (i * self.m + j) * self.d;
        &self.features[off..off + self.d]
    }

    pub fn label(&self, i: usize, j: usize) -> f64 {
        self.labels[i * self.m + j]
    }

    /// Counted evaluation of `F_i(x; xi)`.
    pub fn local_value(&self, ledger: &mut QueryLedger, i: usize, x: &[f64], xi: usize) -> Result<f64, ProblemError> {
        if i >= self.n {
            return Err(ProblemError::NodeOutOfRange(i));
        }
        if xi >= self.m {
            return Err(ProblemError::SampleOutOfRange(xi));
        }
        if x.len() != self.d {
            return Err(ProblemError::DimensionMismatch { expected: self.d, got: x.len() });
        }
        ledger.record(i, 1);
        Ok(self.sample_loss(i, x, xi))
    }

    /// Mean loss over node `i`'s samples. Not counted.
    pub fn node_value(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.m).map(|j| self.sample_loss(i, x, j)).sum::<f64>() / self.m as f64
    }

    /// Gradient of node `i`'s mean loss. Not counted.
    pub fn node_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for j in 0..self.m {
            let a = self.feature(i, j);
            let s = sigmoid(dot(x, a));
            let coef = 2.0 * (s - self.label(i, j)) * s * (1.0 - s);
            axpy(coef, a, &mut g);
        }
        let inv = 1.0 / self.m as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    /// `(1/n) sum_i f_i(x)`; ledger untouched.
    pub fn global_value(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| self.node_value(i, x)).sum::<f64>() / self.n as f64
    }

    /// Exact gradient of [`Self::global_value`]; ledger untouched.
    pub fn analytic_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for i in 0..self.n {
            axpy(1.0, &self.node_gradient(i, x), &mut g);
        }
        let inv = 1.0 / self.n as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    /// Text dump: header `n m d seed`, then one `y a_1 .. a_d` line per
    /// sample, node-major. Floats carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {} {}\n", self.n, self.m, self.d, self.seed);
        for i in 0..self.n {
            for j in 0..self.m {
                let _ = write!(s, "{}", self.label(i, j) as u8);
                for v in self.feature(i, j) {
                    let _ = write!(s, " {v:.16e}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ProblemError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(ProblemError::Parse { line: 1, msg: "empty dump".into() })?;
        let hdr: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ProblemError::Parse { line: 1, msg: e.to_string() })?;
        if hdr.len() != 4 {
            return Err(ProblemError::Parse { line: 1, msg: "header must be `n m d seed`".into() });
        }
        let (n, m, d, seed) = (hdr[0] as usize, hdr[1] as usize, hdr[2] as usize, hdr[3]);
        let mut features = Vec::with_capacity(n * m * d);
        let mut labels = Vec::with_capacity(n * m);
        for (ln, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let line = ln + 1;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ProblemError::Parse { line, msg: e.to_string() })?;
            if vals.len() != d + 1 {
                return Err(ProblemError::Parse { line, msg: format!("expected {} fields, got {}", d + 1, vals.len()) });
            }
            labels.push(vals[0]);
            features.extend_from_slice(&vals[1..]);
        }
        if labels.len() != n * m {
            return Err(ProblemError::Parse { line: 0, msg: format!("expected {} samples, got {}", n * m, labels.len()) });
        }
        let p = Self::from_features(n, m, d, seed, features)?;
        if p.labels != labels {
            return Err(ProblemError::Parse { line: 0, msg: "labels disagree with the reference rule".into() });
        }
        Ok(p)
    }
}

impl LocalObjectives for ProblemInstance {
    fn num_nodes(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn num_samples(&self) -> usize {
        self.m
    }
    fn sample_loss(&self, node: usize, x: &[f64], sample: usize) -> f64 {
        let r = self.label(node, sample) - sigmoid(dot(x, self.feature(node, sample)));
        r * r
    }
}

impl GlobalObjective for ProblemInstance {
    fn node_value(&self, node: usize, x: &[f64]) -> f64 {
        ProblemInstance::node_value(self, node, x)
    }
    fn node_gradient(&self, node: usize, x: &[f64]) -> Vec<f64> {
        ProblemInstance::node_gradient(self, node, x)
    }
}
