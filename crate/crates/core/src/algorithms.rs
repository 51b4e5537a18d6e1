//! Bulk-synchronous decentralized zeroth-order methods.
//!
//! Every method advances all nodes one iteration at a time: nodes first
//! compute local estimates against the previous global state (in parallel
//! under [`ExecPolicy::Parallel`]), then a barrier, then neighbor mixing with
//! the consensus matrix. Each node draws from its own random stream, so
//! results do not depend on scheduling or thread count.
//!
//! Stacked form of the variance-reduced tracking method (DZOVR):
//!
//! ```text
//! m^k     = beta * e(x^k) + (1 - beta) * (m^{k-1} + e(x^k) - e(x^{k-1}))
//! g^{k+1} = W (g^k + m^k - m^{k-1})
//! x^{k+1} = W (x^k - alpha * g^{k+1})
//! ```
//!
//! where both two-point estimates `e(.)` in one step share the same
//! direction and sample. The coordinate-difference tracking baseline (DGT)
//! uses the same tracking and mixing with `m^k` replaced by a deterministic
//! estimate of the full local loss; two-point DGD mixes `x - alpha_k e(x)`.

use rand::Rng;
use thiserror::Error;

use crate::estimator::{init_batch_estimate, sample_sphere, two_d_point, two_point, EstimatorError, SmoothingSchedule};
use crate::exec::ExecPolicy;
use crate::linalg::{all_finite, axpy, mean_of, norm_sq};
use crate::problem::{GlobalObjective, LocalObjectives, NodeOracle, QueryLedger};
use crate::rng::{node_streams, SimRng};
use crate::topology::{ConsensusMatrix, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgoError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("node {node}: {source}")]
    Estimator { node: usize, source: EstimatorError },
    #[error("iterates diverged at iteration {iter}")]
    Diverged { iter: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Variance-reduced gradient tracking with two-point estimates.
    Dzovr,
    /// Decentralized gradient descent with two-point estimates, `alpha_k = alpha / k`.
    Dgd2pt,
    /// Gradient tracking with coordinate forward differences of the full local loss.
    Dgt2d,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dzovr => "dzovr",
            Algorithm::Dgd2pt => "dgd2pt",
            Algorithm::Dgt2d => "dgt2d",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dzovr" => Ok(Algorithm::Dzovr),
            "dgd2pt" | "dgd" => Ok(Algorithm::Dgd2pt),
            "dgt2d" | "dgt" => Ok(Algorithm::Dgt2d),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

/// Step size, momentum, initial batch and smoothing radii.
///
/// For [`Algorithm::Dgd2pt`] `alpha` is the numerator of the diminishing
/// step `alpha / k`. `beta` and `b0` only affect [`Algorithm::Dzovr`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta: f64,
    pub b0: usize,
    pub schedule: SmoothingSchedule,
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<(), AlgoError> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(AlgoError::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(AlgoError::InvalidConfig(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.b0 == 0 {
            return Err(AlgoError::InvalidConfig("b0 must be at least 1".into()));
        }
        if !(self.schedule.t(0) > 0.0) {
            return Err(AlgoError::InvalidConfig("smoothing radius must be positive".into()));
        }
        Ok(())
    }
}

/// Per-node iterate, tracker and momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub x: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub g: Vec<f64>,
    /// Momentum estimate `m_i^k` (for DGT: the cached estimate at `x_i^k`).
    pub m: Vec<f64>,
    pub m_prev: Vec<f64>,
    /// Raw estimate at the current iterate from the latest step.
    pub est: Vec<f64>,
}

impl NodeState {
    fn at(x: Vec<f64>) -> Self {
        let d = x.len();
        NodeState { x_prev: x.clone(), x, g: vec![0.0; d], m: vec![0.0; d], m_prev: vec![0.0; d], est: vec![0.0; d] }
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.x) && all_finite(&self.g) && all_finite(&self.m)
    }
}

/// Network-wide state. `k` counts iterations: after initialization the
/// iterate held is `x^1` for every method.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub nodes: Vec<NodeState>,
    pub k: usize,
    pub w: ConsensusMatrix,
    pub ledger: QueryLedger,
    rngs: Vec<SimRng>,
    policy: ExecPolicy,
}

/// One metric sample taken at an iteration barrier.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricRecord {
    pub iter: usize,
    pub queries_per_node: u64,
    pub f_bar: f64,
    pub grad_sq: f64,
    pub consensus_err: f64,
    pub wall_ms: u64,
}

impl SwarmState {
    /// Initialize with every node at the origin.
    pub fn init<P: LocalObjectives>(
        problem: &P,
        w: ConsensusMatrix,
        cfg: &AlgoConfig,
        seed: u64,
        policy: ExecPolicy,
    ) -> Result<Self, AlgoError> {
        let x0 = vec![vec![0.0; problem.dim()]; problem.num_nodes()];
        Self::init_from(problem, w, cfg, seed, policy, x0)
    }

    /// Initialize from explicit starting points `x_i^0`.
    pub fn init_from<P: LocalObjectives>(
        problem: &P,
        w: ConsensusMatrix,
        cfg: &AlgoConfig,
        seed: u64,
        policy: ExecPolicy,
        x0: Vec<Vec<f64>>,
    ) -> Result<Self, AlgoError> {
        cfg.validate()?;
        w.require_contraction()?;
        let n = problem.num_nodes();
        let d = problem.dim();
        if w.n() != n || x0.len() != n {
            return Err(AlgoError::SizeMismatch(format!(
                "{n} nodes, {}x{} mixing matrix, {} starting points",
                w.n(),
                w.n(),
                x0.len()
            )));
        }
        if x0.iter().any(|x| x.len() != d) {
            return Err(AlgoError::SizeMismatch(format!("starting points must have dimension {d}")));
        }
        let mut s = SwarmState {
            nodes: x0.into_iter().map(NodeState::at).collect(),
            k: 0,
            w,
            ledger: QueryLedger::new(n),
            rngs: node_streams(seed, n),
            policy,
        };
        match cfg.algorithm {
            Algorithm::Dzovr => dzovr_init(&mut s, problem, cfg)?,
            Algorithm::Dgd2pt => s.k = 1,
            Algorithm::Dgt2d => dgt2d_init(&mut s, problem, cfg)?,
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn policy(&self) -> ExecPolicy {
        self.policy
    }

    /// Advance one iteration with the configured method.
    pub fn step<P: LocalObjectives>(&mut self, problem: &P, cfg: &AlgoConfig) -> Result<(), AlgoError> {
        match cfg.algorithm {
            Algorithm::Dzovr => dzovr_step(self, problem, cfg),
            Algorithm::Dgd2pt => dgd2pt_step(self, problem, cfg),
            Algorithm::Dgt2d => dgt2d_step(self, problem, cfg),
        }
    }

    pub fn mean_x(&self) -> Vec<f64> {
        mean_of(self.nodes.iter().map(|s| s.x.as_slice()), self.dim())
    }

    pub fn mean_g(&self) -> Vec<f64> {
        mean_of(self.nodes.iter().map(|s| s.g.as_slice()), self.dim())
    }

    pub fn mean_m(&self) -> Vec<f64> {
        mean_of(self.nodes.iter().map(|s| s.m.as_slice()), self.dim())
    }

    /// `sum_i ||x_i - mean(x)||^2`
    pub fn consensus_error(&self) -> f64 {
        let xbar = self.mean_x();
        self.nodes
            .iter()
            .map(|s| s.x.iter().zip(&xbar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum()
    }

    fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |s| s.x.len())
    }

    fn merge_queries(&mut self, counts: &[u64]) {
        for (i, &q) in counts.iter().enumerate() {
            self.ledger.record(i, q);
        }
    }

    /// `g <- W (g + m - m_prev)`, then `x <- W (x - alpha g)`.
    fn track_and_mix(&mut self, alpha: f64) {
        let increments: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|s| s.g.iter().zip(&s.m).zip(&s.m_prev).map(|((g, m), mp)| g + m - mp).collect())
            .collect();
        let d = self.dim();
        let w = &self.w;
        let g_new = self.policy.map_indices(self.n(), |i| {
            let mut out = vec![0.0; d];
            w.mix_into(i, &increments, &mut out);
            out
        });
        let descent: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .zip(&g_new)
            .map(|(s, g)| s.x.iter().zip(g).map(|(x, g)| x - alpha * g).collect())
            .collect();
        let x_new = self.policy.map_indices(self.n(), |i| {
            let mut out = vec![0.0; d];
            w.mix_into(i, &descent, &mut out);
            out
        });
        for ((s, g), x) in self.nodes.iter_mut().zip(g_new).zip(x_new) {
            s.g = g;
            s.x_prev = std::mem::replace(&mut s.x, x);
        }
    }

    fn check_finite(&self) -> Result<(), AlgoError> {
        if self.nodes.iter().all(NodeState::is_finite) {
            Ok(())
        } else {
            Err(AlgoError::Diverged { iter: self.k })
        }
    }

    fn collect_node_results(&mut self, results: Vec<Result<u64, EstimatorError>>) -> Result<(), AlgoError> {
        let mut counts = Vec::with_capacity(results.len());
        for (node, r) in results.into_iter().enumerate() {
            counts.push(r.map_err(|source| AlgoError::Estimator { node, source })?);
        }
        self.merge_queries(&counts);
        Ok(())
    }
}

type NodeSlot<'a> = (&'a mut NodeState, &'a mut SimRng);

fn slots<'a>(nodes: &'a mut [NodeState], rngs: &'a mut [SimRng]) -> Vec<NodeSlot<'a>> {
    nodes.iter_mut().zip(rngs.iter_mut()).collect()
}

/// Initial batch estimate `m^0`, then `g^1 = W m^0`, `x^1 = W (x^0 - alpha g^1)`.
/// Costs `2 b0` queries per node.
pub fn dzovr_init<P: LocalObjectives>(s: &mut SwarmState, problem: &P, cfg: &AlgoConfig) -> Result<(), AlgoError> {
    let t0 = cfg.schedule.t(0);
    let samples = problem.num_samples();
    let mut work = slots(&mut s.nodes, &mut s.rngs);
    let results = s.policy.map_mut(&mut work, |i, (node, rng)| {
        let mut oracle = NodeOracle::new(problem, i);
        let m0 = init_batch_estimate(&mut oracle, &node.x, cfg.b0, t0, samples, rng)?;
        node.est = m0.clone();
        node.m_prev = vec![0.0; m0.len()];
        node.m = m0;
        Ok(oracle.queries())
    });
    drop(work);
    s.collect_node_results(results)?;
    s.track_and_mix(cfg.alpha);
    s.k = 1;
    s.check_finite()
}

/// One DZOVR iteration. Four queries per node.
pub fn dzovr_step<P: LocalObjectives>(s: &mut SwarmState, problem: &P, cfg: &AlgoConfig) -> Result<(), AlgoError> {
    let t = cfg.schedule.t(s.k);
    let beta = cfg.beta;
    let samples = problem.num_samples();
    let d = problem.dim();
    let mut work = slots(&mut s.nodes, &mut s.rngs);
    let results = s.policy.map_mut(&mut work, |i, (node, rng)| {
        let xi = rng.random_range(0..samples);
        let u = sample_sphere(d, rng)?;
        let mut oracle = NodeOracle::new(problem, i);
        let cur = two_point(&mut oracle, &node.x, &u, xi, t)?;
        let prev = two_point(&mut oracle, &node.x_prev, &u, xi, t)?;
        let m_new: Vec<f64> = cur
            .iter()
            .zip(&prev)
            .zip(&node.m)
            .map(|((c, p), m)| beta * c + (1.0 - beta) * (m + c - p))
            .collect();
        node.m_prev = std::mem::replace(&mut node.m, m_new);
        node.est = cur;
        Ok(oracle.queries())
    });
    drop(work);
    s.collect_node_results(results)?;
    s.track_and_mix(cfg.alpha);
    s.k += 1;
    s.check_finite()
}

/// One two-point DGD iteration with step `alpha / k`. Two queries per node.
pub fn dgd2pt_step<P: LocalObjectives>(s: &mut SwarmState, problem: &P, cfg: &AlgoConfig) -> Result<(), AlgoError> {
    if s.k == 0 {
        return Err(AlgoError::InvalidConfig("diminishing step alpha / k needs k >= 1".into()));
    }
    let t = cfg.schedule.t(s.k);
    let step = cfg.alpha / s.k as f64;
    let samples = problem.num_samples();
    let d = problem.dim();
    let mut work = slots(&mut s.nodes, &mut s.rngs);
    let results = s.policy.map_mut(&mut work, |i, (node, rng)| {
        let xi = rng.random_range(0..samples);
        let u = sample_sphere(d, rng)?;
        let mut oracle = NodeOracle::new(problem, i);
        node.est = two_point(&mut oracle, &node.x, &u, xi, t)?;
        Ok(oracle.queries())
    });
    drop(work);
    s.collect_node_results(results)?;

    let descent: Vec<Vec<f64>> = s
        .nodes
        .iter()
        .map(|n| {
            let mut z = n.x.clone();
            axpy(-step, &n.est, &mut z);
            z
        })
        .collect();
    let w = &s.w;
    let x_new = s.policy.map_indices(s.nodes.len(), |i| {
        let mut out = vec![0.0; d];
        w.mix_into(i, &descent, &mut out);
        out
    });
    for (n, x) in s.nodes.iter_mut().zip(x_new) {
        n.x_prev = std::mem::replace(&mut n.x, x);
    }
    s.k += 1;
    s.check_finite()
}

fn full_local_estimate<P: LocalObjectives>(problem: &P, node: usize, x: &[f64], t: f64) -> Result<(Vec<f64>, u64), EstimatorError> {
    let mut oracle = NodeOracle::new(problem, node);
    let est = two_d_point(|y| oracle.local_average(y), x, t)?;
    Ok((est, oracle.queries()))
}

/// Tracking warm start for DGT: estimate at `x^0`, `g^1 = W e(x^0)`, mix.
pub fn dgt2d_init<P: LocalObjectives>(s: &mut SwarmState, problem: &P, cfg: &AlgoConfig) -> Result<(), AlgoError> {
    let t0 = cfg.schedule.t(0);
    let results = s.policy.map_mut(&mut s.nodes, |i, node| {
        let (est, q) = full_local_estimate(problem, i, &node.x, t0)?;
        node.m_prev = vec![0.0; est.len()];
        node.m = est.clone();
        node.est = est;
        Ok(q)
    });
    s.collect_node_results(results)?;
    s.track_and_mix(cfg.alpha);
    s.k = 1;
    s.check_finite()
}

/// One DGT iteration. The estimate at `x^{k-1}` is cached from the previous
/// step, so only `(d + 1) m` fresh queries per node are spent.
pub fn dgt2d_step<P: LocalObjectives>(s: &mut SwarmState, problem: &P, cfg: &AlgoConfig) -> Result<(), AlgoError> {
    let t = cfg.schedule.t(s.k);
    let results = s.policy.map_mut(&mut s.nodes, |i, node| {
        let (est, q) = full_local_estimate(problem, i, &node.x, t)?;
        node.m_prev = std::mem::replace(&mut node.m, est.clone());
        node.est = est;
        Ok(q)
    });
    s.collect_node_results(results)?;
    s.track_and_mix(cfg.alpha);
    s.k += 1;
    s.check_finite()
}

/// Metrics at the network-average iterate. Does not touch the ledger.
pub fn swarm_metrics<P: GlobalObjective>(s: &SwarmState, problem: &P) -> MetricRecord {
    let xbar = s.mean_x();
    let n = problem.num_nodes();
    let parts = s.policy.map_indices(n, |i| (problem.node_value(i, &xbar), problem.node_gradient(i, &xbar)));
    let mut f = 0.0;
    let mut grad = vec![0.0; xbar.len()];
    for (v, g) in &parts {
        f += v;
        axpy(1.0, g, &mut grad);
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    MetricRecord {
        iter: s.k,
        queries_per_node: s.ledger.total() / s.n() as u64,
        f_bar: f * inv,
        grad_sq: norm_sq(&grad),
        consensus_err: s.consensus_error(),
        wall_ms: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::synth_problem;
    use crate::topology::{gen_complete, gen_ring, metropolis_weights};

    fn cfg(algorithm: Algorithm, alpha: f64, beta: f64, b0: usize) -> AlgoConfig {
        AlgoConfig { algorithm, alpha, beta, b0, schedule: SmoothingSchedule::constant(1e-4, beta, 4) }
    }

    /// Constant loss: every finite-difference estimate is zero.
    struct Flat {
        n: usize,
        d: usize,
    }

    impl LocalObjectives for Flat {
        fn num_nodes(&self) -> usize {
            self.n
        }
        fn dim(&self) -> usize {
            self.d
        }
        fn num_samples(&self) -> usize {
            3
        }
        fn sample_loss(&self, _: usize, _: &[f64], _: usize) -> f64 {
            1.5
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Algorithm::Dzovr, 0.0, 0.5, 1).validate().is_err());
        assert!(cfg(Algorithm::Dzovr, 0.1, 1.5, 1).validate().is_err());
        assert!(cfg(Algorithm::Dzovr, 0.1, 0.5, 0).validate().is_err());
        assert!(cfg(Algorithm::Dzovr, 0.1, 0.0, 1).validate().is_ok());
        assert!(cfg(Algorithm::Dzovr, 0.1, 1.0, 1).validate().is_ok());
    }

    #[test]
    fn dzovr_init_mixes_batch_estimate() {
        let p = synth_problem(5, 10, 4, 3).unwrap();
        let w = metropolis_weights(&gen_ring(5).unwrap()).unwrap();
        let c = cfg(Algorithm::Dzovr, 0.05, 0.1, 7);
        let s = SwarmState::init(&p, w.clone(), &c, 11, ExecPolicy::Sequential).unwrap();
        assert_eq!(s.k, 1);
        assert!(s.ledger.per_node().iter().all(|&q| q == 14));
        for i in 0..5 {
            let mut expect = vec![0.0; 4];
            w.mix_into(i, &s.nodes.iter().map(|n| n.m.clone()).collect::<Vec<_>>(), &mut expect);
            for (a, b) in s.nodes[i].g.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dzovr_negligible_step_keeps_consensus() {
        let p = synth_problem(4, 10, 3, 3).unwrap();
        let w = metropolis_weights(&gen_ring(4).unwrap()).unwrap();
        let c = cfg(Algorithm::Dzovr, 1e-300, 0.1, 2);
        let x0 = vec![vec![1.0, -2.0, 0.5]; 4];
        let s = SwarmState::init_from(&p, w, &c, 1, ExecPolicy::Sequential, x0).unwrap();
        for n in &s.nodes {
            for (a, b) in n.x.iter().zip(&s.nodes[0].x) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dzovr_beta_one_collapses_to_raw_estimate() {
        let p = synth_problem(5, 10, 4, 3).unwrap();
        let w = metropolis_weights(&gen_ring(5).unwrap()).unwrap();
        let c = cfg(Algorithm::Dzovr, 0.05, 1.0, 3);
        let mut s = SwarmState::init(&p, w, &c, 2, ExecPolicy::Sequential).unwrap();
        for _ in 0..20 {
            s.step(&p, &c).unwrap();
            for n in &s.nodes {
                assert_eq!(n.m, n.est);
            }
        }
    }

    #[test]
    fn dgd_single_node_is_centralized_sgd() {
        let p = synth_problem(1, 10, 4, 3).unwrap();
        let c = cfg(Algorithm::Dgd2pt, 0.1, 0.0, 1);
        let mut s = SwarmState::init(&p, ConsensusMatrix::identity(1), &c, 5, ExecPolicy::Sequential).unwrap();
        for k in 1..10 {
            let before = s.nodes[0].x.clone();
            s.step(&p, &c).unwrap();
            let n = &s.nodes[0];
            for ((x, b), e) in n.x.iter().zip(&before).zip(&n.est) {
                assert!((x - (b - 0.1 / k as f64 * e)).abs() < 1e-15);
            }
        }
        assert_eq!(s.ledger.total(), 18);
    }

    #[test]
    fn flat_oracle_is_stationary() {
        let p = Flat { n: 4, d: 3 };
        let w = metropolis_weights(&gen_complete(4).unwrap()).unwrap();
        let x0 = vec![vec![0.5, -1.0, 2.0]; 4];
        for alg in [Algorithm::Dgd2pt, Algorithm::Dgt2d, Algorithm::Dzovr] {
            let c = cfg(alg, 0.02, 0.5, 2);
            let mut s = SwarmState::init_from(&p, w.clone(), &c, 9, ExecPolicy::Sequential, x0.clone()).unwrap();
            for _ in 0..5 {
                s.step(&p, &c).unwrap();
            }
            for n in &s.nodes {
                for (a, b) in n.x.iter().zip(&x0[0]) {
                    assert!((a - b).abs() < 1e-14, "{alg}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn metrics_hand_values() {
        let p = Flat { n: 2, d: 2 };
        struct Wrap(Flat);
        impl LocalObjectives for Wrap {
            fn num_nodes(&self) -> usize {
                self.0.n
            }
            fn dim(&self) -> usize {
                self.0.d
            }
            fn num_samples(&self) -> usize {
                1
            }
            fn sample_loss(&self, _: usize, _: &[f64], _: usize) -> f64 {
                0.0
            }
        }
        impl GlobalObjective for Wrap {
            fn node_value(&self, _: usize, _: &[f64]) -> f64 {
                0.0
            }
            fn node_gradient(&self, _: usize, x: &[f64]) -> Vec<f64> {
                x.to_vec()
            }
        }
        let c = cfg(Algorithm::Dgd2pt, 0.1, 0.0, 1);
        let w = metropolis_weights(&gen_complete(2).unwrap()).unwrap();
        let s = SwarmState::init_from(&p, w, &c, 0, ExecPolicy::Sequential, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let r = swarm_metrics(&s, &Wrap(Flat { n: 2, d: 2 }));
        assert_eq!(r.consensus_err, 2.0);
        assert_eq!(r.grad_sq, 0.0);
        assert_eq!(r.queries_per_node, 0);
    }

    #[test]
    fn size_mismatch_and_bad_matrix() {
        let p = synth_problem(3, 5, 2, 0).unwrap();
        let c = cfg(Algorithm::Dzovr, 0.1, 0.5, 1);
        let w = metropolis_weights(&gen_ring(4).unwrap()).unwrap();
        assert!(matches!(SwarmState::init(&p, w, &c, 0, ExecPolicy::Sequential), Err(AlgoError::SizeMismatch(_))));
        let id = ConsensusMatrix::identity(3);
        assert!(matches!(SwarmState::init(&p, id, &c, 0, ExecPolicy::Sequential), Err(AlgoError::Topology(_))));
    }

    #[test]
    fn divergence_is_reported() {
        struct Blowup;
        impl LocalObjectives for Blowup {
            fn num_nodes(&self) -> usize {
                2
            }
            fn dim(&self) -> usize {
                1
            }
            fn num_samples(&self) -> usize {
                1
            }
            fn sample_loss(&self, _: usize, x: &[f64], _: usize) -> f64 {
                -1e300 * x[0]
            }
        }
        let w = metropolis_weights(&gen_complete(2).unwrap()).unwrap();
        let c = cfg(Algorithm::Dgt2d, 1e10, 0.5, 1);
        let res = SwarmState::init(&Blowup, w, &c, 0, ExecPolicy::Sequential);
        assert_eq!(res.unwrap_err(), AlgoError::Diverged { iter: 1 });
    }
}
