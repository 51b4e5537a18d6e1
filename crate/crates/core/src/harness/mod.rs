//! Experiment runner: builds problem, graph and swarm from a [`RunConfig`],
//! iterates to a stopping rule and records [`MetricRecord`]s.

pub mod config;
pub mod csv;
pub mod experiments;
pub mod fit;

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

pub use crate::algorithms::MetricRecord;
use crate::algorithms::{swarm_metrics, AlgoError, Algorithm, SwarmState};
use crate::problem::{synth_problem, ProblemError, ProblemInstance};
use crate::rng::{mix_seed, stream, stream_rng};
use crate::topology::{
    gen_complete, gen_random_sphere_graph_with_attempts, gen_ring, metropolis_weights, ConsensusMatrix, Graph,
    GraphKind, TopologyError,
};
pub use config::{GraphSpec, ProblemSpec, RunConfig, StopRule};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Algo(AlgoError),
    #[error("run diverged at iteration {iter}")]
    Diverged { iter: usize, last: Option<MetricRecord> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit code: 1 configuration, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Diverged { .. } => 2,
            RunError::Io { .. } => 3,
            _ => 1,
        }
    }

    fn from_algo(e: AlgoError, last: Option<MetricRecord>) -> Self {
        match e {
            AlgoError::Diverged { iter } => RunError::Diverged { iter, last },
            AlgoError::Estimator { source: crate::estimator::EstimatorError::NonFinite(_), .. } => {
                RunError::Diverged { iter: last.map_or(0, |r| r.iter), last }
            }
            AlgoError::Topology(t) => RunError::Topology(t),
            other => RunError::Algo(other),
        }
    }
}

/// Communication graph for `spec` on `n` nodes.
pub fn build_graph(spec: &GraphSpec, n: usize) -> Result<Graph, TopologyError> {
    match spec.kind {
        GraphKind::Ring => gen_ring(n),
        GraphKind::Complete => gen_complete(n),
        GraphKind::Sphere => {
            let mut rng = stream_rng(spec.seed, stream::GRAPH);
            gen_random_sphere_graph_with_attempts(n, spec.angle_threshold, &mut rng, spec.max_attempts)
        }
    }
}

/// Queries per node spent by one iteration after initialization.
pub fn queries_per_step(algorithm: Algorithm, problem: &ProblemSpec) -> u64 {
    match algorithm {
        Algorithm::Dzovr => 4,
        Algorithm::Dgd2pt => 2,
        Algorithm::Dgt2d => ((problem.d + 1) * problem.m) as u64,
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricRecord>,
    pub rho: f64,
    /// Iteration of the first record below `stop_grad_sq`, if one was set and reached.
    pub threshold_iter: Option<usize>,
}

/// Run to completion, collecting every record.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    run_with(cfg, |_| {})
}

/// Run to completion, passing each record to `sink` as it is produced.
pub fn run_with<F: FnMut(&MetricRecord) + Send>(cfg: &RunConfig, sink: F) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let problem = synth_problem(cfg.problem.n, cfg.problem.m, cfg.problem.d, cfg.problem.seed)?;
    let graph = build_graph(&cfg.graph, cfg.problem.n)?;
    let w = metropolis_weights(&graph)?;
    run_on(cfg, &problem, w, sink)
}

/// Run on a prebuilt problem and mixing matrix.
pub fn run_on<F: FnMut(&MetricRecord) + Send>(
    cfg: &RunConfig,
    problem: &ProblemInstance,
    w: ConsensusMatrix,
    mut sink: F,
) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let rho = w.rho();
    cfg.policy.install(cfg.threads, move || {
        let start = Instant::now();
        let stamp = |mut r: MetricRecord| {
            if cfg.wall_clock {
                r.wall_ms = start.elapsed().as_millis() as u64;
            }
            r
        };
        let algo_seed = mix_seed(cfg.master_seed, 0xA160);
        let mut state = SwarmState::init(problem, w, &cfg.algo, algo_seed, cfg.policy)
            .map_err(|e| RunError::from_algo(e, None))?;
        let step_cost = queries_per_step(cfg.algo.algorithm, &cfg.problem);

        let mut records = Vec::new();
        let mut threshold_iter = None;
        let mut emit = |r: MetricRecord, records: &mut Vec<MetricRecord>| -> bool {
            sink(&r);
            records.push(r);
            match cfg.stop_grad_sq {
                Some(th) if r.grad_sq < th => {
                    threshold_iter = Some(r.iter);
                    true
                }
                _ => false,
            }
        };

        let first = stamp(swarm_metrics(&state, problem));
        let mut done = emit(first, &mut records);
        while !done {
            let more = match cfg.stop {
                StopRule::MaxIters(k) => state.k < k,
                StopRule::QueryBudget(b) => state.ledger.max_per_node() + step_cost <= b,
            };
            if !more {
                break;
            }
            state.step(problem, &cfg.algo).map_err(|e| RunError::from_algo(e, records.last().copied()))?;
            let at_stride = state.k % cfg.metric_stride == 0;
            let last = match cfg.stop {
                StopRule::MaxIters(k) => state.k >= k,
                StopRule::QueryBudget(b) => state.ledger.max_per_node() + step_cost > b,
            };
            if at_stride || last {
                let r = stamp(swarm_metrics(&state, problem));
                done = emit(r, &mut records);
            }
        }
        Ok(RunOutput { records, rho, threshold_iter })
    })
}
