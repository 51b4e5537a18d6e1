//! Simulation library for decentralized stochastic zeroth-order optimization.
//!
//! The crate models `n` nodes on an undirected communication graph, each
//! holding a private finite-sum objective that can only be queried for
//! function values. Nodes cooperate through a doubly stochastic mixing matrix
//! to find a stationary point of the network-average objective.
//!
//! Modules, bottom-up:
//!
//! * [`topology`]: graphs, Metropolis-Hastings mixing matrices and their
//!   consensus contraction factor.
//! * [`problem`]: the sigmoid squared-loss benchmark as a query-counted
//!   stochastic value oracle.
//! * [`estimator`]: sphere sampling, two-point and coordinate-wise finite
//!   difference gradient estimators, smoothing-radius schedules.
//! * [`algorithms`]: bulk-synchronous state machines for the variance-reduced
//!   tracking method (DZOVR) and the two-point DGD / coordinate DGT baselines.
//! * [`analysis`]: step-size / momentum feasibility calculator and the
//!   Monte Carlo checks of the sphere-estimator moment identities.
//! * [`harness`]: run configuration, CSV/JSON output and the experiment
//!   drivers used by the `dzo-sim` binary.
//!
//! Node indices are 0-based throughout the code.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod analysis;
pub mod estimator;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod topology;

pub use algorithms::{AlgoConfig, Algorithm, NodeState, SwarmState};
pub use exec::ExecPolicy;
pub use problem::{ProblemInstance, QueryLedger};
pub use topology::{ConsensusMatrix, Graph, GraphKind};
