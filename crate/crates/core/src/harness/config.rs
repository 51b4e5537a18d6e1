//! Run configuration and its flat `key = value` text form.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::algorithms::{AlgoConfig, Algorithm};
use crate::estimator::{ScheduleMode, SmoothingSchedule};
use crate::exec::ExecPolicy;

use super::RunError;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GraphSpec {
    pub kind: crate::topology::GraphKind,
    pub angle_threshold: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum StopRule {
    MaxIters(usize),
    /// Per-node query budget. Initialization always runs; afterwards a step
    /// is taken only if it fits in the budget.
    QueryBudget(u64),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    pub algo: AlgoConfig,
    pub stop: StopRule,
    /// Optional early stop once a recorded `grad_sq` falls below this value.
    pub stop_grad_sq: Option<f64>,
    pub metric_stride: usize,
    pub master_seed: u64,
    /// Worker-thread cap; `None` uses the ambient pool.
    pub threads: Option<usize>,
    #[serde(skip)]
    pub policy: ExecPolicy,
    /// Record elapsed wall time. Off by default so that output files are
    /// byte-reproducible.
    pub wall_clock: bool,
}

impl Default for RunConfig {
    /// The reference comparison setup: 20 nodes, 100 samples each, `d = 20`,
    /// random sphere graph with threshold `pi/4`, DZOVR with `alpha = 0.05`,
    /// `beta = 0.001`, `b0 = 100`, constant radius `1e-4`, `2e5` queries per node.
    fn default() -> Self {
        let d = 20;
        RunConfig {
            problem: ProblemSpec { n: 20, m: 100, d, seed: 1 },
            graph: GraphSpec {
                kind: crate::topology::GraphKind::Sphere,
                angle_threshold: PI / 4.0,
                seed: 1,
                max_attempts: crate::topology::SPHERE_MAX_ATTEMPTS,
            },
            algo: AlgoConfig {
                algorithm: Algorithm::Dzovr,
                alpha: 0.05,
                beta: 0.001,
                b0: 100,
                schedule: SmoothingSchedule::constant(1e-4, 0.001, d),
            },
            stop: StopRule::QueryBudget(200_000),
            stop_grad_sq: None,
            metric_stride: 10,
            master_seed: 1,
            threads: None,
            policy: ExecPolicy::Parallel,
            wall_clock: false,
        }
    }
}

fn bad(key: &str, value: &str) -> RunError {
    RunError::Config(format!("invalid value `{value}` for `{key}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, RunError> {
    value.parse::<T>().map_err(|_| bad(key, value))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.metric_stride == 0 {
            return Err(RunError::Config("metric_stride must be at least 1".into()));
        }
        if self.problem.n == 0 || self.problem.m == 0 || self.problem.d == 0 {
            return Err(RunError::Config("n, m, d must be positive".into()));
        }
        self.algo.validate().map_err(|e| RunError::Config(e.to_string()))
    }

    /// Keep the schedule's dimension and momentum in sync after edits.
    pub fn sync_schedule(&mut self) {
        self.algo.schedule.d = self.problem.d;
        self.algo.schedule.beta = self.algo.beta;
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        let v = value.trim();
        match key.trim() {
            "n" => self.problem.n = num(key, v)?,
            "m" => self.problem.m = num(key, v)?,
            "d" => self.problem.d = num(key, v)?,
            "problem_seed" => self.problem.seed = num(key, v)?,
            "graph" => self.graph.kind = v.parse().map_err(RunError::Config)?,
            "angle_threshold" => self.graph.angle_threshold = num(key, v)?,
            "graph_seed" => self.graph.seed = num(key, v)?,
            "graph_max_attempts" => self.graph.max_attempts = num(key, v)?,
            "algo" => self.algo.algorithm = v.parse().map_err(RunError::Config)?,
            "alpha" => self.algo.alpha = num(key, v)?,
            "beta" => self.algo.beta = num(key, v)?,
            "b0" => self.algo.b0 = num(key, v)?,
            "schedule" => match v {
                "corollary" => self.algo.schedule.mode = ScheduleMode::Corollary,
                "constant" => {
                    if !matches!(self.algo.schedule.mode, ScheduleMode::Constant(_)) {
                        self.algo.schedule.mode = ScheduleMode::Constant(1e-4);
                    }
                }
                _ => return Err(bad(key, v)),
            },
            "t" => self.algo.schedule.mode = ScheduleMode::Constant(num(key, v)?),
            "max_iters" => self.stop = StopRule::MaxIters(num(key, v)?),
            "query_budget" => self.stop = StopRule::QueryBudget(num(key, v)?),
            "stop_grad_sq" => self.stop_grad_sq = if v == "none" { None } else { Some(num(key, v)?) },
            "metric_stride" => self.metric_stride = num(key, v)?,
            "master_seed" => self.master_seed = num(key, v)?,
            "threads" => self.threads = if v == "none" { None } else { Some(num(key, v)?) },
            "wall_clock" => self.wall_clock = num(key, v)?,
            other => return Err(RunError::Config(format!("unknown key `{other}`"))),
        }
        self.sync_schedule();
        Ok(())
    }

    /// Parse a flat config file on top of the defaults. Exactly one of
    /// `max_iters` / `query_budget` may appear.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), RunError> {
        let mut stops = 0;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RunError::Config(format!("line {}: expected `key = value`", ln + 1)))?;
            if matches!(k.trim(), "max_iters" | "query_budget") {
                stops += 1;
            }
            self.set(k, v)?;
        }
        if stops > 1 {
            return Err(RunError::Config("set exactly one of `max_iters` and `query_budget`".into()));
        }
        self.validate()
    }

    /// Flat `key = value` rendering; [`RunConfig::parse`] reads it back.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n", self.problem.n.to_string());
        kv("m", self.problem.m.to_string());
        kv("d", self.problem.d.to_string());
        kv("problem_seed", self.problem.seed.to_string());
        kv("graph", self.graph.kind.to_string());
        kv("angle_threshold", format!("{:?}", self.graph.angle_threshold));
        kv("graph_seed", self.graph.seed.to_string());
        kv("graph_max_attempts", self.graph.max_attempts.to_string());
        kv("algo", self.algo.algorithm.to_string());
        kv("alpha", format!("{:?}", self.algo.alpha));
        kv("beta", format!("{:?}", self.algo.beta));
        kv("b0", self.algo.b0.to_string());
        match self.algo.schedule.mode {
            ScheduleMode::Corollary => kv("schedule", "corollary".into()),
            ScheduleMode::Constant(t) => kv("t", format!("{t:?}")),
        }
        match self.stop {
            StopRule::MaxIters(k) => kv("max_iters", k.to_string()),
            StopRule::QueryBudget(q) => kv("query_budget", q.to_string()),
        }
        kv("stop_grad_sq", self.stop_grad_sq.map_or("none".into(), |v| format!("{v:?}")));
        kv("metric_stride", self.metric_stride.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("wall_clock", self.wall_clock.to_string());
        s
    }
}
