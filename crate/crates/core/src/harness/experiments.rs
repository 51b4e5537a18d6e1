//! The three reproduction experiments: algorithm comparison under a shared
//! query budget, network-topology sensitivity, and speedup in the node count.
//!
//! Independent runs are fanned out with the configured [`ExecPolicy`]; each
//! run itself executes sequentially, so outputs are identical for any thread
//! count.

use std::path::{Path, PathBuf};

use crate::algorithms::Algorithm;
use crate::exec::ExecPolicy;
use crate::rng::mix_seed;
use crate::topology::GraphKind;

use super::csv::emit_csv;
use super::fit::{linear_fit, LinearFit};
use super::{run, MetricRecord, RunConfig, RunError, StopRule};

/// Threshold on `||grad f(mean x)||^2` used by the speedup experiment.
pub const GRAD_THRESHOLD: f64 = 1e-3;

fn run_all(configs: &[RunConfig], policy: ExecPolicy) -> Result<Vec<super::RunOutput>, RunError> {
    policy
        .map_indices(configs.len(), |i| {
            let mut cfg = configs[i].clone();
            cfg.policy = ExecPolicy::Sequential;
            cfg.threads = None;
            run(&cfg)
        })
        .into_iter()
        .collect()
}

/// One algorithm's run in the comparison experiment.
#[derive(Debug, Clone)]
pub struct AlgoRun {
    pub algorithm: Algorithm,
    pub config: RunConfig,
    pub records: Vec<MetricRecord>,
}

impl AlgoRun {
    pub fn final_record(&self) -> &MetricRecord {
        self.records.last().expect("runs emit at least one record")
    }
}

/// Step sizes of the baselines: `0.1 / k` for two-point DGD, `0.02` for DGT.
pub const DGD_ALPHA: f64 = 0.1;
pub const DGT_ALPHA: f64 = 0.02;

/// DZOVR (from `base`), two-point DGD and coordinate DGT on the same problem,
/// graph and query budget. `seed` drives problem, graph and algorithm streams.
pub fn comparison_configs(base: &RunConfig, seed: u64) -> Vec<RunConfig> {
    let mut base = base.clone();
    base.problem.seed = seed;
    base.graph.seed = seed;
    base.master_seed = seed;
    [Algorithm::Dzovr, Algorithm::Dgd2pt, Algorithm::Dgt2d]
        .into_iter()
        .map(|alg| {
            let mut c = base.clone();
            c.algo.algorithm = alg;
            match alg {
                Algorithm::Dzovr => {}
                Algorithm::Dgd2pt => c.algo.alpha = DGD_ALPHA,
                Algorithm::Dgt2d => {
                    c.algo.alpha = DGT_ALPHA;
                    // one DGT step costs (d + 1) m queries; record every step
                    c.metric_stride = 1;
                }
            }
            c
        })
        .collect()
}

pub fn experiment_comparison(base: &RunConfig, seed: u64) -> Result<Vec<AlgoRun>, RunError> {
    let configs = comparison_configs(base, seed);
    let outs = run_all(&configs, base.policy)?;
    Ok(configs
        .into_iter()
        .zip(outs)
        .map(|(config, out)| AlgoRun { algorithm: config.algo.algorithm, config, records: out.records })
        .collect())
}

/// One CSV per algorithm, `compare_<algo>.csv` under `dir`.
pub fn write_comparison(runs: &[AlgoRun], dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    runs.iter()
        .map(|r| {
            let path = dir.join(format!("compare_{}.csv", r.algorithm));
            emit_csv(&path, &r.config.to_kv(), &r.records)?;
            Ok(path)
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub queries_per_node: u64,
    pub f_mean: f64,
    pub f_std: f64,
    pub grad_mean: f64,
    pub grad_std: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TopologyRow {
    pub kind: GraphKind,
    pub trials: usize,
    pub rho_mean: f64,
    pub problem_seeds: Vec<u64>,
    pub curve: Vec<CurvePoint>,
    pub final_f_mean: f64,
    pub final_f_std: f64,
    pub final_grad_mean: f64,
    pub final_grad_std: f64,
    /// Per trial: first recorded iteration with `grad_sq` below [`GRAD_THRESHOLD`].
    pub iters_to_threshold: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TopologySummary {
    pub rows: Vec<TopologyRow>,
    /// Largest over smallest mean final `grad_sq` across topologies.
    pub grad_ratio: f64,
}

pub const TOPOLOGIES: [GraphKind; 3] = [GraphKind::Sphere, GraphKind::Complete, GraphKind::Ring];

/// Seeds of trial `t`: problem, graph, algorithm.
pub fn trial_seeds(master: u64, t: usize) -> (u64, u64, u64) {
    let t = t as u64;
    (mix_seed(master, 3 * t + 1), mix_seed(master, 3 * t + 2), mix_seed(master, 3 * t + 3))
}

/// DZOVR with identical settings on the sphere, complete and ring graphs,
/// `trials` seeds each. Within a trial every topology sees the same problem.
pub fn experiment_topology(base: &RunConfig, trials: usize) -> Result<TopologySummary, RunError> {
    if trials < 2 {
        return Err(RunError::Config("the topology experiment needs at least 2 trials".into()));
    }
    let mut configs = Vec::new();
    for kind in TOPOLOGIES {
        for t in 0..trials {
            let (ps, gs, ms) = trial_seeds(base.master_seed, t);
            let mut c = base.clone();
            c.algo.algorithm = Algorithm::Dzovr;
            c.graph.kind = kind;
            c.problem.seed = ps;
            c.graph.seed = gs;
            c.master_seed = ms;
            c.stop_grad_sq = None;
            configs.push(c);
        }
    }
    let outs = run_all(&configs, base.policy)?;
    let mut rows = Vec::new();
    for (ki, kind) in TOPOLOGIES.into_iter().enumerate() {
        let runs = &outs[ki * trials..(ki + 1) * trials];
        let len = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
        let curve = (0..len)
            .map(|j| {
                let f: Vec<f64> = runs.iter().map(|r| r.records[j].f_bar).collect();
                let g: Vec<f64> = runs.iter().map(|r| r.records[j].grad_sq).collect();
                let (f_mean, f_std) = mean_std(&f);
                let (grad_mean, grad_std) = mean_std(&g);
                let r0 = &runs[0].records[j];
                CurvePoint { iter: r0.iter, queries_per_node: r0.queries_per_node, f_mean, f_std, grad_mean, grad_std }
            })
            .collect::<Vec<_>>();
        let last = curve.last().copied().ok_or_else(|| RunError::Config("empty topology run".into()))?;
        let rhos: Vec<f64> = runs.iter().map(|r| r.rho).collect();
        rows.push(TopologyRow {
            kind,
            trials,
            rho_mean: mean_std(&rhos).0,
            problem_seeds: configs[ki * trials..(ki + 1) * trials].iter().map(|c| c.problem.seed).collect(),
            final_f_mean: last.f_mean,
            final_f_std: last.f_std,
            final_grad_mean: last.grad_mean,
            final_grad_std: last.grad_std,
            curve,
            iters_to_threshold: runs
                .iter()
                .map(|r| r.records.iter().find(|x| x.grad_sq < GRAD_THRESHOLD).map(|x| x.iter))
                .collect(),
        });
    }
    let finals: Vec<f64> = rows.iter().map(|r| r.final_grad_mean).collect();
    let hi = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TopologySummary { rows, grad_ratio: hi / lo })
}

#[derive(Debug, Clone)]
pub struct SpeedupSettings {
    pub base: RunConfig,
    pub ns: Vec<usize>,
    /// `alpha = alpha_coef * n^{2/3}`
    pub alpha_coef: f64,
    pub threshold: f64,
    pub iter_cap: usize,
    pub trials: usize,
    /// Sphere-graph resampling limit; small `n` at the default angle is
    /// connected only a few times in a thousand draws.
    pub graph_attempts: usize,
    /// Metric cadence, which is also the resolution of the threshold iteration.
    pub metric_stride: usize,
}

impl Default for SpeedupSettings {
    fn default() -> Self {
        SpeedupSettings {
            base: RunConfig::default(),
            ns: vec![10, 20, 50, 100],
            alpha_coef: 0.005,
            threshold: GRAD_THRESHOLD,
            iter_cap: 1_000_000,
            trials: 10,
            graph_attempts: 100_000,
            metric_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpeedupPoint {
    pub kind: GraphKind,
    pub n: usize,
    pub inv_n: f64,
    pub alpha: f64,
    pub rho_mean: f64,
    /// Mean iterations to threshold over trials (censored runs count as the cap).
    pub iterations: f64,
    pub per_trial: Vec<usize>,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpeedupFit {
    pub kind: GraphKind,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpeedupSummary {
    pub points: Vec<SpeedupPoint>,
    pub fits: Vec<SpeedupFit>,
}

impl SpeedupSummary {
    pub fn points_for(&self, kind: GraphKind) -> Vec<&SpeedupPoint> {
        self.points.iter().filter(|p| p.kind == kind).collect()
    }
}

/// Iterations until `grad_sq` first drops below the threshold, for each node
/// count and topology, followed by a fit of iterations against `1/n`.
pub fn experiment_speedup(settings: &SpeedupSettings) -> Result<SpeedupSummary, RunError> {
    let base = &settings.base;
    let mut configs = Vec::new();
    let mut keys = Vec::new();
    for kind in TOPOLOGIES {
        for &n in &settings.ns {
            for t in 0..settings.trials {
                let (ps, gs, ms) = trial_seeds(base.master_seed, t);
                let mut c = base.clone();
                c.algo.algorithm = Algorithm::Dzovr;
                c.problem.n = n;
                c.graph.kind = kind;
                c.problem.seed = ps;
                c.graph.seed = gs;
                c.master_seed = ms;
                c.algo.alpha = settings.alpha_coef * (n as f64).powf(2.0 / 3.0);
                c.stop = StopRule::MaxIters(settings.iter_cap);
                c.stop_grad_sq = Some(settings.threshold);
                c.graph.max_attempts = settings.graph_attempts;
                c.metric_stride = settings.metric_stride;
                configs.push(c);
                keys.push((kind, n));
            }
        }
    }
    let outs = run_all(&configs, base.policy)?;
    let mut points = Vec::new();
    for (ci, chunk) in outs.chunks(settings.trials).enumerate() {
        let (kind, n) = keys[ci * settings.trials];
        let per_trial: Vec<usize> = chunk.iter().map(|o| o.threshold_iter.unwrap_or(settings.iter_cap)).collect();
        let censored = chunk.iter().filter(|o| o.threshold_iter.is_none()).count();
        let iters: Vec<f64> = per_trial.iter().map(|&v| v as f64).collect();
        let rhos: Vec<f64> = chunk.iter().map(|o| o.rho).collect();
        points.push(SpeedupPoint {
            kind,
            n,
            inv_n: 1.0 / n as f64,
            alpha: configs[ci * settings.trials].algo.alpha,
            rho_mean: mean_std(&rhos).0,
            iterations: mean_std(&iters).0,
            per_trial,
            censored,
        });
    }
    let fits = TOPOLOGIES
        .into_iter()
        .map(|kind| {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                points.iter().filter(|p| p.kind == kind).map(|p| (p.inv_n, p.iterations)).unzip();
            SpeedupFit { kind, fit: linear_fit(&xs, &ys) }
        })
        .collect();
    Ok(SpeedupSummary { points, fits })
}
