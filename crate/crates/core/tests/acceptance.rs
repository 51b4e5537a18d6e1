//! Acceptance suite, run as a plain binary by `cargo test`. Every criterion
//! prints one `PASS`/`FAIL` line; the process exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dzo_sim::algorithms::{AlgoConfig, Algorithm, SwarmState};
use dzo_sim::analysis::{
    corollary_params, derive_constants, lemma1_montecarlo, lemma1_standard_errors, step_bounds, TheoremInputs,
};
use dzo_sim::estimator::{two_d_point, two_point, Direction, SmoothingSchedule};
use dzo_sim::exec::ExecPolicy;
use dzo_sim::harness::csv::render_csv;
use dzo_sim::harness::experiments::{
    experiment_comparison, experiment_speedup, experiment_topology, SpeedupSettings, GRAD_THRESHOLD, TOPOLOGIES,
};
use dzo_sim::harness::{queries_per_step, run, RunConfig, StopRule};
use dzo_sim::problem::{synth_problem, LocalObjectives};
use dzo_sim::rng::stream_rng;
use dzo_sim::topology::{
    gen_complete, gen_random_sphere_graph_with_attempts, gen_ring, metropolis_weights, Graph,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const STOCHASTIC_TOL: f64 = 1e-12;
const RING4_RHO_TOL: f64 = 1e-12;
const TRACKING_TOL: f64 = 1e-10;
const ESTIMATOR_REL_TOL: f64 = 1e-10;
const MC_SIGMAS: f64 = 4.0;
const MC_SAMPLES: usize = 100_000;
const MC_TIME_LIMIT: Duration = Duration::from_secs(5);
const CONTRACTION_SLACK: f64 = 1e-12;
const ORDERING_MIN_SEEDS: usize = 8;
const TOPOLOGY_RATIO_MAX: f64 = 5.0;
const SPEEDUP_R2_MIN: f64 = 0.9;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gaussian(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// `rho` of the Metropolis matrix of a ring with `n >= 3` nodes, whose
/// eigenvalues are `(1 + 2 cos(2 pi k / n)) / 3`.
fn ring_rho_closed_form(n: usize) -> f64 {
    (1..n).map(|k| ((1.0 + 2.0 * (2.0 * PI * k as f64 / n as f64).cos()) / 3.0).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Check {
    let mut rng = stream_rng(11, 0);
    let mut counts = [0usize; 3];
    for g_idx in 0..100 {
        let graph: Graph = match g_idx % 3 {
            0 => gen_ring(rng.random_range(3..=50)),
            1 => gen_complete(rng.random_range(2..=50)),
            _ => gen_random_sphere_graph_with_attempts(rng.random_range(30..=50), PI / 4.0, &mut rng, 100_000),
        }
        .map_err(|e| format!("graph {g_idx}: {e}"))?;
        counts[g_idx % 3] += 1;
        ensure(graph.is_connected(), || format!("graph {g_idx} disconnected"))?;
        let w = metropolis_weights(&graph).map_err(|e| e.to_string())?;
        let n = w.n();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| w.get(i, j)).sum();
            let col: f64 = (0..n).map(|j| w.get(j, i)).sum();
            ensure((row - 1.0).abs() <= STOCHASTIC_TOL && (col - 1.0).abs() <= STOCHASTIC_TOL, || {
                format!("graph {g_idx}: row/col {i} sums {row}, {col}")
            })?;
            for j in 0..n {
                ensure(w.get(i, j) >= 0.0, || format!("graph {g_idx}: negative weight"))?;
                ensure(w.get(i, j) == w.get(j, i), || format!("graph {g_idx}: asymmetric at ({i},{j})"))?;
            }
        }
        ensure(w.rho() < 1.0, || format!("graph {g_idx}: rho = {}", w.rho()))?;
    }
    let rho4 = metropolis_weights(&gen_ring(4).unwrap()).unwrap().rho();
    let oracle = ring_rho_closed_form(4);
    ensure((rho4 - 1.0 / 3.0).abs() <= RING4_RHO_TOL && (oracle - 1.0 / 3.0).abs() <= RING4_RHO_TOL, || {
        format!("ring-4 rho {rho4}, closed form {oracle}")
    })?;
    Ok(format!("100 graphs ({} ring, {} complete, {} sphere); ring-4 rho = {rho4:.15}", counts[0], counts[1], counts[2]))
}

fn dzovr_config(alpha: f64, beta: f64, b0: usize, d: usize) -> AlgoConfig {
    AlgoConfig { algorithm: Algorithm::Dzovr, alpha, beta, b0, schedule: SmoothingSchedule::constant(1e-4, beta, d) }
}

fn criterion_2() -> Check {
    let (n, d) = (5, 4);
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let problem = synth_problem(n, 10, d, seed).unwrap();
        let w = metropolis_weights(&gen_ring(n).unwrap()).unwrap();
        let cfg = dzovr_config(0.05, 0.1, 5, d);
        let mut s = SwarmState::init(&problem, w, &cfg, seed, ExecPolicy::Parallel).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&s.mean_g(), &s.mean_m()));
        for _ in 0..200 {
            s.step(&problem, &cfg).map_err(|e| e.to_string())?;
            let xbar_prev: Vec<f64> = {
                let mut v = vec![0.0; d];
                for node in &s.nodes {
                    v.iter_mut().zip(&node.x_prev).for_each(|(a, b)| *a += b / n as f64);
                }
                v
            };
            let mbar = s.mean_m();
            let expect_x: Vec<f64> = xbar_prev.iter().zip(&mbar).map(|(x, m)| x - cfg.alpha * m).collect();
            worst = worst.max(max_abs_diff(&s.mean_g(), &mbar));
            worst = worst.max(max_abs_diff(&s.mean_x(), &expect_x));
        }
    }
    ensure(worst <= TRACKING_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 seeds x 200 iterations, max deviation {worst:.2e}"))
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / scale
}

fn criterion_3() -> Check {
    let mut rng = stream_rng(33, 0);
    let mut worst: f64 = 0.0;
    for d in [1usize, 3, 10, 20] {
        for _ in 0..20 {
            let a = gaussian(&mut rng, d);
            let c: f64 = StandardNormal.sample(&mut rng);
            let x = gaussian(&mut rng, d);
            let lin = |y: &[f64]| c + a.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
            let u = Direction::normalized(gaussian(&mut rng, d)).unwrap();
            let au: f64 = a.iter().zip(u.as_slice()).map(|(p, q)| p * q).sum();
            let want2: Vec<f64> = u.as_slice().iter().map(|v| d as f64 * au * v).collect();
            let mut oracle = |y: &[f64], _xi: usize| lin(y);
            let got2 = two_point(&mut oracle, &x, &u, 0, 1e-3).map_err(|e| e.to_string())?;
            worst = worst.max(rel_err(&got2, &want2));
            let got2d = two_d_point(lin, &x, 1e-3).map_err(|e| e.to_string())?;
            worst = worst.max(rel_err(&got2d, &a));
        }
    }
    ensure(worst <= ESTIMATOR_REL_TOL, || format!("linear exactness rel err {worst:e}"))?;
    let mut worst_q: f64 = 0.0;
    for &t in &[1e-3, 1e-2, 0.5] {
        let x = gaussian(&mut rng, 7);
        let half_sq = |y: &[f64]| 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        let got = two_d_point(half_sq, &x, t).map_err(|e| e.to_string())?;
        let want: Vec<f64> = x.iter().map(|v| v + t / 2.0).collect();
        worst_q = worst_q.max(rel_err(&got, &want));
    }
    ensure(worst_q <= ESTIMATOR_REL_TOL, || format!("quadratic rel err {worst_q:e}"))?;
    Ok(format!("linear rel err {worst:.1e}, quadratic rel err {worst_q:.1e}"))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let mut rng = stream_rng(44, 0);
    let mut worst_ratio: f64 = 0.0;
    for d in [3usize, 20] {
        for rep in 0..5u64 {
            let h = gaussian(&mut rng, d);
            let e = lemma1_montecarlo(&h, MC_SAMPLES, 1000 * d as u64 + rep, ExecPolicy::Parallel);
            let (se_mean, se_moment) = lemma1_standard_errors(&h, MC_SAMPLES);
            worst_ratio = worst_ratio.max(e.mean_err / se_mean).max(e.moment_err / se_moment);
        }
    }
    let elapsed = start.elapsed();
    ensure(worst_ratio <= MC_SIGMAS, || format!("error reached {worst_ratio:.2} standard errors"))?;
    ensure(elapsed < MC_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("worst error {worst_ratio:.2} SE, {:.2} s", elapsed.as_secs_f64()))
}

fn criterion_5() -> Check {
    let (n, m, d, b0) = (6, 12, 5, 7);
    let problem = synth_problem(n, m, d, 5).unwrap();
    let mut base = RunConfig::default();
    base.problem.n = n;
    base.problem.m = m;
    base.problem.d = d;
    for algorithm in [Algorithm::Dzovr, Algorithm::Dgd2pt, Algorithm::Dgt2d] {
        let w = metropolis_weights(&gen_ring(n).unwrap()).unwrap();
        let cfg = AlgoConfig { algorithm, alpha: 0.01, ..dzovr_config(0.01, 0.2, b0, d) };
        let mut s = SwarmState::init(&problem, w, &cfg, 9, ExecPolicy::Parallel).map_err(|e| e.to_string())?;
        let init_expect = match algorithm {
            Algorithm::Dzovr => 2 * b0 as u64,
            Algorithm::Dgd2pt => 0,
            Algorithm::Dgt2d => ((d + 1) * m) as u64,
        };
        ensure(s.ledger.per_node().iter().all(|&q| q == init_expect), || {
            format!("{algorithm}: init ledger {:?}, expected {init_expect} each", s.ledger.per_node())
        })?;
        let per_node = queries_per_step(algorithm, &base.problem);
        let want_total = per_node * n as u64;
        let expect = match algorithm {
            Algorithm::Dzovr => 4 * n as u64,
            Algorithm::Dgd2pt => 2 * n as u64,
            Algorithm::Dgt2d => ((d + 1) * m * n) as u64,
        };
        ensure(want_total == expect, || format!("{algorithm}: step cost table {want_total} != {expect}"))?;
        for k in 0..25 {
            let before = s.ledger.per_node().to_vec();
            s.step(&problem, &cfg).map_err(|e| e.to_string())?;
            let delta: Vec<u64> = s.ledger.per_node().iter().zip(&before).map(|(a, b)| a - b).collect();
            ensure(delta.iter().all(|&q| q == per_node) && delta.iter().sum::<u64>() == expect, || {
                format!("{algorithm}: step {k} deltas {delta:?}")
            })?;
        }
    }
    Ok(format!("init 2*b0 = {}, per-step totals 4n, 2n, (d+1)mn over 25 steps", 2 * b0))
}

/// Every sample loss is zero.
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
        1
    }
    fn sample_loss(&self, _node: usize, _x: &[f64], _sample: usize) -> f64 {
        0.0
    }
}

fn criterion_6() -> Check {
    let (n, d) = (8, 4);
    let mut worst_factor: f64 = 0.0;
    let mut rho = 0.0;
    for seed in 0..20u64 {
        // beta = 1: momentum equals the fresh estimate.
        let problem = synth_problem(n, 10, d, seed).unwrap();
        let w = metropolis_weights(&gen_ring(n).unwrap()).unwrap();
        let cfg = dzovr_config(0.05, 1.0, 4, d);
        let mut s = SwarmState::init(&problem, w.clone(), &cfg, seed, ExecPolicy::Parallel).map_err(|e| e.to_string())?;
        for _ in 0..30 {
            s.step(&problem, &cfg).map_err(|e| e.to_string())?;
            for (i, node) in s.nodes.iter().enumerate() {
                ensure(node.m == node.est, || format!("seed {seed}: node {i} momentum differs from estimate"))?;
            }
        }

        // Zero oracle: iterates only mix.
        let flat = Flat { n, d };
        let mut rng = stream_rng(seed, 7);
        let x0: Vec<Vec<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
        let cfg = dzovr_config(0.05, 0.3, 4, d);
        rho = w.rho();
        let mut s = SwarmState::init_from(&flat, w.clone(), &cfg, seed, ExecPolicy::Parallel, x0)
            .map_err(|e| e.to_string())?;
        let mut prev = s.consensus_error().sqrt();
        for k in 0..40 {
            s.step(&flat, &cfg).map_err(|e| e.to_string())?;
            let cur = s.consensus_error().sqrt();
            if prev > 1e-150 {
                let factor = cur / prev;
                worst_factor = worst_factor.max(factor);
                ensure(factor <= rho + CONTRACTION_SLACK, || format!("seed {seed} step {k}: factor {factor} > rho {rho}"))?;
            }
            prev = cur;
        }
    }
    Ok(format!("20 seeds; worst contraction factor {worst_factor:.6} <= rho {rho:.6}"))
}

fn small_run_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [("n", "12"), ("m", "20"), ("d", "6"), ("b0", "10"), ("metric_stride", "5")] {
        cfg.set(k, v).unwrap();
    }
    cfg.graph.max_attempts = 100_000;
    cfg.stop = StopRule::QueryBudget(4_000);
    cfg
}

fn criterion_7() -> Check {
    let mut outputs = Vec::new();
    for algorithm in ["dzovr", "dgd2pt", "dgt2d"] {
        let mut texts = Vec::new();
        for (policy, threads) in [(ExecPolicy::Parallel, Some(1)), (ExecPolicy::Parallel, Some(4)), (ExecPolicy::Sequential, None)] {
            let mut cfg = small_run_config();
            cfg.set("algo", algorithm).unwrap();
            cfg.policy = policy;
            cfg.threads = threads;
            let out = run(&cfg).map_err(|e| e.to_string())?;
            texts.push(render_csv(&cfg.to_kv(), &out.records).map_err(|e| e.to_string())?);
        }
        ensure(texts[0] == texts[1], || format!("{algorithm}: 1 vs 4 threads differ"))?;
        ensure(texts[0] == texts[2], || format!("{algorithm}: parallel vs sequential differ"))?;
        outputs.push(texts[0].len());
    }
    Ok(format!("three algorithms, byte-identical CSV ({outputs:?} bytes) at 1 and 4 threads and sequentially"))
}

fn criterion_8() -> Check {
    let p = corollary_params(20, 20, 1_000_000, 1.0).map_err(|e| e.to_string())?;
    ensure(p.config.alpha == 1e-4, || format!("alpha = {:e}", p.config.alpha))?;
    for (n, k, l) in [(8usize, 1_000u64, 2.0), (5, 8_000, 0.5), (50, 27_000_000, 4.0)] {
        let got = corollary_params(n, n, k, l).map_err(|e| e.to_string())?.config.alpha;
        let want = 1.0 / (100.0 * l * (k as f64).cbrt());
        ensure(got == want, || format!("n = d = {n}, K = {k}: alpha {got:e} vs {want:e}"))?;
    }
    let ds = [2usize, 5, 20, 100];
    let rhos = [0.0, 0.3, 0.7, 0.95];
    let amax = |d: usize, rho: f64| {
        step_bounds(&derive_constants(&TheoremInputs::with_defaults(1.0, rho, 20, d, 0.01)).unwrap()).alpha_max
    };
    for (di, &d) in ds.iter().enumerate() {
        for (ri, &rho) in rhos.iter().enumerate() {
            let a = amax(d, rho);
            if di + 1 < ds.len() {
                let b = amax(ds[di + 1], rho);
                ensure(b <= a, || format!("alpha_max grew with d at rho {rho}: {a:e} -> {b:e}"))?;
            }
            if ri + 1 < rhos.len() {
                let b = amax(d, rhos[ri + 1]);
                ensure(b <= a, || format!("alpha_max grew with rho at d {d}: {a:e} -> {b:e}"))?;
            }
        }
    }
    Ok("alpha = 1e-4 exactly; n = d cancellation exact; alpha_max monotone on 4x4 grid".into())
}

fn criterion_9() -> Check {
    let base = RunConfig::default();
    let mut ordered = 0;
    let mut report = Vec::new();
    for seed in 1..=10u64 {
        let runs = experiment_comparison(&base, seed).map_err(|e| e.to_string())?;
        let dz = runs[0].final_record();
        let dgd = runs[1].final_record();
        let dgt = runs[2].final_record();
        ensure(dz.queries_per_node <= 200_000 && dgd.queries_per_node <= 200_000 && dgt.queries_per_node <= 200_000, || {
            format!("seed {seed}: budget exceeded")
        })?;
        if dz.grad_sq < dgd.grad_sq && dz.grad_sq < dgt.grad_sq {
            ordered += 1;
        }
        let reached = runs[0].records.iter().any(|r| r.grad_sq <= GRAD_THRESHOLD);
        ensure(reached, || format!("seed {seed}: DZOVR never reached grad_sq <= {GRAD_THRESHOLD}"))?;
        report.push(dz.grad_sq / dgd.grad_sq.min(dgt.grad_sq));
    }
    ensure(ordered >= ORDERING_MIN_SEEDS, || format!("ordering held in {ordered}/10 seeds"))?;
    let worst = report.iter().copied().fold(0.0, f64::max);
    Ok(format!("ordering in {ordered}/10 seeds; worst DZOVR/best-baseline grad_sq ratio {worst:.2e}"))
}

fn criterion_10() -> Check {
    let summary = experiment_topology(&RunConfig::default(), 10).map_err(|e| e.to_string())?;
    ensure(summary.grad_ratio <= TOPOLOGY_RATIO_MAX, || format!("ratio {:.3}", summary.grad_ratio))?;
    let finals: Vec<String> =
        summary.rows.iter().map(|r| format!("{} {:.3e}", r.kind.name(), r.final_grad_mean)).collect();
    Ok(format!("ratio {:.3} ({})", summary.grad_ratio, finals.join(", ")))
}

fn criterion_11() -> Check {
    let summary = experiment_speedup(&SpeedupSettings::default()).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for kind in TOPOLOGIES {
        let pts = summary.points_for(kind);
        ensure(pts.len() == 4, || format!("{kind}: {} points", pts.len()))?;
        for w in pts.windows(2) {
            ensure(w[0].n < w[1].n && w[1].iterations < w[0].iterations, || {
                format!("{kind}: iterations {} at n={} vs {} at n={}", w[0].iterations, w[0].n, w[1].iterations, w[1].n)
            })?;
        }
        let fit = summary.fits.iter().find(|f| f.kind == kind).and_then(|f| f.fit).ok_or(format!("{kind}: no fit"))?;
        ensure(fit.r2 >= SPEEDUP_R2_MIN, || format!("{kind}: R^2 {:.4}", fit.r2))?;
        parts.push(format!("{} R^2 {:.3}", kind.name(), fit.r2));
    }
    Ok(parts.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("consensus matrices", criterion_1),
        ("tracking identities", criterion_2),
        ("estimator exactness", criterion_3),
        ("sphere moment Monte Carlo", criterion_4),
        ("query accounting", criterion_5),
        ("momentum reduction and contraction", criterion_6),
        ("thread-count determinism", criterion_7),
        ("step-size calculators", criterion_8),
        ("algorithm comparison", criterion_9),
        ("topology independence", criterion_10),
        ("linear speedup", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = check();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
