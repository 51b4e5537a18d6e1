use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dzo_sim::analysis::{
    convergence_bound, derive_constants, estimate_smoothness, lemma1_montecarlo, lemma1_standard_errors,
    stacked_grad_sq, step_bounds, TheoremInputs,
};
use dzo_sim::exec::{threads_from_env, ExecPolicy};
use dzo_sim::harness::csv::emit_csv;
use dzo_sim::harness::experiments::{
    experiment_comparison, experiment_speedup, experiment_topology, write_comparison, SpeedupSettings,
};
use dzo_sim::harness::{build_graph, run_with, RunConfig, RunError, StopRule};
use dzo_sim::problem::synth_problem;
use dzo_sim::rng::stream_rng;
use dzo_sim::topology::metropolis_weights;
use rand_distr::{Distribution, StandardNormal};

#[derive(Parser)]
#[command(name = "dzo-sim", version, about = "Decentralized zeroth-order optimization simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured algorithm and write its metric CSV.
    Run(Common),
    /// DZOVR vs two-point DGD vs coordinate DGT under a shared query budget.
    Compare(Common),
    /// DZOVR on sphere, complete and ring graphs over several trials.
    Topology(Common),
    /// Iterations to reach the gradient threshold for n in {10, 20, 50, 100}.
    Speedup(Common),
    /// Step-size / momentum feasibility report for the configured setup.
    Feasibility(Feasibility),
    /// Monte Carlo check of the sphere estimator moment identities.
    Verify(Verify),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    b0: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Record elapsed wall time in the CSV (makes output non-reproducible).
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Args)]
struct Feasibility {
    #[command(flatten)]
    common: Common,
    /// Smoothness constant; estimated from the problem when omitted.
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma3: f64,
    #[arg(long, default_value_t = 1.0)]
    m_t: f64,
    /// Horizon for the bound print-out.
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
}

#[derive(Args)]
struct Verify {
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn load_config(c: &Common) -> Result<RunConfig, RunError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        cfg.apply_text(&text)?;
    }
    if let Some(s) = c.seed {
        cfg.problem.seed = s;
        cfg.graph.seed = s;
        cfg.master_seed = s;
    }
    let opts: [(&str, Option<String>); 9] = [
        ("algo", c.algo.clone()),
        ("graph", c.graph.clone()),
        ("n", c.n.map(|v| v.to_string())),
        ("d", c.d.map(|v| v.to_string())),
        ("m", c.m.map(|v| v.to_string())),
        ("alpha", c.alpha.map(|v| v.to_string())),
        ("beta", c.beta.map(|v| v.to_string())),
        ("b0", c.b0.map(|v| v.to_string())),
        ("wall_clock", c.wall_clock.then(|| "true".to_string())),
    ];
    for (k, v) in opts {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    match (c.budget, c.iters) {
        (Some(_), Some(_)) => return Err(RunError::Config("pass only one of --budget and --iters".into())),
        (Some(b), None) => cfg.stop = StopRule::QueryBudget(b),
        (None, Some(k)) => cfg.stop = StopRule::MaxIters(k),
        (None, None) => {}
    }
    cfg.threads = threads_from_env();
    cfg.policy = ExecPolicy::Parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))
        .map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    let text = serde_json::to_string_pretty(value).map_err(|e| RunError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn cmd_run(c: &Common) -> Result<(), RunError> {
    let cfg = load_config(c)?;
    let out = run_with(&cfg, |r| {
        eprintln!("iter {:>8}  queries {:>9}  f {:.6e}  grad_sq {:.6e}", r.iter, r.queries_per_node, r.f_bar, r.grad_sq)
    })?;
    let path = c.out.join(format!("run_{}.csv", cfg.algo.algorithm));
    emit_csv(&path, &cfg.to_kv(), &out.records)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_compare(c: &Common) -> Result<(), RunError> {
    let cfg = load_config(c)?;
    let runs = cfg.policy.install(cfg.threads, || experiment_comparison(&cfg, cfg.master_seed))?;
    for r in &runs {
        let last = r.final_record();
        println!("{:<8} queries {:>9}  grad_sq {:.6e}  f {:.6e}", r.algorithm.name(), last.queries_per_node, last.grad_sq, last.f_bar);
    }
    for p in write_comparison(&runs, &c.out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_topology(c: &Common) -> Result<(), RunError> {
    let cfg = load_config(c)?;
    let trials = c.trials.unwrap_or(10);
    let summary = cfg.policy.install(cfg.threads, || experiment_topology(&cfg, trials))?;
    for row in &summary.rows {
        println!(
            "{:<9} rho {:.4}  final grad_sq {:.4e} +- {:.2e}  f {:.4e}",
            row.kind.name(),
            row.rho_mean,
            row.final_grad_mean,
            row.final_grad_std,
            row.final_f_mean
        );
    }
    println!("max/min final grad_sq ratio {:.3}", summary.grad_ratio);
    let path = c.out.join("topology.json");
    write_json(&path, &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_speedup(c: &Common) -> Result<(), RunError> {
    let cfg = load_config(c)?;
    let settings = SpeedupSettings { base: cfg.clone(), trials: c.trials.unwrap_or(10), ..SpeedupSettings::default() };
    let summary = cfg.policy.install(cfg.threads, || experiment_speedup(&settings))?;
    for p in &summary.points {
        println!("{:<9} n {:>4}  1/n {:.4}  iterations {:>10.1}  censored {}", p.kind.name(), p.n, p.inv_n, p.iterations, p.censored);
    }
    for f in &summary.fits {
        if let Some(fit) = f.fit {
            println!("{:<9} fit slope {:.3}  intercept {:.3}  R^2 {:.4}", f.kind.name(), fit.slope, fit.intercept, fit.r2);
        }
    }
    let path = c.out.join("speedup.json");
    write_json(&path, &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_feasibility(f: &Feasibility) -> Result<(), RunError> {
    let cfg = load_config(&f.common)?;
    let problem = synth_problem(cfg.problem.n, cfg.problem.m, cfg.problem.d, cfg.problem.seed)?;
    let w = metropolis_weights(&build_graph(&cfg.graph, cfg.problem.n)?)?;
    let l = f.l.unwrap_or_else(|| estimate_smoothness(&problem, 200, 1.0, cfg.master_seed));
    let inputs = TheoremInputs {
        l,
        rho: w.rho(),
        n: cfg.problem.n,
        d: cfg.problem.d,
        alpha: cfg.algo.alpha,
        sigma0: f.sigma0,
        sigma1: f.sigma1,
        sigma2: f.sigma2,
        sigma3: f.sigma3,
        m_t: f.m_t,
    };
    let tc = derive_constants(&inputs).map_err(|e| RunError::Config(e.to_string()))?;
    let b = step_bounds(&tc);
    let grad0 = stacked_grad_sq(&problem, &vec![0.0; cfg.problem.d]);
    let t0 = cfg.algo.schedule.t(0);
    let bound = convergence_bound(&tc, cfg.algo.beta, t0, cfg.algo.b0, grad0, problem.global_value(&vec![0.0; cfg.problem.d]), f.horizon);

    println!("L (estimate)      {l:.6e}");
    println!("rho               {:.6e}", inputs.rho);
    println!("c0..c4            {:.4e} {:.4e} {:.4e} {:.4e} {:.4e}", tc.c0, tc.c1, tc.c2, tc.c3, tc.c4);
    println!("alpha             {:.6e}  (max {:.6e})", inputs.alpha, b.alpha_max);
    println!("beta              {:.6e}  (window [{:.6e}, {:.6e}])", cfg.algo.beta, b.beta_lo, b.beta_hi);
    println!("feasible          {}", b.feasible);
    println!("bound at K={:<7} {bound:.6e}", f.horizon);
    println!();
    println!("[feasibility]");
    for (k, v) in [
        ("L", l),
        ("rho", inputs.rho),
        ("c0", tc.c0),
        ("c1", tc.c1),
        ("c2", tc.c2),
        ("c3", tc.c3),
        ("c4", tc.c4),
        ("alpha", inputs.alpha),
        ("alpha_max", b.alpha_max),
        ("beta", cfg.algo.beta),
        ("beta_lo", b.beta_lo),
        ("beta_hi", b.beta_hi),
        ("grad0_sq", grad0),
        ("bound", bound),
    ] {
        println!("{k} = {v:e}");
    }
    println!("feasible = {}", b.feasible);
    Ok(())
}

fn cmd_verify(v: &Verify) -> Result<(), RunError> {
    let policy = ExecPolicy::Parallel;
    let mut all_ok = true;
    for d in [3usize, 20] {
        let mut rng = stream_rng(v.seed, 900 + d as u64);
        for rep in 0..5 {
            let h: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let e = policy.install(threads_from_env(), || lemma1_montecarlo(&h, v.samples, v.seed + rep, policy));
            let (se_mean, se_moment) = lemma1_standard_errors(&h, v.samples);
            let ok = e.mean_err <= 4.0 * se_mean && e.moment_err <= 4.0 * se_moment;
            all_ok &= ok;
            println!(
                "{} d={d:<3} h#{rep}  mean_err {:.3e} (<= {:.3e})  moment_err {:.3e} (<= {:.3e})",
                if ok { "PASS" } else { "FAIL" },
                e.mean_err,
                4.0 * se_mean,
                e.moment_err,
                4.0 * se_moment
            );
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err(RunError::Config("moment identity check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match &cli.cmd {
        Command::Run(c) => cmd_run(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Topology(c) => cmd_topology(c),
        Command::Speedup(c) => cmd_speedup(c),
        Command::Feasibility(f) => cmd_feasibility(f),
        Command::Verify(v) => cmd_verify(v),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
