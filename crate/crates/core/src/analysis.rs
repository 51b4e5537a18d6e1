//! Step-size / momentum feasibility calculator for DZOVR and Monte Carlo
//! checks of the sphere-estimator moment identities.
//!
//! The constants `c0..c4`, the eight-way step-size cap and the momentum
//! window follow the convergence theorem for the method; `sigma0..sigma3`
//! are the gradient-noise and dissimilarity constants, which are problem
//! dependent and supplied by the caller.

use rand::Rng;
use thiserror::Error;

use crate::algorithms::{AlgoConfig, Algorithm};
use crate::estimator::{sample_sphere, SmoothingSchedule};
use crate::exec::ExecPolicy;
use crate::linalg::{axpy, dot, norm_sq};
use crate::problem::GlobalObjective;
use crate::rng::{stream_rng, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("contraction factor must lie in [0, 1), got {0}")]
    BadRho(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Inputs of the feasibility calculator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TheoremInputs {
    pub l: f64,
    pub rho: f64,
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub m_t: f64,
}

impl TheoremInputs {
    /// Documented defaults for the noise constants: `sigma0 = sigma2 = 1`,
    /// `sigma1 = sigma3 = 0.1`, `M_t = 1`.
    pub fn with_defaults(l: f64, rho: f64, n: usize, d: usize, alpha: f64) -> Self {
        TheoremInputs { l, rho, n, d, alpha, sigma0: 1.0, sigma1: 0.1, sigma2: 1.0, sigma3: 0.1, m_t: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TheoremConstants {
    pub inputs: TheoremInputs,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

pub fn derive_constants(inp: &TheoremInputs) -> Result<TheoremConstants, AnalysisError> {
    if !(0.0..1.0).contains(&inp.rho) {
        return Err(AnalysisError::BadRho(inp.rho));
    }
    if inp.n == 0 || inp.d == 0 || !(inp.l >= 0.0) || !(inp.alpha >= 0.0) {
        return Err(AnalysisError::Invalid("n, d >= 1 and L, alpha >= 0 required".into()));
    }
    let TheoremInputs { l, rho, alpha, sigma0, sigma2, .. } = *inp;
    let n = inp.n as f64;
    let d = inp.d as f64;
    let l2 = l * l;
    let s0 = 1.0 + sigma0 * sigma0;
    let s2 = 1.0 + sigma2 * sigma2;
    let rho4 = rho.powi(4);
    let gap = 1.0 - rho * rho;
    let gap4 = gap.powi(4);

    let c0 = l2 / n + 32.0 * d * l2 * s0 / (n * n) + 48.0 * l2 / n;
    let c1 = 64.0 * d * s0 * s2 / n + 48.0 + 3_277_000.0 * alpha * alpha * d * d * l2 * rho4 * s0 * s2 / gap4;
    let c2 = 72.0 * alpha * alpha * d * l2 / n + 4_292_000.0 * alpha.powi(4) * d * d * l2 * l2 * rho4 / gap4;
    let c3 = 72.0 * d * l2 / n + 1_073_000.0 * d * d * l2 * rho4 / gap4;
    let c4 = 1.0 / (54.0 * gap * s0).sqrt();
    Ok(TheoremConstants { inputs: *inp, c0, c1, c2, c3, c4 })
}

/// Admissible step sizes and momentum window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepBounds {
    /// The eight terms whose minimum caps `alpha`, in the theorem's order.
    pub alpha_branches: [f64; 8],
    pub alpha_max: f64,
    /// `4 c2`
    pub beta_lo: f64,
    pub beta_branches: [f64; 4],
    pub beta_hi: f64,
    pub feasible: bool,
}

pub fn step_bounds(tc: &TheoremConstants) -> StepBounds {
    let TheoremInputs { l, rho, alpha, .. } = tc.inputs;
    let n = tc.inputs.n as f64;
    let d = tc.inputs.d as f64;
    let rho2 = rho * rho;
    let gap = 1.0 - rho2;
    let (c0, c1, c2, c3, c4) = (tc.c0, tc.c1, tc.c2, tc.c3, tc.c4);
    let rho_branch = |v: f64| if rho2 == 0.0 { f64::INFINITY } else { v };
    let alpha_branches = [
        1.0,
        1.0 / (2.0 * l),
        rho_branch(gap / ((360.0 * d).sqrt() * l * rho2)),
        rho_branch(gap * gap / (284.0 * d.sqrt() * l * rho2)),
        1.0 / (2.0 * c3.sqrt()),
        l * d / (2.0 * (n * c0 * c3).sqrt()),
        1.0 / (4.0 * (c1 * c3).sqrt()),
        (c4 / (4.0 * c3)).sqrt(),
    ];
    let alpha_max = alpha_branches.iter().copied().fold(f64::INFINITY, f64::min);
    let beta_branches = [1.0, l * l * d * d / (n * c0), 1.0 / (4.0 * c1), c4];
    let beta_hi = beta_branches.iter().copied().fold(f64::INFINITY, f64::min);
    let beta_lo = 4.0 * c2;
    StepBounds {
        alpha_branches,
        alpha_max,
        beta_lo,
        beta_branches,
        beta_hi,
        feasible: beta_lo <= beta_hi && alpha <= alpha_max,
    }
}

/// Parameter choice that yields the `(d / nK)^{2/3}` rate for horizon `K`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CorollaryParams {
    pub config: AlgoConfig,
    pub n: usize,
    pub d: usize,
    pub horizon: u64,
    pub l: f64,
}

impl CorollaryParams {
    /// Smallest horizon for which the rate statement applies, given the cap `a0`.
    pub fn min_horizon(&self, a0: f64) -> f64 {
        let n = self.n as f64;
        let d = self.d as f64;
        (100.0 * self.l).powi(3) * n * n / (d * d * a0.powi(3))
    }

    pub fn horizon_ok(&self, a0: f64) -> bool {
        self.horizon as f64 >= self.min_horizon(a0)
    }
}

/// `ceil(cbrt(v))` computed exactly on integers.
pub fn ceil_cbrt(v: u128) -> u128 {
    let mut r = (v as f64).cbrt().round() as u128;
    while r * r * r < v {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) * (r - 1) >= v {
        r -= 1;
    }
    r
}

/// `alpha = n^{2/3} / (100 L d^{2/3} K^{1/3})`, `beta = n^{1/3} / (d^{1/3} K^{2/3})`,
/// `b0 = ceil(d^{2/3} (nK)^{1/3})`, `t_k = beta / (d^2 (k+1)^{1/4})`.
pub fn corollary_params(n: usize, d: usize, horizon: u64, l: f64) -> Result<CorollaryParams, AnalysisError> {
    if n == 0 || d == 0 || horizon == 0 || !(l > 0.0) {
        return Err(AnalysisError::Invalid("n, d, K >= 1 and L > 0 required".into()));
    }
    let ratio = n as f64 / d as f64;
    let k_cbrt = (horizon as f64).cbrt();
    let alpha = ratio.powf(2.0 / 3.0) / (100.0 * l * k_cbrt);
    let beta = ratio.cbrt() / (k_cbrt * k_cbrt);
    let b0 = ceil_cbrt((d as u128) * (d as u128) * (n as u128) * horizon as u128) as usize;
    let config = AlgoConfig {
        algorithm: Algorithm::Dzovr,
        alpha,
        beta: beta.min(1.0),
        b0,
        schedule: SmoothingSchedule::corollary(beta.min(1.0), d),
    };
    Ok(CorollaryParams { config, n, d, horizon, l })
}

/// `e_m`, `e_g` and the noise-driven steady-state groups of the bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SteadyState {
    pub em: f64,
    pub eg: f64,
    /// Multiplier of `(1 + sigma0^2) sigma3^2`.
    pub sigma3_coef: f64,
    /// Multiplier of `sigma1^2`.
    pub sigma1_coef: f64,
    /// `sigma3_coef (1 + sigma0^2) sigma3^2 + sigma1_coef sigma1^2`.
    pub steady_error: f64,
}

/// `grad0_sq` is the stacked squared gradient `sum_i ||grad f_i(x_i^0)||^2`.
pub fn steady_state_terms(tc: &TheoremConstants, beta: f64, t0: f64, b0: usize, grad0_sq: f64) -> SteadyState {
    let TheoremInputs { l, rho, alpha, sigma0, sigma1, sigma3, .. } = tc.inputs;
    let n = tc.inputs.n as f64;
    let d = tc.inputs.d as f64;
    let b0 = b0 as f64;
    let l2 = l * l;
    let s0 = 1.0 + sigma0 * sigma0;
    let t02 = t0 * t0;
    let rho2 = rho * rho;
    let rho4 = rho2 * rho2;
    let gap = 1.0 - rho2;

    let em = (24.0 * d * s0 + 6.0) / b0 * grad0_sq
        + 24.0 * n * d * sigma1 * sigma1 / b0
        + 3.0 * n * d * d * l2 / b0 * t02
        + 6.0 * n * l2 / b0 * t02
        + 2.0 * n * l2 * t02;
    let eg = 2.0 * rho2 * em + 2.0 * rho2 * grad0_sq;

    let a2 = alpha * alpha;
    let sigma3_coef = 256.0 * beta * d / n
        + 1_044_000.0 * a2 * beta * d * d * l2 * rho4 / gap.powi(3)
        + 12_064_000.0 * a2 * beta * beta * d * d * l2 * rho4 / gap.powi(4);
    let sigma1_coef = 64.0 * beta * d / n
        + 232_000.0 * a2 * beta * d * d * l2 * rho4 / gap.powi(3)
        + 2_726_000.0 * a2 * beta * beta * d * d * l2 * rho4 / gap.powi(4);
    let steady_error = sigma3_coef * s0 * sigma3 * sigma3 + sigma1_coef * sigma1 * sigma1;
    SteadyState { em, eg, sigma3_coef, sigma1_coef, steady_error }
}

/// Right-hand side of the averaged squared-gradient bound after `horizon`
/// iterations, with `f_gap = f(mean x^0) - f*`.
pub fn convergence_bound(
    tc: &TheoremConstants,
    beta: f64,
    t0: f64,
    b0: usize,
    grad0_sq: f64,
    f_gap: f64,
    horizon: u64,
) -> f64 {
    let TheoremInputs { l, rho, alpha, sigma0, sigma1, m_t, .. } = tc.inputs;
    let n = tc.inputs.n as f64;
    let d = tc.inputs.d as f64;
    let k = horizon as f64;
    let bb = b0 as f64;
    let l2 = l * l;
    let s0 = 1.0 + sigma0 * sigma0;
    let rho2 = rho * rho;
    let rho4 = rho2 * rho2;
    let gap = 1.0 - rho2;
    let a2 = alpha * alpha;
    let ss = steady_state_terms(tc, beta, t0, b0, grad0_sq);

    4.0 * f_gap / (alpha * k)
        + (192.0 * d * s0 + 48.0) * grad0_sq / (n * bb * beta * k)
        + 192.0 * d * sigma1 * sigma1 / (bb * beta * k)
        + (24.0 * d * d * l2 / (bb * beta * k) + 48.0 * l2 / (bb * beta * k) + 16.0 * l2 / (beta * k)) * t0 * t0
        + 18_560.0 * a2 * d * l2 * rho2 / (k * beta * n * gap.powi(3)) * ss.eg
        + 335_000.0 * a2 * d * l2 * rho4 / (k * n * gap.powi(4)) * ss.em
        + (208.0 * l2 + 5_800_000.0 * a2 * beta * l2 * l2 * rho4 / gap.powi(4)) * m_t / k
        + ss.steady_error
}

/// Stacked squared gradient `sum_i ||grad f_i(x)||^2` at a common point.
pub fn stacked_grad_sq<P: GlobalObjective>(problem: &P, x: &[f64]) -> f64 {
    (0..problem.num_nodes()).map(|i| norm_sq(&problem.node_gradient(i, x))).sum()
}

/// Empirical smoothness constant: largest gradient-difference ratio over
/// `pairs` random point pairs drawn from `N(0, scale^2 I)`. A lower estimate
/// of the true constant.
pub fn estimate_smoothness<P: GlobalObjective>(problem: &P, pairs: usize, scale: f64, seed: u64) -> f64 {
    let d = problem.dim();
    let mut rng = stream_rng(seed, crate::rng::stream::MONTE_CARLO);
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let y: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let mut dg = problem.global_gradient(&x);
        axpy(-1.0, &problem.global_gradient(&y), &mut dg);
        let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dx > 0.0 {
            best = best.max(norm_sq(&dg).sqrt() / dx);
        }
    }
    best
}

/// Errors of the sphere moment identities `E[d <h,z> z] = h` and
/// `E[d <h,z>^2] = ||h||^2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MomentErrors {
    pub mean_err: f64,
    pub moment_err: f64,
}

const SHARD: usize = 8192;

/// Monte Carlo estimate of both identities with `samples` directions. Work is
/// split into fixed shards with their own streams and merged in shard order,
/// so the result is independent of the execution policy.
pub fn lemma1_montecarlo(h: &[f64], samples: usize, seed: u64, policy: ExecPolicy) -> MomentErrors {
    let d = h.len();
    let df = d as f64;
    let shards = samples.div_ceil(SHARD).max(1);
    let partial = policy.map_indices(shards, |s| {
        let mut rng: SimRng = stream_rng(seed, s as u64);
        let count = SHARD.min(samples - (s * SHARD).min(samples));
        let mut first = vec![0.0; d];
        let mut second = 0.0;
        for _ in 0..count {
            let z = sample_sphere(d, &mut rng).expect("dimension >= 1");
            let p = dot(h, z.as_slice());
            axpy(df * p, z.as_slice(), &mut first);
            second += df * p * p;
        }
        (first, second)
    });
    let mut first = vec![0.0; d];
    let mut second = 0.0;
    for (f, s) in &partial {
        axpy(1.0, f, &mut first);
        second += s;
    }
    let inv = 1.0 / samples.max(1) as f64;
    let mean_err = first.iter().zip(h).map(|(a, b)| (a * inv - b).powi(2)).sum::<f64>().sqrt();
    let moment_err = (second * inv - norm_sq(h)).abs();
    MomentErrors { mean_err, moment_err }
}

/// Standard errors of the two estimators in [`lemma1_montecarlo`], from the
/// sphere moments `E[z_j^4] = 3/(d(d+2))`, `E[z_j^2 z_k^2] = 1/(d(d+2))`:
/// `E||mean - h||^2 = (d-1)||h||^2 / N`, `Var(d <h,z>^2) = 2(d-1)||h||^4/(d+2)`.
pub fn lemma1_standard_errors(h: &[f64], samples: usize) -> (f64, f64) {
    let d = h.len() as f64;
    let n = samples as f64;
    let h2 = norm_sq(h);
    ((((d - 1.0) * h2) / n).sqrt(), (2.0 * (d - 1.0) * h2 * h2 / ((d + 2.0) * n)).sqrt())
}
