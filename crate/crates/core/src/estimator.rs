//! Zeroth-order gradient estimators.
//!
//! * [`two_point`]: `d * (F(x + t u; xi) - F(x - t u; xi)) / (2t) * u` along a
//!   uniform unit direction `u`. Two queries.
//! * [`two_d_point`]: forward differences along every coordinate axis with
//!   the base value shared, so `d + 1` queries despite the customary name.
//! * [`init_batch_estimate`]: mean of `b0` independent two-point estimates.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::norm_sq;
use crate::rng::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("smoothing radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("oracle returned a non-finite value ({0})")]
    NonFinite(f64),
}

/// Stochastic function-value oracle `F(x; sample)`.
pub trait ValueOracle {
    fn value(&mut self, x: &[f64], sample: usize) -> f64;
}

impl<F: FnMut(&[f64], usize) -> f64> ValueOracle for F {
    fn value(&mut self, x: &[f64], sample: usize) -> f64 {
        self(x, sample)
    }
}

/// Unit vector in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; `None` for the zero vector.
    pub fn normalized(mut v: Vec<f64>) -> Option<Self> {
        let r = norm_sq(&v).sqrt();
        if !(r > 0.0) || !r.is_finite() {
            return None;
        }
        v.iter_mut().for_each(|c| *c /= r);
        Some(Direction(v))
    }

    /// Coordinate axis `e_i` in dimension `d`.
    pub fn axis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Direction(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Uniform direction on the unit sphere in `R^d` (normalized Gaussian).
pub fn sample_sphere(d: usize, rng: &mut SimRng) -> Result<Direction, EstimatorError> {
    if d == 0 {
        return Err(EstimatorError::ZeroDimension);
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = Direction::normalized(v) {
            return Ok(u);
        }
    }
}

fn checked(v: f64) -> Result<f64, EstimatorError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EstimatorError::NonFinite(v))
    }
}

/// Central two-point estimate at `x` along `u` with sample `xi` and radius `t`.
pub fn two_point<O: ValueOracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    u: &Direction,
    xi: usize,
    t: f64,
) -> Result<Vec<f64>, EstimatorError> {
    if !(t > 0.0) {
        return Err(EstimatorError::NonPositiveRadius(t));
    }
    let u = u.as_slice();
    let d = x.len();
    let mut probe: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + t * b).collect();
    let plus = checked(oracle.value(&probe, xi))?;
    probe.iter_mut().zip(x.iter().zip(u)).for_each(|(p, (a, b))| *p = a - t * b);
    let minus = checked(oracle.value(&probe, xi))?;
    let scale = d as f64 * (plus - minus) / (2.0 * t);
    Ok(u.iter().map(|c| scale * c).collect())
}

/// Forward-difference estimate `sum_i (f(x + t e_i) - f(x)) / t * e_i`.
/// `f(x)` is evaluated once, for `d + 1` evaluations in total.
pub fn two_d_point<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], t: f64) -> Result<Vec<f64>, EstimatorError> {
    if !(t > 0.0) {
        return Err(EstimatorError::NonPositiveRadius(t));
    }
    let base = checked(f(x))?;
    let mut probe = x.to_vec();
    let mut out = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + t;
        let v = checked(f(&probe))?;
        probe[i] = x[i];
        out[i] = (v - base) / t;
    }
    Ok(out)
}

/// Mean of `b0` two-point estimates at `x`, each with a fresh sample index
/// (uniform over `0..num_samples`) and direction.
pub fn init_batch_estimate<O: ValueOracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    b0: usize,
    t0: f64,
    num_samples: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>, EstimatorError> {
    if b0 == 0 {
        return Err(EstimatorError::EmptyBatch);
    }
    if !(t0 > 0.0) {
        return Err(EstimatorError::NonPositiveRadius(t0));
    }
    let mut acc = vec![0.0; x.len()];
    for _ in 0..b0 {
        let xi = rng.random_range(0..num_samples.max(1));
        let u = sample_sphere(x.len(), rng)?;
        let est = two_point(oracle, x, &u, xi, t0)?;
        crate::linalg::axpy(1.0, &est, &mut acc);
    }
    let inv = 1.0 / b0 as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ScheduleMode {
    /// `t_k = beta / (d^2 (k+1)^{1/4})`
    Corollary,
    Constant(f64),
}

/// Smoothing-radius sequence `{t_k}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothingSchedule {
    pub beta: f64,
    pub d: usize,
    pub mode: ScheduleMode,
}

impl SmoothingSchedule {
    pub fn corollary(beta: f64, d: usize) -> Self {
        SmoothingSchedule { beta, d, mode: ScheduleMode::Corollary }
    }

    pub fn constant(t: f64, beta: f64, d: usize) -> Self {
        SmoothingSchedule { beta, d, mode: ScheduleMode::Constant(t) }
    }

    pub fn t(&self, k: usize) -> f64 {
        schedule_t(self, k)
    }
}

pub fn schedule_t(s: &SmoothingSchedule, k: usize) -> f64 {
    match s.mode {
        ScheduleMode::Corollary => {
            let d2 = (s.d * s.d) as f64;
            s.beta / (d2 * ((k + 1) as f64).powf(0.25))
        }
        ScheduleMode::Constant(t) => t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleBudget {
    /// `t_0 <= beta / d^2`
    pub t0_ok: bool,
    /// `sum_{k=0}^{K} t_k^2`
    pub sum_sq: f64,
}

impl ScheduleBudget {
    /// Whether the squared-radius sum fits `beta^2 M_t / d^4`.
    pub fn within(&self, s: &SmoothingSchedule, m_t: f64) -> bool {
        let d4 = (s.d as f64).powi(4);
        self.sum_sq <= s.beta * s.beta * m_t / d4
    }
}

pub fn schedule_budget(s: &SmoothingSchedule, horizon: usize) -> ScheduleBudget {
    let d2 = (s.d * s.d) as f64;
    let t0_ok = schedule_t(s, 0) <= s.beta / d2;
    let sum_sq = (0..=horizon).map(|k| schedule_t(s, k).powi(2)).sum();
    ScheduleBudget { t0_ok, sum_sq }
}
