//! Likelihood-ratio processes, the capped SPRT, plug-in alternatives, and the
//! bridge between tests on `[0, 1]` and e-values on `[0, 1/α]`.
//!
//! All likelihood-ratio arithmetic is carried in log space.

use crate::error::{Error, Result};
use crate::sequential::SequentialTest;

/// Simple Gaussian null and alternative sharing a known `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    null_mu: f64,
    alt_mu: f64,
    sigma: f64,
}

impl GaussianPair {
    pub fn new(null_mu: f64, alt_mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianPair { null_mu, alt_mu, sigma })
    }

    pub fn null_mu(&self) -> f64 {
        self.null_mu
    }

    pub fn alt_mu(&self) -> f64 {
        self.alt_mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// KL divergence of the alternative from the null, `(Δμ)² / (2σ²)`.
    pub fn kl_divergence(&self) -> f64 {
        let d = self.alt_mu - self.null_mu;
        d * d / (2.0 * self.sigma * self.sigma)
    }

    pub fn log_lr_increment(&self, x: f64) -> f64 {
        gaussian_log_lr(x / self.sigma, 1, self)
    }
}

/// Likelihood-ratio state after `n` observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LRState {
    n: usize,
    log_lr: f64,
}

impl LRState {
    pub fn initial() -> Self {
        LRState { n: 0, log_lr: 0.0 }
    }

    pub fn new(n: usize, log_lr: f64) -> Result<Self> {
        if n == 0 && log_lr != 0.0 {
            return Err(Error::domain("likelihood ratio before any data must be 1"));
        }
        Ok(LRState { n, log_lr })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_lr(&self) -> f64 {
        self.log_lr
    }

    pub fn push(&mut self, log_increment: f64) {
        self.n += 1;
        self.log_lr += log_increment;
    }
}

/// `ln LR_n` for Gaussian data with `S = Σ x_i / σ`.
pub fn gaussian_log_lr(scaled_sum: f64, n: usize, pair: &GaussianPair) -> f64 {
    let s2 = pair.sigma * pair.sigma;
    (pair.alt_mu - pair.null_mu) / pair.sigma * scaled_sum
        - n as f64 * (pair.alt_mu * pair.alt_mu - pair.null_mu * pair.null_mu) / (2.0 * s2)
}

/// `ln E[LR_N | F_n]` under the null, via the Gaussian moment generating
/// function of the `N − n` unseen increments.
pub fn conditional_log_lr_expectation(state: &LRState, horizon: usize, pair: &GaussianPair) -> f64 {
    let remaining = horizon.saturating_sub(state.n) as f64;
    let s2 = pair.sigma * pair.sigma;
    let slope = (pair.alt_mu - pair.null_mu) / s2;
    let intercept = (pair.alt_mu * pair.alt_mu - pair.null_mu * pair.null_mu) / (2.0 * s2);
    // ln E[exp(slope·X − intercept)] for X ~ N(null_mu, σ²)
    let per_step = slope * pair.null_mu + 0.5 * slope * slope * s2 - intercept;
    state.log_lr + remaining * per_step
}

/// Capped SPRT value `min(α · LR_n, 1)`.
pub fn sprt_value(state: &LRState, alpha: f64) -> f64 {
    let ln_value = alpha.ln() + state.log_lr;
    if ln_value >= 0.0 {
        1.0
    } else if state.log_lr.abs() < 700.0 {
        (alpha * state.log_lr.exp()).min(1.0)
    } else {
        ln_value.exp()
    }
}

/// Running log-likelihood ratio of a predictable plug-in alternative.
///
/// The increment at step `i` is `ln f_{μ̂}(x_i) − ln f_0(x_i)` with
/// `μ̂ = max(mu_floor, mean(x_1..x_{i−1}))` and `μ̂ = max(mu_floor, 0)` before
/// any data. Pass `f64::NEG_INFINITY` for an unfloored estimator.
pub fn plugin_log_lr(xs: &[f64], sigma: f64, mu_floor: f64) -> Vec<f64> {
    let s2 = sigma * sigma;
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    let mut log_lr = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let estimate = if i == 0 { 0.0 } else { sum / i as f64 };
        let mu = estimate.max(mu_floor);
        log_lr += (mu * x - 0.5 * mu * mu) / s2;
        out.push(log_lr);
        sum += x;
    }
    out
}

/// Test value to e-value: `φ / α`.
pub fn phi_to_e(phi: f64, alpha: f64) -> f64 {
    phi / alpha
}

/// E-value to test value: `min(α · e, 1)`.
pub fn e_to_phi(e: f64, alpha: f64) -> f64 {
    (alpha * e).min(1.0)
}

/// Log-density pair for a non-Gaussian likelihood-ratio process.
pub trait LogDensityPair: Sync {
    fn ln_null(&self, x: f64) -> f64;
    fn ln_alt(&self, x: f64) -> f64;
}

impl LogDensityPair for GaussianPair {
    fn ln_null(&self, x: f64) -> f64 {
        let z = (x - self.null_mu) / self.sigma;
        -0.5 * z * z
    }

    fn ln_alt(&self, x: f64) -> f64 {
        let z = (x - self.alt_mu) / self.sigma;
        -0.5 * z * z
    }
}

/// Cumulative `ln LR_1, …, ln LR_n` for any density pair.
pub fn log_lr_path<P: LogDensityPair + ?Sized>(xs: &[f64], pair: &P) -> Vec<f64> {
    let mut acc = 0.0;
    xs.iter()
        .map(|&x| {
            acc += pair.ln_alt(x) - pair.ln_null(x);
            acc
        })
        .collect()
}

fn capped_path(alpha: f64, log_lrs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut state = LRState::initial();
    let mut out = vec![sprt_value(&state, alpha)];
    let mut last = 0.0;
    for l in log_lrs {
        state.push(l - last);
        last = l;
        out.push(sprt_value(&state, alpha));
    }
    out
}

/// Capped SPRT with an oracle Gaussian alternative, truncated at a horizon.
#[derive(Debug, Clone)]
pub struct CappedSprt {
    pair: GaussianPair,
    alpha: f64,
    horizon: usize,
}

impl CappedSprt {
    pub fn new(pair: GaussianPair, alpha: f64, horizon: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("SPRT level must be in (0, 1), got {alpha}")));
        }
        Ok(CappedSprt { pair, alpha, horizon })
    }

    pub fn pair(&self) -> &GaussianPair {
        &self.pair
    }
}

impl SequentialTest for CappedSprt {
    fn name(&self) -> String {
        format!("sprt(mu1={},alpha={})", self.pair.alt_mu, self.alpha)
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn path(&self, xs: &[f64]) -> Vec<f64> {
        let xs = &xs[..xs.len().min(self.horizon)];
        let mut acc = 0.0;
        capped_path(
            self.alpha,
            xs.iter().map(|&x| {
                acc += self.pair.log_lr_increment(x);
                acc
            }),
        )
    }
}

/// Capped SPRT whose alternative is learned by the running mean.
#[derive(Debug, Clone)]
pub struct PluginSprt {
    sigma: f64,
    mu_floor: f64,
    alpha: f64,
    horizon: usize,
}

impl PluginSprt {
    pub fn new(sigma: f64, mu_floor: f64, alpha: f64, horizon: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("SPRT level must be in (0, 1), got {alpha}")));
        }
        Ok(PluginSprt { sigma, mu_floor, alpha, horizon })
    }
}

impl SequentialTest for PluginSprt {
    fn name(&self) -> String {
        format!("plugin-sprt(floor={},alpha={})", self.mu_floor, self.alpha)
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn path(&self, xs: &[f64]) -> Vec<f64> {
        let xs = &xs[..xs.len().min(self.horizon)];
        capped_path(self.alpha, plugin_log_lr(xs, self.sigma, self.mu_floor).into_iter())
    }
}
