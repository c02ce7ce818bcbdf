//! Induced sequential z-test for a Gaussian mean with known variance.
//!
//! The terminal test rejects when `N^{-1/2} Σ x_i/σ > z_{1-α}`. Conditioning on
//! the first `n` observations under the null gives
//!
//! ```text
//! φ_n = Φ((N^{-1/2} S_n − z_{1−α}) / √r_n),   S_n = Σ_{i≤n} x_i/σ,  r_n = (N − n)/N.
//! ```
//!
//! The same process is valid for the one-sided composite null `μ ≤ μ_0`: every
//! member `φ_n^μ` of the family dominates the boundary member.

use crate::dist::{ln_std_normal_cdf, std_normal_cdf, std_normal_upper_quantile_ln};
use crate::error::{Error, Result};
use crate::sequential::SequentialTest;

/// Planned z-test: horizon `N`, level `α`, known `σ`, null mean `μ_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZDesign {
    horizon: usize,
    alpha: f64,
    ln_alpha: f64,
    sigma: f64,
    null_mu: f64,
}

impl ZDesign {
    pub fn new(horizon: usize, alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("z-test level must be in (0, 1), got {alpha}")));
        }
        Ok(ZDesign { alpha, ..Self::with_ln_alpha(horizon, alpha.ln(), sigma)? })
    }

    /// Design whose level is given on the log scale, for levels that
    /// underflow a double.
    pub fn with_ln_alpha(horizon: usize, ln_alpha: f64, sigma: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::domain("z-test horizon must be at least 1"));
        }
        if !(ln_alpha < 0.0) {
            return Err(Error::domain(format!("z-test log-level must be negative, got {ln_alpha}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(ZDesign { horizon, alpha: ln_alpha.exp(), ln_alpha, sigma, null_mu: 0.0 })
    }

    pub fn with_null_mu(mut self, null_mu: f64) -> Self {
        self.null_mu = null_mu;
        self
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The level; may underflow to 0 for designs built from a log-level.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ln_alpha(&self) -> f64 {
        self.ln_alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn null_mu(&self) -> f64 {
        self.null_mu
    }

    /// Same design at another level.
    pub fn at_level(&self, alpha: f64) -> Result<Self> {
        Ok(ZDesign::new(self.horizon, alpha, self.sigma)?.with_null_mu(self.null_mu))
    }
}

/// Sufficient state after `n` observations: `S_n = Σ x_i / σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZState {
    n: usize,
    scaled_sum: f64,
}

impl ZState {
    pub fn initial() -> Self {
        ZState { n: 0, scaled_sum: 0.0 }
    }

    pub fn new(n: usize, scaled_sum: f64) -> Result<Self> {
        if n == 0 && scaled_sum != 0.0 {
            return Err(Error::domain("state with no observations must have a zero sum"));
        }
        if !scaled_sum.is_finite() {
            return Err(Error::domain("scaled sum must be finite"));
        }
        Ok(ZState { n, scaled_sum })
    }

    pub fn from_data(xs: &[f64], sigma: f64) -> Self {
        ZState { n: xs.len(), scaled_sum: xs.iter().sum::<f64>() / sigma }
    }

    pub fn push(&mut self, x: f64, sigma: f64) {
        self.n += 1;
        self.scaled_sum += x / sigma;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scaled_sum(&self) -> f64 {
        self.scaled_sum
    }
}

/// The induced sequential z-test for one design.
#[derive(Debug, Clone)]
pub struct SeqZTest {
    design: ZDesign,
    z_crit: f64,
}

impl SeqZTest {
    pub fn new(design: ZDesign) -> Self {
        let z_crit = std_normal_upper_quantile_ln(design.ln_alpha).expect("design level validated on construction");
        SeqZTest { design, z_crit }
    }

    pub fn design(&self) -> &ZDesign {
        &self.design
    }

    /// Critical value `z_{1−α}`.
    pub fn critical_value(&self) -> f64 {
        self.z_crit
    }

    fn check_n(&self, state: &ZState) -> Result<()> {
        if state.n > self.design.horizon {
            return Err(Error::usage(format!(
                "state has {} observations but the horizon is {}",
                state.n, self.design.horizon
            )));
        }
        Ok(())
    }

    /// The terminal indicator; only defined once all `N` observations are in.
    pub fn terminal(&self, state: &ZState) -> Result<f64> {
        if state.n != self.design.horizon {
            return Err(Error::usage(format!(
                "terminal z-test needs n = N = {}, got n = {}",
                self.design.horizon, state.n
            )));
        }
        let stat = state.scaled_sum / (self.design.horizon as f64).sqrt()
            - self.design.horizon as f64 * self.shift(self.design.null_mu);
        Ok(if stat > self.z_crit { 1.0 } else { 0.0 })
    }

    // Per-observation centring term μ/(σ √N) of the family member at `mu`.
    fn shift(&self, mu: f64) -> f64 {
        mu / (self.design.sigma * (self.design.horizon as f64).sqrt())
    }

    /// Numerator and `√r_n` of the argument of `Φ`.
    fn argument_parts(&self, state: &ZState, mu: f64) -> (f64, f64) {
        let big_n = self.design.horizon as f64;
        let numerator = state.scaled_sum / big_n.sqrt() - self.z_crit - state.n as f64 * self.shift(mu);
        let root_r = ((self.design.horizon - state.n) as f64 / big_n).sqrt();
        (numerator, root_r)
    }

    fn member_value(&self, state: &ZState, mu: f64) -> f64 {
        if state.n == 0 {
            // the drift term vanishes, so every member starts at the level
            return self.design.alpha;
        }
        let (numerator, root_r) = self.argument_parts(state, mu);
        if state.n == self.design.horizon {
            // y/0 is +∞ for y > 0 and −∞ otherwise (strict terminal inequality)
            return if numerator > 0.0 { 1.0 } else { 0.0 };
        }
        std_normal_cdf(numerator / root_r)
    }

    /// `φ_n` for the boundary null `μ = μ_0`.
    pub fn value(&self, state: &ZState) -> Result<f64> {
        self.check_n(state)?;
        Ok(self.member_value(state, self.design.null_mu))
    }

    /// `ln φ_n`, finite whenever `φ_n > 0` even if `φ_n` underflows.
    pub fn ln_value(&self, state: &ZState) -> Result<f64> {
        self.check_n(state)?;
        if state.n == 0 {
            return Ok(self.design.ln_alpha);
        }
        let (numerator, root_r) = self.argument_parts(state, self.design.null_mu);
        if state.n == self.design.horizon {
            return Ok(if numerator > 0.0 { 0.0 } else { f64::NEG_INFINITY });
        }
        Ok(ln_std_normal_cdf(numerator / root_r))
    }

    /// Member `φ_n^μ` of the composite family for a null mean `μ ≤ μ_0`.
    pub fn value_at_mu(&self, state: &ZState, mu: f64) -> Result<f64> {
        self.check_n(state)?;
        if mu > self.design.null_mu {
            return Err(Error::domain(format!(
                "family member mu = {mu} lies outside the one-sided null mu <= {}",
                self.design.null_mu
            )));
        }
        Ok(self.member_value(state, mu))
    }
}

impl SequentialTest for SeqZTest {
    fn name(&self) -> String {
        format!("z(N={},alpha={})", self.design.horizon, self.design.alpha())
    }

    fn alpha(&self) -> f64 {
        self.design.alpha()
    }

    fn horizon(&self) -> usize {
        self.design.horizon
    }

    fn path(&self, xs: &[f64]) -> Vec<f64> {
        let xs = &xs[..xs.len().min(self.design.horizon)];
        let mut state = ZState::initial();
        let mut out = Vec::with_capacity(xs.len() + 1);
        out.push(self.member_value(&state, self.design.null_mu));
        for &x in xs {
            state.push(x, self.design.sigma);
            out.push(self.member_value(&state, self.design.null_mu));
        }
        out
    }

    fn value_after(&self, xs: &[f64]) -> f64 {
        let xs = &xs[..xs.len().min(self.design.horizon)];
        self.member_value(&ZState::from_data(xs, self.design.sigma), self.design.null_mu)
    }
}
