//! Induced sequential t-test for the composite null `μ ≤ 0, σ² > 0`.
//!
//! The t-statistic is carried through its Beta-statistic image
//! `B_n = T_n / √(T_n² + n − 1) = Σ x_i / (√n ‖x‖)`, which lives on `[−1, 1]`.
//! Under the null, `B_N` given `B_n = b` is distributed as
//! `√(n/N) b √W + √((N−n)/N) B̃ √(1−W)` with `W ~ Beta(n/2, (N−n)/2)` and `B̃`
//! a symmetric `Beta((N−n−1)/2)` variable on `[−1, 1]`. The induced value is
//! `P(B_N > β_{1−α} | B_n = b)`, evaluated here by Gauss–Legendre quadrature
//! over `W`.

use std::f64::consts::{FRAC_PI_2, LN_2};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::dist::{
    beta_quantile, ln_beta, reg_inc_beta, sym_beta_cdf, sym_beta_quantile, GaussLegendre, QuadratureSpec, RandomStream,
};
use crate::doob::McEstimate;
use crate::error::{Error, Result};
use crate::harness::simulate;
use crate::sequential::SequentialTest;

/// Tail mass of `W` dropped on each side of the integration range.
const W_TAIL: f64 = 1e-15;

/// Planned t-test: horizon `N ≥ 2` and level `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TDesign {
    horizon: usize,
    alpha: f64,
}

impl TDesign {
    pub fn new(horizon: usize, alpha: f64) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::domain(format!("t-test horizon must be at least 2, got {horizon}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("t-test level must be in (0, 1), got {alpha}")));
        }
        Ok(TDesign { horizon, alpha })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn at_level(&self, alpha: f64) -> Result<Self> {
        TDesign::new(self.horizon, alpha)
    }
}

/// The t-statistic of `xs`.
///
/// One observation gives `−∞`, `0` or `+∞` by its sign. A sample with zero
/// spread likewise maps to `±∞` by the sign of its mean, or `0` if all zero.
pub fn t_statistic(xs: &[f64]) -> Result<f64> {
    let mut acc = TAccumulator::default();
    for &x in xs {
        acc.push(x);
    }
    acc.t_statistic()
}

/// Monotone map `t ↦ t / √(t² + n − 1)` onto `[−1, 1]`.
pub fn beta_statistic(t: f64, n: usize) -> f64 {
    if t.is_infinite() {
        return t.signum();
    }
    if t == 0.0 {
        return 0.0;
    }
    if n <= 1 {
        return t.signum();
    }
    t / t.hypot(((n - 1) as f64).sqrt())
}

/// Inverse of [`beta_statistic`] for `n ≥ 2`.
fn t_from_beta(b: f64, n: usize) -> f64 {
    if b >= 1.0 {
        f64::INFINITY
    } else if b <= -1.0 {
        f64::NEG_INFINITY
    } else if b == 0.0 {
        0.0
    } else if n <= 1 {
        b.signum() * f64::INFINITY
    } else {
        b * ((n - 1) as f64).sqrt() / (1.0 - b * b).sqrt()
    }
}

/// Upper `α` quantile `β_{1−α}` of `B_N` under the null.
pub fn beta_critical(design: &TDesign) -> f64 {
    sym_beta_quantile(0.5 * (design.horizon - 1) as f64, 1.0 - design.alpha).expect("design validated on construction")
}

/// Critical value `c_{α,N}`: upper `α` quantile of Student's t with `N − 1` df.
pub fn t_critical(design: &TDesign) -> f64 {
    t_from_beta(beta_critical(design), design.horizon)
}

/// Running moments for the t-statistic.
#[derive(Debug, Clone, Default)]
pub struct TAccumulator {
    n: usize,
    first: f64,
    all_equal: bool,
    mean: f64,
    m2: f64,
}

impl TAccumulator {
    pub fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.first = x;
            self.all_equal = true;
        } else if x != self.first {
            self.all_equal = false;
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn t_statistic(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::usage("t-statistic needs at least one observation"));
        }
        if self.n == 1 || self.all_equal {
            let m = if self.all_equal { self.first } else { self.mean };
            return Ok(if m > 0.0 {
                f64::INFINITY
            } else if m < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            });
        }
        let sd = (self.m2 / (self.n - 1) as f64).sqrt();
        Ok((self.n as f64).sqrt() * self.mean / sd)
    }

    pub fn state(&self) -> Result<TState> {
        let t = self.t_statistic()?;
        Ok(TState { n: self.n, t_stat: t, beta_stat: beta_statistic(t, self.n) })
    }
}

/// State after `n ≥ 1` observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TState {
    n: usize,
    t_stat: f64,
    beta_stat: f64,
}

impl TState {
    pub fn from_data(xs: &[f64]) -> Result<Self> {
        let mut acc = TAccumulator::default();
        for &x in xs {
            acc.push(x);
        }
        acc.state()
    }

    /// State given directly by its Beta statistic.
    pub fn from_beta(n: usize, beta_stat: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("t-test state needs n >= 1"));
        }
        if !(-1.0..=1.0).contains(&beta_stat) {
            return Err(Error::domain(format!("beta statistic {beta_stat} outside [-1, 1]")));
        }
        if n == 1 && ![-1.0, 0.0, 1.0].contains(&beta_stat) {
            return Err(Error::domain("with one observation the beta statistic is -1, 0 or 1"));
        }
        Ok(TState { n, t_stat: t_from_beta(beta_stat, n), beta_stat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_stat(&self) -> f64 {
        self.t_stat
    }

    pub fn beta_stat(&self) -> f64 {
        self.beta_stat
    }
}

// Law of W ~ Beta(a, b) in the parametrisation W = sin²θ, whose density
// 2/B(a,b)·sin^{n−1}θ cos^{N−n−1}θ is bounded on [0, π/2]. Quadrature is
// restricted to [th_lo, th_hi], outside of which W has mass W_TAIL per side.
#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    ln_norm: f64,
    th_lo: f64,
    th_hi: f64,
}

impl Panel {
    fn ln_density(&self, s: f64, c: f64) -> f64 {
        self.ln_norm + (2.0 * self.a - 1.0) * s.ln() + (2.0 * self.b - 1.0) * c.ln()
    }

    /// `P(θ ∈ [lo, hi])`, exactly.
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        let cdf = |th: f64| reg_inc_beta(self.a, self.b, th.sin().powi(2).min(1.0)).expect("valid shape");
        (cdf(hi) - cdf(lo)).max(0.0)
    }
}

/// Induced sequential t-test for one design and quadrature rule.
#[derive(Debug)]
pub struct SeqTTest {
    design: TDesign,
    beta_crit: f64,
    rule: GaussLegendre,
    panels: Vec<OnceLock<Panel>>,
}

impl SeqTTest {
    pub fn new(design: TDesign, spec: QuadratureSpec) -> Self {
        let beta_crit = beta_critical(&design);
        let panels = (0..design.horizon).map(|_| OnceLock::new()).collect();
        SeqTTest { design, beta_crit, rule: GaussLegendre::new(spec), panels }
    }

    pub fn design(&self) -> &TDesign {
        &self.design
    }

    /// `β_{1−α}` on the Beta-statistic scale.
    pub fn beta_critical(&self) -> f64 {
        self.beta_crit
    }

    /// Value before any data: the level.
    pub fn start_value(&self) -> f64 {
        self.design.alpha
    }

    fn panel(&self, n: usize) -> &Panel {
        self.panels[n].get_or_init(|| {
            let big_n = self.design.horizon;
            let a = 0.5 * n as f64;
            let b = 0.5 * (big_n - n) as f64;
            let w_lo = beta_quantile(a, b, W_TAIL).expect("valid shape");
            let w_hi = 1.0 - beta_quantile(b, a, W_TAIL).expect("valid shape");
            Panel {
                a,
                b,
                ln_norm: LN_2 - ln_beta(a, b),
                th_lo: w_lo.sqrt().asin(),
                th_hi: w_hi.sqrt().asin().min(FRAC_PI_2),
            }
        })
    }

    /// `φ_n` as a function of the Beta statistic alone.
    pub fn value_at_beta(&self, n: usize, b: f64) -> Result<f64> {
        let big_n = self.design.horizon;
        if n > big_n {
            return Err(Error::usage(format!("state has {n} observations but the horizon is {big_n}")));
        }
        if !(-1.0..=1.0).contains(&b) {
            return Err(Error::domain(format!("beta statistic {b} outside [-1, 1]")));
        }
        if n == 0 {
            return Ok(self.design.alpha);
        }
        if n == big_n {
            return Ok(if b > self.beta_crit { 1.0 } else { 0.0 });
        }
        if n == big_n - 1 {
            return Ok(self.last_step_value(b));
        }
        Ok(self.quadrature_value(n, b).clamp(0.0, 1.0))
    }

    // The integrand F_B((c sinθ − level)/(d cosθ)) is 1 where the argument is
    // ≥ 1 and 0 where it is ≤ −1; both boundaries are arcs solved exactly.
    // Saturated pieces contribute their exact W-mass, and only the smooth
    // middle piece is integrated numerically.
    fn quadrature_value(&self, n: usize, b: f64) -> f64 {
        let big_n = self.design.horizon;
        let panel = self.panel(n);
        let half_df = 0.5 * (big_n - n - 1) as f64;
        let c = (n as f64).sqrt() * b;
        let d = ((big_n - n) as f64).sqrt();
        let level = (big_n as f64).sqrt() * self.beta_crit;
        let mut cuts = vec![0.0, FRAC_PI_2];
        for (lo, hi) in arc_above(c, -d, level).into_iter().chain(arc_above(c, d, level)) {
            cuts.extend([lo, hi]);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let arg = (c * mid.sin() - level) / (d * mid.cos());
            if arg >= 1.0 {
                total += panel.mass(lo, hi);
            } else if arg > -1.0 {
                let (lo, hi) = (lo.max(panel.th_lo), hi.min(panel.th_hi));
                if hi > lo {
                    // θ = lo + (hi − lo)·u²(3 − 2u): near a boundary the integrand
                    // behaves like (θ − θ_0)^h with h a multiple of 1/2, which
                    // this substitution turns into a polynomial in u
                    for (u, weight) in self.rule.mapped(0.0, 1.0) {
                        let theta = lo + (hi - lo) * u * u * (3.0 - 2.0 * u);
                        let weight = weight * (hi - lo) * 6.0 * u * (1.0 - u);
                        let (s, co) = theta.sin_cos();
                        let arg = ((c * s - level) / (d * co)).clamp(-1.0, 1.0);
                        let f = sym_beta_cdf(half_df, arg).expect("clamped argument");
                        total += weight * panel.ln_density(s, co).exp() * f;
                    }
                }
            }
        }
        total
    }

    // With one observation left B̃ is ±1 with equal mass, so the value is an
    // average of two probabilities of the form P(c sinθ ± d cosθ > β) where
    // W = sin²θ ~ Beta(n/2, 1/2). Each event is an arc in θ, solved exactly.
    fn last_step_value(&self, b: f64) -> f64 {
        let big_n = self.design.horizon as f64;
        let n = big_n - 1.0;
        let c = (n / big_n).sqrt() * b;
        let d = (1.0 / big_n).sqrt();
        let prob = |sign: f64| -> f64 {
            let mut total = 0.0;
            for (lo, hi) in arc_above(c, sign * d, self.beta_crit) {
                let w_lo = lo.sin().powi(2);
                let w_hi = hi.sin().powi(2);
                total +=
                    reg_inc_beta(0.5 * n, 0.5, w_hi).expect("valid") - reg_inc_beta(0.5 * n, 0.5, w_lo).expect("valid");
            }
            total
        };
        (0.5 * (prob(1.0) + prob(-1.0))).clamp(0.0, 1.0)
    }

    /// `φ_n` for a state.
    pub fn value(&self, state: &TState) -> Result<f64> {
        self.value_at_beta(state.n, state.beta_stat)
    }
}

/// Sub-intervals of `[0, π/2]` where `c sinθ + d cosθ > level`.
fn arc_above(c: f64, d: f64, level: f64) -> Vec<(f64, f64)> {
    let r = c.hypot(d);
    if r == 0.0 || level / r >= 1.0 {
        return Vec::new();
    }
    if level / r < -1.0 {
        return vec![(0.0, FRAC_PI_2)];
    }
    // c sinθ + d cosθ = r sin(θ + ψ)
    let psi = d.atan2(c);
    let a = (level / r).asin();
    let mut out = Vec::new();
    for k in -1..=1 {
        let shift = 2.0 * std::f64::consts::PI * k as f64;
        let lo = (a + shift - psi).max(0.0);
        let hi = (std::f64::consts::PI - a + shift - psi).min(FRAC_PI_2);
        if hi > lo {
            out.push((lo, hi));
        }
    }
    out
}

impl SequentialTest for SeqTTest {
    fn name(&self) -> String {
        format!("t(N={},alpha={})", self.design.horizon, self.design.alpha)
    }

    fn alpha(&self) -> f64 {
        self.design.alpha
    }

    fn horizon(&self) -> usize {
        self.design.horizon
    }

    fn path(&self, xs: &[f64]) -> Vec<f64> {
        let xs = &xs[..xs.len().min(self.design.horizon)];
        let mut acc = TAccumulator::default();
        let mut out = Vec::with_capacity(xs.len() + 1);
        out.push(self.design.alpha);
        for &x in xs {
            acc.push(x);
            let state = acc.state().expect("non-empty");
            out.push(self.value(&state).expect("state within horizon"));
        }
        out
    }

    fn value_after(&self, xs: &[f64]) -> f64 {
        let xs = &xs[..xs.len().min(self.design.horizon)];
        if xs.is_empty() {
            return self.design.alpha;
        }
        self.value(&TState::from_data(xs).expect("non-empty")).expect("state within horizon")
    }
}

/// Draws from the null law of `B_N` given `B_n = b_n`.
#[derive(Debug, Clone)]
pub struct FinalBetaSampler {
    lead: f64,
    tail_scale: f64,
    w: Beta<f64>,
    tilde: Option<Beta<f64>>,
}

impl FinalBetaSampler {
    pub fn new(b_n: f64, n: usize, horizon: usize) -> Result<Self> {
        if n == 0 || n >= horizon {
            return Err(Error::usage(format!("conditional sampler needs 1 <= n < N, got n = {n}, N = {horizon}")));
        }
        if !(-1.0..=1.0).contains(&b_n) {
            return Err(Error::domain(format!("beta statistic {b_n} outside [-1, 1]")));
        }
        let big_n = horizon as f64;
        let rest = horizon - n;
        let w = Beta::new(0.5 * n as f64, 0.5 * rest as f64).map_err(|e| Error::domain(e.to_string()))?;
        // one remaining observation: B̃ is a fair ±1 sign
        let tilde = if rest >= 2 {
            let h = 0.5 * (rest - 1) as f64;
            Some(Beta::new(h, h).map_err(|e| Error::domain(e.to_string()))?)
        } else {
            None
        };
        Ok(FinalBetaSampler {
            lead: (n as f64 / big_n).sqrt() * b_n,
            tail_scale: (rest as f64 / big_n).sqrt(),
            w,
            tilde,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = self.w.sample(rng);
        let tilde = match &self.tilde {
            Some(beta) => 2.0 * beta.sample(rng) - 1.0,
            None => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        (self.lead * w.sqrt() + self.tail_scale * tilde * (1.0 - w).sqrt()).clamp(-1.0, 1.0)
    }
}

/// One draw of `B_N | B_n = b_n` under the null.
pub fn sample_bn_given_bn<R: Rng + ?Sized>(b_n: f64, n: usize, horizon: usize, rng: &mut R) -> Result<f64> {
    Ok(FinalBetaSampler::new(b_n, n, horizon)?.sample(rng))
}

/// Monte Carlo estimate of `P(B_N > threshold | B_n = b_n)` from the
/// conditional sampler; the simulation counterpart of [`SeqTTest::value_at_beta`].
pub fn conditional_tail_mc(
    b_n: f64,
    n: usize,
    horizon: usize,
    threshold: f64,
    reps: usize,
    stream: RandomStream,
) -> Result<McEstimate> {
    let sampler = FinalBetaSampler::new(b_n, n, horizon)?;
    if reps < 2 {
        return Err(Error::usage(format!("need at least 2 replications, got {reps}")));
    }
    let m = simulate(reps, stream, 1, |rng, out| {
        out[0] = f64::from(u8::from(sampler.sample(rng) > threshold));
    });
    Ok(m[0].finish())
}
