//! Generic induction of a sequential test from a terminal test by Monte Carlo.
//!
//! `φ_n = E[φ(X^N) | X^n = prefix]` is estimated by completing the prefix with
//! null draws of the suffix and averaging the terminal test. Replications run
//! in fixed-size blocks, each on its own child stream, and are merged in block
//! order, so estimates do not depend on the thread count.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{RandomStream, StreamRng};
use crate::error::{Error, Result};
use crate::ttest::{t_critical, t_statistic, TDesign};
use crate::ztest::{SeqZTest, ZDesign, ZState};

const BLOCK: usize = 4096;

/// A test on the full data vector of length `N`.
pub trait TerminalTest: Sync {
    fn horizon(&self) -> usize;
    fn evaluate(&self, data: &[f64]) -> f64;
}

/// Draws the unseen suffix from the null conditional law given the prefix.
pub trait NullSampler: Sync {
    fn draw_suffix(&self, prefix: &[f64], count: usize, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()>;
}

/// I.i.d. Gaussian null; the suffix ignores the prefix.
#[derive(Debug, Clone, Copy)]
pub struct GaussianNull {
    normal: Normal<f64>,
}

impl GaussianNull {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianNull { normal: Normal::new(mu, sigma).map_err(|e| Error::domain(e.to_string()))? })
    }
}

impl NullSampler for GaussianNull {
    fn draw_suffix(&self, _prefix: &[f64], count: usize, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        out.extend((0..count).map(|_| self.normal.sample(rng)));
        Ok(())
    }
}

/// Null completion for scale-free terminal tests such as the t-test, where
/// `σ` is unknown and only the direction of the prefix is informative.
/// Given that direction, `‖X^n‖/σ` is an independent `χ_n`, so the suffix is
/// `N(0, s²)` with `s = ‖X^n‖ / χ_n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScaleFreeNull;

impl NullSampler for ScaleFreeNull {
    fn draw_suffix(&self, prefix: &[f64], count: usize, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        let norm = prefix.iter().map(|x| x * x).sum::<f64>().sqrt();
        // an empty or all-zero prefix says nothing about the scale
        let scale = if norm > 0.0 {
            let chi_sq = ChiSquared::new(prefix.len() as f64).map_err(|e| Error::domain(e.to_string()))?;
            norm / chi_sq.sample(rng).sqrt()
        } else {
            1.0
        };
        out.extend((0..count).map(|_| scale * rng.sample::<f64, _>(StandardNormal)));
        Ok(())
    }
}

/// The one-sided z-test indicator as a terminal test.
#[derive(Debug, Clone)]
pub struct ZTerminal(SeqZTest);

impl ZTerminal {
    pub fn new(design: ZDesign) -> Self {
        ZTerminal(SeqZTest::new(design))
    }
}

impl TerminalTest for ZTerminal {
    fn horizon(&self) -> usize {
        self.0.design().horizon()
    }

    fn evaluate(&self, data: &[f64]) -> f64 {
        let state = ZState::from_data(data, self.0.design().sigma());
        self.0.terminal(&state).unwrap_or(0.0)
    }
}

/// The one-sided t-test indicator `T_N > c_{α,N}` as a terminal test.
#[derive(Debug, Clone)]
pub struct TTerminal {
    horizon: usize,
    critical: f64,
}

impl TTerminal {
    pub fn new(design: &TDesign) -> Self {
        TTerminal { horizon: design.horizon(), critical: t_critical(design) }
    }
}

impl TerminalTest for TTerminal {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn evaluate(&self, data: &[f64]) -> f64 {
        match t_statistic(data) {
            Ok(t) if t > self.critical => 1.0,
            _ => 0.0,
        }
    }
}

/// Terminal test from a closure.
pub struct FnTerminal<F> {
    horizon: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnTerminal<F> {
    pub fn new(horizon: usize, f: F) -> Self {
        FnTerminal { horizon, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> TerminalTest for FnTerminal<F> {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn evaluate(&self, data: &[f64]) -> f64 {
        (self.f)(data).clamp(0.0, 1.0)
    }
}

/// Monte Carlo estimate of an induced test value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    n: usize,
    // sums of v − shift, shift being the first value seen; keeps constant
    // inputs exact and limits cancellation in the variance
    shift: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, v: f64) {
        if self.n == 0 {
            self.shift = v;
        }
        let d = v - self.shift;
        self.n += 1;
        self.sum += d;
        self.sum_sq += d * d;
    }

    pub(crate) fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        // re-centre `other` on this shift
        let delta = other.shift - self.shift;
        let m = other.n as f64;
        Moments {
            n: self.n + other.n,
            shift: self.shift,
            sum: self.sum + other.sum + m * delta,
            sum_sq: self.sum_sq + other.sum_sq + 2.0 * delta * other.sum + m * delta * delta,
        }
    }

    pub(crate) fn finish(self) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        McEstimate { estimate: self.shift + mean, se: (var / n).sqrt(), reps: self.n }
    }
}

/// Estimate `E[φ | X^n = prefix]` under the null sampler.
pub fn induce_mc(
    test: &dyn TerminalTest,
    sampler: &dyn NullSampler,
    prefix: &[f64],
    reps: usize,
    stream: RandomStream,
) -> Result<McEstimate> {
    let horizon = test.horizon();
    if prefix.len() > horizon {
        return Err(Error::usage(format!("prefix of length {} exceeds the horizon {horizon}", prefix.len())));
    }
    if reps < 2 {
        return Err(Error::usage(format!("Monte Carlo induction needs at least 2 replications, got {reps}")));
    }
    if prefix.len() == horizon {
        return Ok(McEstimate { estimate: test.evaluate(prefix), se: 0.0, reps });
    }
    let count = horizon - prefix.len();
    let blocks = reps.div_ceil(BLOCK);
    let parts: Vec<Result<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = stream.child(block as u64).rng();
            let size = BLOCK.min(reps - block * BLOCK);
            let mut data = Vec::with_capacity(horizon);
            let mut m = Moments::default();
            for _ in 0..size {
                data.clear();
                data.extend_from_slice(prefix);
                sampler.draw_suffix(prefix, count, &mut rng, &mut data)?;
                m.push(test.evaluate(&data));
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    Ok(total.finish())
}

/// Composite-null combination: the minimum of a finite family of test values.
pub fn essinf_combine(values: &[f64]) -> Result<f64> {
    values.iter().copied().reduce(f64::min).ok_or_else(|| Error::usage("cannot combine an empty family of tests"))
}
