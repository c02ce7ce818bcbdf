//! Monte Carlo experiments: power, anytime validity, martingale checks,
//! continuation experiments, the likelihood-ratio limit study and figure data.
//!
//! Replications run in fixed blocks; block `b` draws from
//! `RandomStream::new(seed, stream).child(b)` and blocks are merged in order,
//! so every report is bit-reproducible from its seed regardless of threads.

pub mod figures;
pub mod np_limit;
pub mod presets;
pub mod rules;

use std::fmt;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::continuation::{continued_design, issue_ticket, switch_alpha, Continued, TestPath};
use crate::dist::{RandomStream, StreamRng};
use crate::doob::Moments;
use crate::error::{Error, Result};
use crate::sequential::{stopping_index, SequentialTest, StoppingRule};
use crate::ztest::{SeqZTest, ZDesign, ZState};

pub use figures::{figure_data, FigureKind};
pub use np_limit::{np_limit_experiment, NpLimitRow};

const BLOCK: usize = 1024;

/// Gaussian location model the data are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataModel {
    mu: f64,
    sigma: f64,
}

impl DataModel {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("mu must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(DataModel { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn draw_into(&self, rng: &mut StreamRng, count: usize, out: &mut Vec<f64>) {
        let normal = Normal::new(self.mu, self.sigma).expect("validated parameters");
        out.extend((0..count).map(|_| normal.sample(rng)));
    }

    pub fn draw(&self, rng: &mut StreamRng, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        self.draw_into(rng, count, &mut out);
        out
    }
}

impl fmt::Display for DataModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N({},{}^2)", self.mu, self.sigma)
    }
}

/// A Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub estimate: f64,
    pub se: f64,
    pub reps: usize,
    pub seed: u64,
    pub design_digest: String,
}

impl MCReport {
    /// `estimate ≤ bound + k·se`.
    pub fn at_most(&self, bound: f64, k: f64) -> bool {
        self.estimate <= bound + k * self.se
    }

    /// `|estimate − target| ≤ k·se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.se
    }
}

/// How a stopped path is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// 1 if the stopped value is 1, else 0.
    Reject,
    /// The stopped value itself, i.e. rejection after external randomisation.
    Value,
}

impl Outcome {
    fn score(self, v: f64) -> f64 {
        match self {
            Outcome::Reject => f64::from(u8::from(v >= 1.0)),
            Outcome::Value => v,
        }
    }
}

/// Runs `reps` replications of `f`, each filling `k` outputs, and returns the
/// per-output moments.
pub(crate) fn simulate<F>(reps: usize, stream: RandomStream, k: usize, f: F) -> Vec<Moments>
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    let blocks = reps.div_ceil(BLOCK);
    let parts: Vec<Vec<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = stream.child(block as u64).rng();
            let mut moments = vec![Moments::default(); k];
            let mut out = vec![0.0; k];
            for _ in 0..BLOCK.min(reps - block * BLOCK) {
                f(&mut rng, &mut out);
                moments.iter_mut().zip(&out).for_each(|(m, v)| m.push(*v));
            }
            moments
        })
        .collect();
    parts
        .into_iter()
        .fold(vec![Moments::default(); k], |acc, part| acc.into_iter().zip(part).map(|(a, b)| a.merge(b)).collect())
}

fn report(m: Moments, seed: u64, digest: String) -> MCReport {
    let e = m.finish();
    MCReport { estimate: e.estimate, se: e.se, reps: e.reps, seed, design_digest: digest }
}

fn check_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(Error::usage(format!("need at least {min} replications, got {reps}")));
    }
    Ok(())
}

fn stopped_value(test: &dyn SequentialTest, rule: &dyn StoppingRule, xs: &[f64]) -> f64 {
    let path = test.path(xs);
    let tau = stopping_index(rule, &path, &xs[..path.len() - 1]);
    path[tau]
}

/// Power (or size) of `test` stopped by `rule` when the data follow `model`.
pub fn estimate_power(
    test: &dyn SequentialTest,
    model: DataModel,
    rule: &dyn StoppingRule,
    outcome: Outcome,
    reps: usize,
    seed: u64,
) -> Result<MCReport> {
    check_reps(reps, 100)?;
    let horizon = test.horizon();
    let m = simulate(reps, RandomStream::new(seed, 0), 1, |rng, out| {
        let xs = model.draw(rng, horizon);
        out[0] = outcome.score(stopped_value(test, rule, &xs));
    });
    let digest = format!("{}|{model}|{}|{outcome:?}", test.name(), rule.name());
    Ok(report(m[0], seed, digest))
}

/// Mean stopped value under a null model, one report per rule. All rules see
/// the same simulated paths.
pub fn estimate_anytime_size(
    test: &dyn SequentialTest,
    null: DataModel,
    rules: &[&dyn StoppingRule],
    reps: usize,
    seed: u64,
) -> Result<Vec<MCReport>> {
    if rules.is_empty() {
        return Err(Error::usage("anytime-size estimation needs at least one stopping rule"));
    }
    check_reps(reps, 2)?;
    let horizon = test.horizon();
    let m = simulate(reps, RandomStream::new(seed, 0), rules.len(), |rng, out| {
        let xs = null.draw(rng, horizon);
        let path = test.path(&xs);
        let obs = &xs[..path.len() - 1];
        for (slot, rule) in out.iter_mut().zip(rules) {
            *slot = path[stopping_index(*rule, &path, obs)];
        }
    });
    Ok(m.into_iter()
        .zip(rules)
        .map(|(m, rule)| report(m, seed, format!("{}|{null}|{}", test.name(), rule.name())))
        .collect())
}

/// Per-rule outcome of repeating [`estimate_anytime_size`] over many seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValiditySweep {
    pub rule: String,
    pub seeds: usize,
    /// Seeds where the stopped mean stayed within `α + 3·SE`.
    pub passed: usize,
    pub worst_estimate: f64,
    pub pooled_estimate: f64,
}

impl ValiditySweep {
    pub fn pass_rate(&self) -> f64 {
        self.passed as f64 / self.seeds as f64
    }
}

pub fn anytime_validity_sweep(
    test: &dyn SequentialTest,
    null: DataModel,
    rules: &[&dyn StoppingRule],
    reps: usize,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<Vec<ValiditySweep>> {
    let alpha = test.alpha();
    let mut sweeps: Vec<ValiditySweep> = rules
        .iter()
        .map(|r| ValiditySweep {
            rule: r.name(),
            seeds: 0,
            passed: 0,
            worst_estimate: f64::NEG_INFINITY,
            pooled_estimate: 0.0,
        })
        .collect();
    for seed in seeds {
        for (sweep, rep) in sweeps.iter_mut().zip(estimate_anytime_size(test, null, rules, reps, seed)?) {
            sweep.seeds += 1;
            sweep.passed += usize::from(rep.at_most(alpha, 3.0));
            sweep.worst_estimate = sweep.worst_estimate.max(rep.estimate);
            sweep.pooled_estimate += rep.estimate;
        }
    }
    for s in &mut sweeps {
        s.pooled_estimate /= s.seeds as f64;
    }
    Ok(sweeps)
}

/// Nested Monte Carlo check of `E[φ_{n+1} | F_n] = φ_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    /// Mean of the inner estimate of `E[φ_{n+1} | F_n] − φ_n`.
    pub signed: MCReport,
    /// Mean absolute discrepancy.
    pub absolute: MCReport,
    /// Mean of the inner estimates of `E[φ_{n+1} | F_n]`.
    pub next_value: MCReport,
    /// Root-mean-square inner standard error.
    pub inner_se_rms: f64,
}

impl MartingaleReport {
    /// The signed discrepancy is within 3 SE of zero and the absolute one is
    /// within 3 inner standard errors, i.e. explained by inner noise.
    pub fn passes(&self) -> bool {
        self.signed.within(0.0, 3.0) && self.absolute.estimate <= 3.0 * self.inner_se_rms
    }
}

pub fn martingale_check(
    test: &dyn SequentialTest,
    null: DataModel,
    n: usize,
    outer: usize,
    inner: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if n >= test.horizon() {
        return Err(Error::usage(format!("martingale step needs n < N = {}, got {n}", test.horizon())));
    }
    check_reps(outer, 2)?;
    check_reps(inner, 2)?;
    let m = simulate(outer, RandomStream::new(seed, 1), 4, |rng, out| {
        let mut xs = null.draw(rng, n);
        let now = test.value_after(&xs);
        let mut inner_m = Moments::default();
        xs.push(0.0);
        for _ in 0..inner {
            xs.pop();
            null.draw_into(rng, 1, &mut xs);
            inner_m.push(test.value_after(&xs));
        }
        let e = inner_m.finish();
        let d = e.estimate - now;
        out.copy_from_slice(&[d, d.abs(), e.estimate, e.se * e.se]);
    });
    let digest = format!("{}|{null}|n={n}|inner={inner}", test.name());
    Ok(MartingaleReport {
        inner_se_rms: m[3].finish().estimate.sqrt(),
        signed: report(m[0], seed, digest.clone()),
        absolute: report(m[1], seed, digest.clone()),
        next_value: report(m[2], seed, digest),
    })
}

/// Two-stage z→z procedure with an alpha switch: stage one at `first`'s level
/// is stopped by `rule`, its value is rescaled to target level `alpha_new`,
/// and a fresh z-test built from `second` runs at that level to its horizon.
/// Reports the mean of `φ₂ / α'`, which is at most 1 under the null. With
/// `alpha_new = α` this is the mean of the e-value product `e₁·e₂`.
pub fn alpha_switch_experiment(
    first: ZDesign,
    rule: &dyn StoppingRule,
    second: ZDesign,
    alpha_new: f64,
    null: DataModel,
    reps: usize,
    seed: u64,
) -> Result<MCReport> {
    check_reps(reps, 2)?;
    let stage1 = SeqZTest::new(first);
    let (n1, n2) = (first.horizon(), second.horizon());
    let alpha = first.alpha();
    // validate the level once so the simulation cannot fail
    switch_alpha(&issue_ticket(&TestPath::new(vec![alpha], vec![])?, 0, "check")?, alpha, alpha_new)?;
    let m = simulate(reps, RandomStream::new(seed, 2), 1, |rng, out| {
        let xs = null.draw(rng, n1 + n2);
        let path = TestPath::of(&stage1, &xs[..n1]);
        let sigma = stopping_index(rule, path.values(), path.observations());
        let ticket = issue_ticket(&path, sigma, "stage1").expect("in range");
        let ticket = switch_alpha(&ticket, alpha, alpha_new).expect("validated");
        let phi2 = match continued_design(&ticket, &second).expect("level in [0, 1]") {
            Continued::Frozen(v) => v,
            Continued::Active(d) => {
                let test = SeqZTest::new(d);
                test.terminal(&ZState::from_data(&xs[sigma..sigma + n2], d.sigma())).expect("full horizon")
            }
        };
        out[0] = phi2 / alpha_new;
    });
    let digest = format!("z(N={n1})|{}|switch->{alpha_new}|z(N={n2})|{null}", rule.name());
    Ok(report(m[0], seed, digest))
}
