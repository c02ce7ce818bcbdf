//! Common interface for sequential tests consumed by the harness and the CLI.

/// A sequential test evaluated along a stream of observations.
///
/// `path(xs)` returns the test values `φ_0, φ_1, …, φ_m` after each prefix of
/// `xs`, where `φ_0` is the value before any data. A test may finish before
/// it has consumed all of `xs` (`m < xs.len()`), never after `horizon()`.
pub trait SequentialTest: Sync {
    fn name(&self) -> String;

    /// Unconditional level the test is valid at.
    fn alpha(&self) -> f64;

    /// Largest number of observations the test ever consumes.
    fn horizon(&self) -> usize;

    fn path(&self, xs: &[f64]) -> Vec<f64>;

    /// Value after observing all of `xs`.
    fn value_after(&self, xs: &[f64]) -> f64 {
        *self.path(xs).last().expect("paths always contain the starting value")
    }
}

/// A stop/continue decision that sees only the history up to the current time.
pub trait StoppingRule: Sync {
    fn name(&self) -> String;

    /// Decide at time `n`, given `values = φ_0..=φ_n` and `observations = x_1..=x_n`.
    fn stop(&self, values: &[f64], observations: &[f64]) -> bool;
}

/// First time `n` at which `rule` stops along `path`, or the last index of the
/// path if it never does. The rule is only shown prefixes.
pub fn stopping_index(rule: &dyn StoppingRule, path: &[f64], observations: &[f64]) -> usize {
    let last = path.len() - 1;
    (0..last).find(|&n| rule.stop(&path[..=n], &observations[..n])).unwrap_or(last)
}

impl<R: StoppingRule + ?Sized> StoppingRule for Box<R> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn stop(&self, values: &[f64], observations: &[f64]) -> bool {
        (**self).stop(values, observations)
    }
}
