//! Stopping rules. Each sees only the path and observations up to the current time.

use crate::sequential::StoppingRule;

/// Never stops early: the test runs to its horizon.
#[derive(Debug, Clone, Copy)]
pub struct AtHorizon;

impl StoppingRule for AtHorizon {
    fn name(&self) -> String {
        "horizon".into()
    }

    fn stop(&self, _values: &[f64], _observations: &[f64]) -> bool {
        false
    }
}

/// Stops at a fixed time `n` (or the horizon, if earlier).
#[derive(Debug, Clone, Copy)]
pub struct FixedTime(pub usize);

impl StoppingRule for FixedTime {
    fn name(&self) -> String {
        format!("fixed({})", self.0)
    }

    fn stop(&self, values: &[f64], _observations: &[f64]) -> bool {
        values.len() > self.0
    }
}

/// Stops the first time the test value exceeds `c`.
#[derive(Debug, Clone, Copy)]
pub struct FirstAbove(pub f64);

impl StoppingRule for FirstAbove {
    fn name(&self) -> String {
        format!("first-above({})", self.0)
    }

    fn stop(&self, values: &[f64], _observations: &[f64]) -> bool {
        values.last().is_some_and(|v| *v > self.0)
    }
}

/// Stops the first time the test value reaches `c`; `FirstAtLeast(1.0)` is
/// "stop at rejection".
#[derive(Debug, Clone, Copy)]
pub struct FirstAtLeast(pub f64);

impl StoppingRule for FirstAtLeast {
    fn name(&self) -> String {
        format!("first-at-least({})", self.0)
    }

    fn stop(&self, values: &[f64], _observations: &[f64]) -> bool {
        values.last().is_some_and(|v| *v >= self.0)
    }
}

/// Looks at the raw data: stops once at least `min_n` observations have a
/// running mean above `threshold`.
#[derive(Debug, Clone, Copy)]
pub struct RunningMeanAbove {
    pub threshold: f64,
    pub min_n: usize,
}

impl StoppingRule for RunningMeanAbove {
    fn name(&self) -> String {
        format!("mean-above({},n>={})", self.threshold, self.min_n)
    }

    fn stop(&self, _values: &[f64], observations: &[f64]) -> bool {
        let n = observations.len();
        n >= self.min_n.max(1) && observations.iter().sum::<f64>() / n as f64 > self.threshold
    }
}

/// Stops after the value has fallen for `k` consecutive steps; keeps whatever
/// level remains before it drops further.
#[derive(Debug, Clone, Copy)]
pub struct FallingStreak(pub usize);

impl StoppingRule for FallingStreak {
    fn name(&self) -> String {
        format!("falling-streak({})", self.0)
    }

    fn stop(&self, values: &[f64], _observations: &[f64]) -> bool {
        values.len() > self.0 && values.windows(2).rev().take(self.0).all(|w| w[1] < w[0])
    }
}

/// The rule set used for anytime-validity checks at level `alpha` and horizon `horizon`.
pub fn adversarial_rules(alpha: f64, horizon: usize) -> Vec<Box<dyn StoppingRule>> {
    vec![
        Box::new(AtHorizon),
        Box::new(FixedTime(horizon / 2)),
        Box::new(FirstAbove(alpha)),
        Box::new(FirstAbove(2.0 * alpha)),
        Box::new(FirstAbove(0.5)),
        Box::new(RunningMeanAbove { threshold: 0.25, min_n: 3 }),
        Box::new(FallingStreak(3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequential::stopping_index;

    #[test]
    fn stopping_indices() {
        let path = [0.05, 0.2, 0.6, 1.0, 1.0];
        let obs = [0.5, 1.0, -2.0, 0.1];
        assert_eq!(stopping_index(&AtHorizon, &path, &obs), 4);
        assert_eq!(stopping_index(&FixedTime(2), &path, &obs), 2);
        assert_eq!(stopping_index(&FixedTime(0), &path, &obs), 0);
        assert_eq!(stopping_index(&FixedTime(9), &path, &obs), 4);
        assert_eq!(stopping_index(&FirstAbove(0.05), &path, &obs), 1);
        assert_eq!(stopping_index(&FirstAbove(0.5), &path, &obs), 2);
        assert_eq!(stopping_index(&FirstAtLeast(1.0), &path, &obs), 3);
        assert_eq!(stopping_index(&RunningMeanAbove { threshold: 0.7, min_n: 1 }, &path, &obs), 2);
        assert_eq!(stopping_index(&FallingStreak(1), &[0.05, 0.2, 0.1, 0.0], &obs[..3]), 2);
    }

    #[test]
    fn rules_only_see_prefixes() {
        // a rule that stops when the *next* value would be 1 cannot be written:
        // stopping_index hands it nothing beyond the current time
        struct Peek;
        impl StoppingRule for Peek {
            fn name(&self) -> String {
                "peek".into()
            }
            fn stop(&self, values: &[f64], observations: &[f64]) -> bool {
                assert_eq!(values.len(), observations.len() + 1);
                false
            }
        }
        assert_eq!(stopping_index(&Peek, &[0.1, 0.2, 0.3], &[1.0, 2.0]), 2);
    }
}
