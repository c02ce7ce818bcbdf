//! Anytime-valid sequential tests induced from terminal tests.
//!
//! A terminal test `φ` on `N` observations induces the sequential test
//! `φ_n = E[φ | F_n]` under the null. The sequence is a bounded martingale that
//! starts at the level `α`, ends at `φ`, and stays valid under any stopping rule.
//!
//! The crate ships closed forms for the one-sided z-test ([`ztest`]) and t-test
//! ([`ttest`]), capped likelihood-ratio processes ([`lr`]), a generic Monte Carlo
//! induction engine ([`doob`]), the optional-continuation calculus
//! ([`continuation`]), and the Monte Carlo experiments in [`harness`].

// NaN-rejecting range checks are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod continuation;
pub mod dist;
pub mod doob;
pub mod error;
pub mod harness;
pub mod lr;
pub mod mlr_fixture;
pub mod sequential;
pub mod table;
pub mod ttest;
pub mod ztest;

pub use error::{Error, Result};
pub use sequential::SequentialTest;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Prob(f64);

impl Prob {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Prob(value))
        } else {
            Err(Error::domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// A level strictly inside `(0, 1)`.
    pub fn level(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Prob(value))
        } else {
            Err(Error::domain(format!("level {value} outside (0, 1)")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Prob> for f64 {
    fn from(p: Prob) -> f64 {
        p.0
    }
}
