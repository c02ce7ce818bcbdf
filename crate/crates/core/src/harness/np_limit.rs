//! Sequential z-test at `α_N = exp(−N·D)` against the likelihood-ratio process.
//!
//! With `D = μ²/(2σ²)` the KL divergence between the alternative and the null,
//! `φ'_n / α_N → LR_n` as `N → ∞` for every fixed `n`. Everything is computed
//! in log space since `α_N` underflows quickly.

use serde::Serialize;

use crate::dist::RandomStream;
use crate::error::{Error, Result};
use crate::harness::DataModel;
use crate::lr::{gaussian_log_lr, GaussianPair};
use crate::ztest::{SeqZTest, ZDesign, ZState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NpLimitRow {
    pub path: usize,
    pub n: usize,
    pub horizon: usize,
    pub ln_alpha: f64,
    /// `ln(φ'_n / α_N)`.
    pub ln_ratio: f64,
    /// `ln LR_n`.
    pub ln_lr: f64,
    /// `|φ'_n/α_N − LR_n| / LR_n`.
    pub rel_error: f64,
}

/// `α_N` for a pair on the log scale: `−N·D`.
pub fn ln_alpha_for(pair: &GaussianPair, horizon: usize) -> f64 {
    -(horizon as f64) * pair.kl_divergence()
}

/// One row per (path, n, N). Paths are drawn from the alternative.
pub fn np_limit_experiment(
    pair: &GaussianPair,
    n_values: &[usize],
    horizons: &[usize],
    paths: usize,
    seed: u64,
) -> Result<Vec<NpLimitRow>> {
    let max_n = n_values.iter().copied().max().unwrap_or(0);
    if let Some(&small) = horizons.iter().find(|&&h| h <= max_n) {
        return Err(Error::usage(format!("horizon {small} must exceed every n (max {max_n})")));
    }
    if pair.kl_divergence() <= 0.0 {
        return Err(Error::domain("null and alternative coincide"));
    }
    let model = DataModel::gaussian(pair.alt_mu(), pair.sigma())?;
    let mut rows = Vec::new();
    for p in 0..paths {
        let xs = model.draw(&mut RandomStream::new(seed, p as u64).rng(), max_n);
        for &big_n in horizons {
            let ln_alpha = ln_alpha_for(pair, big_n);
            let test =
                SeqZTest::new(ZDesign::with_ln_alpha(big_n, ln_alpha, pair.sigma())?.with_null_mu(pair.null_mu()));
            for &n in n_values {
                let state = ZState::from_data(&xs[..n], pair.sigma());
                let ln_ratio = test.ln_value(&state)? - ln_alpha;
                let ln_lr = gaussian_log_lr(state.scaled_sum(), n, pair);
                rows.push(NpLimitRow {
                    path: p,
                    n,
                    horizon: big_n,
                    ln_alpha,
                    ln_ratio,
                    ln_lr,
                    rel_error: (ln_ratio - ln_lr).exp_m1().abs(),
                });
            }
        }
    }
    Ok(rows)
}
