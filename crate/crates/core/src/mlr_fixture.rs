//! A discrete model on {0,1}×{0,1,2} where both statistics have monotone
//! likelihood ratios yet `T = k(X₁, X₂)` is not stochastically increasing in `T₁ = X₁`.
//!
//! `P_θ(x₁, x₂) ∝ exp(θ·k(x₁, x₂))`. With `e^θ` rational every cell weight is a
//! rational number, so the conditional tails come out exact.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// `k(x₁, x₂)`, rows indexed by `x₁`.
pub const K_TABLE: [[u32; 3]; 2] = [[0, 2, 2], [2, 3, 1]];

/// Largest value of `T`.
pub const T_MAX: u32 = 3;

pub type Rational = Ratio<i128>;

/// The model at a parameter `θ`, given either exactly through `e^θ` or as a real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CounterexampleModel {
    /// `e^θ = num/den`.
    Exact {
        exp_theta: (i64, i64),
    },
    Real {
        theta: f64,
    },
}

impl CounterexampleModel {
    /// `θ = ln 2`, the point where stochastic ordering fails.
    pub fn ln2() -> Self {
        CounterexampleModel::Exact { exp_theta: (2, 1) }
    }

    pub fn exact(num: i64, den: i64) -> Result<Self> {
        if num <= 0 || den <= 0 {
            return Err(Error::domain(format!("e^θ = {num}/{den} must be positive")));
        }
        Ok(CounterexampleModel::Exact { exp_theta: (num, den) })
    }

    pub fn real(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::domain(format!("θ must be finite, got {theta}")));
        }
        Ok(CounterexampleModel::Real { theta })
    }

    pub fn theta(&self) -> f64 {
        match *self {
            CounterexampleModel::Exact { exp_theta: (n, d) } => (n as f64 / d as f64).ln(),
            CounterexampleModel::Real { theta } => theta,
        }
    }

    /// Unnormalised cell weights `e^{θk}` as exact rationals.
    pub fn exact_weights(&self) -> Option<[[Rational; 3]; 2]> {
        let CounterexampleModel::Exact { exp_theta: (n, d) } = *self else {
            return None;
        };
        let base = Rational::new(n as i128, d as i128);
        Some(K_TABLE.map(|row| row.map(|k| base.pow(k as i32))))
    }

    /// Normalised cell probabilities.
    pub fn cell_probs(&self) -> [[f64; 3]; 2] {
        let theta = self.theta();
        let w = K_TABLE.map(|row| row.map(|k| (theta * k as f64).exp()));
        let total: f64 = w.iter().flatten().sum();
        w.map(|row| row.map(|v| v / total))
    }
}

fn check_t1(t1: u32) -> Result<usize> {
    if t1 > 1 {
        return Err(Error::usage(format!("T₁ takes values 0 or 1, got {t1}")));
    }
    Ok(t1 as usize)
}

/// `P_θ(T ≥ threshold | T₁ = t1)` exactly. Requires an exact model.
pub fn conditional_tail(model: &CounterexampleModel, t1: u32, threshold: u32) -> Result<Rational> {
    let row = check_t1(t1)?;
    if threshold > T_MAX {
        return Err(Error::usage(format!("threshold must be in 0..={T_MAX}, got {threshold}")));
    }
    let w = model
        .exact_weights()
        .ok_or_else(|| Error::usage("exact tails need a rational e^θ; use conditional_tail_real"))?;
    let total: Rational = w[row].iter().sum();
    let tail: Rational = w[row].iter().zip(K_TABLE[row]).filter(|(_, k)| *k >= threshold).map(|(v, _)| v).sum();
    Ok(tail / total)
}

/// `P_θ(T ≥ threshold | T₁ = t1)` in floating point, for any model.
pub fn conditional_tail_real(model: &CounterexampleModel, t1: u32, threshold: u32) -> Result<f64> {
    let row = check_t1(t1)?;
    if threshold > T_MAX {
        return Err(Error::usage(format!("threshold must be in 0..={T_MAX}, got {threshold}")));
    }
    let p = model.cell_probs()[row];
    let total: f64 = p.iter().sum();
    let tail: f64 = p.iter().zip(K_TABLE[row]).filter(|(_, k)| *k >= threshold).map(|(v, _)| v).sum();
    Ok(tail / total)
}

/// `P_θ(T₁ = 1) / P_θ(T₁ = 0)`.
pub fn t1_odds(theta: f64) -> f64 {
    let e = theta.exp();
    (e + e * e + e * e * e) / (1.0 + 2.0 * e * e)
}

/// Marginal law of `T` at `θ`.
pub fn t_marginal(theta: f64) -> [f64; T_MAX as usize + 1] {
    let mut counts = [0.0; T_MAX as usize + 1];
    for k in K_TABLE.iter().flatten() {
        counts[*k as usize] += 1.0;
    }
    let w = std::array::from_fn::<f64, { T_MAX as usize + 1 }, _>(|s| counts[s] * (theta * s as f64).exp());
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Outcome of [`mlr_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlrReport {
    pub t1: bool,
    pub t: bool,
}

/// Checks across `theta_grid` that the odds of `T₁` and every likelihood ratio
/// `P(T=s)/P(T=r)`, `s > r`, increase with θ.
pub fn mlr_check(theta_grid: &[f64]) -> Result<MlrReport> {
    if theta_grid.is_empty() {
        return Err(Error::usage("θ grid must be nonempty"));
    }
    let mut grid = theta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let t1 = grid.windows(2).all(|w| t1_odds(w[1]) > t1_odds(w[0]));
    let marginals: Vec<_> = grid.iter().map(|&th| t_marginal(th)).collect();
    let mut t = true;
    for s in 0..=T_MAX as usize {
        for r in 0..s {
            t &= marginals.windows(2).all(|m| m[1][s] / m[1][r] > m[0][s] / m[0][r]);
        }
    }
    Ok(MlrReport { t1, t })
}

/// Whether `T` given `T₁ = 1` stochastically dominates `T` given `T₁ = 0`.
pub fn stochastically_increasing(model: &CounterexampleModel) -> Result<bool> {
    for threshold in 0..=T_MAX {
        let holds = if model.exact_weights().is_some() {
            conditional_tail(model, 1, threshold)? >= conditional_tail(model, 0, threshold)?
        } else {
            conditional_tail_real(model, 1, threshold)? >= conditional_tail_real(model, 0, threshold)?
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

pub const DEFAULT_GRID: [f64; 5] = [-1.0, 0.0, std::f64::consts::LN_2, 1.0, 2.0];
