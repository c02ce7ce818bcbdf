//! Data behind the two illustrations: sequential z- and t-tests on one
//! N(0.3, 1) sample, and the z-test at `α_N = e^{−12.5}` next to the
//! likelihood-ratio process on one N(0.5, 1) sample.

use std::fmt;
use std::str::FromStr;

use crate::dist::{QuadratureSpec, RandomStream};
use crate::error::{Error, Result};
use crate::harness::np_limit::ln_alpha_for;
use crate::harness::DataModel;
use crate::lr::{gaussian_log_lr, GaussianPair};
use crate::sequential::SequentialTest;
use crate::table::{Cell, Table};
use crate::ttest::{SeqTTest, TDesign};
use crate::ztest::{SeqZTest, ZDesign, ZState};

pub const FIGURE_HORIZON: usize = 100;
pub const FIG1_MU: f64 = 0.3;
pub const FIG2_MU: f64 = 0.5;
pub const FIG1_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Fig1,
    Fig2,
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(FigureKind::Fig1),
            "fig2" => Ok(FigureKind::Fig2),
            other => Err(Error::usage(format!("unknown figure '{other}' (expected fig1 or fig2)"))),
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureKind::Fig1 => "fig1",
            FigureKind::Fig2 => "fig2",
        })
    }
}

pub fn figure_data(which: FigureKind, seed: u64) -> Result<Table> {
    match which {
        FigureKind::Fig1 => fig1(seed),
        FigureKind::Fig2 => fig2(seed),
    }
}

fn sample(mu: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(DataModel::gaussian(mu, 1.0)?.draw(&mut RandomStream::new(seed, 0).rng(), FIGURE_HORIZON))
}

/// Columns `n, observation, z_value, t_value` for `n = 0..=N`.
fn fig1(seed: u64) -> Result<Table> {
    let xs = sample(FIG1_MU, seed)?;
    let z = SeqZTest::new(ZDesign::new(FIGURE_HORIZON, FIG1_ALPHA, 1.0)?).path(&xs);
    let t = SeqTTest::new(TDesign::new(FIGURE_HORIZON, FIG1_ALPHA)?, QuadratureSpec::default()).path(&xs);
    let mut table = Table::new(["n", "observation", "z_value", "t_value"]);
    for n in 0..=FIGURE_HORIZON {
        let obs = if n == 0 { Cell::Missing } else { xs[n - 1].into() };
        table.push(vec![n.into(), obs, z[n].into(), t[n].into()])?;
    }
    Ok(table)
}

/// Columns `n, observation, z_ratio, lr` for `n = 0..N−1`: the z-test value
/// over `α_N`, and `LR_n`, both on the e-value scale. The terminal row is left
/// out because the terminal z value is 0 whenever the test does not reject.
fn fig2(seed: u64) -> Result<Table> {
    let xs = sample(FIG2_MU, seed)?;
    let pair = GaussianPair::new(0.0, FIG2_MU, 1.0)?;
    let ln_alpha = ln_alpha_for(&pair, FIGURE_HORIZON);
    let z = SeqZTest::new(ZDesign::with_ln_alpha(FIGURE_HORIZON, ln_alpha, 1.0)?);
    let mut table = Table::new(["n", "observation", "z_ratio", "lr"]);
    for n in 0..FIGURE_HORIZON {
        let state = ZState::from_data(&xs[..n], 1.0);
        let ratio = (z.ln_value(&state)? - ln_alpha).exp();
        let lr = gaussian_log_lr(state.scaled_sum(), n, &pair).exp();
        let obs = if n == 0 { Cell::Missing } else { xs[n - 1].into() };
        table.push(vec![n.into(), obs, ratio.into(), lr.into()])?;
    }
    Ok(table)
}
