//! Named experiment bundles.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::rules::{AtHorizon, FirstAtLeast};
use crate::harness::{estimate_power, DataModel, MCReport, Outcome};
use crate::lr::{CappedSprt, GaussianPair, PluginSprt};
use crate::sequential::{SequentialTest, StoppingRule};
use crate::table::Table;
use crate::ztest::{SeqZTest, ZDesign};

pub const INTRO_HORIZON: usize = 100;
pub const INTRO_MU: f64 = 0.3;
pub const INTRO_ALPHA: f64 = 0.05;
/// Plug-in mean estimates are not floored: any predictable estimate gives a
/// valid likelihood-ratio factor.
pub const INTRO_PLUGIN_FLOOR: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Intro,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intro" => Ok(Preset::Intro),
            other => Err(Error::usage(format!("unknown preset '{other}' (available: intro)"))),
        }
    }
}

/// One row of a power table.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub label: String,
    pub rule: String,
    pub report: MCReport,
}

/// z-test at the horizon, capped SPRT stopped at rejection (binary and with
/// the terminal value used as a randomised decision), and the plug-in SPRT.
pub fn intro(reps: usize, seed: u64) -> Result<Vec<PowerRow>> {
    let model = DataModel::gaussian(INTRO_MU, 1.0)?;
    let z = SeqZTest::new(ZDesign::new(INTRO_HORIZON, INTRO_ALPHA, 1.0)?);
    let sprt = CappedSprt::new(GaussianPair::new(0.0, INTRO_MU, 1.0)?, INTRO_ALPHA, INTRO_HORIZON)?;
    let plugin = PluginSprt::new(1.0, INTRO_PLUGIN_FLOOR, INTRO_ALPHA, INTRO_HORIZON)?;
    let runs: [(&str, &dyn SequentialTest, &dyn StoppingRule, Outcome); 4] = [
        ("z", &z, &AtHorizon, Outcome::Reject),
        ("sprt", &sprt, &FirstAtLeast(1.0), Outcome::Reject),
        ("sprt-randomized", &sprt, &FirstAtLeast(1.0), Outcome::Value),
        ("plugin-sprt", &plugin, &FirstAtLeast(1.0), Outcome::Reject),
    ];
    runs.into_iter()
        .map(|(label, test, rule, outcome)| {
            Ok(PowerRow {
                label: label.into(),
                rule: rule.name(),
                report: estimate_power(test, model, rule, outcome, reps, seed)?,
            })
        })
        .collect()
}

pub fn run(preset: Preset, reps: usize, seed: u64) -> Result<Vec<PowerRow>> {
    match preset {
        Preset::Intro => intro(reps, seed),
    }
}

pub fn power_table(rows: &[PowerRow]) -> Result<Table> {
    let mut t = Table::new(["test", "rule", "estimate", "se", "reps", "seed", "design"]);
    for r in rows {
        t.push(vec![
            r.label.as_str().into(),
            r.rule.as_str().into(),
            r.report.estimate.into(),
            r.report.se.into(),
            r.report.reps.into(),
            r.report.seed.into(),
            r.report.design_digest.as_str().into(),
        ])?;
    }
    Ok(t)
}
