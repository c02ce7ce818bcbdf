//! Command-line front end.
//!
//! Errors are reported on stderr as a single JSON object
//! `{"error":{"kind":…,"message":…}}` with a nonzero exit status.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::continuation::{continued_design, issue_ticket, ContinuationTicket, Continued, TestPath};
use crate::dist::QuadratureSpec;
use crate::error::{Error, Result};
use crate::harness::presets::{self, PowerRow, Preset};
use crate::harness::rules::{AtHorizon, FirstAtLeast};
use crate::harness::{estimate_power, figure_data, DataModel, FigureKind, Outcome};
use crate::lr::{sprt_value, CappedSprt, GaussianPair, LRState, PluginSprt};
use crate::sequential::{SequentialTest, StoppingRule};
use crate::table::{Cell, Format, RecordWriter};
use crate::ttest::{SeqTTest, TAccumulator, TDesign};
use crate::ztest::{SeqZTest, ZDesign, ZState};

#[derive(Debug, Parser)]
#[command(name = "seqtest", version, about = "Anytime-valid sequential z-, t- and SPRT tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignKind {
    Z,
    T,
    Sprt,
    Plugin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    /// Run to the horizon.
    Horizon,
    /// Stop as soon as the value reaches 1.
    Reject,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DesignArgs {
    /// Planned horizon N.
    #[arg(long = "N", default_value_t = 100)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Known standard deviation (z-test, SPRT).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Debug, Clone, clap::Args)]
pub struct OutputArgs {
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Follow a stream of observations, one decimal number per line.
    Track {
        #[arg(long, value_enum, default_value = "z")]
        design: DesignKind,
        #[command(flatten)]
        params: DesignArgs,
        /// Alternative mean of the SPRT.
        #[arg(long, default_value_t = 0.3)]
        mu: f64,
        /// Observation file; standard input if absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Abort on the first malformed line instead of reporting and skipping it.
        #[arg(long)]
        strict: bool,
        /// Start from the level stored in a continuation ticket instead of --alpha.
        #[arg(long)]
        ticket_in: Option<PathBuf>,
        /// Write a continuation ticket for the last value.
        #[arg(long)]
        ticket_out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo power of a design, or a named preset.
    Power {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_enum, default_value = "z")]
        design: DesignKind,
        #[command(flatten)]
        params: DesignArgs,
        /// Mean of the simulated data (and the SPRT alternative).
        #[arg(long, default_value_t = 0.3)]
        mu: f64,
        #[arg(long, value_enum)]
        rule: Option<RuleKind>,
        /// Score the stopped value instead of the binary rejection.
        #[arg(long)]
        randomize: bool,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Data behind the illustrations.
    Figure {
        /// fig1 or fig2.
        which: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Parses `args`, runs the command, and maps failures to a JSON error on
/// `stderr`. Returns the process exit code.
pub fn main_with<I, T>(args: I, stdin: impl BufRead, stdout: impl Write, mut stderr: impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stderr, "{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let detail: Vec<&str> =
                msg.lines().take_while(|l| !l.starts_with("Usage:")).map(str::trim).filter(|l| !l.is_empty()).collect();
            let message = detail.join(" ").trim_start_matches("error: ").to_string();
            let _ = writeln!(stderr, "{}", json!({"error": {"kind": "usage", "message": message}}));
            return 2;
        }
    };
    match run(cli, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(&e));
            match e {
                Error::Usage(_) | Error::Parse { .. } => 2,
                _ => 1,
            }
        }
    }
}

pub fn error_json(e: &Error) -> serde_json::Value {
    let mut obj = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
    if let Error::Parse { line, .. } = e {
        obj["error"]["line"] = json!(line);
    }
    obj
}

pub fn run(cli: Cli, stdin: impl BufRead, stdout: impl Write) -> Result<()> {
    match cli.command {
        Command::Track { design, params, mu, input, strict, ticket_in, ticket_out, output } => {
            let format: Format = output.format.parse()?;
            let ticket = ticket_in.map(|p| std::fs::read_to_string(p)?.parse::<ContinuationTicket>()).transpose()?;
            let tracker = Tracker::new(design, &params, mu, ticket.as_ref())?;
            let source: Box<dyn BufRead> = match input {
                Some(p) => Box::new(BufReader::new(File::open(p)?)),
                None => Box::new(stdin),
            };
            let opts = TrackOptions { strict, ticket_out };
            with_output(output.out, stdout, |w| track(tracker, source, format, w, &opts))
        }
        Command::Power { preset, design, params, mu, rule, randomize, reps, seed, output } => {
            let format: Format = output.format.parse()?;
            let rows = match preset {
                Some(name) => presets::run(name.parse::<Preset>()?, reps, seed)?,
                None => vec![single_power(design, &params, mu, rule, randomize, reps, seed)?],
            };
            let table = presets::power_table(&rows)?;
            with_output(output.out, stdout, |w| table.write(format, w))
        }
        Command::Figure { which, seed, output } => {
            let format: Format = output.format.parse()?;
            let table = figure_data(which.parse::<FigureKind>()?, seed)?;
            with_output(output.out, stdout, |w| table.write(format, w))
        }
    }
}

fn with_output(path: Option<PathBuf>, stdout: impl Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(File::create(p)?);
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => {
            let mut out = stdout;
            f(&mut out)
        }
    }
}

fn single_power(
    design: DesignKind,
    p: &DesignArgs,
    mu: f64,
    rule: Option<RuleKind>,
    randomize: bool,
    reps: usize,
    seed: u64,
) -> Result<PowerRow> {
    let model = DataModel::gaussian(mu, p.sigma)?;
    let test: Box<dyn SequentialTest> = match design {
        DesignKind::Z => Box::new(SeqZTest::new(ZDesign::new(p.horizon, p.alpha, p.sigma)?)),
        DesignKind::T => Box::new(SeqTTest::new(TDesign::new(p.horizon, p.alpha)?, QuadratureSpec::default())),
        DesignKind::Sprt => Box::new(CappedSprt::new(GaussianPair::new(0.0, mu, p.sigma)?, p.alpha, p.horizon)?),
        DesignKind::Plugin => Box::new(PluginSprt::new(p.sigma, f64::NEG_INFINITY, p.alpha, p.horizon)?),
    };
    let rule = rule.unwrap_or(match design {
        DesignKind::Z | DesignKind::T => RuleKind::Horizon,
        DesignKind::Sprt | DesignKind::Plugin => RuleKind::Reject,
    });
    let rule: Box<dyn StoppingRule> = match rule {
        RuleKind::Horizon => Box::new(AtHorizon),
        RuleKind::Reject => Box::new(FirstAtLeast(1.0)),
    };
    let outcome = if randomize { Outcome::Value } else { Outcome::Reject };
    let report = estimate_power(test.as_ref(), model, rule.as_ref(), outcome, reps, seed)?;
    Ok(PowerRow { label: test.name(), rule: rule.name(), report })
}

/// Incremental evaluation of a sequential test along a live stream.
pub enum Tracker {
    Z {
        test: SeqZTest,
        state: ZState,
    },
    T {
        test: SeqTTest,
        acc: TAccumulator,
    },
    Sprt {
        pair: GaussianPair,
        alpha: f64,
        horizon: usize,
        state: LRState,
    },
    Plugin {
        test: PluginSprt,
        seen: Vec<f64>,
    },
    /// A continuation from a ticket at level 0 or 1.
    Frozen {
        value: f64,
        alpha: f64,
        horizon: usize,
        n: usize,
    },
}

impl Tracker {
    pub fn new(design: DesignKind, p: &DesignArgs, mu: f64, ticket: Option<&ContinuationTicket>) -> Result<Self> {
        let alpha = ticket.map_or(p.alpha, ContinuationTicket::level);
        Ok(match design {
            DesignKind::Z => {
                let base = ZDesign::new(p.horizon, p.alpha, p.sigma)?;
                match ticket.map(|t| continued_design(t, &base)).transpose()? {
                    Some(Continued::Frozen(v)) => Tracker::Frozen { value: v, alpha, horizon: p.horizon, n: 0 },
                    Some(Continued::Active(d)) => Tracker::Z { test: SeqZTest::new(d), state: ZState::initial() },
                    None => Tracker::Z { test: SeqZTest::new(base), state: ZState::initial() },
                }
            }
            DesignKind::T => {
                let base = TDesign::new(p.horizon, p.alpha)?;
                match ticket.map(|t| continued_design(t, &base)).transpose()? {
                    Some(Continued::Frozen(v)) => Tracker::Frozen { value: v, alpha, horizon: p.horizon, n: 0 },
                    Some(Continued::Active(d)) => {
                        Tracker::T { test: SeqTTest::new(d, QuadratureSpec::default()), acc: TAccumulator::default() }
                    }
                    None => Tracker::T {
                        test: SeqTTest::new(base, QuadratureSpec::default()),
                        acc: TAccumulator::default(),
                    },
                }
            }
            DesignKind::Sprt | DesignKind::Plugin if alpha <= 0.0 || alpha >= 1.0 => {
                Tracker::Frozen { value: alpha.clamp(0.0, 1.0), alpha, horizon: p.horizon, n: 0 }
            }
            DesignKind::Sprt => Tracker::Sprt {
                pair: GaussianPair::new(0.0, mu, p.sigma)?,
                alpha,
                horizon: p.horizon,
                state: LRState::initial(),
            },
            DesignKind::Plugin => Tracker::Plugin {
                test: PluginSprt::new(p.sigma, f64::NEG_INFINITY, alpha, p.horizon)?,
                seen: Vec::new(),
            },
        })
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Tracker::Z { test, .. } => test.alpha(),
            Tracker::T { test, .. } => test.alpha(),
            Tracker::Sprt { alpha, .. } | Tracker::Frozen { alpha, .. } => *alpha,
            Tracker::Plugin { test, .. } => test.alpha(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Tracker::Z { test, .. } => test.horizon(),
            Tracker::T { test, .. } => test.horizon(),
            Tracker::Sprt { horizon, .. } | Tracker::Frozen { horizon, .. } => *horizon,
            Tracker::Plugin { test, .. } => test.horizon(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Tracker::Z { state, .. } => state.n(),
            Tracker::T { acc, .. } => acc.len(),
            Tracker::Sprt { state, .. } => state.n(),
            Tracker::Plugin { seen, .. } => seen.len(),
            Tracker::Frozen { n, .. } => *n,
        }
    }

    pub fn value(&self) -> Result<f64> {
        match self {
            Tracker::Z { test, state } => test.value(state),
            Tracker::T { test, acc } => {
                if acc.is_empty() {
                    Ok(test.alpha())
                } else {
                    test.value(&acc.state()?)
                }
            }
            Tracker::Sprt { alpha, state, .. } => Ok(sprt_value(state, *alpha)),
            Tracker::Plugin { test, seen } => Ok(test.value_after(seen)),
            Tracker::Frozen { value, .. } => Ok(*value),
        }
    }

    pub fn push(&mut self, x: f64) -> Result<()> {
        if self.n() >= self.horizon() {
            return Err(Error::usage(format!("the horizon N = {} has been reached", self.horizon())));
        }
        match self {
            Tracker::Z { test, state } => state.push(x, test.design().sigma()),
            Tracker::T { acc, .. } => acc.push(x),
            Tracker::Sprt { pair, state, .. } => state.push(pair.log_lr_increment(x)),
            Tracker::Plugin { seen, .. } => seen.push(x),
            Tracker::Frozen { n, .. } => *n += 1,
        }
        Ok(())
    }
}

pub struct TrackOptions {
    pub strict: bool,
    pub ticket_out: Option<PathBuf>,
}

pub const TRACK_COLUMNS: [&str; 7] = ["n", "observation", "value", "e_value", "ticket_level", "decision", "error"];

fn decision(value: f64, n: usize, horizon: usize) -> &'static str {
    if value >= 1.0 {
        "reject"
    } else if n == horizon {
        if value <= 0.0 {
            "retain"
        } else {
            "randomize"
        }
    } else {
        ""
    }
}

/// Emits one record per observation (plus the initial `n = 0` record).
pub fn track(
    mut tracker: Tracker,
    source: impl BufRead,
    format: Format,
    out: &mut dyn Write,
    opts: &TrackOptions,
) -> Result<()> {
    let columns = TRACK_COLUMNS.iter().map(|c| c.to_string()).collect();
    let mut w = RecordWriter::new(format, out, columns)?;
    let alpha = tracker.alpha();
    let record = |n: usize, obs: Cell, value: f64, horizon: usize| -> Vec<Cell> {
        vec![
            n.into(),
            obs,
            value.into(),
            (value / alpha).into(),
            value.into(),
            decision(value, n, horizon).into(),
            Cell::Text(String::new()),
        ]
    };
    let mut value = tracker.value()?;
    let mut values = vec![value];
    let mut observations = Vec::new();
    w.write(&record(0, Cell::Missing, value, tracker.horizon()))?;
    let mut outcome = Ok(());
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parsed = trimmed
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("not a finite decimal number: '{trimmed}'") })
            .and_then(|x| {
                tracker.push(x).map(|()| x).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
            });
        match parsed {
            Ok(x) => {
                value = tracker.value()?;
                values.push(value);
                observations.push(x);
                w.write(&record(tracker.n(), x.into(), value, tracker.horizon()))?;
            }
            Err(e) => {
                let mut row = record(tracker.n(), Cell::Missing, value, tracker.horizon());
                row[5] = Cell::Text(String::new());
                row[6] = Cell::Text(e.to_string());
                w.write(&row)?;
                if opts.strict {
                    outcome = Err(e);
                    break;
                }
            }
        }
    }
    w.finish()?;
    outcome?;
    if let Some(path) = &opts.ticket_out {
        let tracked = TestPath::new(values, observations)?;
        let ticket = issue_ticket(&tracked, tracked.len(), format!("track(alpha={alpha},N={})", tracker.horizon()))?;
        std::fs::write(path, ticket.to_string())?;
    }
    Ok(())
}
