//! Optional continuation: test outcomes reused as conditional significance levels.
//!
//! A realised value `φ_σ` of an anytime-valid test becomes the level of the
//! next test ([`ContinuationTicket`]). Stage-two designs are only built from a
//! ticket, through [`continued_design`] or [`switch_alpha`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sequential::{stopping_index, SequentialTest, StoppingRule};
use crate::ttest::TDesign;
use crate::ztest::{SeqZTest, ZDesign};

/// Test values together with the observations that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPath {
    values: Vec<f64>,
    observations: Vec<f64>,
}

impl TestPath {
    /// `values` holds `φ_0..=φ_n` for `observations = x_1..=x_n`.
    pub fn new(values: Vec<f64>, observations: Vec<f64>) -> Result<Self> {
        if values.len() != observations.len() + 1 {
            return Err(Error::usage(format!(
                "a path over {} observations needs {} values, got {}",
                observations.len(),
                observations.len() + 1,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("test value {v} outside [0, 1]")));
        }
        Ok(TestPath { values, observations })
    }

    pub fn of(test: &dyn SequentialTest, observations: &[f64]) -> Self {
        let values = test.path(observations);
        let used = values.len() - 1;
        TestPath { values, observations: observations[..used].to_vec() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// A realised test value carried forward as the next conditional level.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationTicket {
    level: f64,
    provenance: String,
}

impl ContinuationTicket {
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

const TICKET_HEADER: &str = "seqtest-ticket v1";

impl fmt::Display for ContinuationTicket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{TICKET_HEADER}")?;
        writeln!(f, "level={:.16e}", self.level)?;
        writeln!(f, "provenance={}", self.provenance.replace('\n', " "))
    }
}

impl FromStr for ContinuationTicket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == TICKET_HEADER => {}
            Some((i, _)) => return Err(Error::Parse { line: i + 1, message: format!("expected '{TICKET_HEADER}'") }),
            None => return Err(Error::Parse { line: 1, message: "empty ticket".into() }),
        }
        let mut level = None;
        let mut provenance = String::new();
        for (i, line) in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key=value, got '{line}'") })?;
            match key.trim() {
                "level" => {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse { line: i + 1, message: format!("bad level '{}'", value.trim()) })?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Parse { line: i + 1, message: format!("level {v} outside [0, 1]") });
                    }
                    level = Some(v);
                }
                "provenance" => provenance = value.to_string(),
                other => return Err(Error::Parse { line: i + 1, message: format!("unknown key '{other}'") }),
            }
        }
        let level = level.ok_or_else(|| Error::Parse { line: 2, message: "missing level".into() })?;
        Ok(ContinuationTicket { level, provenance })
    }
}

/// Ticket for stopping `path` at `stop_index`.
///
/// The decision to stop there must depend on the path history only.
pub fn issue_ticket(path: &TestPath, stop_index: usize, provenance: impl Into<String>) -> Result<ContinuationTicket> {
    let level = *path.values.get(stop_index).ok_or_else(|| {
        Error::usage(format!("stop index {stop_index} outside a path of length {}", path.values.len()))
    })?;
    Ok(ContinuationTicket { level, provenance: format!("{}@{stop_index}", provenance.into()) })
}

/// Designs that can be re-run at another level.
pub trait LevelDesign: Sized {
    fn at_level(&self, alpha: f64) -> Result<Self>;
}

impl LevelDesign for ZDesign {
    fn at_level(&self, alpha: f64) -> Result<Self> {
        ZDesign::at_level(self, alpha)
    }
}

impl LevelDesign for TDesign {
    fn at_level(&self, alpha: f64) -> Result<Self> {
        TDesign::at_level(self, alpha)
    }
}

/// A stage-two design at a ticket's level.
///
/// Levels 0 and 1 give a frozen test whose value never moves: a test at
/// conditional level 0 can never reject, one at level 1 has already rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Continued<D> {
    Active(D),
    Frozen(f64),
}

impl<D> Continued<D> {
    pub fn is_frozen(&self) -> bool {
        matches!(self, Continued::Frozen(_))
    }
}

pub fn continued_design<D: LevelDesign>(ticket: &ContinuationTicket, base: &D) -> Result<Continued<D>> {
    if ticket.level <= 0.0 {
        Ok(Continued::Frozen(0.0))
    } else if ticket.level >= 1.0 {
        Ok(Continued::Frozen(1.0))
    } else {
        Ok(Continued::Active(base.at_level(ticket.level)?))
    }
}

/// Rescale a ticket from level `alpha_old` to a new target level `alpha_new`.
///
/// The stage-two test then satisfies `E[φ₂ / α'] ≤ 1`.
pub fn switch_alpha(ticket: &ContinuationTicket, alpha_old: f64, alpha_new: f64) -> Result<ContinuationTicket> {
    if !(alpha_old > 0.0 && alpha_old < 1.0) {
        return Err(Error::domain(format!("original level must be in (0, 1), got {alpha_old}")));
    }
    if !(alpha_new > 0.0) {
        return Err(Error::domain(format!("new level must be positive, got {alpha_new}")));
    }
    Ok(ContinuationTicket {
        level: (ticket.level * (alpha_new / alpha_old)).min(1.0),
        provenance: format!("{}|switch({alpha_old}->{alpha_new})", ticket.provenance),
    })
}

/// Combine per-member continuations of a composite null: the minimum of the
/// second-stage values, each produced at its own member's ticket level.
pub fn pointwise_continue(tickets: &[(String, ContinuationTicket)], second_values: &[(String, f64)]) -> Result<f64> {
    if tickets.is_empty() {
        return Err(Error::usage("pointwise continuation needs a nonempty family"));
    }
    if tickets.len() != second_values.len() {
        return Err(Error::usage(format!("{} tickets but {} second-stage values", tickets.len(), second_values.len())));
    }
    let mut out = f64::INFINITY;
    for (label, _) in tickets {
        let value = second_values
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::usage(format!("no second-stage value for member '{label}'")))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(format!("test value {value} outside [0, 1]")));
        }
        out = out.min(value);
    }
    Ok(out)
}

/// Sequentially valid e-values multiply.
pub fn multiply_evalues(e1: f64, e2: f64) -> f64 {
    e1 * e2
}

/// A first path stopped at `σ` followed by a second test started at `φ_σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedPath {
    first: TestPath,
    stop_index: usize,
    second: TestPath,
}

impl StitchedPath {
    pub fn new(first: TestPath, stop_index: usize, second: TestPath) -> Result<Self> {
        let level = *first
            .values
            .get(stop_index)
            .ok_or_else(|| Error::usage(format!("stop index {stop_index} outside the first path")))?;
        if (second.values[0] - level).abs() > 1e-12 {
            return Err(Error::usage(format!(
                "second segment starts at {} but the ticket level is {level}",
                second.values[0]
            )));
        }
        Ok(StitchedPath { first, stop_index, second })
    }

    pub fn stop_index(&self) -> usize {
        self.stop_index
    }

    /// `φ_0, …, φ_σ, φ*_{σ+1}, …`
    pub fn values(&self) -> Vec<f64> {
        let mut out = self.first.values[..=self.stop_index].to_vec();
        out.extend_from_slice(&self.second.values[1..]);
        out
    }

    pub fn observations(&self) -> Vec<f64> {
        let mut out = self.first.observations[..self.stop_index].to_vec();
        out.extend_from_slice(&self.second.observations);
        out
    }
}

/// Two-stage z-test: stage one runs until `rule` stops it (or its horizon),
/// stage two is a fresh z-test on the following observations at the realised level.
pub struct StitchedZ<R> {
    first: SeqZTest,
    rule: R,
    second: ZDesign,
}

impl<R: StoppingRule> StitchedZ<R> {
    pub fn new(first: ZDesign, rule: R, second: ZDesign) -> Self {
        StitchedZ { first: SeqZTest::new(first), rule, second }
    }

    pub fn stitch(&self, xs: &[f64]) -> StitchedPath {
        let first = TestPath::of(&self.first, xs);
        let sigma = stopping_index(&self.rule, first.values(), first.observations());
        let ticket = issue_ticket(&first, sigma, self.first.name()).expect("index from the path");
        let rest = &xs[sigma..xs.len().min(sigma + self.second.horizon())];
        let second = match continued_design(&ticket, &self.second).expect("level in [0, 1]") {
            Continued::Active(design) => TestPath::of(&SeqZTest::new(design), rest),
            Continued::Frozen(v) => TestPath { values: vec![v; rest.len() + 1], observations: rest.to_vec() },
        };
        StitchedPath::new(first, sigma, second).expect("second stage starts at the ticket")
    }
}

impl<R: StoppingRule> SequentialTest for StitchedZ<R> {
    fn name(&self) -> String {
        format!("stitched[{} until {}; then z(N={})]", self.first.name(), self.rule.name(), self.second.horizon())
    }

    fn alpha(&self) -> f64 {
        self.first.design().alpha()
    }

    fn horizon(&self) -> usize {
        self.first.design().horizon() + self.second.horizon()
    }

    fn path(&self, xs: &[f64]) -> Vec<f64> {
        self.stitch(xs).values()
    }
}

/// Exact two-stage fixture comparing pointwise continuation with continuing
/// from the single combined ticket `min_h φ₁ʰ`.
///
/// Both stages are randomised Neyman–Pearson tests on finite sample spaces, so
/// every quantity is a rational number.
pub mod dominance {
    use num_rational::Ratio;

    pub type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    /// Randomised most powerful test of `null` against `alt` at `level`.
    pub fn neyman_pearson(null: &[Q], alt: &[Q], level: Q) -> Vec<Q> {
        let mut order: Vec<usize> = (0..null.len()).collect();
        // descending likelihood ratio alt/null, compared by cross-multiplication
        order.sort_by(|&i, &j| (alt[j] * null[i]).cmp(&(alt[i] * null[j])));
        let mut test = vec![Q::from_integer(0); null.len()];
        let mut budget = level;
        for i in order {
            if budget <= Q::from_integer(0) {
                break;
            }
            let take = if null[i] == Q::from_integer(0) {
                Q::from_integer(1)
            } else {
                (budget / null[i]).min(Q::from_integer(1))
            };
            test[i] = take;
            budget -= take * null[i];
        }
        test
    }

    fn expect(p: &[Q], f: &[Q]) -> Q {
        p.iter().zip(f).map(|(a, b)| a * b).sum()
    }

    /// A null member: its laws for `X₁` and `X₂` (independent).
    #[derive(Debug, Clone)]
    pub struct Member {
        pub label: String,
        pub stage1: Vec<Q>,
        pub stage2: Vec<Q>,
    }

    #[derive(Debug, Clone)]
    pub struct Fixture {
        pub alpha: Q,
        pub members: Vec<Member>,
        pub alt1: Vec<Q>,
        pub alt2: Vec<Q>,
    }

    impl Fixture {
        /// `X₁ ∈ {0,1,2}`, `X₂ ∈ {0,1}`, members with different stage-one tickets.
        pub fn standard() -> Self {
            Fixture {
                alpha: q(1, 10),
                members: vec![
                    Member {
                        label: "a".into(),
                        stage1: vec![q(1, 2), q(1, 3), q(1, 6)],
                        stage2: vec![q(1, 2), q(1, 2)],
                    },
                    Member {
                        label: "b".into(),
                        stage1: vec![q(1, 3), q(1, 3), q(1, 3)],
                        stage2: vec![q(2, 3), q(1, 3)],
                    },
                ],
                alt1: vec![q(1, 6), q(1, 3), q(1, 2)],
                alt2: vec![q(1, 5), q(4, 5)],
            }
        }
    }

    /// Final test values indexed `[x₁][x₂]` under both strategies.
    #[derive(Debug, Clone)]
    pub struct DominanceReport {
        pub tickets: Vec<Vec<Q>>,
        pub pointwise: Vec<Vec<Q>>,
        pub combined: Vec<Vec<Q>>,
        /// `E_h[final value]` per member, pointwise strategy.
        pub sizes_pointwise: Vec<Q>,
        pub sizes_combined: Vec<Q>,
    }

    impl DominanceReport {
        /// Pointwise continuation is never below the combined-ticket value.
        pub fn dominates(&self) -> bool {
            self.pointwise.iter().flatten().zip(self.combined.iter().flatten()).all(|(p, c)| p >= c)
        }

        pub fn strictly_somewhere(&self) -> bool {
            self.pointwise.iter().flatten().zip(self.combined.iter().flatten()).any(|(p, c)| p > c)
        }

        pub fn valid(&self, alpha: Q) -> bool {
            self.sizes_pointwise.iter().chain(&self.sizes_combined).all(|s| *s <= alpha)
        }
    }

    pub fn brute_force(f: &Fixture) -> DominanceReport {
        let stage1: Vec<Vec<Q>> = f.members.iter().map(|m| neyman_pearson(&m.stage1, &f.alt1, f.alpha)).collect();
        let n1 = f.alt1.len();
        let mut tickets = vec![];
        let mut pointwise = vec![];
        let mut combined = vec![];
        for x1 in 0..n1 {
            let levels: Vec<Q> = stage1.iter().map(|t| t[x1]).collect();
            let joint = *levels.iter().min().expect("nonempty family");
            let own: Vec<Vec<Q>> =
                f.members.iter().zip(&levels).map(|(m, l)| neyman_pearson(&m.stage2, &f.alt2, *l)).collect();
            let shared: Vec<Vec<Q>> = f.members.iter().map(|m| neyman_pearson(&m.stage2, &f.alt2, joint)).collect();
            let min_over = |tests: &[Vec<Q>]| -> Vec<Q> {
                (0..f.alt2.len()).map(|x2| tests.iter().map(|t| t[x2]).min().expect("nonempty")).collect()
            };
            pointwise.push(min_over(&own));
            combined.push(min_over(&shared));
            tickets.push(levels);
        }
        let size = |values: &[Vec<Q>], m: &Member| -> Q {
            (0..n1).map(|x1| m.stage1[x1] * expect(&m.stage2, &values[x1])).sum()
        };
        DominanceReport {
            sizes_pointwise: f.members.iter().map(|m| size(&pointwise, m)).collect(),
            sizes_combined: f.members.iter().map(|m| size(&combined, m)).collect(),
            tickets,
            pointwise,
            combined,
        }
    }
}
