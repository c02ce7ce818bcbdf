//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line for its
//! criterion to stderr and then asserts it. To run it on its own:
//!
//! ```text
//! cargo test -p seqtest --test acceptance -- --nocapture --test-threads 1
//! ```

use std::io::Write;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqtest::continuation::dominance;
use seqtest::continuation::StitchedZ;
use seqtest::dist::{std_normal_cdf, std_normal_quantile, QuadratureSpec, RandomStream};
use seqtest::doob::{induce_mc, GaussianNull, ZTerminal};
use seqtest::harness::np_limit::ln_alpha_for;
use seqtest::harness::presets::{self, PowerRow};
use seqtest::harness::rules::{adversarial_rules, FirstAbove, FixedTime};
use seqtest::harness::{alpha_switch_experiment, anytime_validity_sweep, estimate_power, np_limit_experiment};
use seqtest::harness::{DataModel, Outcome};
use seqtest::lr::{conditional_log_lr_expectation, gaussian_log_lr, CappedSprt, GaussianPair, LRState};
use seqtest::mlr_fixture::{conditional_tail, CounterexampleModel, Rational};
use seqtest::sequential::{SequentialTest, StoppingRule};
use seqtest::ttest::{beta_critical, conditional_tail_mc, SeqTTest, TDesign};
use seqtest::ztest::{SeqZTest, ZDesign, ZState};

// ---- pinned tolerances -------------------------------------------------------

/// Monte Carlo agreement band, in standard errors.
const K_SE: f64 = 3.0;
const START_VALUE_TOL: f64 = 1e-12;
const T_START_AVERAGE_TOL: f64 = 1e-10;
const ORACLE_DRAWS: usize = 1_000_000;

const POWER_REPS: usize = 100_000;
const POWER_SEED: u64 = 20_240_917;
const Z_POWER_TARGET: f64 = 0.912;
const Z_POWER_TOL: f64 = 0.005;
/// Φ(3 − z_{0.95}), 40-digit reference evaluation.
const Z_POWER_ANALYTIC: f64 = 0.912_314_536_750_296_4;
const Z_POWER_ANALYTIC_TOL: f64 = 1e-10;
const SPRT_TARGET: f64 = 0.79;
const SPRT_RANDOMIZED_TARGET: f64 = 0.84;
const SPRT_TOL: f64 = 0.015;
const PLUGIN_TARGET: f64 = 0.47;
const PLUGIN_TOL: f64 = 0.03;

const INDUCE_REPS: usize = 100_000;

const VALIDITY_SEEDS: u64 = 200;
const VALIDITY_PASS_RATE: f64 = 0.99;

const CONTINUATION_REPS: usize = 100_000;

/// Relative errors below this are at the resolution of the experiment: they
/// sit near a sign change of the error and need not decrease further.
const NP_RESOLUTION_FLOOR: f64 = 0.005;
/// Largest relative error allowed at N = 800. Frozen from a brute-force run over
/// these 20 prefixes (seed 8): worst errors 0.251, 0.144, 0.0811, 0.0452 at
/// N = 100, 200, 400, 800.
const NP_TOL_AT_800: f64 = 0.05;
const NP_PATHS: usize = 20;

const LOG_INVARIANCE_TOL: f64 = 1e-12;

// Written to the stderr handle directly so the line shows up even when the
// test harness captures output.
fn line(id: &str, title: &str, pass: bool, detail: &str) {
    let _ = writeln!(std::io::stderr(), "[{}] {id} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
}

// ---- 1 -----------------------------------------------------------------------

#[test]
fn ac01_starting_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_z: f64 = 0.0;
    for _ in 0..50 {
        let horizon = rng.random_range(1..=1000);
        let alpha = rng.random_range(0.001..0.5);
        let sigma = rng.random_range(0.1..10.0);
        let test = SeqZTest::new(ZDesign::new(horizon, alpha, sigma).unwrap());
        worst_z = worst_z.max((test.value(&ZState::initial()).unwrap() - alpha).abs());
    }
    let mut t_ok = true;
    let mut worst_avg: f64 = 0.0;
    let mut worst_k: f64 = 0.0;
    for (i, &big_n) in [2usize, 3, 5, 10, 20, 50].iter().enumerate() {
        let design = TDesign::new(big_n, 0.05).unwrap();
        let test = SeqTTest::new(design, QuadratureSpec::default());
        let beta = beta_critical(&design);
        let mut halves = 0.0;
        for (j, b) in [1.0, -1.0].into_iter().enumerate() {
            let v = test.value_at_beta(1, b).unwrap();
            let mc = conditional_tail_mc(b, 1, big_n, beta, ORACLE_DRAWS, RandomStream::new(101, (2 * i + j) as u64))
                .unwrap();
            let se = mc.se.max((v * (1.0 - v) / ORACLE_DRAWS as f64).sqrt());
            let k = (mc.estimate - v).abs() / se.max(f64::MIN_POSITIVE);
            worst_k = worst_k.max(if mc.estimate == v { 0.0 } else { k });
            t_ok &= mc.estimate == v || k <= K_SE;
            halves += 0.5 * v;
        }
        worst_avg = worst_avg.max((halves - 0.05).abs());
        t_ok &= test.value_after(&[]) == 0.05;
    }
    let pass = worst_z <= START_VALUE_TOL && worst_avg <= T_START_AVERAGE_TOL && t_ok;
    line(
        "AC-1",
        "starting values",
        pass,
        &format!("z max|φ0−α|={worst_z:.1e}; t n=1 MC max {worst_k:.2} SE, max|avg(φ1)−α|={worst_avg:.1e}"),
    );
    assert!(pass);
}

// ---- 2 -----------------------------------------------------------------------

#[test]
fn ac02_intro_power() {
    let rows: Vec<PowerRow> = presets::intro(POWER_REPS, POWER_SEED).unwrap();
    let est = |label: &str| rows.iter().find(|r| r.label == label).unwrap().report.estimate;
    let analytic = std_normal_cdf(3.0 - std_normal_quantile(0.95).unwrap());
    let checks = [
        ("z", (est("z") - Z_POWER_TARGET).abs() <= Z_POWER_TOL),
        ("z-analytic", (analytic - Z_POWER_ANALYTIC).abs() <= Z_POWER_ANALYTIC_TOL),
        ("sprt", (est("sprt") - SPRT_TARGET).abs() <= SPRT_TOL),
        ("sprt-randomized", (est("sprt-randomized") - SPRT_RANDOMIZED_TARGET).abs() <= SPRT_TOL),
        ("plugin", (est("plugin-sprt") - PLUGIN_TARGET).abs() <= PLUGIN_TOL),
    ];
    let pass = checks.iter().all(|c| c.1);
    line(
        "AC-2",
        "intro power",
        pass,
        &format!(
            "z={:.4} (Φ(3−z)={analytic:.12}), sprt={:.4}, randomized={:.4}, plug-in={:.4}; failing: {:?}",
            est("z"),
            est("sprt"),
            est("sprt-randomized"),
            est("plugin-sprt"),
            checks.iter().filter(|c| !c.1).map(|c| c.0).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

// ---- 3 -----------------------------------------------------------------------

#[test]
fn ac03_t_quadrature_matches_sampler() {
    let grid: [(usize, usize, f64); 25] = [
        (1, 5, -0.5),
        (2, 5, 0.3),
        (3, 5, 0.9),
        (4, 5, 0.2),
        (4, 5, 0.95),
        (1, 10, 1.0),
        (2, 10, -0.2),
        (5, 10, 0.5),
        (8, 10, 0.7),
        (9, 10, 0.4),
        (1, 20, -1.0),
        (5, 20, 0.5),
        (10, 20, 0.3),
        (15, 20, 0.6),
        (19, 20, 0.35),
        (3, 50, 0.8),
        (10, 50, 0.2),
        (25, 50, 0.3),
        (40, 50, 0.25),
        (49, 50, 0.25),
        (5, 100, 0.4),
        (20, 100, 0.15),
        (50, 100, 0.2),
        (90, 100, 0.18),
        (99, 100, 0.17),
    ];
    let mut worst: f64 = 0.0;
    let mut failures = vec![];
    let mut last_step_states = 0;
    for (i, &(n, big_n, b)) in grid.iter().enumerate() {
        let design = TDesign::new(big_n, 0.05).unwrap();
        let test = SeqTTest::new(design, QuadratureSpec::default());
        let v = test.value_at_beta(n, b).unwrap();
        let mc =
            conditional_tail_mc(b, n, big_n, beta_critical(&design), ORACLE_DRAWS, RandomStream::new(303, i as u64))
                .unwrap();
        // SE of the MC estimate if the quadrature value is the truth, or the
        // sample SE, whichever is larger
        let se = mc.se.max((v * (1.0 - v) / ORACLE_DRAWS as f64).sqrt());
        let k = if mc.estimate == v { 0.0 } else { (mc.estimate - v).abs() / se };
        worst = worst.max(k);
        if k > K_SE {
            failures.push((n, big_n, b, v, mc.estimate));
        }
        last_step_states += usize::from(n == big_n - 1);
    }
    let pass = failures.is_empty() && last_step_states >= 5;
    line(
        "AC-3",
        "t-test quadrature vs conditional sampler",
        pass,
        &format!("25 states ({last_step_states} with n=N−1), worst {worst:.2} SE; failures {failures:?}"),
    );
    assert!(pass);
}

// ---- 4 -----------------------------------------------------------------------

#[test]
fn ac04_doob_engine_matches_closed_form() {
    let null = GaussianNull::new(0.0, 1.0).unwrap();
    let model = DataModel::gaussian(0.2, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    for i in 0..20u64 {
        let (big_n, n) = if i == 0 { (100, 50) } else { (rng.random_range(10..=100), 0) };
        let n = if i == 0 { n } else { rng.random_range(0..big_n) };
        // state 0 is the worked state n = 50, Σx/σ = 15
        let prefix = if i == 0 { vec![0.3; 50] } else { model.draw(&mut RandomStream::new(404, i).rng(), n) };
        let design = ZDesign::new(big_n, 0.05, 1.0).unwrap();
        let closed = SeqZTest::new(design).value(&ZState::from_data(&prefix, 1.0)).unwrap();
        let mc = induce_mc(&ZTerminal::new(design), &null, &prefix, INDUCE_REPS, RandomStream::new(405, i)).unwrap();
        let se = mc.se.max((closed * (1.0 - closed) / INDUCE_REPS as f64).sqrt());
        let k = if mc.estimate == closed { 0.0 } else { (mc.estimate - closed).abs() / se };
        worst = worst.max(k);
        fails += usize::from(k > K_SE);
    }

    // tower property: averaging φ_{n+1} over a fresh observation gives φ_n
    let design = ZDesign::new(60, 0.05, 1.0).unwrap();
    let terminal = ZTerminal::new(design);
    let prefix = model.draw(&mut RandomStream::new(406, 0).rng(), 40);
    let outer: usize = 400;
    let inner = 4000;
    let mut next_rng = RandomStream::new(407, 0).rng();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for j in 0..outer {
        let mut p = prefix.clone();
        p.push(next_rng.sample::<f64, _>(rand_distr::StandardNormal));
        let e = induce_mc(&terminal, &null, &p, inner, RandomStream::new(408, j as u64)).unwrap().estimate;
        sum += e;
        sum_sq += e * e;
    }
    let mean = sum / outer as f64;
    let se_avg = ((sum_sq / outer as f64 - mean * mean) / (outer as f64 - 1.0)).sqrt();
    let direct = induce_mc(&terminal, &null, &prefix, outer * inner, RandomStream::new(409, 0)).unwrap();
    let combined = (se_avg * se_avg + direct.se * direct.se).sqrt();
    let tower_k = (mean - direct.estimate).abs() / combined;
    let pass = fails == 0 && tower_k <= K_SE;
    line(
        "AC-4",
        "Doob engine vs closed form",
        pass,
        &format!(
            "20 states, worst {worst:.2} SE; tower {mean:.5} vs {:.5} ({tower_k:.2} combined SE)",
            direct.estimate
        ),
    );
    assert!(pass);
}

// ---- 5 -----------------------------------------------------------------------

fn sweep_line(name: &str, test: &dyn SequentialTest, null: DataModel, reps: usize) -> bool {
    let rules = adversarial_rules(test.alpha(), test.horizon());
    let refs: Vec<&dyn StoppingRule> = rules.iter().map(|r| r.as_ref()).collect();
    let sweeps = anytime_validity_sweep(test, null, &refs, reps, 0..VALIDITY_SEEDS).unwrap();
    let worst = sweeps.iter().min_by(|a, b| a.pass_rate().total_cmp(&b.pass_rate())).unwrap();
    let pooled = sweeps.iter().map(|s| s.pooled_estimate).fold(f64::NEG_INFINITY, f64::max);
    let ok = sweeps.iter().all(|s| s.pass_rate() >= VALIDITY_PASS_RATE);
    let _ = writeln!(
        std::io::stderr(),
        "       {name}: {} rules, worst pass rate {:.3} ({}), max pooled stopped mean {pooled:.5} (α={})",
        sweeps.len(),
        worst.pass_rate(),
        worst.rule,
        test.alpha()
    );
    ok
}

#[test]
fn ac05_anytime_validity() {
    let std_null = DataModel::gaussian(0.0, 1.0).unwrap();
    let z = SeqZTest::new(ZDesign::new(100, 0.05, 1.0).unwrap());
    let t = SeqTTest::new(TDesign::new(20, 0.05).unwrap(), QuadratureSpec::default());
    let sprt = CappedSprt::new(GaussianPair::new(0.0, 0.3, 1.0).unwrap(), 0.05, 100).unwrap();
    let stitched =
        StitchedZ::new(ZDesign::new(50, 0.05, 1.0).unwrap(), FirstAbove(0.1), ZDesign::new(50, 0.05, 1.0).unwrap());
    let results = [
        sweep_line("z N=100", &z, std_null, 2000),
        sweep_line("t N=20, μ=0, σ=2", &t, DataModel::gaussian(0.0, 2.0).unwrap(), 400),
        sweep_line("t N=20, μ=−0.5, σ=2", &t, DataModel::gaussian(-0.5, 2.0).unwrap(), 400),
        sweep_line("sprt N=100", &sprt, std_null, 2000),
        sweep_line("stitched z→z", &stitched, std_null, 2000),
    ];
    let pass = results.iter().all(|r| *r);
    line(
        "AC-5",
        "anytime validity",
        pass,
        &format!("{VALIDITY_SEEDS} seeds per design, required pass rate {VALIDITY_PASS_RATE}; per design {results:?}"),
    );
    assert!(pass);
}

// ---- 6 -----------------------------------------------------------------------

#[test]
fn ac06_continuation_validity() {
    let null = DataModel::gaussian(0.0, 1.0).unwrap();
    let z100 = ZDesign::new(100, 0.05, 1.0).unwrap();
    let fixed = StitchedZ::new(z100, FixedTime(50), z100);
    let adaptive = StitchedZ::new(z100, FirstAbove(0.2), z100);
    let horizon = seqtest::harness::rules::AtHorizon;
    let r_fixed = estimate_power(&fixed, null, &horizon, Outcome::Reject, CONTINUATION_REPS, 61).unwrap();
    let r_adaptive = estimate_power(&adaptive, null, &horizon, Outcome::Reject, CONTINUATION_REPS, 62).unwrap();
    let switch = alpha_switch_experiment(z100, &FixedTime(50), z100, 0.005, null, CONTINUATION_REPS, 63).unwrap();
    let product = alpha_switch_experiment(z100, &FirstAbove(0.2), z100, 0.05, null, CONTINUATION_REPS, 64).unwrap();
    let fixture = dominance::Fixture::standard();
    let dom = dominance::brute_force(&fixture);
    let checks = [
        r_fixed.at_most(0.05, K_SE),
        r_adaptive.at_most(0.05, K_SE),
        switch.at_most(1.0, K_SE),
        product.at_most(1.0, K_SE),
        dom.dominates() && dom.strictly_somewhere() && dom.valid(fixture.alpha),
    ];
    let pass = checks.iter().all(|c| *c);
    line(
        "AC-6",
        "continuation validity",
        pass,
        &format!(
            "two-stage rejection {:.4}±{:.4} (fixed), {:.4}±{:.4} (adaptive); E[φ₂/α']={:.3}±{:.3}; E[e₁e₂]={:.3}±{:.3}; pointwise dominance exact: {}",
            r_fixed.estimate,
            r_fixed.se,
            r_adaptive.estimate,
            r_adaptive.se,
            switch.estimate,
            switch.se,
            product.estimate,
            product.se,
            checks[4]
        ),
    );
    assert!(pass);
}

// ---- 7 -----------------------------------------------------------------------

#[test]
fn ac07_counterexample_exact() {
    let m = CounterexampleModel::ln2();
    let a = conditional_tail(&m, 0, 2).unwrap();
    let b = conditional_tail(&m, 1, 2).unwrap();
    let pass = a == Rational::new(8, 9) && b == Rational::new(6, 7);
    line("AC-7", "counterexample tails", pass, &format!("P(T≥2|T₁=0)={a}, P(T≥2|T₁=1)={b}"));
    assert!(pass);
}

// ---- 8 -----------------------------------------------------------------------

#[test]
fn ac08_np_limit_convergence() {
    let pair = GaussianPair::new(0.0, 0.5, 1.0).unwrap();
    let horizons = [100, 200, 400, 800];
    let ns: Vec<usize> = (0..=10).collect();
    let rows = np_limit_experiment(&pair, &ns, &horizons, NP_PATHS, 8).unwrap();
    let alpha_100 = ln_alpha_for(&pair, 100).exp();
    let mut monotone_fail = vec![];
    let mut worst = [0.0f64; 4];
    let mut start_ok = true;
    for p in 0..NP_PATHS {
        for &n in &ns {
            let errs: Vec<f64> = horizons
                .iter()
                .map(|&h| rows.iter().find(|r| r.path == p && r.n == n && r.horizon == h).unwrap().rel_error)
                .collect();
            if n == 0 {
                start_ok &= errs.iter().all(|e| *e <= 1e-9);
                continue;
            }
            for (w, e) in worst.iter_mut().zip(&errs) {
                *w = w.max(*e);
            }
            let decreasing = errs.windows(2).all(|w| w[1] < w[0] || w[0].max(w[1]) < NP_RESOLUTION_FLOOR);
            if !decreasing {
                monotone_fail.push((p, n, errs));
            }
        }
    }
    let pass = monotone_fail.is_empty() && worst[3] < NP_TOL_AT_800 && start_ok && (alpha_100 - 3.7e-6).abs() < 0.05e-6;
    line(
        "AC-8",
        "z-test at α_N approaches the likelihood ratio",
        pass,
        &format!(
            "α_100={alpha_100:.3e}; {NP_PATHS} prefixes × n≤10: worst rel. error per N {worst:.4?}; non-monotone {monotone_fail:?}"
        ),
    );
    assert!(pass);
}

// ---- 9 -----------------------------------------------------------------------

#[test]
fn ac09_log_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let pair =
            GaussianPair::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0))
                .unwrap();
        let n = rng.random_range(0..50);
        let state = LRState::new(n, if n == 0 { 0.0 } else { rng.random_range(-20.0..20.0) }).unwrap();
        let big_n = n + rng.random_range(0..200);
        worst = worst.max((conditional_log_lr_expectation(&state, big_n, &pair) - state.log_lr()).abs());
    }

    // nested MC: E[LR_N | X^n] = LR_n under the null
    let pair = GaussianPair::new(0.0, 0.3, 1.0).unwrap();
    let null = DataModel::gaussian(0.0, 1.0).unwrap();
    let prefix = DataModel::gaussian(0.3, 1.0).unwrap().draw(&mut RandomStream::new(901, 0).rng(), 10);
    let lr_n = gaussian_log_lr(prefix.iter().sum(), 10, &pair).exp();
    let reps = 200_000;
    let mut rng = RandomStream::new(902, 0).rng();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..reps {
        let suffix = null.draw(&mut rng, 20);
        let full: f64 = prefix.iter().chain(&suffix).sum();
        let lr = gaussian_log_lr(full, 30, &pair).exp();
        sum += lr;
        sum_sq += lr * lr;
    }
    let mean = sum / reps as f64;
    let se = ((sum_sq / reps as f64 - mean * mean) / (reps as f64 - 1.0)).sqrt();
    let k = (mean - lr_n).abs() / se;
    let pass = worst <= LOG_INVARIANCE_TOL && k <= K_SE;
    line(
        "AC-9",
        "log invariance",
        pass,
        &format!("closed form max error {worst:.1e} over 20 states; MC {mean:.4} vs LR_n {lr_n:.4} ({k:.2} SE)"),
    );
    assert!(pass);
}

// ---- 10 ----------------------------------------------------------------------

fn figure(which: &str, seed: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_seqtest")).args(["figure", which, "--seed", seed]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn csv_column(bytes: &[u8], name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].parse::<f64>().unwrap()).collect()
}

#[test]
fn ac10_figure_data() {
    let f1a = figure("fig1", "17");
    let f1b = figure("fig1", "17");
    let f2a = figure("fig2", "17");
    let f2b = figure("fig2", "17");
    let identical = f1a == f1b && f2a == f2b;
    let z = csv_column(&f1a, "z_value");
    let t = csv_column(&f1a, "t_value");
    let terminal_ok = [z.last().unwrap(), t.last().unwrap()].iter().all(|v| **v == 0.0 || **v == 1.0);
    let range_ok = z.iter().chain(&t).all(|v| (0.0..=1.0).contains(v)) && z[0] == 0.05;
    let fig2_ok = ["z_ratio", "lr"].iter().all(|c| csv_column(&f2a, c).iter().all(|v| v.is_finite() && *v > 0.0));
    let pass = identical && terminal_ok && range_ok && fig2_ok;
    line(
        "AC-10",
        "figure data",
        pass,
        &format!(
            "bit-identical reruns: {identical}; fig1 terminal values z={} t={}; fig2 positive and finite: {fig2_ok}",
            z.last().unwrap(),
            t.last().unwrap()
        ),
    );
    assert!(pass);
}
