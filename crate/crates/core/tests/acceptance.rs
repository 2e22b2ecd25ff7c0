//! Acceptance run: one line per criterion, nonzero exit if any is red.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use exchangeable::crp::enumerate_partitions;
use exchangeable::verify::{run_suite, Suite, TestReport};

const SEED: u64 = 42;

// Tolerances, pinned here independently of the library constants.
const EXACT: f64 = 1e-12;
const MASS: f64 = 1e-10;
const LIMIT_REL: f64 = 1e-6;
const CASE_ONE: f64 = 1e-10;
const QUAD: f64 = 1e-8;
const SE_BOUND: f64 = 3.0;
const CORRELATION: f64 = 0.02;
const BLOCK_COUNT: f64 = 1e-10;
// sqrt(-ln(1e-3 / 2) / 2)
const KS_COEF: f64 = 1.9495;

struct Run {
    reports: Vec<TestReport>,
    elapsed: Duration,
}

struct Criterion {
    ok: bool,
    notes: Vec<String>,
}

impl Criterion {
    fn new() -> Self {
        Self { ok: true, notes: Vec::new() }
    }

    fn require(&mut self, cond: bool, note: impl Into<String>) {
        if !cond {
            self.ok = false;
            self.notes.push(note.into());
        }
    }

    /// Every report with this name passed with exactly the pinned threshold.
    fn reports(&mut self, run: &Run, name: &str, threshold: f64) -> Vec<TestReport> {
        let found: Vec<TestReport> = run.reports.iter().filter(|r| r.name == name).cloned().collect();
        self.require(!found.is_empty(), format!("{name}: missing"));
        for r in &found {
            self.require(r.threshold == threshold, format!("{name}: threshold {} != {threshold}", r.threshold));
            self.require(r.passed, format!("{name}: {} > {} ({})", r.statistic, r.threshold, r.details));
        }
        found
    }

    /// KS-style reports whose threshold must be `coef * scale` for the pinned coefficient.
    fn ks_reports(&mut self, run: &Run, name: &str, scale: f64) {
        let found: Vec<TestReport> = run.reports.iter().filter(|r| r.name == name).cloned().collect();
        self.require(!found.is_empty(), format!("{name}: missing"));
        for r in &found {
            self.require(
                (r.threshold - KS_COEF * scale).abs() < 1e-4 * scale,
                format!("{name}: threshold {} is not {KS_COEF} * {scale}", r.threshold),
            );
            self.require(r.passed, format!("{name}: {} > {} ({})", r.statistic, r.threshold, r.details));
        }
    }

    fn within(&mut self, run: &Run, limit: Duration) {
        self.require(run.elapsed < limit, format!("runtime {:.1?} over {limit:?}", run.elapsed));
    }
}

fn run(suite: Suite) -> Run {
    let start = Instant::now();
    let reports = run_suite(suite.name(), SEED).unwrap_or_else(|e| panic!("suite {suite} errored: {e}"));
    Run {
        reports,
        elapsed: start.elapsed(),
    }
}

fn main() -> ExitCode {
    let runs: HashMap<Suite, Run> = Suite::ALL.into_iter().map(|s| (s, run(s))).collect();
    let mut lines: Vec<(usize, &str, Criterion)> = Vec::new();

    let polya = &runs[&Suite::PolyaExact];
    let mut c = Criterion::new();
    c.reports(polya, "polya/oracle-equivalence", EXACT);
    c.reports(polya, "polya/normalization", MASS);
    c.reports(polya, "polya/exchangeability", EXACT);
    c.within(polya, Duration::from_secs(10));
    lines.push((1, "Polya exact laws", c));

    let crp = &runs[&Suite::CrpExact];
    let mut c = Criterion::new();
    let bell8 = enumerate_partitions(8).map(|p| p.len()).unwrap_or(0);
    c.require(bell8 == 4140, format!("enumerated {bell8} partitions of [8]"));
    c.reports(crp, "crp/oracle-equivalence", EXACT);
    c.reports(crp, "crp/normalization", MASS);
    c.reports(crp, "crp/finite-blocks-zero", 0.0);
    c.within(crp, Duration::from_secs(60));
    lines.push((2, "CRP exact laws", c));

    let limits = &runs[&Suite::Limits];
    let mut c = Criterion::new();
    c.reports(limits, "limits/alpha-to-zero", LIMIT_REL);
    c.reports(limits, "limits/theta-to-zero", LIMIT_REL);
    lines.push((3, "small-parameter limits", c));

    let mut c = Criterion::new();
    c.reports(crp, "crp/polya-equivalence", CASE_ONE);
    lines.push((4, "finite-blocks CRP equals urn partition law", c));

    let dirichlet = &runs[&Suite::Dirichlet];
    let mut c = Criterion::new();
    c.ks_reports(dirichlet, "dirichlet/polya-limit", 1.0 / 1e4f64.sqrt());
    c.within(dirichlet, Duration::from_secs(120));
    lines.push((5, "urn proportions converge to Beta", c));

    let mut c = Criterion::new();
    c.ks_reports(dirichlet, "dirichlet/constructions", (2.0 / 1e4f64).sqrt());
    let count = dirichlet.reports.iter().filter(|r| r.name == "dirichlet/constructions").count();
    c.require(count == 5, format!("{count} parameter vectors, expected 5"));
    lines.push((6, "gamma and stick constructions agree", c));

    let mut c = Criterion::new();
    c.ks_reports(dirichlet, "dirichlet/aggregation", 1.0 / 1e5f64.sqrt());
    c.ks_reports(dirichlet, "dirichlet/neutrality-marginal", 1.0 / 1e5f64.sqrt());
    c.reports(dirichlet, "dirichlet/neutrality-correlation", CORRELATION);
    lines.push((7, "aggregation and neutrality", c));

    let gem = &runs[&Suite::Gem];
    let mut c = Criterion::new();
    for k in 1..=5 {
        c.reports(gem, &format!("gem/mean-v{k}"), SE_BOUND);
    }
    c.ks_reports(gem, "gem/crp-first-block", 1.0 / 1e4f64.sqrt());
    lines.push((8, "stick-breaking weights", c));

    let corr = &runs[&Suite::Correlation];
    let mut c = Criterion::new();
    c.reports(corr, "correlation/quadrature-mass", QUAD);
    c.reports(corr, "correlation/quadrature-second-moment", QUAD);
    let mc = c.reports(corr, "correlation/monte-carlo", SE_BOUND);
    c.require(mc.len() == 5, format!("{} Monte Carlo checks, expected 5", mc.len()));
    c.reports(corr, "correlation/block-count", BLOCK_COUNT);
    c.within(corr, Duration::from_secs(300));
    lines.push((9, "correlation functions", c));

    let mut c = Criterion::new();
    for suite in Suite::ALL {
        let again = run(suite);
        let first = &runs[&suite].reports;
        let same = first.len() == again.reports.len()
            && first
                .iter()
                .zip(&again.reports)
                .all(|(a, b)| a.name == b.name && a.statistic.to_bits() == b.statistic.to_bits());
        c.require(same, format!("{suite}: statistics differ on rerun"));
        let controls: Vec<&TestReport> = first.iter().filter(|r| r.control).collect();
        c.require(!controls.is_empty(), format!("{suite}: no negative control"));
        for r in controls {
            c.require(r.passed, format!("{}: wrong hypothesis not rejected ({})", r.name, r.statistic));
        }
    }
    lines.push((10, "determinism and negative controls", c));

    for suite in Suite::ALL {
        let r = &runs[&suite];
        let failed: Vec<&str> = r.reports.iter().filter(|t| !t.passed).map(|t| t.name.as_str()).collect();
        println!(
            "suite {suite}: {} checks, {:.2?}, failed: {failed:?}",
            r.reports.len(),
            r.elapsed
        );
    }
    let mut all = true;
    for (id, title, c) in &lines {
        all &= c.ok;
        let verdict = if c.ok { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {title}");
        for note in &c.notes {
            println!("             {note}");
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
