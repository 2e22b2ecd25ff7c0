//! Oracles, exactness checks and the named verification suites.
//!
//! The oracles here recompute each law from the sequential rule that defines
//! the process, without touching the closed-form code paths they check.

mod quad;
pub mod stats;
mod suites;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crp::{CrpParams, Partition};
use crate::error::{Error, Result};
use crate::polya::{polya_seq_log_pmf, LabelSequence, UrnParams};

pub use quad::{integrate, integrate_simplex2, integrate_unit};

/// Longest sequence accepted by [`oracle_polya_seq_pmf`].
pub const POLYA_ORACLE_MAX: usize = 12;
/// Largest ground set accepted by [`oracle_crp_partition_pmf`].
pub const CRP_ORACLE_MAX: usize = 10;
/// Longest sequence accepted by [`check_exchangeability_exact`].
pub const EXCHANGEABILITY_MAX: usize = 6;
/// Tolerance for exact-law agreement.
pub const EXACT_TOL: f64 = 1e-12;

/// Outcome of one check.
///
/// Every check passes when `statistic <= threshold`, except negative controls
/// (`control == true`), which test a deliberately wrong hypothesis and pass
/// when `statistic > threshold`, i.e. when the wrong hypothesis is rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub seed: u64,
    pub control: bool,
    pub details: String,
}

impl TestReport {
    pub fn check(name: impl Into<String>, statistic: f64, threshold: f64, seed: u64, details: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            passed: statistic <= threshold,
            seed,
            control: false,
            details: details.into(),
        }
    }

    pub fn negative_control(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        seed: u64,
        details: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            passed: statistic > threshold,
            seed,
            control: true,
            details: details.into(),
        }
    }
}

/// Suite identifiers accepted by [`run_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    PolyaExact,
    CrpExact,
    Limits,
    Dirichlet,
    Gem,
    Correlation,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::PolyaExact,
        Suite::CrpExact,
        Suite::Limits,
        Suite::Dirichlet,
        Suite::Gem,
        Suite::Correlation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::PolyaExact => "polya-exact",
            Suite::CrpExact => "crp-exact",
            Suite::Limits => "limits",
            Suite::Dirichlet => "dirichlet",
            Suite::Gem => "gem",
            Suite::Correlation => "correlation",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// Runs a named suite with the given master seed.
///
/// Each check draws from its own stream derived from `(seed, check index)`,
/// so reports are reproducible bit for bit.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<TestReport>> {
    let suite: Suite = name.parse()?;
    suites::run(suite, seed)
}

/// Sequence probability as the product of the urn's conditional draws.
pub fn oracle_polya_seq_pmf(params: &UrnParams, seq: &LabelSequence) -> Result<f64> {
    if seq.len() > POLYA_ORACLE_MAX {
        return Err(Error::OutOfRange(format!(
            "oracle handles sequences up to length {POLYA_ORACLE_MAX}"
        )));
    }
    let alphas = params.alphas();
    let total: f64 = alphas.iter().sum();
    let mut seen = vec![0.0; alphas.len()];
    let mut p = 1.0;
    for (t, &label) in seq.labels().iter().enumerate() {
        if label >= alphas.len() {
            return Err(Error::OutOfRange(format!("label {} outside 1..={}", label + 1, alphas.len())));
        }
        p *= (alphas[label] + seen[label]) / (total + t as f64);
        seen[label] += 1.0;
    }
    Ok(p)
}

/// Partition probability as the product of seating probabilities along the
/// unique history that builds `pi` when customers arrive in order.
pub fn oracle_crp_partition_pmf(params: &CrpParams, pi: &Partition) -> Result<f64> {
    if pi.n() > CRP_ORACLE_MAX {
        return Err(Error::OutOfRange(format!(
            "oracle handles partitions of at most {CRP_ORACLE_MAX} elements"
        )));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let mut occupancy: Vec<f64> = Vec::new();
    let mut p = 1.0;
    for (customer, table) in pi.seating().into_iter().enumerate() {
        let seated = customer as f64;
        if table == occupancy.len() {
            if customer > 0 {
                p *= (occupancy.len() as f64 * alpha + theta) / (seated + theta);
            }
            occupancy.push(1.0);
        } else {
            p *= (occupancy[table] - alpha) / (seated + theta);
            occupancy[table] += 1.0;
        }
    }
    Ok(p)
}

/// All `k^n` label sequences of length `n`, 0-based, in lexicographic order.
pub fn all_sequences(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |l| {
                    let mut s = prefix.clone();
                    s.push(l);
                    s
                })
            })
            .collect();
    }
    out
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(current.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, current, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            current.swap(j, k - 1);
        }
    }
    let mut out = Vec::new();
    heap(n, &mut (0..n).collect(), &mut out);
    out
}

/// Largest `|log p(sigma(s)) - log p(s)|` over every length-`n` sequence on
/// `k` labels and every permutation `sigma` of positions.
pub fn exchangeability_discrepancy(k: usize, n: usize, log_pmf: impl Fn(&[usize]) -> f64) -> f64 {
    let perms = permutations(n);
    let mut worst = 0.0f64;
    let mut permuted = vec![0; n];
    for seq in all_sequences(k, n) {
        let base = log_pmf(&seq);
        for perm in &perms {
            for (dst, &src) in permuted.iter_mut().zip(perm) {
                *dst = seq[src];
            }
            worst = worst.max((log_pmf(&permuted) - base).abs());
        }
    }
    worst
}

/// Checks that the closed-form sequence law is invariant under every
/// permutation of positions, for every sequence of length `n <= 6`.
pub fn check_exchangeability_exact(params: &UrnParams, n: usize) -> Result<TestReport> {
    if n > EXCHANGEABILITY_MAX {
        return Err(Error::OutOfRange(format!(
            "exchangeability check handles n <= {EXCHANGEABILITY_MAX}"
        )));
    }
    let worst = exchangeability_discrepancy(params.k(), n, |s| {
        polya_seq_log_pmf(params, &LabelSequence::new(s.to_vec()))
            .map(|v| v.ln())
            .unwrap_or(f64::NAN)
    });
    Ok(TestReport::check(
        "polya/exchangeability",
        worst,
        EXACT_TOL,
        0,
        format!("alphas={:?} n={n}: max log discrepancy over all permutations", params.alphas()),
    ))
}
