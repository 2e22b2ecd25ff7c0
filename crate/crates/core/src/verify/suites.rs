//! The named suites. Each check gets its own stream `derive(master, index)`.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use super::quad::{integrate, integrate_simplex2, integrate_unit};
use super::stats::{
    beta_cdf, chi_square_critical, chi_square_stat, ks_critical, ks_stat, ks_two_sample, ks_two_sample_critical,
    mean_and_se, merge_sparse_bins, pearson, SIGNIFICANCE,
};
use super::{
    all_sequences, check_exchangeability_exact, exchangeability_discrepancy, oracle_crp_partition_pmf,
    oracle_polya_seq_pmf, permutations, Suite, TestReport, EXACT_TOL,
};
use crate::crp::{
    crp_next_probs, crp_sample, crp_table_sizes, crp_validate, enumerate_partitions, ewens_log_pmf,
    ewens_pitman_log_pmf, theta_zero_log_pmf, CrpCase, CrpParams, Partition, SeatingState,
};
use crate::error::Result;
use crate::numkern::{gamma_ratio, gamma_ratio_asymptotic, SignedLogValue};
use crate::polya::{
    aggregate_params, aggregate_simplex, dirichlet_log_density, normalize_subvector, polya_count_log_pmf,
    polya_next_probs, polya_sample, polya_sample_counts, polya_seq_log_pmf, CountVector, LabelSequence, UrnParams,
};
use crate::rngdist::{derive_seed, replicate, sample_beta, sample_dirichlet_gamma, sample_dirichlet_stick, sample_gamma, RandomSource};
use crate::weights::{
    block_count_prob, correlation_mc_estimate, gem_from_sticks, gem_sample, ln_correlation_constant, rho_k, seating_weights, TestFunction,
};

const MASS_TOL: f64 = 1e-10;
const LIMIT_REL_TOL: f64 = 1e-6;
const CASE_ONE_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-8;
const SE_BOUND: f64 = 3.0;
const CORRELATION_BOUND: f64 = 0.02;
const SYMMETRY_TOL: f64 = 1e-12;

pub(super) fn run(suite: Suite, seed: u64) -> Result<Vec<TestReport>> {
    let streams = Streams {
        master: derive_seed(seed, suite as u64),
        seed,
    };
    match suite {
        Suite::PolyaExact => polya_exact(&streams),
        Suite::CrpExact => crp_exact(&streams),
        Suite::Limits => limits(&streams),
        Suite::Dirichlet => dirichlet(&streams),
        Suite::Gem => gem(&streams),
        Suite::Correlation => correlation(&streams),
    }
}

struct Streams {
    master: u64,
    seed: u64,
}

impl Streams {
    fn rng(&self, check: u64) -> RandomSource {
        RandomSource::derive(self.master, check)
    }

    /// `reps` independent draws of `f`, replica `r` on stream `(check, r)`.
    fn replicate<T: Send>(&self, check: u64, reps: usize, f: impl Fn(&mut RandomSource) -> T + Sync) -> Vec<T> {
        replicate(derive_seed(self.master, check), reps, f)
    }

    fn check(&self, name: &str, statistic: f64, threshold: f64, details: impl Into<String>) -> TestReport {
        TestReport::check(name, statistic, threshold, self.seed, details)
    }

    fn control(&self, name: &str, statistic: f64, threshold: f64, details: impl Into<String>) -> TestReport {
        TestReport::negative_control(name, statistic, threshold, self.seed, details)
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

/// `|a / b - 1|` for positive log-values.
fn rel_diff(a: SignedLogValue, b: SignedLogValue) -> f64 {
    if a.is_zero() && b.is_zero() {
        return 0.0;
    }
    (a.ln() - b.ln()).exp_m1().abs()
}

/// Chi-square goodness of fit after pooling sparse bins; `(statistic, critical, bins)`.
fn chi_square_fit(observed: &[u64], probs: &[f64], n: u64) -> Result<(f64, f64, usize)> {
    let (obs, p) = merge_sparse_bins(observed, probs, n);
    let stat = chi_square_stat(&obs, &p, n)?;
    Ok((stat, chi_square_critical(p.len() - 1, SIGNIFICANCE), p.len()))
}

fn z_score(mean: f64, se: f64, target: f64) -> f64 {
    (mean - target).abs() / se
}

// ---------------------------------------------------------------- polya-exact

const POLYA_SETS: usize = 20;
const POLYA_MAX_N: usize = 6;
const SAMPLER_DRAWS: usize = 100_000;

fn polya_param_sets(streams: &Streams) -> Vec<UrnParams> {
    let mut rng = streams.rng(0);
    (0..POLYA_SETS)
        .map(|i| {
            let k = 1 + i % 3;
            let alphas = (0..k).map(|_| log_uniform(&mut rng, 0.05, 10.0)).collect();
            UrnParams::new(alphas).expect("positive draws")
        })
        .collect()
}

fn seq_prob(params: &UrnParams, labels: &[usize]) -> f64 {
    polya_seq_log_pmf(params, &LabelSequence::new(labels.to_vec()))
        .expect("labels in range")
        .to_real()
}

/// Every count vector of `k` entries summing to `n`.
fn compositions(k: usize, n: u64) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(k - 1, n - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn polya_exact(streams: &Streams) -> Result<Vec<TestReport>> {
    let sets = polya_param_sets(streams);
    let mut reports = Vec::new();

    let (mut oracle_gap, mut mass_gap) = (0.0f64, 0.0f64);
    for params in &sets {
        for n in 0..=POLYA_MAX_N {
            let mut mass = 0.0;
            for s in all_sequences(params.k(), n) {
                let closed = seq_prob(params, &s);
                let oracle = oracle_polya_seq_pmf(params, &LabelSequence::new(s))?;
                oracle_gap = oracle_gap.max((closed - oracle).abs());
                mass += closed;
            }
            mass_gap = mass_gap.max((mass - 1.0).abs());
        }
    }
    let span = format!("{POLYA_SETS} parameter sets, k <= 3, every sequence with n <= {POLYA_MAX_N}");
    reports.push(streams.check("polya/oracle-equivalence", oracle_gap, EXACT_TOL, span.clone()));
    reports.push(streams.check("polya/normalization", mass_gap, MASS_TOL, span.clone()));

    let exch = sets
        .par_iter()
        .map(|p| check_exchangeability_exact(p, POLYA_MAX_N).map(|r| r.statistic))
        .collect::<Result<Vec<_>>>()?;
    reports.push(streams.check(
        "polya/exchangeability",
        max_of(exch),
        EXACT_TOL,
        format!("max log discrepancy over all permutations; {span}"),
    ));

    // p(s, y) = p(s) P(y | s) for every prefix s and next label y.
    let mut seq_gap = 0.0f64;
    for params in &sets {
        for n in 0..POLYA_MAX_N {
            for s in all_sequences(params.k(), n) {
                let counts = CountVector::from_sequence(&LabelSequence::new(s.clone()), params.k())?;
                let next = polya_next_probs(params, &counts)?;
                let base = seq_prob(params, &s);
                for y in 0..params.k() {
                    let mut ext = s.clone();
                    ext.push(y);
                    seq_gap = seq_gap.max((seq_prob(params, &ext) - base * next[y]).abs());
                }
            }
        }
    }
    reports.push(streams.check("polya/sequential-consistency", seq_gap, EXACT_TOL, span.clone()));

    // Count law against the oracle summed over all sequences with those counts.
    let (mut count_gap, mut count_mass) = (0.0f64, 0.0f64);
    for params in &sets {
        for n in 0..=POLYA_MAX_N {
            let mut by_counts: HashMap<Vec<u64>, f64> = HashMap::new();
            for s in all_sequences(params.k(), n) {
                let counts = CountVector::from_sequence(&LabelSequence::new(s.clone()), params.k())?;
                *by_counts.entry(counts.counts().to_vec()).or_default() +=
                    oracle_polya_seq_pmf(params, &LabelSequence::new(s))?;
            }
            let mut mass = 0.0;
            for c in compositions(params.k(), n as u64) {
                let p = polya_count_log_pmf(params, &CountVector::new(c.clone()))?.to_real();
                count_gap = count_gap.max((p - by_counts[&c]).abs());
                mass += p;
            }
            count_mass = count_mass.max((mass - 1.0).abs());
        }
    }
    reports.push(streams.check("polya/count-law", count_gap, EXACT_TOL, span.clone()));
    reports.push(streams.check("polya/count-normalization", count_mass, MASS_TOL, span));

    // Sampler against the exact sequence law.
    let urn = UrnParams::new(vec![0.7, 1.3, 2.0])?;
    let len = 4;
    let seqs = all_sequences(urn.k(), len);
    let index = |labels: &[usize]| labels.iter().fold(0, |acc, &l| acc * urn.k() + l);
    let draws = streams.replicate(1, SAMPLER_DRAWS, |rng| index(polya_sample(&urn, len, rng).labels()));
    let mut observed = vec![0u64; seqs.len()];
    for d in draws {
        observed[d] += 1;
    }
    let exact: Vec<f64> = seqs.iter().map(|s| oracle_polya_seq_pmf(&urn, &LabelSequence::new(s.clone()))).collect::<Result<_>>()?;
    let (stat, crit, bins) = chi_square_fit(&observed, &exact, SAMPLER_DRAWS as u64)?;
    reports.push(streams.check(
        "polya/sampler-sequences",
        stat,
        crit,
        format!("alphas=(0.7,1.3,2.0) n={len}, {SAMPLER_DRAWS} draws, {bins} bins"),
    ));

    let wrong = UrnParams::new(vec![1.0, 1.0, 1.0])?;
    let wrong_probs: Vec<f64> = seqs.iter().map(|s| seq_prob(&wrong, s)).collect();
    let (stat, crit, bins) = chi_square_fit(&observed, &wrong_probs, SAMPLER_DRAWS as u64)?;
    reports.push(streams.control(
        "polya/control-wrong-params",
        stat,
        crit,
        format!("same draws scored against alphas=(1,1,1), {bins} bins; must reject"),
    ));

    // Count sampler against the count law.
    let urn = UrnParams::new(vec![0.5, 1.5])?;
    let len = 10u64;
    let draws = streams.replicate(2, SAMPLER_DRAWS, |rng| polya_sample_counts(&urn, len as usize, rng).counts()[0]);
    let mut observed = vec![0u64; len as usize + 1];
    for d in draws {
        observed[d as usize] += 1;
    }
    let probs: Vec<f64> = (0..=len)
        .map(|c| polya_count_log_pmf(&urn, &CountVector::new(vec![c, len - c])).map(|v| v.to_real()))
        .collect::<Result<_>>()?;
    let (stat, crit, bins) = chi_square_fit(&observed, &probs, SAMPLER_DRAWS as u64)?;
    reports.push(streams.check(
        "polya/sampler-counts",
        stat,
        crit,
        format!("alphas=(0.5,1.5) n={len}, {SAMPLER_DRAWS} draws, {bins} bins"),
    ));

    // A position-dependent term must be caught by the exchangeability check.
    let urn = UrnParams::new(vec![1.0, 2.0, 3.0])?;
    let corrupted = exchangeability_discrepancy(urn.k(), 4, |s| {
        let tilt: f64 = s.iter().enumerate().map(|(i, &l)| (i * l) as f64).sum();
        seq_prob(&urn, s).ln() + 1e-6 * tilt
    });
    reports.push(streams.control(
        "polya/control-corrupted-pmf",
        corrupted,
        EXACT_TOL,
        "closed form plus 1e-6 * sum(position * label); must break permutation invariance",
    ));
    Ok(reports)
}

// ------------------------------------------------------------------ crp-exact

const CRP_SETS_PER_CASE: usize = 10;
const CRP_MAX_N: usize = 8;
const CRP_EXCH_N: usize = 6;

fn crp_param_sets(streams: &Streams) -> Result<Vec<CrpParams>> {
    let mut rng = streams.rng(0);
    let mut sets = Vec::new();
    for _ in 0..CRP_SETS_PER_CASE {
        let k = rng.random_range(1..=5u32) as f64;
        let a = log_uniform(&mut rng, 0.1, 3.0);
        sets.push(crp_validate(-a, k * a)?);
    }
    for _ in 0..CRP_SETS_PER_CASE {
        let alpha = 0.95 * rng.random::<f64>();
        let theta = -alpha + log_uniform(&mut rng, 0.05, 10.0);
        sets.push(crp_validate(alpha, theta)?);
    }
    // Boundary cases with their own code paths.
    for (a, t) in [(0.0, 1.0), (0.5, 0.0), (1.0, 0.5)] {
        sets.push(crp_validate(a, t)?);
    }
    Ok(sets)
}

fn ep_prob(params: &CrpParams, pi: &Partition) -> f64 {
    ewens_pitman_log_pmf(params, pi).to_real()
}

fn describe(p: &CrpParams) -> String {
    format!("({}, {})", p.alpha(), p.theta())
}

/// Induced partition law of the first `n` draws of an urn.
fn urn_partition_law(urn: &UrnParams, n: usize) -> HashMap<Partition, f64> {
    let mut law = HashMap::new();
    for s in all_sequences(urn.k(), n) {
        let p = seq_prob(urn, &s);
        *law.entry(Partition::from_assignment(&s)).or_insert(0.0) += p;
    }
    law
}

fn crp_exact(streams: &Streams) -> Result<Vec<TestReport>> {
    let sets = crp_param_sets(streams)?;
    let tables: Vec<Vec<Partition>> = (1..=CRP_MAX_N).map(enumerate_partitions).collect::<Result<_>>()?;
    let mut reports = Vec::new();
    let span = format!(
        "{} finite-blocks + {} infinite-blocks random sets and 3 boundary sets, all partitions of [n], n <= {CRP_MAX_N}",
        CRP_SETS_PER_CASE, CRP_SETS_PER_CASE
    );

    let per_set = sets
        .par_iter()
        .map(|params| -> Result<(f64, f64, f64)> {
            let (mut gap, mut mass_gap, mut excess) = (0.0f64, 0.0f64, 0.0f64);
            for parts in &tables {
                let mut mass = 0.0;
                for pi in parts {
                    let closed = ep_prob(params, pi);
                    gap = gap.max((closed - oracle_crp_partition_pmf(params, pi)?).abs());
                    mass += closed;
                    if let CrpCase::FiniteBlocks { k } = params.case() {
                        if pi.num_blocks() as u64 > k {
                            excess = excess.max(closed.abs());
                        }
                    }
                }
                mass_gap = mass_gap.max((mass - 1.0).abs());
            }
            Ok((gap, mass_gap, excess))
        })
        .collect::<Result<Vec<_>>>()?;
    reports.push(streams.check("crp/oracle-equivalence", max_of(per_set.iter().map(|r| r.0)), EXACT_TOL, span.clone()));
    reports.push(streams.check("crp/normalization", max_of(per_set.iter().map(|r| r.1)), MASS_TOL, span.clone()));
    reports.push(streams.check(
        "crp/finite-blocks-zero",
        max_of(per_set.iter().map(|r| r.2)),
        0.0,
        "largest probability given to a partition with more than k blocks; must be exactly 0",
    ));

    // The seating oracle depends on arrival order; its invariance is the claim.
    let perms: Vec<Vec<Vec<usize>>> = (0..=CRP_EXCH_N).map(permutations).collect();
    let exch = sets
        .par_iter()
        .map(|params| -> Result<f64> {
            let mut worst = 0.0f64;
            for parts in &tables[..CRP_EXCH_N] {
                for pi in parts {
                    let base = oracle_crp_partition_pmf(params, pi)?;
                    for perm in &perms[pi.n()] {
                        let moved = oracle_crp_partition_pmf(params, &pi.relabel(perm)?)?;
                        worst = worst.max((moved - base).abs());
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    reports.push(streams.check(
        "crp/exchangeability",
        max_of(exch),
        EXACT_TOL,
        format!("seating-history probability under every relabelling of [n], n <= {CRP_EXCH_N}"),
    ));

    // p(child) = p(parent) * seating probability.
    let mut seq_gap = 0.0f64;
    for params in &sets {
        for parts in &tables[..CRP_MAX_N - 1] {
            for pi in parts {
                if let CrpCase::FiniteBlocks { k } = params.case() {
                    // Unreachable parent; the zero law is checked separately.
                    if pi.num_blocks() as u64 > k {
                        continue;
                    }
                }
                let base = ep_prob(params, pi);
                let (occupied, fresh) = crp_next_probs(params, &SeatingState::from_partition(pi))?;
                let newcomer = pi.n();
                for (j, &p) in occupied.iter().chain([&fresh]).enumerate() {
                    let mut blocks = pi.blocks().to_vec();
                    if j == blocks.len() {
                        blocks.push(vec![newcomer]);
                    } else {
                        blocks[j].push(newcomer);
                    }
                    let child = Partition::from_blocks(blocks)?;
                    seq_gap = seq_gap.max((ep_prob(params, &child) - base * p).abs());
                }
            }
        }
    }
    reports.push(streams.check("crp/sequential-consistency", seq_gap, EXACT_TOL, span));

    // Finite-blocks CRP against the partition law induced by a symmetric urn.
    let mut case_one = Vec::new();
    for (alpha, k) in [(-1.0, 2usize), (-0.5, 3)] {
        let params = crp_validate(alpha, k as f64 * -alpha)?;
        let urn = UrnParams::new(vec![-alpha; k])?;
        for n in 1..=CRP_EXCH_N {
            let law = urn_partition_law(&urn, n);
            for pi in &tables[n - 1] {
                let induced = law.get(pi).copied().unwrap_or(0.0);
                case_one.push((ep_prob(&params, pi) - induced).abs());
            }
        }
    }
    reports.push(streams.check(
        "crp/polya-equivalence",
        max_of(case_one),
        CASE_ONE_TOL,
        "CRP(-1, 2) vs urn (1, 1) and CRP(-0.5, 1.5) vs urn (0.5, 0.5, 0.5), all partitions, n <= 6",
    ));

    // Samplers against the exact law.
    let n = 5;
    let parts = &tables[n - 1];
    let position: HashMap<&Partition, usize> = parts.iter().enumerate().map(|(i, p)| (p, i)).collect();
    for (idx, (a, t)) in [(0.5, 0.5), (-1.0, 3.0)].into_iter().enumerate() {
        let params = crp_validate(a, t)?;
        let draws = streams.replicate(1 + idx as u64, SAMPLER_DRAWS, |rng| crp_sample(&params, n, rng));
        let mut observed = vec![0u64; parts.len()];
        for d in &draws {
            observed[position[d]] += 1;
        }
        let probs: Vec<f64> = parts.iter().map(|pi| ep_prob(&params, pi)).collect();
        let (stat, crit, bins) = chi_square_fit(&observed, &probs, SAMPLER_DRAWS as u64)?;
        reports.push(streams.check(
            "crp/sampler-partitions",
            stat,
            crit,
            format!("params={} n={n}, {SAMPLER_DRAWS} draws, {bins} bins", describe(&params)),
        ));
        if idx == 0 {
            let wrong = crp_validate(0.5, 1.5)?;
            let probs: Vec<f64> = parts.iter().map(|pi| ep_prob(&wrong, pi)).collect();
            let (stat, crit, bins) = chi_square_fit(&observed, &probs, SAMPLER_DRAWS as u64)?;
            reports.push(streams.control(
                "crp/control-wrong-theta",
                stat,
                crit,
                format!("draws at (0.5, 0.5) scored against (0.5, 1.5), {bins} bins; must reject"),
            ));
        }
        if let CrpCase::FiniteBlocks { k } = params.case() {
            let over = draws.iter().filter(|d| d.num_blocks() as u64 > k).count();
            reports.push(streams.check(
                "crp/finite-blocks-sampler",
                over as f64,
                0.0,
                format!("draws with more than {k} blocks at params={}", describe(&params)),
            ));
        }
    }

    // Table sizes in creation order from the O(1)-per-customer sampler.
    let n = 6;
    for (idx, (a, t)) in [(0.0, 1.5), (0.3, 0.0), (0.6, 2.0), (-0.5, 1.0)].into_iter().enumerate() {
        let params = crp_validate(a, t)?;
        let mut law: HashMap<Vec<u64>, f64> = HashMap::new();
        for pi in &tables[n - 1] {
            *law.entry(pi.block_sizes()).or_default() += ep_prob(&params, pi);
        }
        let mut keys: Vec<Vec<u64>> = law.keys().cloned().collect();
        keys.sort();
        let slot: HashMap<&Vec<u64>, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let draws = streams.replicate(10 + idx as u64, SAMPLER_DRAWS, |rng| {
            crp_table_sizes(&params, n, rng).table_sizes().to_vec()
        });
        let mut observed = vec![0u64; keys.len()];
        for d in &draws {
            observed[slot[d]] += 1;
        }
        let probs: Vec<f64> = keys.iter().map(|k| law[k]).collect();
        let (stat, crit, bins) = chi_square_fit(&observed, &probs, SAMPLER_DRAWS as u64)?;
        reports.push(streams.check(
            "crp/fast-sampler",
            stat,
            crit,
            format!("params={} n={n}, {SAMPLER_DRAWS} draws, {bins} bins", describe(&params)),
        ));
    }
    Ok(reports)
}

// --------------------------------------------------------------------- limits

const LIMIT_N: usize = 6;
const TINY: f64 = 1e-8;

fn limits(streams: &Streams) -> Result<Vec<TestReport>> {
    let parts = enumerate_partitions(LIMIT_N)?;
    let mut reports = Vec::new();

    let alpha_gap = |alpha: f64| -> Result<f64> {
        let mut worst = 0.0f64;
        for theta in [0.3, 1.0, 4.0] {
            let params = crp_validate(alpha, theta)?;
            for pi in &parts {
                worst = worst.max(rel_diff(ewens_pitman_log_pmf(&params, pi), ewens_log_pmf(theta, pi)?));
            }
        }
        Ok(worst)
    };
    reports.push(streams.check(
        "limits/alpha-to-zero",
        alpha_gap(TINY)?,
        LIMIT_REL_TOL,
        "relative gap to the Ewens formula at alpha = 1e-8, theta in {0.3, 1, 4}, all partitions of [6]",
    ));
    reports.push(streams.control(
        "limits/control-alpha-1e-2",
        alpha_gap(1e-2)?,
        LIMIT_REL_TOL,
        "same comparison at alpha = 1e-2; must exceed the tolerance",
    ));

    let mut worst = 0.0f64;
    for alpha in [0.2, 0.5, 0.8, 1.0] {
        let params = crp_validate(alpha, TINY)?;
        for pi in &parts {
            worst = worst.max(rel_diff(ewens_pitman_log_pmf(&params, pi), theta_zero_log_pmf(alpha, pi)?));
        }
    }
    reports.push(streams.check(
        "limits/theta-to-zero",
        worst,
        LIMIT_REL_TOL,
        "relative gap to the theta = 0 law at theta = 1e-8, alpha in {0.2, 0.5, 0.8, 1}, all partitions of [6]",
    ));

    let m = 1e7;
    let mut worst = 0.0f64;
    for (r, s) in [(0.5, 0.0), (1.5, 0.5), (0.3, 0.7), (2.0, 1.0), (-0.4, 0.9)] {
        let exact = gamma_ratio(m, r, s)?;
        worst = worst.max((exact / gamma_ratio_asymptotic(m, r, s)? - 1.0).abs());
    }
    reports.push(streams.check(
        "limits/gamma-ratio",
        worst,
        LIMIT_REL_TOL,
        format!("Gamma(m + r) / Gamma(m + s) against m^(r - s) at m = {m:e}"),
    ));
    Ok(reports)
}

// ------------------------------------------------------------------ dirichlet

const LIMIT_REPLICAS: usize = 10_000;
const LIMIT_STEPS: usize = 2000;
const CONSTRUCTION_DRAWS: usize = 10_000;
const PROPERTY_DRAWS: usize = 100_000;

fn beta_ks(samples: &[f64], a: f64, b: f64) -> Result<f64> {
    ks_stat(samples, |x| beta_cdf(a, b, x))
}

fn dirichlet(streams: &Streams) -> Result<Vec<TestReport>> {
    let mut reports = Vec::new();

    // Long-run urn proportions.
    let urn = UrnParams::new(vec![2.0, 3.0])?;
    let props = streams.replicate(1, LIMIT_REPLICAS, |rng| {
        polya_sample_counts(&urn, LIMIT_STEPS, rng).counts()[0] as f64 / LIMIT_STEPS as f64
    });
    let crit = ks_critical(LIMIT_REPLICAS, SIGNIFICANCE);
    reports.push(streams.check(
        "dirichlet/polya-limit",
        beta_ks(&props, 2.0, 3.0)?,
        crit,
        format!("n_1/n of urn (2, 3) at n = {LIMIT_STEPS}, {LIMIT_REPLICAS} replicas, KS vs Beta(2, 3)"),
    ));
    reports.push(streams.control(
        "dirichlet/control-polya-limit",
        beta_ks(&props, 3.0, 2.0)?,
        crit,
        "same proportions vs Beta(3, 2); must reject",
    ));

    // Gamma and stick constructions agree coordinate-wise and have Beta marginals.
    let mut rng = streams.rng(2);
    let vectors: Vec<Vec<f64>> = (0..5)
        .map(|_| {
            let k = rng.random_range(2..=5);
            (0..k).map(|_| log_uniform(&mut rng, 0.2, 5.0)).collect()
        })
        .collect();
    let two_crit = ks_two_sample_critical(CONSTRUCTION_DRAWS, CONSTRUCTION_DRAWS, SIGNIFICANCE);
    let one_crit = ks_critical(CONSTRUCTION_DRAWS, SIGNIFICANCE);
    let mut marginal_worst = 0.0f64;
    for (i, alphas) in vectors.iter().enumerate() {
        let stream = 10 + 2 * i as u64;
        let gamma = streams
            .replicate(stream, CONSTRUCTION_DRAWS, |rng| sample_dirichlet_gamma(alphas, rng))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let stick = streams
            .replicate(stream + 1, CONSTRUCTION_DRAWS, |rng| sample_dirichlet_stick(alphas, rng))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = alphas.iter().sum();
        let mut worst = 0.0f64;
        for (c, &a) in alphas.iter().enumerate() {
            let g: Vec<f64> = gamma.iter().map(|x| x[c]).collect();
            let s: Vec<f64> = stick.iter().map(|x| x[c]).collect();
            worst = worst.max(ks_two_sample(&g, &s)?);
            marginal_worst = marginal_worst.max(beta_ks(&g, a, total - a)?).max(beta_ks(&s, a, total - a)?);
        }
        let shown: Vec<String> = alphas.iter().map(|a| format!("{a:.4}")).collect();
        reports.push(streams.check(
            "dirichlet/constructions",
            worst,
            two_crit,
            format!(
                "alphas=({}), {CONSTRUCTION_DRAWS} draws each, max coordinate two-sample KS",
                shown.join(", ")
            ),
        ));
    }
    reports.push(streams.check(
        "dirichlet/marginals",
        marginal_worst,
        one_crit,
        "max KS of every coordinate of both constructions vs its Beta marginal",
    ));

    let uniform = streams
        .replicate(3, CONSTRUCTION_DRAWS, |rng| sample_dirichlet_gamma(&[1.0, 1.0], rng).map(|x| x[0]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    reports.push(streams.check(
        "dirichlet/uniform-marginal",
        ks_stat(&uniform, |x| x.clamp(0.0, 1.0))?,
        ks_critical(CONSTRUCTION_DRAWS, 1e-2),
        format!("first coordinate of Dir(1, 1) vs Uniform(0, 1), {CONSTRUCTION_DRAWS} draws, 1.63/sqrt(N)"),
    ));

    let firsts = streams
        .replicate(4, PROPERTY_DRAWS, |rng| sample_dirichlet_gamma(&[2.0, 3.0], rng).map(|x| x[0]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_and_se(&firsts);
    reports.push(streams.check(
        "dirichlet/mean",
        z_score(mean, se, 0.4),
        SE_BOUND,
        format!("first coordinate of Dir(2, 3): mean {mean:.6} vs 0.4, in standard errors"),
    ));

    // Aggregation.
    let prop_crit = ks_critical(PROPERTY_DRAWS, SIGNIFICANCE);
    let blocks = vec![vec![0, 1], vec![2]];
    let merged = aggregate_params(&UrnParams::new(vec![1.0; 3])?, &blocks)?;
    let agg = streams
        .replicate(5, PROPERTY_DRAWS, |rng| {
            sample_dirichlet_gamma(&[1.0; 3], rng).and_then(|x| aggregate_simplex(&x, &blocks)).map(|y| y[0])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    reports.push(streams.check(
        "dirichlet/aggregation",
        beta_ks(&agg, merged.alphas()[0], merged.alphas()[1])?,
        prop_crit,
        format!(
            "x_1 + x_2 of Dir(1, 1, 1) vs Beta{:?}, {PROPERTY_DRAWS} draws",
            merged.alphas()
        ),
    ));

    // Neutrality: the renormalized subvector is Dirichlet and independent of the rest.
    let pairs = streams
        .replicate(6, PROPERTY_DRAWS, |rng| {
            let x = sample_dirichlet_gamma(&[1.0, 2.0, 3.0], rng)?;
            let sub = normalize_subvector(&x, &[0, 1])?;
            Ok((sub[0], x[2]))
        })
        .into_iter()
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (sub, rest): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    reports.push(streams.check(
        "dirichlet/neutrality-marginal",
        beta_ks(&sub, 1.0, 2.0)?,
        prop_crit,
        format!("x_1 / (x_1 + x_2) of Dir(1, 2, 3) vs Beta(1, 2), {PROPERTY_DRAWS} draws"),
    ));
    reports.push(streams.check(
        "dirichlet/neutrality-correlation",
        pearson(&sub, &rest).abs(),
        CORRELATION_BOUND,
        "|corr(x_1 / (x_1 + x_2), x_3)| for Dir(1, 2, 3)",
    ));

    // The density integrates to one.
    let mut worst = 0.0f64;
    for (a, b) in [(2.0, 3.0), (0.5, 0.5), (1.0, 1.0), (3.5, 1.2)] {
        let mass = integrate_unit(|x, xbar| dirichlet_log_density(&[a, b], &[x, xbar]).unwrap_or(f64::NAN).exp())?;
        worst = worst.max((mass - 1.0).abs());
    }
    for alphas in [[2.0, 3.0, 1.5], [0.5, 0.5, 1.0]] {
        let mass = integrate_simplex2(|x, y| {
            dirichlet_log_density(&alphas, &[x, y, (1.0 - x - y).max(0.0)]).unwrap_or(f64::NAN).exp()
        })?;
        worst = worst.max((mass - 1.0).abs());
    }
    reports.push(streams.check(
        "dirichlet/density-normalization",
        worst,
        QUAD_TOL,
        "quadrature of the density for four 2-parameter and two 3-parameter vectors",
    ));

    let gammas = streams
        .replicate(7, PROPERTY_DRAWS, |rng| sample_gamma(2.0, rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_and_se(&gammas);
    let squares: Vec<f64> = gammas.iter().map(|g| (g - mean).powi(2)).collect();
    let (var, var_se) = mean_and_se(&squares);
    reports.push(streams.check(
        "dirichlet/gamma-moments",
        z_score(mean, se, 2.0).max(z_score(var, var_se, 2.0)),
        SE_BOUND,
        format!("Gamma(2): mean {mean:.5}, variance {var:.5}; larger gap to 2 in standard errors"),
    ));
    Ok(reports)
}

// ------------------------------------------------------------------------ gem

const GEM_DRAWS: usize = 100_000;
const GEM_DEPTH: usize = 5;
const CRP_N: usize = 5000;
const CRP_REPLICAS: usize = 10_000;
const RANKED_DEPTH: usize = 2000;

fn gem(streams: &Streams) -> Result<Vec<TestReport>> {
    let mut reports = Vec::new();
    let fair = crp_validate(0.0, 1.0)?;
    let half = crp_validate(0.5, 0.5)?;

    let sticks = streams
        .replicate(1, GEM_DRAWS, |rng| gem_sample(&fair, GEM_DEPTH, rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for k in 0..GEM_DEPTH {
        let v: Vec<f64> = sticks.iter().map(|w| w.weights()[k]).collect();
        let (mean, se) = mean_and_se(&v);
        let target = 0.5f64.powi(k as i32 + 1);
        reports.push(streams.check(
            &format!("gem/mean-v{}", k + 1),
            z_score(mean, se, target),
            SE_BOUND,
            format!("params=(0, 1): mean {mean:.6} vs {target}, {GEM_DRAWS} draws, in standard errors"),
        ));
    }
    let residuals: Vec<f64> = sticks.iter().map(|w| w.residual()).collect();
    let (mean, se) = mean_and_se(&residuals);
    let target = 0.5f64.powi(GEM_DEPTH as i32);
    reports.push(streams.check(
        "gem/residual-mean",
        z_score(mean, se, target),
        SE_BOUND,
        format!("params=(0, 1) depth {GEM_DEPTH}: mean residual {mean:.6} vs {target}"),
    ));

    // Residual over prefixes of one stick sequence never increases.
    let violations: usize = streams
        .replicate(2, 1000, |rng| -> Result<usize> {
            let sticks = (1..=50)
                .map(|j| sample_beta(1.0 - half.alpha(), half.theta() + j as f64 * half.alpha(), rng))
                .collect::<Result<Vec<_>>>()?;
            let mut last = 1.0;
            let mut bad = 0;
            for d in 1..=sticks.len() {
                let r = gem_from_sticks(&sticks[..d])?.residual();
                bad += usize::from(r > last);
                last = r;
            }
            Ok(bad)
        })
        .into_iter()
        .sum::<Result<usize>>()?;
    reports.push(streams.check(
        "gem/residual-monotone",
        violations as f64,
        0.0,
        "depth 1..50 prefixes at params=(0.5, 0.5), 1000 sequences; increases counted",
    ));

    let firsts = streams
        .replicate(3, GEM_DRAWS, |rng| gem_sample(&half, 1, rng).map(|w| w.weights()[0]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_and_se(&firsts);
    reports.push(streams.check(
        "gem/mean-v1-pitman-yor",
        z_score(mean, se, 1.0 / 3.0),
        SE_BOUND,
        format!("params=(0.5, 0.5): mean V_1 {mean:.6} vs 1/3"),
    ));

    // First-table share of the CRP. The lattice n_1/n is spread uniformly over
    // its cell so the continuous KS reference applies near the x^(-1/2) spike.
    let v1 = streams.replicate(4, CRP_REPLICAS, |rng| {
        let state = crp_table_sizes(&half, CRP_N, rng);
        (state.table_sizes()[0] as f64 - rng.random::<f64>()) / CRP_N as f64
    });
    let crit = ks_critical(CRP_REPLICAS, SIGNIFICANCE);
    let (a, b) = (1.0 - half.alpha(), half.theta() + half.alpha());
    reports.push(streams.check(
        "gem/crp-first-block",
        beta_ks(&v1, a, b)?,
        crit,
        format!("(n_1 - U)/n at n = {CRP_N}, {CRP_REPLICAS} replicas, KS vs Beta({a}, {b})"),
    ));
    reports.push(streams.control(
        "gem/control-first-block",
        beta_ks(&v1, 0.5, 0.5)?,
        crit,
        "same shares vs Beta(0.5, 0.5); must reject",
    ));

    // Largest weight: ranked sticks vs ranked CRP blocks.
    let from_gem = streams
        .replicate(5, CRP_REPLICAS, |rng| {
            gem_sample(&half, RANKED_DEPTH, rng).map(|w| w.weights().iter().copied().fold(0.0, f64::max))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let from_crp = streams
        .replicate(6, CRP_REPLICAS, |rng| {
            let state = crp_table_sizes(&half, CRP_N, rng);
            seating_weights(&state).map(|w| w.weights().iter().copied().fold(0.0, f64::max))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    reports.push(streams.check(
        "gem/largest-weight",
        ks_two_sample(&from_gem, &from_crp)?,
        ks_two_sample_critical(CRP_REPLICAS, CRP_REPLICAS, SIGNIFICANCE),
        format!("S_1 from depth-{RANKED_DEPTH} sticks vs S_1 from CRP at n = {CRP_N}, params=(0.5, 0.5)"),
    ));
    Ok(reports)
}

// ---------------------------------------------------------------- correlation

const MC_N: usize = 5000;
const MC_REPS: usize = 10_000;
const BLOCK_COUNT_TOL: f64 = 1e-10;
const BLOCK_COUNT_MAX_N: usize = 6;

/// `rho_1` at `x` with `xbar = 1 - x` supplied exactly. Above 1/2 the
/// `(1 - x)` factor is evaluated from `xbar`, since `rho_k` would recompute it
/// from a rounded `x` right where the density may be singular.
fn rho1(params: &CrpParams, x: f64, xbar: f64) -> f64 {
    if x <= 0.5 {
        return rho_k(params, &[x]).unwrap_or(0.0);
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let ln_c = ln_correlation_constant(params, 1).unwrap_or(f64::NAN);
    (ln_c - (alpha + 1.0) * x.ln() + (alpha + theta - 1.0) * xbar.ln()).exp()
}

fn rho2(params: &CrpParams, x: f64, y: f64) -> f64 {
    rho_k(params, &[x, y]).unwrap_or(0.0)
}

fn first_moment(params: &CrpParams) -> Result<f64> {
    integrate_unit(|x, xbar| x * rho1(params, x, xbar))
}

fn second_moment(params: &CrpParams) -> Result<f64> {
    integrate_unit(|x, xbar| x * x * rho1(params, x, xbar))
}

fn band(params: &CrpParams) -> Result<f64> {
    integrate(|x| x * rho1(params, x, 1.0 - x), 0.2, 0.4)
}

fn pair_moment(params: &CrpParams) -> Result<f64> {
    integrate_simplex2(|x, y| x * y * rho2(params, x, y))
}

/// Every list of positive sizes with total at most `n`.
fn size_lists(n: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    fn extend(prefix: &mut Vec<u64>, room: u64, out: &mut Vec<Vec<u64>>) {
        for s in 1..=room {
            prefix.push(s);
            out.push(prefix.clone());
            extend(prefix, room - s, out);
            prefix.pop();
        }
    }
    extend(&mut Vec::new(), n, &mut out);
    out
}

/// Ordered tuples of distinct blocks with the given sizes.
fn matching_tuples(block_sizes: &[u64], wanted: &[u64]) -> u64 {
    fn go(sizes: &[u64], used: &mut [bool], wanted: &[u64]) -> u64 {
        let Some((&first, rest)) = wanted.split_first() else {
            return 1;
        };
        let mut total = 0;
        for i in 0..sizes.len() {
            if !used[i] && sizes[i] == first {
                used[i] = true;
                total += go(sizes, used, rest);
                used[i] = false;
            }
        }
        total
    }
    go(block_sizes, &mut vec![false; block_sizes.len()], wanted)
}

fn correlation(streams: &Streams) -> Result<Vec<TestReport>> {
    let mut reports = Vec::new();

    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    for theta in [0.5, 1.0, 2.0, 5.0] {
        let p = crp_validate(0.0, theta)?;
        worst1 = worst1.max((first_moment(&p)? - 1.0).abs());
        worst2 = worst2.max((second_moment(&p)? - 1.0 / (1.0 + theta)).abs());
    }
    for (a, t) in [(0.5, 0.5), (0.25, 1.5), (0.7, 0.0)] {
        let p = crp_validate(a, t)?;
        worst1 = worst1.max((first_moment(&p)? - 1.0).abs());
        worst2 = worst2.max((second_moment(&p)? - (1.0 - a) / (1.0 + t)).abs());
    }
    reports.push(streams.check(
        "correlation/quadrature-mass",
        worst1,
        QUAD_TOL,
        "|integral of x rho_1 - 1| for alpha = 0, theta in {0.5, 1, 2, 5} and three alpha > 0 pairs",
    ));
    reports.push(streams.check(
        "correlation/quadrature-second-moment",
        worst2,
        QUAD_TOL,
        "integral of x^2 rho_1 against (1 - alpha)/(1 + theta)",
    ));
    let mut worst = 0.0f64;
    for (a, t) in [(0.0, 1.0), (0.5, 0.5), (0.25, 1.5)] {
        let p = crp_validate(a, t)?;
        worst = worst.max((pair_moment(&p)? - (1.0 - (1.0 - a) / (1.0 + t))).abs());
    }
    reports.push(streams.check(
        "correlation/quadrature-pair",
        worst,
        QUAD_TOL,
        "integral of x y rho_2 against 1 - (1 - alpha)/(1 + theta)",
    ));

    // Monte Carlo distinct-index sums against the quadrature targets.
    let square: TestFunction = &|x: &[f64]| x[0] * x[0];
    let banded: TestFunction = &|x: &[f64]| if (0.2..=0.4).contains(&x[0]) { x[0] } else { 0.0 };
    let product: TestFunction = &|x: &[f64]| x[0] * x[1];
    let fair = crp_validate(0.0, 1.0)?;
    let half = crp_validate(0.5, 0.5)?;
    let cases: [(&str, &CrpParams, usize, TestFunction, f64); 5] = [
        ("x^2", &fair, 1, square, second_moment(&fair)?),
        ("xy", &fair, 2, product, pair_moment(&fair)?),
        ("x^2", &half, 1, square, second_moment(&half)?),
        ("x 1[0.2, 0.4]", &half, 1, banded, band(&half)?),
        ("xy", &half, 2, product, pair_moment(&half)?),
    ];
    let mut half_square = None;
    for (i, (label, params, k, f, target)) in cases.into_iter().enumerate() {
        let (est, se) = correlation_mc_estimate(params, k, f, MC_N, MC_REPS, &mut streams.rng(1 + i as u64))?;
        if i == 2 {
            half_square = Some((est, se));
        }
        reports.push(streams.check(
            "correlation/monte-carlo",
            z_score(est, se, target),
            SE_BOUND,
            format!(
                "params={} f={label}: estimate {est:.6} ± {se:.6} vs rho_{k} integral {target:.6}, n = {MC_N}, {MC_REPS} replicas",
                describe(params)
            ),
        ));
    }
    let (est, se) = half_square.expect("case 2 ran");
    let wrong = second_moment(&crp_validate(0.5, 1.5)?)?;
    reports.push(streams.control(
        "correlation/control-wrong-rho",
        z_score(est, se, wrong),
        SE_BOUND,
        format!("x^2 estimate at (0.5, 0.5) vs the rho_1 integral of (0.5, 1.5) = {wrong:.6}; must reject"),
    ));

    // block_count_prob against enumeration.
    let mut rng = streams.rng(10);
    let mut sets: Vec<CrpParams> = (0..5)
        .map(|_| {
            let alpha = 0.95 * rng.random::<f64>();
            crp_validate(alpha, -alpha + log_uniform(&mut rng, 0.05, 10.0))
        })
        .collect::<Result<_>>()?;
    for (a, t) in [(0.0, 1.0), (0.0, 3.0), (0.5, 0.0), (-1.0, 3.0), (-0.5, 1.0)] {
        sets.push(crp_validate(a, t)?);
    }
    let mut worst = 0.0f64;
    for params in &sets {
        for n in 1..=BLOCK_COUNT_MAX_N {
            let parts = enumerate_partitions(n)?;
            let probs: Vec<f64> = parts.iter().map(|pi| ep_prob(params, pi)).collect();
            for sizes in size_lists(n as u64) {
                let k_fact: f64 = (1..=sizes.len()).map(|i| i as f64).product();
                let expected: f64 = parts
                    .iter()
                    .zip(&probs)
                    .map(|(pi, p)| p * matching_tuples(&pi.block_sizes(), &sizes) as f64)
                    .sum::<f64>()
                    / k_fact;
                worst = worst.max((block_count_prob(params, n as u64, &sizes)? - expected).abs());
            }
        }
    }
    reports.push(streams.check(
        "correlation/block-count",
        worst,
        BLOCK_COUNT_TOL,
        format!(
            "{} parameter sets, every size list with total <= n <= {BLOCK_COUNT_MAX_N}; expected ordered matching tuples / k!",
            sets.len()
        ),
    ));

    let mut rng = streams.rng(11);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let alpha = 0.95 * rng.random::<f64>();
        let params = crp_validate(alpha, -alpha + log_uniform(&mut rng, 0.05, 10.0))?;
        let k = rng.random_range(2..=4);
        let xs: Vec<f64> = (0..k).map(|_| rng.random::<f64>() / k as f64).collect();
        let base = rho_k(&params, &xs)?;
        for perm in permutations(k) {
            let moved: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
            worst = worst.max((rho_k(&params, &moved)? / base - 1.0).abs());
        }
    }
    reports.push(streams.check(
        "correlation/rho-symmetry",
        worst,
        SYMMETRY_TOL,
        "relative change of rho_k under every permutation of its arguments, k in 2..=4, 50 random cases",
    ));
    Ok(reports)
}
