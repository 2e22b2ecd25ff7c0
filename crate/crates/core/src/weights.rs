//! Block weights of the CRP partition and the Poisson-Dirichlet point process.
//!
//! Infinite weight sequences are truncated at a finite depth; the mass not
//! represented by the listed weights is carried as `residual`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::crp::{crp_table_sizes, CrpCase, CrpParams, Partition, SeatingState};
use crate::error::{invalid, Error, Result};
use crate::numkern::{gen_binom, ln_factorial, ln_gamma, rising, SignedLogValue};
use crate::rngdist::{replicate, sample_beta};

/// Tolerance on `sum(weights) + residual = 1`.
pub const MASS_TOL: f64 = 1e-10;

/// Weights below this are ignored by the Monte Carlo distinct-index sums.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-12;

/// Smallest replica count accepted by [`correlation_mc_estimate`].
pub const MIN_REPLICAS: usize = 100;

fn check_mass(weights: &[f64], residual: f64) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
        return Err(Error::Domain(format!("weight {w} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&residual) {
        return Err(Error::Domain(format!("residual {residual} outside [0, 1]")));
    }
    let total = weights.iter().sum::<f64>() + residual;
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::Domain(format!("weights and residual sum to {total}, not 1")));
    }
    Ok(())
}

/// Block weights in order of appearance, truncated with a residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct WeightSequence {
    weights: Vec<f64>,
    residual: f64,
}

/// Block weights sorted non-increasingly, with a residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct RankedWeights {
    weights: Vec<f64>,
    residual: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    weights: Vec<f64>,
    residual: f64,
}

impl WeightSequence {
    pub fn new(weights: Vec<f64>, residual: f64) -> Result<Self> {
        check_mass(&weights, residual)?;
        Ok(Self { weights, residual })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

impl RankedWeights {
    pub fn new(weights: Vec<f64>, residual: f64) -> Result<Self> {
        check_mass(&weights, residual)?;
        if weights.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("ranked weights must be non-increasing".into()));
        }
        Ok(Self { weights, residual })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

impl TryFrom<RawWeights> for WeightSequence {
    type Error = Error;

    fn try_from(r: RawWeights) -> Result<Self> {
        Self::new(r.weights, r.residual)
    }
}

impl TryFrom<RawWeights> for RankedWeights {
    type Error = Error;

    fn try_from(r: RawWeights) -> Result<Self> {
        Self::new(r.weights, r.residual)
    }
}

impl From<WeightSequence> for RawWeights {
    fn from(w: WeightSequence) -> Self {
        Self {
            weights: w.weights,
            residual: w.residual,
        }
    }
}

impl From<RankedWeights> for RawWeights {
    fn from(w: RankedWeights) -> Self {
        Self {
            weights: w.weights,
            residual: w.residual,
        }
    }
}

/// `|B_i| / n` for the blocks in order of least element.
pub fn empirical_block_weights(pi: &Partition) -> Result<WeightSequence> {
    if pi.n() == 0 {
        return Err(Error::Empty("partition"));
    }
    sizes_to_weights(&pi.block_sizes())
}

/// Weights from table sizes listed in order of creation.
pub fn seating_weights(state: &SeatingState) -> Result<WeightSequence> {
    if state.n() == 0 {
        return Err(Error::Empty("seating"));
    }
    sizes_to_weights(state.table_sizes())
}

fn sizes_to_weights(sizes: &[u64]) -> Result<WeightSequence> {
    let n: u64 = sizes.iter().sum();
    let n = n as f64;
    WeightSequence::new(sizes.iter().map(|&s| s as f64 / n).collect(), 0.0)
}

/// Stick-breaking weights `V_j = W_j (1 - W_1) ... (1 - W_{j-1})` for given
/// sticks `W_j` in `(0, 1)`.
pub fn gem_from_sticks(sticks: &[f64]) -> Result<WeightSequence> {
    if let Some(w) = sticks.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
        return Err(invalid(format!("stick {w} outside (0, 1)")));
    }
    let mut remaining = 1.0;
    let weights = sticks
        .iter()
        .map(|&w| {
            let v = w * remaining;
            remaining *= 1.0 - w;
            v
        })
        .collect();
    WeightSequence::new(weights, remaining)
}

/// First `depth` GEM(alpha, theta) weights with `W_j ~ Beta(1 - alpha, theta + j alpha)`.
pub fn gem_sample<R: Rng + ?Sized>(params: &CrpParams, depth: usize, rng: &mut R) -> Result<WeightSequence> {
    if let CrpCase::FiniteBlocks { .. } = params.case() {
        return Err(invalid("stick breaking needs infinite-blocks parameters"));
    }
    if params.alpha() >= 1.0 {
        return Err(invalid("stick breaking needs alpha < 1"));
    }
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let sticks = (1..=depth)
        .map(|j| sample_beta(1.0 - alpha, theta + j as f64 * alpha, rng))
        .collect::<Result<Vec<_>>>()?;
    gem_from_sticks(&sticks)
}

/// Non-increasing rearrangement; the residual is carried over.
pub fn rank_weights(w: &WeightSequence) -> RankedWeights {
    let mut sorted = w.weights.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    RankedWeights {
        weights: sorted,
        residual: w.residual,
    }
}

/// Ranked block weights of one CRP partition of `n` customers.
pub fn ranked_crp_weights<R: Rng + ?Sized>(params: &CrpParams, n: usize, rng: &mut R) -> Result<RankedWeights> {
    let state = crp_table_sizes(params, n, rng);
    Ok(rank_weights(&seating_weights(&state)?))
}

/// The count `P(n_1, ..., n_k)` for drawing `n` elements:
///
/// `C(-theta/alpha, k) prod_i C(alpha, n_i) C(-theta - k alpha, n - sum n_i) / C(-theta, n)`.
///
/// This equals the expected number of ordered `k`-tuples of distinct blocks of
/// the CRP partition of `[n]` whose sizes are `(n_1, ..., n_k)`, divided by
/// `k!`. For distinct sizes that is the probability that blocks of those sizes
/// exist; with repeated sizes it is an expected count.
///
/// `alpha = 0` and `theta = 0` use the analytic limits of the leading ratio.
pub fn block_count_prob(params: &CrpParams, n: u64, sizes: &[u64]) -> Result<f64> {
    if sizes.contains(&0) {
        return Err(invalid("block sizes must be positive"));
    }
    let used: u64 = sizes.iter().sum();
    if used > n {
        return Err(invalid(format!("block sizes sum to {used} > n = {n}")));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let k = sizes.len() as u64;
    let rest = n - used;
    if k == 0 {
        return Ok(1.0);
    }

    let value = if alpha == 0.0 {
        // C(-theta/alpha, k) prod C(alpha, n_i) -> theta^k (-1)^(sum n_i) / (k! prod n_i)
        let sign = if used.is_multiple_of(2) { 1 } else { -1 };
        let ln = k as f64 * theta.ln() - ln_factorial(k) - sizes.iter().map(|&s| (s as f64).ln()).sum::<f64>();
        SignedLogValue::new(sign, ln) * gen_binom(-theta, rest) / gen_binom(-theta, n)
    } else {
        let blocks: SignedLogValue = sizes.iter().map(|&s| gen_binom(alpha, s)).product();
        let others = match params.case() {
            CrpCase::FiniteBlocks { k: groups } => gen_binom((groups as f64 - k as f64) * alpha, rest),
            CrpCase::InfiniteBlocks => gen_binom(-theta - k as f64 * alpha, rest),
        };
        let lead = if theta == 0.0 {
            // C(-theta/alpha, k) / C(-theta, n) -> (-1)^(k-n) n / (alpha k)
            let sign = if (k + n).is_multiple_of(2) { 1 } else { -1 };
            SignedLogValue::new(sign, (n as f64).ln() - alpha.ln() - (k as f64).ln())
        } else {
            gen_binom(-params.theta_over_alpha(), k) / gen_binom(-theta, n)
        };
        lead * blocks * others
    };
    Ok(value.to_real())
}

fn check_rho_params(params: &CrpParams) -> Result<()> {
    if let CrpCase::FiniteBlocks { .. } = params.case() {
        return Err(invalid("correlation functions need infinite-blocks parameters"));
    }
    if params.alpha() >= 1.0 {
        return Err(invalid("correlation functions need alpha < 1"));
    }
    Ok(())
}

/// `ln c_{k, alpha, theta}`.
///
/// Evaluated as `(theta/alpha + 1)^(k-1 rising) Gamma(theta + 1) alpha^(k-1) /
/// (Gamma(theta + k alpha) Gamma(1 - alpha)^k)`, which is the defining ratio
/// with `Gamma(theta/alpha + k) / Gamma(theta/alpha)` and `Gamma(theta)` folded
/// together; every Gamma argument is then positive, including at `theta = 0`.
/// At `alpha = 0` the constant is `theta^k`.
pub fn ln_correlation_constant(params: &CrpParams, k: usize) -> Result<f64> {
    check_rho_params(params)?;
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let kf = k as f64;
    if alpha == 0.0 {
        return Ok(kf * theta.ln());
    }
    let head = rising(theta / alpha + 1.0, k as u64 - 1);
    Ok(head.logmag() + ln_gamma(theta + 1.0) + (kf - 1.0) * alpha.ln()
        - ln_gamma(theta + kf * alpha)
        - kf * ln_gamma(1.0 - alpha))
}

/// k-correlation function of the ranked weights,
/// `c * prod x_i^(-alpha-1) * (1 - sum x_i)^(k alpha + theta - 1)`.
pub fn rho_k(params: &CrpParams, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("correlation arguments"));
    }
    if xs.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Domain("correlation arguments must be positive".into()));
    }
    let total: f64 = xs.iter().sum();
    if !(total < 1.0) {
        return Err(Error::Domain(format!("correlation arguments sum to {total} >= 1")));
    }
    let ln_c = ln_correlation_constant(params, xs.len())?;
    let (alpha, theta) = (params.alpha(), params.theta());
    let k = xs.len() as f64;
    let ln_rho = ln_c - (alpha + 1.0) * xs.iter().map(|x| x.ln()).sum::<f64>()
        + (k * alpha + theta - 1.0) * (1.0 - total).ln();
    Ok(ln_rho.exp())
}

/// Test function for [`correlation_mc_estimate`]; receives `k` weights.
pub type TestFunction<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Sum of `f` over distinct index tuples of the ranked weights.
pub fn distinct_index_sum(ranked: &[f64], k: usize, f: TestFunction<'_>) -> Result<f64> {
    let live: Vec<f64> = ranked.iter().copied().filter(|&w| w >= NEGLIGIBLE_WEIGHT).collect();
    match k {
        1 => Ok(live.iter().map(|&s| f(&[s])).sum()),
        2 => {
            let mut acc = 0.0;
            for (i, &a) in live.iter().enumerate() {
                for (j, &b) in live.iter().enumerate() {
                    if i != j {
                        acc += f(&[a, b]);
                    }
                }
            }
            Ok(acc)
        }
        _ => Err(invalid(format!("Monte Carlo correlation supports k = 1 or 2, got {k}"))),
    }
}

/// Monte Carlo estimate and standard error of `E[sum over distinct indices of f]`
/// using ranked CRP block weights at finite `n`.
///
/// Replica `r` draws from `RandomSource::derive(master, r)` where `master` is
/// the next `u64` of `rng`, so the result does not depend on thread count.
pub fn correlation_mc_estimate<R: RngCore + ?Sized>(
    params: &CrpParams,
    k: usize,
    f: TestFunction<'_>,
    n: usize,
    reps: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if !(1..=2).contains(&k) {
        return Err(invalid(format!("Monte Carlo correlation supports k = 1 or 2, got {k}")));
    }
    if reps < MIN_REPLICAS {
        return Err(invalid(format!("need at least {MIN_REPLICAS} replicas, got {reps}")));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let values = replicate(rng.next_u64(), reps, |local| {
        let ranked = ranked_crp_weights(params, n, local)?;
        distinct_index_sum(ranked.weights(), k, f)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_se(&values))
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crp::crp_validate;
    use crate::rngdist::RandomSource;

    fn params(a: f64, t: f64) -> CrpParams {
        crp_validate(a, t).unwrap()
    }

    #[test]
    fn empirical_weights_examples() {
        let pi = Partition::from_one_based(vec![vec![1, 3], vec![2]]).unwrap();
        let w = empirical_block_weights(&pi).unwrap();
        assert_eq!(w.weights(), &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(w.residual(), 0.0);
        let whole = Partition::from_assignment(&[0; 9]);
        assert_eq!(empirical_block_weights(&whole).unwrap().weights(), &[1.0]);
        assert!(empirical_block_weights(&Partition::empty()).is_err());
    }

    #[test]
    fn forced_sticks() {
        let w = gem_from_sticks(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(w.weights(), &[0.5, 0.25, 0.125]);
        assert_eq!(w.residual(), 0.125);
        assert!(gem_from_sticks(&[1.0]).is_err());
    }

    #[test]
    fn gem_rejects_bad_params() {
        let mut rng = RandomSource::new(0);
        assert!(gem_sample(&params(-1.0, 2.0), 5, &mut rng).is_err());
        assert!(gem_sample(&params(1.0, 1.0), 5, &mut rng).is_err());
        assert!(gem_sample(&params(0.5, 1.0), 0, &mut rng).is_err());
        let w = gem_sample(&params(0.5, 1.0), 30, &mut rng).unwrap();
        assert_eq!(w.weights().len(), 30);
    }

    #[test]
    fn gem_v1_mean() {
        let p = params(0.5, 0.5);
        let mut rng = RandomSource::new(12);
        let n = 100_000;
        let v1: Vec<f64> = (0..n).map(|_| gem_sample(&p, 1, &mut rng).unwrap().weights()[0]).collect();
        let (m, se) = mean_and_se(&v1);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn ranking() {
        let w = WeightSequence::new(vec![0.2, 0.5, 0.3], 0.0).unwrap();
        let r = rank_weights(&w);
        assert_eq!(r.weights(), &[0.5, 0.3, 0.2]);
        let again = rank_weights(&WeightSequence::new(r.weights().to_vec(), r.residual()).unwrap());
        assert_eq!(again, r);
        assert!(RankedWeights::new(vec![0.2, 0.8], 0.0).is_err());
    }

    #[test]
    fn block_count_examples() {
        let p = params(0.5, 0.5);
        assert!((block_count_prob(&p, 1, &[1]).unwrap() - 1.0).abs() < 1e-14);
        assert!((block_count_prob(&p, 2, &[2]).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!((block_count_prob(&p, 2, &[1, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!(block_count_prob(&p, 2, &[2, 1]).is_err());
        assert!(block_count_prob(&p, 2, &[0]).is_err());
        // Limits agree with the matching exact laws.
        assert!((block_count_prob(&params(0.5, 0.0), 2, &[2]).unwrap() - 0.5).abs() < 1e-14);
        assert!((block_count_prob(&params(0.0, 1.0), 2, &[2]).unwrap() - 0.5).abs() < 1e-14);
        // More blocks than groups is impossible.
        assert_eq!(block_count_prob(&params(-1.0, 2.0), 3, &[1, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn rho_examples() {
        let p = params(0.0, 1.0);
        assert!((rho_k(&p, &[0.5]).unwrap() - 2.0).abs() < 1e-14);
        assert!(rho_k(&p, &[0.6, 0.5]).is_err());
        assert!(rho_k(&p, &[0.0]).is_err());
        assert!(rho_k(&params(-1.0, 2.0), &[0.5]).is_err());
        assert!(rho_k(&params(1.0, 2.0), &[0.5]).is_err());
        // c_{1,1/2,1/2} = Gamma(3/2) / (Gamma(1) Gamma(1/2)) = 1/2
        let c = ln_correlation_constant(&params(0.5, 0.5), 1).unwrap().exp();
        assert!((c - 0.5).abs() < 1e-14);
        // c_{2,1/2,1/2} = 1/pi
        let c = ln_correlation_constant(&params(0.5, 0.5), 2).unwrap().exp();
        assert!((c - std::f64::consts::FRAC_1_PI).abs() < 1e-14);
    }

    #[test]
    fn correlation_constant_matches_defining_gamma_ratio() {
        // Direct Gamma(theta/alpha + k) Gamma(theta) alpha^k / (Gamma(theta + k alpha)
        // Gamma(theta/alpha) Gamma(1 - alpha)^k) for theta > 0.
        for &(a, t) in &[(0.3, 0.7), (0.5, 2.0), (0.9, 0.1)] {
            for k in 1..4 {
                let kf = k as f64;
                let direct = ln_gamma(t / a + kf) + ln_gamma(t) + kf * f64::ln(a)
                    - ln_gamma(t + kf * a)
                    - ln_gamma(t / a)
                    - kf * ln_gamma(1.0 - a);
                let got = ln_correlation_constant(&params(a, t), k).unwrap();
                assert!((got - direct).abs() < 1e-12, "{a} {t} {k}: {got} vs {direct}");
            }
        }
    }

    #[test]
    fn mc_normalization_is_exact() {
        let p = params(0.5, 0.5);
        let f = |x: &[f64]| x[0];
        let (est, se) = correlation_mc_estimate(&p, 1, &f, 200, 100, &mut RandomSource::new(3)).unwrap();
        assert!((est - 1.0).abs() < 1e-12);
        assert!(se < 1e-12);
        assert!(correlation_mc_estimate(&p, 3, &f, 200, 100, &mut RandomSource::new(3)).is_err());
        assert!(correlation_mc_estimate(&p, 1, &f, 200, 10, &mut RandomSource::new(3)).is_err());
    }

    #[test]
    fn weights_json_shape() {
        let w = WeightSequence::new(vec![0.5, 0.25], 0.25).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"weights":[0.5,0.25],"residual":0.25}"#);
        assert!(serde_json::from_str::<WeightSequence>(r#"{"weights":[0.5],"residual":0.25}"#).is_err());
    }
}
