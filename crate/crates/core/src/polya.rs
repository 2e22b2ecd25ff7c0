//! Polya urn process with real positive parameters.
//!
//! Labels are 0-based in the library API; the JSON and CLI forms use the
//! 1-based labels `1..=k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkern::{ln_factorial, ln_gamma, rising, SignedLogValue};
use crate::rngdist::{draw_weighted, SimplexVector};

/// Tolerance for accepting a point as lying on the simplex in
/// [`dirichlet_log_density`].
pub const DENSITY_SIMPLEX_TOL: f64 = 1e-10;

/// Initial urn weights `(alpha_1, ..., alpha_k)`, all positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UrnParams {
    alphas: Vec<f64>,
}

impl UrnParams {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("urn needs at least one label"));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(invalid(format!("urn weight {a} is not a positive finite real")));
        }
        Ok(Self { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Number of labels.
    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    pub fn total(&self) -> f64 {
        self.alphas.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for UrnParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<UrnParams> for Vec<f64> {
    fn from(p: UrnParams) -> Self {
        p.alphas
    }
}

/// Recorded labels `(Y_1, ..., Y_n)`, stored 0-based.
///
/// The label count is not part of the value; operations check labels against
/// the [`UrnParams`] they are paired with.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct LabelSequence {
    labels: Vec<usize>,
}

impl LabelSequence {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    /// Parses labels written as `1..=k`.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        labels
            .iter()
            .map(|&l| l.checked_sub(1).ok_or_else(|| Error::OutOfRange("labels start at 1".into())))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check_labels(&self, k: usize) -> Result<()> {
        match self.labels.iter().find(|&&l| l >= k) {
            Some(l) => Err(Error::OutOfRange(format!("label {} outside 1..={k}", l + 1))),
            None => Ok(()),
        }
    }
}

impl Serialize for LabelSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        Self::from_one_based(&raw).map_err(serde::de::Error::custom)
    }
}

/// Occurrence counts `(n_1, ..., n_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![0; k] }
    }

    pub fn from_sequence(seq: &LabelSequence, k: usize) -> Result<Self> {
        seq.check_labels(k)?;
        let mut counts = vec![0; k];
        for &l in seq.labels() {
            counts[l] += 1;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn check_dim(params: &UrnParams, len: usize) -> Result<()> {
    if params.k() == len {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: params.k(),
            got: len,
        })
    }
}

/// Conditional law of the next label: `(alpha_i + n_i) / (sum(alpha) + n)`.
pub fn polya_next_probs(params: &UrnParams, counts: &CountVector) -> Result<SimplexVector> {
    check_dim(params, counts.counts().len())?;
    let denom = params.total() + counts.total() as f64;
    let probs = params
        .alphas()
        .iter()
        .zip(counts.counts())
        .map(|(&a, &c)| (a + c as f64) / denom)
        .collect();
    SimplexVector::new(probs)
}

/// Runs the urn for `n` steps.
pub fn polya_sample<R: Rng + ?Sized>(params: &UrnParams, n: usize, rng: &mut R) -> LabelSequence {
    let mut weights = params.alphas().to_vec();
    let mut total = params.total();
    let labels = (0..n)
        .map(|_| {
            let i = draw_weighted(&weights, total, rng);
            weights[i] += 1.0;
            total += 1.0;
            i
        })
        .collect();
    LabelSequence::new(labels)
}

/// Final counts after `n` steps; the same draws as [`polya_sample`] without
/// keeping the sequence.
pub fn polya_sample_counts<R: Rng + ?Sized>(params: &UrnParams, n: usize, rng: &mut R) -> CountVector {
    let mut weights = params.alphas().to_vec();
    let mut total = params.total();
    let mut counts = vec![0u64; params.k()];
    for _ in 0..n {
        let i = draw_weighted(&weights, total, rng);
        weights[i] += 1.0;
        total += 1.0;
        counts[i] += 1;
    }
    CountVector::new(counts)
}

/// `prod_i alpha_i^(n_i rising) / (sum alpha)^(n rising)` from the counts.
fn seq_law_from_counts(params: &UrnParams, counts: &[u64]) -> SignedLogValue {
    let numer: SignedLogValue = params
        .alphas()
        .iter()
        .zip(counts)
        .map(|(&a, &c)| rising(a, c))
        .product();
    let n: u64 = counts.iter().sum();
    numer / rising(params.total(), n)
}

/// Probability of observing exactly `seq` as the first labels.
///
/// Depends on `seq` only through its counts.
pub fn polya_seq_log_pmf(params: &UrnParams, seq: &LabelSequence) -> Result<SignedLogValue> {
    let counts = CountVector::from_sequence(seq, params.k())?;
    Ok(seq_law_from_counts(params, counts.counts()))
}

/// Probability that the first `n = sum(counts)` labels contain `n_i` copies of
/// label `i`: the sequence law times the multinomial coefficient.
pub fn polya_count_log_pmf(params: &UrnParams, counts: &CountVector) -> Result<SignedLogValue> {
    check_dim(params, counts.counts().len())?;
    let multinomial = ln_factorial(counts.total()) - counts.counts().iter().map(|&c| ln_factorial(c)).sum::<f64>();
    Ok(SignedLogValue::from_ln(multinomial) * seq_law_from_counts(params, counts.counts()))
}

/// Log-density of Dir(alphas) at `x`, relative to the (k-1)-dimensional
/// simplex measure.
///
/// A zero coordinate whose parameter is below one gives `+inf`; above one it
/// gives `-inf`.
pub fn dirichlet_log_density(alphas: &[f64], x: &[f64]) -> Result<f64> {
    let params = UrnParams::new(alphas.to_vec())?;
    check_dim(&params, x.len())?;
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("point has a negative or non-finite coordinate".into()));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > DENSITY_SIMPLEX_TOL {
        return Err(Error::Domain(format!("point sums to {sum}, not 1")));
    }
    let norm = ln_gamma(params.total()) - alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    let mut kernel = 0.0;
    for (&a, &xi) in alphas.iter().zip(x) {
        if a == 1.0 {
            continue;
        }
        if xi == 0.0 {
            if a < 1.0 {
                return Ok(f64::INFINITY);
            }
            return Ok(f64::NEG_INFINITY);
        }
        kernel += (a - 1.0) * xi.ln();
    }
    Ok(norm + kernel)
}

fn check_label_blocks(blocks: &[Vec<usize>], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    for block in blocks {
        if block.is_empty() {
            return Err(Error::NotAPartition("empty block".into()));
        }
        for &i in block {
            if i >= k {
                return Err(Error::NotAPartition(format!("index {i} outside 0..{k}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::NotAPartition(format!("index {i} appears twice")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::NotAPartition(format!("index {missing} is not covered")));
    }
    Ok(())
}

/// Sums coordinates within each block of a partition of the label set.
pub fn aggregate_simplex(x: &SimplexVector, blocks: &[Vec<usize>]) -> Result<SimplexVector> {
    check_label_blocks(blocks, x.len())?;
    let merged = blocks.iter().map(|b| b.iter().map(|&i| x[i]).sum()).collect();
    SimplexVector::new(merged)
}

/// The same aggregation applied to Dirichlet parameters.
pub fn aggregate_params(params: &UrnParams, blocks: &[Vec<usize>]) -> Result<UrnParams> {
    check_label_blocks(blocks, params.k())?;
    UrnParams::new(blocks.iter().map(|b| b.iter().map(|&i| params.alphas()[i]).sum()).collect())
}

/// `x_I / sum_{i in I} x_i` in the order given by `indices`.
pub fn normalize_subvector(x: &SimplexVector, indices: &[usize]) -> Result<SimplexVector> {
    if indices.is_empty() {
        return Err(Error::Empty("index list"));
    }
    let mut seen = vec![false; x.len()];
    for &i in indices {
        if i >= x.len() {
            return Err(Error::OutOfRange(format!("index {i} outside 0..{}", x.len())));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(invalid(format!("index {i} repeated")));
        }
    }
    let mass: f64 = indices.iter().map(|&i| x[i]).sum();
    if mass <= 0.0 {
        return Err(Error::Domain("selected coordinates carry zero mass".into()));
    }
    SimplexVector::new(indices.iter().map(|&i| x[i] / mass).collect())
}
