//! Two-parameter Chinese restaurant process.
//!
//! Partitions are stored 0-based in canonical form: elements ascending inside
//! each block, blocks ordered by their least element. Their JSON form is an
//! array of arrays of 1-based integers, e.g. `[[1,3],[2]]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkern::{ln_factorial, rising, SignedLogValue};
use crate::rngdist::draw_weighted;

/// Tolerance on `theta / -alpha` being an integer in the finite-blocks case.
pub const INTEGER_TOL: f64 = 1e-9;

/// Largest ground set accepted by [`enumerate_partitions`].
pub const MAX_ENUMERATION: usize = 10;

/// Which of the two admissible parameter regions a pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrpCase {
    /// `alpha < 0`, `theta = -k alpha`: at most `k` blocks ever appear.
    FiniteBlocks { k: u64 },
    /// `0 <= alpha <= 1`, `theta > -alpha`.
    InfiniteBlocks,
}

/// Validated `(alpha, theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrpParams {
    alpha: f64,
    theta: f64,
    case: CrpCase,
}

impl CrpParams {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn case(&self) -> CrpCase {
        self.case
    }

    /// `theta / alpha`, exactly `-k` in the finite-blocks case.
    pub fn theta_over_alpha(&self) -> f64 {
        match self.case {
            CrpCase::FiniteBlocks { k } => -(k as f64),
            CrpCase::InfiniteBlocks => self.theta / self.alpha,
        }
    }
}

/// Classifies `(alpha, theta)` into one of the admissible cases.
///
/// In the finite-blocks case the stored theta is rebuilt as `k * -alpha` from
/// the detected integer `k`.
pub fn crp_validate(alpha: f64, theta: f64) -> Result<CrpParams> {
    if !alpha.is_finite() || !theta.is_finite() {
        return Err(invalid(format!("non-finite CRP parameters ({alpha}, {theta})")));
    }
    if alpha < 0.0 {
        let ratio = theta / -alpha;
        let k = ratio.round();
        if k >= 1.0 && (ratio - k).abs() <= INTEGER_TOL {
            return Ok(CrpParams {
                alpha,
                theta: k * -alpha,
                case: CrpCase::FiniteBlocks { k: k as u64 },
            });
        }
        return Err(invalid(format!(
            "alpha = {alpha} < 0 needs theta = k * (-alpha) for a positive integer k, got theta = {theta}"
        )));
    }
    if alpha > 1.0 {
        return Err(invalid(format!("alpha = {alpha} exceeds 1")));
    }
    if theta <= -alpha {
        return Err(invalid(format!("theta = {theta} must exceed -alpha = {}", -alpha)));
    }
    Ok(CrpParams {
        alpha,
        theta,
        case: CrpCase::InfiniteBlocks,
    })
}

/// A set partition of `{0, .., n-1}` in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates and canonicalizes blocks of 0-based elements.
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::NotAPartition("empty block".into()));
            }
            for &e in block.iter() {
                if e >= n {
                    return Err(Error::NotAPartition(format!(
                        "element {} outside 1..={n}",
                        e + 1
                    )));
                }
                if std::mem::replace(&mut seen[e], true) {
                    return Err(Error::NotAPartition(format!("element {} repeated", e + 1)));
                }
            }
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// Blocks given with 1-based elements.
    pub fn from_one_based(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let shifted = blocks
            .into_iter()
            .map(|b| {
                b.into_iter()
                    .map(|e| e.checked_sub(1).ok_or_else(|| Error::NotAPartition("elements start at 1".into())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_blocks(shifted)
    }

    /// Groups elements by an arbitrary label per element.
    pub fn from_assignment<T: PartialEq>(labels: &[T]) -> Self {
        let mut keys: Vec<&T> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (e, label) in labels.iter().enumerate() {
            match keys.iter().position(|k| *k == label) {
                Some(b) => blocks[b].push(e),
                None => {
                    keys.push(label);
                    blocks.push(vec![e]);
                }
            }
        }
        Self {
            n: labels.len(),
            blocks,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<u64> {
        self.blocks.iter().map(|b| b.len() as u64).collect()
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|e| e + 1).collect())
            .collect()
    }

    /// Table index (in order of creation) chosen by each customer when they
    /// arrive in order `0..n`.
    pub fn seating(&self) -> Vec<usize> {
        let mut table = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &e in block {
                table[e] = b;
            }
        }
        table
    }

    /// Image of the partition under the element map `i -> perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        Self::from_blocks(
            self.blocks
                .iter()
                .map(|b| b.iter().map(|&e| perm[e]).collect())
                .collect(),
        )
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<Vec<usize>>::deserialize(d)?;
        Self::from_one_based(raw).map_err(serde::de::Error::custom)
    }
}

/// Occupied table sizes in order of creation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatingState {
    table_sizes: Vec<u64>,
    n: u64,
}

impl SeatingState {
    pub fn new(table_sizes: Vec<u64>) -> Result<Self> {
        if table_sizes.contains(&0) {
            return Err(invalid("occupied tables hold at least one customer"));
        }
        let n = table_sizes.iter().sum();
        Ok(Self { table_sizes, n })
    }

    pub fn from_partition(pi: &Partition) -> Self {
        let table_sizes = pi.block_sizes();
        Self {
            n: pi.n() as u64,
            table_sizes,
        }
    }

    pub fn table_sizes(&self) -> &[u64] {
        &self.table_sizes
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn num_tables(&self) -> usize {
        self.table_sizes.len()
    }
}

/// Seating probabilities for the next customer: one entry per occupied table,
/// `(t - alpha) / (n + theta)`, and the new-table probability
/// `(m alpha + theta) / (n + theta)`.
pub fn crp_next_probs(params: &CrpParams, state: &SeatingState) -> Result<(Vec<f64>, f64)> {
    let m = state.num_tables();
    if let CrpCase::FiniteBlocks { k } = params.case {
        if m as u64 > k {
            return Err(invalid(format!("{m} tables exceed the {k} allowed by the parameters")));
        }
    }
    if state.n == 0 {
        return Ok((Vec::new(), 1.0));
    }
    let denom = state.n as f64 + params.theta;
    let tables = state
        .table_sizes
        .iter()
        .map(|&t| (t as f64 - params.alpha) / denom)
        .collect();
    let fresh = match params.case {
        // (m alpha + theta) = (m - k) alpha, exactly zero once k tables are open.
        CrpCase::FiniteBlocks { k } => (m as f64 - k as f64) * params.alpha / denom,
        CrpCase::InfiniteBlocks => (m as f64 * params.alpha + params.theta) / denom,
    };
    Ok((tables, fresh))
}

/// Seats `n` customers one at a time, drawing each choice from
/// [`crp_next_probs`].
pub fn crp_sample<R: Rng + ?Sized>(params: &CrpParams, n: usize, rng: &mut R) -> Partition {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for customer in 0..n {
        let m = blocks.len();
        let fresh = if customer == 0 {
            1.0
        } else {
            match params.case {
                CrpCase::FiniteBlocks { k } => (m as f64 - k as f64) * params.alpha,
                CrpCase::InfiniteBlocks => m as f64 * params.alpha + params.theta,
            }
        };
        weights.clear();
        weights.extend(blocks.iter().map(|b| b.len() as f64 - params.alpha));
        weights.push(fresh.max(0.0));
        let total = if customer == 0 { 1.0 } else { customer as f64 + params.theta };
        let choice = draw_weighted(&weights, total, rng);
        if choice == m {
            blocks.push(vec![customer]);
        } else {
            blocks[choice].push(customer);
        }
    }
    Partition { n, blocks }
}

/// Table sizes after seating `n` customers, in order of table creation.
///
/// Same law as [`crp_sample`] but O(1) expected work per customer: for
/// `alpha >= 0` an occupied table is proposed by picking a uniformly random
/// seated customer and accepted with probability `(t - alpha) / t`; for
/// `alpha < 0` the weight `t + |alpha|` is a mixture of a size-biased and a
/// uniform table pick.
pub fn crp_table_sizes<R: Rng + ?Sized>(params: &CrpParams, n: usize, rng: &mut R) -> SeatingState {
    let alpha = params.alpha;
    let mut sizes: Vec<u64> = Vec::new();
    let mut owner: Vec<u32> = Vec::with_capacity(n);
    for seated in 0..n {
        let m = sizes.len();
        let fresh = match params.case {
            CrpCase::FiniteBlocks { k } => (m as f64 - k as f64) * alpha,
            CrpCase::InfiniteBlocks => m as f64 * alpha + params.theta,
        };
        let u: f64 = rng.random();
        let table = if seated == 0 || u * (seated as f64 + params.theta) < fresh {
            sizes.push(0);
            m
        } else if alpha >= 0.0 {
            loop {
                let t = owner[rng.random_range(0..seated)] as usize;
                let size = sizes[t] as f64;
                if alpha == 0.0 || rng.random::<f64>() * size < size - alpha {
                    break t;
                }
            }
        } else {
            let spread = m as f64 * -alpha;
            if rng.random::<f64>() * (seated as f64 + spread) < seated as f64 {
                owner[rng.random_range(0..seated)] as usize
            } else {
                rng.random_range(0..m)
            }
        };
        sizes[table] += 1;
        owner.push(table as u32);
    }
    SeatingState {
        table_sizes: sizes,
        n: n as u64,
    }
}

/// `-(-alpha)^(n_i rising)` over the blocks.
fn block_factor(alpha: f64, sizes: &[u64]) -> SignedLogValue {
    sizes.iter().map(|&s| -rising(-alpha, s)).product()
}

/// Ewens-Pitman probability of `pi`:
/// `(theta/alpha)^(k rising) / theta^(n rising) * prod_i -(-alpha)^(n_i rising)`.
///
/// `alpha == 0` is delegated to [`ewens_log_pmf`] and `theta == 0` to
/// [`theta_zero_log_pmf`], where the general form is 0/0.
pub fn ewens_pitman_log_pmf(params: &CrpParams, pi: &Partition) -> SignedLogValue {
    if pi.n() == 0 {
        return SignedLogValue::ONE;
    }
    if params.alpha == 0.0 {
        return ewens_log_pmf(params.theta, pi).expect("validated theta > 0 when alpha = 0");
    }
    if params.theta == 0.0 {
        return theta_zero_log_pmf(params.alpha, pi).expect("validated 0 < alpha <= 1 when theta = 0");
    }
    let sizes = pi.block_sizes();
    let head = rising(params.theta_over_alpha(), sizes.len() as u64);
    head * block_factor(params.alpha, &sizes) / rising(params.theta, pi.n() as u64)
}

/// Ewens sampling formula `theta^k / theta^(n rising) * prod_i (n_i - 1)!`.
pub fn ewens_log_pmf(theta: f64, pi: &Partition) -> Result<SignedLogValue> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("Ewens formula needs theta > 0, got {theta}")));
    }
    let sizes = pi.block_sizes();
    let ln_num = sizes.len() as f64 * theta.ln() + sizes.iter().map(|&s| ln_factorial(s - 1)).sum::<f64>();
    Ok(SignedLogValue::from_ln(ln_num) / rising(theta, pi.n() as u64))
}

/// The `theta = 0` law `(k-1)! / (alpha (n-1)!) * prod_i -(-alpha)^(n_i rising)`.
pub fn theta_zero_log_pmf(alpha: f64, pi: &Partition) -> Result<SignedLogValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("theta = 0 law needs 0 < alpha <= 1, got {alpha}")));
    }
    if pi.n() == 0 {
        return Ok(SignedLogValue::ONE);
    }
    let sizes = pi.block_sizes();
    let ln_head = ln_factorial(sizes.len() as u64 - 1) - alpha.ln() - ln_factorial(pi.n() as u64 - 1);
    Ok(SignedLogValue::from_ln(ln_head) * block_factor(alpha, &sizes))
}

/// All partitions of `{0, .., n-1}` in canonical form, `1 <= n <= 10`.
///
/// Generated from restricted growth strings, so the list is in lexicographic
/// order of the seating vector.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if !(1..=MAX_ENUMERATION).contains(&n) {
        return Err(Error::OutOfRange(format!(
            "partition enumeration supports 1..={MAX_ENUMERATION} elements, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut growth = vec![0usize; n];
    fn recurse(pos: usize, max_label: usize, growth: &mut [usize], out: &mut Vec<Partition>) {
        if pos == growth.len() {
            let mut blocks = vec![Vec::new(); max_label + 1];
            for (e, &b) in growth.iter().enumerate() {
                blocks[b].push(e);
            }
            out.push(Partition {
                n: growth.len(),
                blocks,
            });
            return;
        }
        for label in 0..=max_label + 1 {
            growth[pos] = label;
            recurse(pos + 1, max_label.max(label), growth, out);
        }
    }
    // Element 0 always opens block 0.
    if n == 1 {
        out.push(Partition {
            n: 1,
            blocks: vec![vec![0]],
        });
    } else {
        recurse(1, 0, &mut growth, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngdist::RandomSource;

    fn part(blocks: &[&[usize]]) -> Partition {
        Partition::from_one_based(blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn validate_examples() {
        let p = crp_validate(0.5, 0.5).unwrap();
        assert_eq!(p.case(), CrpCase::InfiniteBlocks);
        let p = crp_validate(-1.0, 2.0).unwrap();
        assert_eq!(p.case(), CrpCase::FiniteBlocks { k: 2 });
        assert!(crp_validate(-1.0, 2.5).is_err());
        assert!(crp_validate(1.5, 1.0).is_err());
        assert!(crp_validate(0.5, -0.5).is_err());
        assert!(crp_validate(0.0, 0.0).is_err());
        assert!(crp_validate(-0.5, -1.0).is_err());
        assert!(crp_validate(f64::NAN, 1.0).is_err());
        assert!(crp_validate(1.0, -0.9).is_ok());
        assert!(crp_validate(0.3, -0.2).is_ok());
        // theta/(-alpha) within tolerance of an integer snaps theta.
        let p = crp_validate(-0.3, 0.9 + 1e-12).unwrap();
        assert_eq!(p.case(), CrpCase::FiniteBlocks { k: 3 });
        assert_eq!(p.theta_over_alpha(), -3.0);
    }

    #[test]
    fn next_probs_examples() {
        let p = crp_validate(0.5, 0.5).unwrap();
        let (tables, fresh) = crp_next_probs(&p, &SeatingState::default()).unwrap();
        assert!(tables.is_empty());
        assert_eq!(fresh, 1.0);
        let (tables, fresh) = crp_next_probs(&p, &SeatingState::new(vec![1]).unwrap()).unwrap();
        assert!(close(tables[0], 1.0 / 3.0) && close(fresh, 2.0 / 3.0));

        let p = crp_validate(-1.0, 2.0).unwrap();
        let (tables, fresh) = crp_next_probs(&p, &SeatingState::new(vec![1, 1]).unwrap()).unwrap();
        assert_eq!(fresh, 0.0);
        assert!(close(tables.iter().sum::<f64>(), 1.0));
        assert!(crp_next_probs(&p, &SeatingState::new(vec![1, 1, 1]).unwrap()).is_err());
    }

    #[test]
    fn sample_small_cases() {
        let p = crp_validate(0.5, 0.5).unwrap();
        let mut rng = RandomSource::new(1);
        assert_eq!(crp_sample(&p, 0, &mut rng), Partition::empty());
        for _ in 0..100 {
            assert_eq!(crp_sample(&p, 1, &mut rng), part(&[&[1]]));
        }
        let n = 100_000;
        let joined = (0..n).filter(|_| crp_sample(&p, 2, &mut rng).num_blocks() == 1).count();
        let f = joined as f64 / n as f64;
        let se = (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
        assert!((f - 1.0 / 3.0).abs() < 3.0 * se, "{f}");
    }

    #[test]
    fn alpha_one_gives_singletons() {
        let p = crp_validate(1.0, 0.5).unwrap();
        let mut rng = RandomSource::new(2);
        for _ in 0..200 {
            let pi = crp_sample(&p, 12, &mut rng);
            assert_eq!(pi.num_blocks(), 12);
            assert_eq!(crp_table_sizes(&p, 12, &mut rng).num_tables(), 12);
        }
        let singles = Partition::from_assignment(&[0, 1, 2, 3]);
        assert!(close(ewens_pitman_log_pmf(&p, &singles).to_real(), 1.0));
    }

    #[test]
    fn finite_blocks_never_exceed_k() {
        let p = crp_validate(-0.7, 2.1).unwrap();
        let mut rng = RandomSource::new(3);
        for _ in 0..2000 {
            assert!(crp_sample(&p, 20, &mut rng).num_blocks() <= 3);
            assert!(crp_table_sizes(&p, 50, &mut rng).num_tables() <= 3);
        }
    }

    #[test]
    fn ewens_pitman_examples() {
        let p = crp_validate(0.5, 0.5).unwrap();
        assert!(close(ewens_pitman_log_pmf(&p, &part(&[&[1, 2]])).to_real(), 1.0 / 3.0));
        assert!(close(ewens_pitman_log_pmf(&p, &part(&[&[1], &[2]])).to_real(), 2.0 / 3.0));
        let p = crp_validate(-1.0, 2.0).unwrap();
        assert!(close(ewens_pitman_log_pmf(&p, &part(&[&[1, 2, 3]])).to_real(), 0.5));
        let z = ewens_pitman_log_pmf(&p, &part(&[&[1], &[2], &[3]]));
        assert!(z.is_zero());
    }

    #[test]
    fn ewens_and_theta_zero_examples() {
        assert!(close(ewens_log_pmf(1.0, &part(&[&[1, 2, 3]])).unwrap().to_real(), 1.0 / 3.0));
        let total: f64 = enumerate_partitions(3)
            .unwrap()
            .iter()
            .map(|pi| ewens_log_pmf(1.0, pi).unwrap().to_real())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
        for theta in [0.1, 1.0, 7.5] {
            assert!(close(ewens_log_pmf(theta, &part(&[&[1]])).unwrap().to_real(), 1.0));
        }
        assert!(ewens_log_pmf(0.0, &part(&[&[1]])).is_err());

        assert!(close(theta_zero_log_pmf(0.5, &part(&[&[1, 2]])).unwrap().to_real(), 0.5));
        let both = theta_zero_log_pmf(0.5, &part(&[&[1, 2]])).unwrap().to_real()
            + theta_zero_log_pmf(0.5, &part(&[&[1], &[2]])).unwrap().to_real();
        assert!(close(both, 1.0));
        assert!(close(theta_zero_log_pmf(0.3, &part(&[&[1]])).unwrap().to_real(), 1.0));
        assert!(theta_zero_log_pmf(0.0, &part(&[&[1]])).is_err());

        // theta = 0 and alpha = 0 parameters route to the special formulas.
        let p = crp_validate(0.5, 0.0).unwrap();
        assert!(close(ewens_pitman_log_pmf(&p, &part(&[&[1, 2]])).to_real(), 0.5));
        let p = crp_validate(0.0, 1.0).unwrap();
        assert!(close(ewens_pitman_log_pmf(&p, &part(&[&[1, 2, 3]])).to_real(), 1.0 / 3.0));
    }

    #[test]
    fn enumeration_counts() {
        let bell = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for (i, &b) in bell.iter().enumerate() {
            let all = enumerate_partitions(i + 1).unwrap();
            assert_eq!(all.len(), b);
            if i < 8 {
                let mut sorted = all.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), b);
                for pi in &all {
                    assert_eq!(&Partition::from_blocks(pi.blocks().to_vec()).unwrap(), pi);
                }
            }
        }
        assert_eq!(enumerate_partitions(1).unwrap(), vec![part(&[&[1]])]);
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(11).is_err());
    }

    #[test]
    fn partition_construction() {
        let pi = part(&[&[2], &[3, 1]]);
        assert_eq!(pi.to_one_based(), vec![vec![1, 3], vec![2]]);
        assert_eq!(pi.seating(), vec![0, 1, 0]);
        assert_eq!(Partition::from_assignment(&['b', 'a', 'b']), pi);
        assert!(Partition::from_one_based(vec![vec![1, 1]]).is_err());
        assert!(Partition::from_one_based(vec![vec![1, 3]]).is_err());
        assert!(Partition::from_one_based(vec![vec![0]]).is_err());
        assert!(Partition::from_one_based(vec![vec![1], vec![]]).is_err());
        let moved = pi.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(moved.to_one_based(), vec![vec![1], vec![2, 3]]);
        assert_eq!(serde_json::to_string(&pi).unwrap(), "[[1,3],[2]]");
        let back: Partition = serde_json::from_str("[[2],[1,3]]").unwrap();
        assert_eq!(back, pi);
    }
}
