//! Seeded randomness and the base continuous distributions.
//!
//! Every sampler takes its generator from the caller. [`RandomSource`] is the
//! generator used throughout the crate: xoshiro256++ seeded from a `u64`
//! through SplitMix64, which gives the same stream on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Gamma};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Sum-to-one tolerance for [`SimplexVector`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Redraw budget for draws that underflow to a boundary of the support.
const MAX_REDRAWS: usize = 64;

/// Reproducible random generator created from a 64-bit seed.
#[derive(Clone, Debug)]
pub struct RandomSource {
    inner: Xoshiro256PlusPlus,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Independent source for stream `index` under `master`.
    ///
    /// Replicas and suite checks each get their own stream so that results
    /// do not depend on scheduling order.
    pub fn derive(master: u64, index: u64) -> Self {
        Self::new(derive_seed(master, index))
    }
}

/// Mixes a master seed and a stream index into a new seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x6a09_e667_f3bc_c909)))
}

/// Runs `f` once per replica in parallel, replica `r` drawing from
/// `RandomSource::derive(master, r)`; results are in replica order, so the
/// output does not depend on the thread count.
pub fn replicate<T: Send>(master: u64, reps: usize, f: impl Fn(&mut RandomSource) -> T + Sync) -> Vec<T> {
    (0..reps)
        .into_par_iter()
        .map(|r| f(&mut RandomSource::derive(master, r as u64)))
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// A probability vector: non-negative entries summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("simplex vector"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Domain(format!("simplex entry {w} is not a finite non-negative real")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!("simplex entries sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(s: SimplexVector) -> Self {
        s.0
    }
}

impl std::ops::Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_shape(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be a positive finite real, got {v}")))
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(invalid("alphas must be non-empty"));
    }
    alphas.iter().try_for_each(|&a| check_shape("alpha", a))
}

/// One draw from Gamma(shape, scale 1).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    check_shape("shape", shape)?;
    let g = Gamma::new(shape, 1.0).map_err(|e| invalid(e.to_string()))?;
    Ok(g.sample(rng))
}

/// One draw from Beta(a, b) as `Z_a / (Z_a + Z_b)` with independent Gamma
/// variates. Draws that underflow onto 0 or 1 are redrawn.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    check_shape("a", a)?;
    check_shape("b", b)?;
    let ga = Gamma::new(a, 1.0).map_err(|e| invalid(e.to_string()))?;
    let gb = Gamma::new(b, 1.0).map_err(|e| invalid(e.to_string()))?;
    let mut x = f64::NAN;
    for _ in 0..MAX_REDRAWS {
        let za = ga.sample(rng);
        let zb = gb.sample(rng);
        x = za / (za + zb);
        if x > 0.0 && x < 1.0 {
            return Ok(x);
        }
    }
    // Only reachable for shapes so small that the law is numerically a point
    // mass at an endpoint.
    Ok(if x.is_nan() { 0.5 } else { x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON) })
}

/// Dirichlet draw from normalized independent Gamma variates.
pub fn sample_dirichlet_gamma<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<SimplexVector> {
    check_alphas(alphas)?;
    if alphas.len() == 1 {
        return SimplexVector::new(vec![1.0]);
    }
    let gammas = alphas
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    for _ in 0..MAX_REDRAWS {
        let z: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let total: f64 = z.iter().sum();
        if total > 0.0 && total.is_finite() {
            return SimplexVector::new(z.into_iter().map(|v| v / total).collect());
        }
    }
    Err(Error::Domain("every Gamma component underflowed to zero".into()))
}

/// Dirichlet draw by stick breaking: `W_i ~ Beta(alpha_i, alpha_{i+1} + ... + alpha_k)`,
/// `X_i = W_i (1 - W_1) ... (1 - W_{i-1})`, and the last coordinate takes the
/// remaining stick.
pub fn sample_dirichlet_stick<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<SimplexVector> {
    check_alphas(alphas)?;
    let k = alphas.len();
    // tails[i] = alpha_{i+1} + ... + alpha_k
    let mut tails = vec![0.0; k];
    for i in (0..k - 1).rev() {
        tails[i] = tails[i + 1] + alphas[i + 1];
    }
    let mut remaining = 1.0;
    let mut x = Vec::with_capacity(k);
    for (&a, &tail) in alphas[..k - 1].iter().zip(&tails) {
        let w = sample_beta(a, tail, rng)?;
        x.push(w * remaining);
        remaining *= 1.0 - w;
    }
    x.push(remaining);
    // Rounding in the running product can leave the sum a few ulps off.
    let total: f64 = x.iter().sum();
    SimplexVector::new(x.into_iter().map(|v| v / total).collect())
}

/// Inverse-CDF index draw over non-negative weights with the given total.
///
/// Leftover mass from rounding goes to the last index with positive weight.
pub(crate) fn draw_weighted<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn sample_categorical<R: Rng + ?Sized>(weights: &SimplexVector, rng: &mut R) -> usize {
    draw_weighted(weights.as_slice(), 1.0, rng)
}
