//! Sign-tracked log-space kernels for the factorial family.
//!
//! Every closed-form law in this crate is a ratio of products of rising or
//! falling factorials at real (often negative) arguments. Those products are
//! carried as [`SignedLogValue`]s and only exponentiated at the very end.

use std::fmt;
use std::ops::{Div, Mul, Neg};

use crate::error::{Error, Result};

/// Above this many factors the positive-argument path switches from an
/// explicit product to a log-gamma difference.
const DIRECT_PRODUCT_MAX: u64 = 256;

/// A real number stored as a sign and the natural log of its magnitude.
///
/// `sign == 0` encodes an exact zero; `logmag` is then meaningless and kept at
/// negative infinity.
#[derive(Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    sign: i8,
    logmag: f64,
}

impl SignedLogValue {
    pub const ZERO: Self = Self {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };
    pub const ONE: Self = Self {
        sign: 1,
        logmag: 0.0,
    };

    /// Builds a value from its parts. A zero sign discards `logmag`.
    pub fn new(sign: i8, logmag: f64) -> Self {
        match sign.signum() {
            0 => Self::ZERO,
            s => Self { sign: s, logmag },
        }
    }

    pub fn from_real(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                logmag: x.abs().ln(),
            }
        }
    }

    /// A positive value given by its logarithm.
    pub fn from_ln(ln: f64) -> Self {
        Self { sign: 1, logmag: ln }
    }

    pub fn to_real(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.logmag.exp(),
        }
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn logmag(self) -> f64 {
        self.logmag
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Natural log of the value: `-inf` for zero, NaN for negative values.
    pub fn ln(self) -> f64 {
        match self.sign {
            1 => self.logmag,
            0 => f64::NEG_INFINITY,
            _ => f64::NAN,
        }
    }

    pub fn abs(self) -> Self {
        Self {
            sign: self.sign.abs(),
            logmag: self.logmag,
        }
    }

    pub fn recip(self) -> Option<Self> {
        match self.sign {
            0 => None,
            s => Some(Self {
                sign: s,
                logmag: -self.logmag,
            }),
        }
    }

    pub fn checked_div(self, rhs: Self) -> Option<Self> {
        rhs.recip().map(|r| self * r)
    }

    /// Integer power; `powi(0)` is one, including for zero.
    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return if k > 0 {
                Self::ZERO
            } else {
                Self::new(1, f64::INFINITY)
            };
        }
        let sign = if self.sign < 0 && k % 2 != 0 { -1 } else { 1 };
        Self {
            sign,
            logmag: self.logmag * f64::from(k),
        }
    }
}

impl Mul for SignedLogValue {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let sign = self.sign * rhs.sign;
        if sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign,
                logmag: self.logmag + rhs.logmag,
            }
        }
    }
}

/// Panics on division by an exact zero; use [`SignedLogValue::checked_div`]
/// where the denominator can vanish.
impl Div for SignedLogValue {
    type Output = Self;

    fn div(self, rhs: Self) -> Self {
        self.checked_div(rhs)
            .expect("division by an exact zero in signed-log space")
    }
}

impl Neg for SignedLogValue {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }
}

impl std::iter::Product for SignedLogValue {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ONE, |acc, v| acc * v)
    }
}

impl fmt::Debug for SignedLogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "SignedLogValue(0)"),
            1 => write!(f, "SignedLogValue(+exp({}))", self.logmag),
            _ => write!(f, "SignedLogValue(-exp({}))", self.logmag),
        }
    }
}

/// Log-gamma of a positive real.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma called at non-positive {x}");
    libm::lgamma(x)
}

pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// `ln(x (x+1) ... (x+n-1))` for `x > 0`.
fn ln_rising_positive(x: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n > DIRECT_PRODUCT_MAX {
        return libm::lgamma(x + n as f64) - libm::lgamma(x);
    }
    // Multiply in f64 and flush to the log accumulator before the running
    // product leaves the normal range.
    let mut acc = 1.0_f64;
    let mut log = 0.0_f64;
    for j in 0..n {
        acc *= x + j as f64;
        if !(1e-280..=1e280).contains(&acc) {
            log += acc.ln();
            acc = 1.0;
        }
    }
    log + acc.ln()
}

/// Rising factorial `x (x+1) ... (x+n-1)`; `rising(x, 0) = 1`.
///
/// Factors are formed as `x + j` in floating point and a factor that is
/// exactly zero makes the result an exact zero.
pub fn rising(x: f64, n: u64) -> SignedLogValue {
    if n == 0 {
        return SignedLogValue::ONE;
    }
    if x > 0.0 {
        return SignedLogValue::from_ln(ln_rising_positive(x, n));
    }
    // Non-positive leading factors one at a time; the tail is all positive.
    let mut sign = 1_i8;
    let mut logmag = 0.0;
    let mut j = 0_u64;
    while j < n {
        let factor = x + j as f64;
        if factor == 0.0 {
            return SignedLogValue::ZERO;
        }
        if factor > 0.0 {
            break;
        }
        sign = -sign;
        logmag += (-factor).ln();
        j += 1;
    }
    if j < n {
        logmag += ln_rising_positive(x + j as f64, n - j);
    }
    SignedLogValue::new(sign, logmag)
}

/// Falling factorial `x (x-1) ... (x-n+1)`, evaluated as `(-1)^n rising(-x, n)`.
pub fn falling(x: f64, n: u64) -> SignedLogValue {
    let r = rising(-x, n);
    if n % 2 == 1 {
        -r
    } else {
        r
    }
}

/// Generalized binomial coefficient `falling(x, m) / m!`.
pub fn gen_binom(x: f64, m: u64) -> SignedLogValue {
    let f = falling(x, m);
    if f.is_zero() {
        return f;
    }
    SignedLogValue::new(f.sign(), f.logmag() - ln_factorial(m))
}

fn check_gamma_args(m: f64, r: f64, s: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("m must be a positive finite real, got {m}")));
    }
    if !(m + r > 0.0) || !(m + s > 0.0) {
        return Err(Error::Domain(format!(
            "Gamma arguments m+r={} and m+s={} must be positive",
            m + r,
            m + s
        )));
    }
    Ok(())
}

/// Large-`m` approximation `m^(r-s)` of `Gamma(m+r)/Gamma(m+s)`.
pub fn gamma_ratio_asymptotic(m: f64, r: f64, s: f64) -> Result<f64> {
    check_gamma_args(m, r, s)?;
    Ok(m.powf(r - s))
}

/// `Gamma(m+r)/Gamma(m+s)` through log-gamma, the reference that
/// [`gamma_ratio_asymptotic`] approximates.
pub fn gamma_ratio(m: f64, r: f64, s: f64) -> Result<f64> {
    check_gamma_args(m, r, s)?;
    Ok((libm::lgamma(m + r) - libm::lgamma(m + s)).exp())
}
