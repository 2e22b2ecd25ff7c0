//! Double-exponential quadrature for the correlation-function checks.
//!
//! The underlying rule truncates its node set about 1e-13 short of each
//! endpoint, which loses visible mass next to `x^(-a)` singularities. Singular
//! ends are therefore split into dyadic pieces `[2^(-j-1), 2^(-j)]`, each of
//! which is smooth, down to the bottom of the normal f64 range.

use std::cell::RefCell;

use crate::error::{Error, Result};

const TARGET_ERR: f64 = 1e-13;
// Headroom over the target before the rule's own estimate is treated as a failure.
const ACCEPT_ERR: f64 = 1e-9;
const DYADIC_LEVELS: i32 = 1020;
// Stop splitting once this many consecutive pieces contribute nothing visible.
const QUIET_PIECES: usize = 64;

fn checked(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let out = quadrature::integrate(f, a, b, TARGET_ERR);
    if !out.integral.is_finite() || out.error_estimate > ACCEPT_ERR {
        return Err(Error::Domain(format!(
            "quadrature did not converge on [{a}, {b}]: estimate {} ± {}",
            out.integral, out.error_estimate
        )));
    }
    Ok((out.integral, out.error_estimate))
}

/// `∫_a^b f` for an integrand that is bounded and smooth on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    checked(f, a, b).map(|(v, _)| v)
}

/// `∫_0^h f(t) dt` allowing an integrable singularity at `t = 0`.
fn integrate_from_singular_zero(f: &impl Fn(f64) -> f64, h: f64) -> Result<f64> {
    let (mut total, mut err) = (0.0, 0.0);
    let mut quiet = 0;
    for j in 0..DYADIC_LEVELS {
        let hi = h * 0.5f64.powi(j);
        let (piece, e) = checked(f, 0.5 * hi, hi)?;
        total += piece;
        err += e;
        quiet = if piece.abs() <= 1e-18 * total.abs().max(f64::MIN_POSITIVE) { quiet + 1 } else { 0 };
        if quiet >= QUIET_PIECES {
            break;
        }
    }
    if err > ACCEPT_ERR {
        return Err(Error::Domain(format!("singular quadrature error estimate {err}")));
    }
    Ok(total)
}

/// `∫_0^1 f(x, 1 - x)` where the integrand receives both `x` and `1 - x`.
///
/// Each half of the interval is integrated in the variable that is small
/// there, so the argument next to an endpoint is exact instead of a rounded
/// `1 - x`; both endpoints may carry integrable singularities.
pub fn integrate_unit(f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let left = integrate_from_singular_zero(&|t| f(t, 1.0 - t), 0.5)?;
    let right = integrate_from_singular_zero(&|t| f(1.0 - t, t), 0.5)?;
    Ok(left + right)
}

/// `∫∫ f(x, y)` over the open simplex `{x, y > 0, x + y < 1}`.
///
/// Integrates in `x = u², y = v²` over the quarter disk, which turns the
/// `x^(-alpha)` corner behaviour of correlation densities into smooth
/// integrands.
pub fn integrate_simplex2(f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let failure = RefCell::new(None);
    let outer = |u: f64| {
        let top = (1.0 - u * u).max(0.0).sqrt();
        match integrate(|v| 4.0 * u * v * f(u * u, v * v), 0.0, top) {
            Ok(inner) => inner,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let total = quadrature::integrate(outer, 0.0, 1.0, TARGET_ERR);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if !total.integral.is_finite() || total.error_estimate > ACCEPT_ERR {
        return Err(Error::Domain(format!(
            "simplex quadrature did not converge: estimate {} ± {}",
            total.integral, total.error_estimate
        )));
    }
    Ok(total.integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_interval() {
        assert!((integrate(|x| x * x, 0.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn unit_interval_singular_at_both_ends() {
        // Beta(1/2, 1/2) normaliser is π.
        let v = integrate_unit(|x, xbar| (x * xbar).powf(-0.5)).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12, "{v}");
        // x^(-0.9) integrates to 10.
        let v = integrate_unit(|x, _| x.powf(-0.9)).unwrap();
        assert!((v - 10.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn simplex_area_and_moments() {
        assert!((integrate_simplex2(|_, _| 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((integrate_simplex2(|x, y| x * y).unwrap() - 1.0 / 24.0).abs() < 1e-12);
        // Dirichlet(1/2, 1/2, 1) normaliser: B = Γ(1/2)²Γ(1)/Γ(2) = π.
        let v = integrate_simplex2(|x, y| (x * y).powf(-0.5)).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-10, "{v}");
    }
}
