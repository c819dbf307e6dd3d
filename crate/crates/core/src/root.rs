//! Scalar root finding on a sign-changing bracket.

use crate::error::{Error, Result};

/// Absolute tolerance on the abscissa used throughout the crate.
pub const ROOT_TOL: f64 = 1e-12;

const MAX_ITER: usize = 400;

/// Safeguarded Newton iteration.
///
/// `eval` returns `(h(x), h'(x))`. The bracket `[lo, hi]` must contain a sign
/// change of `h`. Newton steps that leave the current bracket (or that are not
/// finite) are replaced by a bisection step, so convergence is guaranteed for
/// any continuous `h`.
pub fn newton_bisect<F>(eval: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (h_lo, _) = eval(lo);
    let (h_hi, _) = eval(hi);
    if h_lo == 0.0 {
        return Ok(lo);
    }
    if h_hi == 0.0 {
        return Ok(hi);
    }
    if h_lo.signum() == h_hi.signum() || h_lo.is_nan() || h_hi.is_nan() {
        return Err(Error::NoConvergence("bracket has no sign change"));
    }
    let lo_negative = h_lo < 0.0;

    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (h, dh) = eval(x);
        if h == 0.0 {
            return Ok(x);
        }
        if (h < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }

        let newton = x - h / dh;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= tol || (hi - lo) <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence("iteration limit reached"))
}

/// Plain bisection for functions without a usable derivative.
pub fn bisect<F>(h: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let h_lo = h(lo);
    let h_hi = h(hi);
    if h_lo == 0.0 {
        return Ok(lo);
    }
    if h_hi == 0.0 {
        return Ok(hi);
    }
    if h_lo.signum() == h_hi.signum() || h_lo.is_nan() || h_hi.is_nan() {
        return Err(Error::NoConvergence("bracket has no sign change"));
    }
    let lo_negative = h_lo < 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let v = h(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if (v < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt_two() {
        let r = newton_bisect(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, ROOT_TOL).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_survives_flat_derivative() {
        // h'(0) = 0 would send a pure Newton step to infinity.
        let r = newton_bisect(|x| (x.powi(3) - 0.001, 3.0 * x * x), -1.0, 1.0, ROOT_TOL).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn decreasing_function() {
        let r = newton_bisect(|x| (1.0 - x, -1.0), 0.0, 3.0, ROOT_TOL).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, ROOT_TOL).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        assert!(newton_bisect(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, ROOT_TOL).is_err());
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, ROOT_TOL).is_err());
    }
}
