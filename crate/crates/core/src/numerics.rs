//! Small scalar root-finding helpers shared by the junction solvers.

use crate::error::{Error, Result};

pub(crate) const MAX_BISECTION_ITERS: usize = 200;

/// Bisection for a function that is `>= 0` at `lo` and `<= 0` at `hi`.
///
/// Returns the last point known to satisfy `f >= 0`, so callers that encode
/// feasibility as a non-negative residual always get a feasible answer.
/// Stops once the bracket is narrower than `x_tol` and the residual at the
/// returned point is within `f_tol`.
pub(crate) fn bisect_decreasing<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
    context: &'static str,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo < -f_tol || f_hi > f_tol {
        return Err(Error::Numerical {
            context,
            detail: format!("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}"),
        });
    }
    if f_hi >= 0.0 {
        return Ok(hi);
    }
    if f_lo <= 0.0 {
        return Ok(lo);
    }
    let mut f_best = f_lo;
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid >= 0.0 {
            lo = mid;
            f_best = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= x_tol && f_best <= f_tol {
            return Ok(lo);
        }
    }
    if f_best <= f_tol {
        Ok(lo)
    } else {
        Err(Error::Numerical {
            context,
            detail: format!(
                "bisection stalled after {MAX_BISECTION_ITERS} iterations on [{lo}, {hi}], residual {f_best}"
            ),
        })
    }
}

/// Plain bisection for a monotone function with a sign change, to machine precision.
pub(crate) fn bisect_root<F>(mut f: F, mut lo: f64, mut hi: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let increasing = f(hi) >= f(lo);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above = f(mid) >= 0.0;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_root() {
        let x = bisect_decreasing(|x| 2.0 - x, 0.0, 5.0, 1e-12, 1e-12, "t").unwrap();
        assert!((x - 2.0).abs() < 1e-12);
        assert!(2.0 - x >= 0.0);
    }

    #[test]
    fn endpoints_short_circuit() {
        assert_eq!(bisect_decreasing(|x| 1.0 - x, 0.0, 1.0, 1e-9, 1e-9, "t").unwrap(), 1.0);
        assert_eq!(bisect_decreasing(|x| -x, 0.0, 1.0, 1e-9, 1e-9, "t").unwrap(), 0.0);
    }

    #[test]
    fn missing_bracket_is_an_error() {
        let err = bisect_decreasing(|x| x + 1.0, 0.0, 1.0, 1e-9, 1e-9, "t").unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn plain_root_either_orientation() {
        let r = bisect_root(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        let r = bisect_root(|x| 2.0 - x * x, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }
}
