//! Bracketed scalar root finders for monotone constraints.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Root of an increasing function `f` on `[lo, hi]` by bisection.
///
/// Stops when `|f| <= tol` or the bracket collapses to machine precision.
pub fn bisect_increasing<T: Real>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    tol: T,
    max_iter: usize,
) -> Result<T> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo > T::zero() || fhi < T::zero() {
        return Err(Error::NoBracket(format!(
            "f(lo) = {flo:?}, f(hi) = {fhi:?} do not straddle zero"
        )));
    }
    let half = lit::<T>(0.5);
    let mut best = (lo, flo.abs().min(fhi.abs()));
    for _ in 0..max_iter {
        let mid = lo + (hi - lo) * half;
        let fm = f(mid);
        if fm.abs() < best.1 || best.1 > tol {
            best = (mid, fm.abs());
        }
        if fm.abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if fm < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 <= tol {
        Ok(best.0)
    } else {
        Err(Error::NoConvergence(format!("residual {:?} above tolerance {:?}", best.1, tol)))
    }
}

/// Safeguarded Newton iteration for an increasing function on `[lo, hi]`.
/// `f` returns the value and the derivative. Falls back to bisection when a
/// Newton step leaves the bracket.
pub fn newton_increasing<T: Real>(
    mut f: impl FnMut(T) -> (T, T),
    mut lo: T,
    mut hi: T,
    tol: T,
    max_iter: usize,
) -> Result<T> {
    let half = lit::<T>(0.5);
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo > T::zero() || fhi < T::zero() {
        return Err(Error::NoBracket(format!(
            "f(lo) = {flo:?}, f(hi) = {fhi:?} do not straddle zero"
        )));
    }
    let mut x = lo + (hi - lo) * half;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        x = if dfx > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            lo + (hi - lo) * half
        };
        if hi - lo <= T::default_epsilon() * (lo.abs() + hi.abs()) {
            let (fx, _) = f(x);
            return if fx.abs() <= tol {
                Ok(x)
            } else {
                Err(Error::NoConvergence(format!("bracket collapsed with residual {fx:?}")))
            };
        }
    }
    Err(Error::NoConvergence(format!("no convergence after {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_cube_root() {
        let r = bisect_increasing(|x: f64| x * x * x - 2.0, 0.0, 2.0, 1e-13, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_finds_root_and_rejects_bad_bracket() {
        let r = newton_increasing(|x: f64| (x.exp() - 3.0, x.exp()), -5.0, 5.0, 1e-14, 100).unwrap();
        assert!((r - 3f64.ln()).abs() < 1e-13);
        assert!(newton_increasing(|x: f64| (x, 1.0), 1.0, 2.0, 1e-12, 10).is_err());
    }
}
