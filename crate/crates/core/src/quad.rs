//! Adaptive Simpson quadrature with interval bisection.

use crate::error::{Result, ZooError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        QuadTolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_depth: 48,
        }
    }
}

/// `∫_a^b f` to within `max(abs, rel·|I|)`. Works for `b < a` and returns
/// zero for an empty interval.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // a coarse first pass sets the relative target
    let target = tol.abs.max(tol.rel * whole.abs());
    let mut worst = 0.0f64;
    let value = recurse(&f, a, b, fa, fm, fb, whole, target, tol.max_depth, &mut worst);
    if worst > 0.0 {
        return Err(ZooError::QuadratureFailure { estimate: worst });
    }
    if !value.is_finite() {
        return Err(ZooError::QuadratureFailure { estimate: f64::INFINITY });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *worst = worst.max(delta.abs() / 15.0);
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_gaussian() {
        let t = QuadTolerance::default();
        assert!((adaptive_simpson(|x| x * x, 0.0, 1.0, t).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(adaptive_simpson(|x| x, 2.0, 2.0, t).unwrap(), 0.0);
        let rev = adaptive_simpson(|x| x * x, 1.0, 0.0, t).unwrap();
        assert!((rev + 1.0 / 3.0).abs() < 1e-14);
        // ∫_0^1 e^{-x^2} = √π/2 erf(1)
        let g = adaptive_simpson(|x| (-x * x).exp(), 0.0, 1.0, t).unwrap();
        assert!((g - 0.746_824_132_812_427).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_when_depth_is_exhausted() {
        let t = QuadTolerance {
            abs: 1e-14,
            rel: 0.0,
            max_depth: 3,
        };
        let r = adaptive_simpson(|x| (50.0 * x).sin(), 0.0, 3.0, t);
        assert!(matches!(r, Err(ZooError::QuadratureFailure { .. })));
    }
}
