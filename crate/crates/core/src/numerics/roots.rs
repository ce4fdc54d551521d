//! Bracketed root finding and scalar minimisation (Brent's methods).

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParams(format!("invalid root bracket [{lo}, {hi}]")));
        }
        Ok(RootBracket { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A root together with the final sign-changing bracket around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootEstimate {
    pub root: f64,
    pub bracket: RootBracket,
    pub iterations: usize,
}

/// Brent's method: inverse quadratic interpolation and secant steps with a
/// bisection fallback. On return `bracket` still straddles a sign change and
/// has width at most `tol` plus a few ulps of the root.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: RootBracket, tol: f64) -> Result<RootEstimate> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() || fa * fb > 0.0 {
        return Err(Error::Bracket { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    if fa == 0.0 {
        return Ok(RootEstimate { root: a, bracket: RootBracket { lo: a, hi: a }, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(RootEstimate { root: b, bracket: RootBracket { lo: b, hi: b }, iterations: 0 });
    }
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=MAX_ITER {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            let bracket = RootBracket { lo: b.min(c), hi: b.max(c) };
            return Ok(RootEstimate { root: b, bracket, iterations: iter });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::Convergence { what: "find_root", iterations: MAX_ITER })
}

/// A local minimiser on a bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimumEstimate {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Brent's minimiser (golden section with parabolic steps) on `[lo, hi]`.
/// Exact for unimodal `f`; otherwise returns a local minimum.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, bracket: RootBracket, tol: f64) -> Result<MinimumEstimate> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    if fx.is_nan() {
        return Err(Error::domain("minimize_scalar objective", x));
    }
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for iter in 1..=MAX_ITER {
        let m = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(MinimumEstimate { x, value: fx, iterations: iter });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(m - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::Convergence { what: "minimize_scalar", iterations: MAX_ITER })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn br(lo: f64, hi: f64) -> RootBracket {
        RootBracket::new(lo, hi).unwrap()
    }

    #[test]
    fn linear_root() {
        let r = find_root(|x| x - 2.0, br(0.0, 5.0), 1e-12).unwrap();
        assert_abs_diff_eq!(r.root, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_two() {
        let r = find_root(|x| x * x - 2.0, br(0.0, 2.0), 1e-13).unwrap();
        assert_abs_diff_eq!(r.root, 2.0_f64.sqrt(), epsilon = 1e-12);
        assert!(r.bracket.width() <= 1e-13 + 8.0 * f64::EPSILON);
    }

    #[test]
    fn cosine_root() {
        let r = find_root(f64::cos, br(1.0, 2.0), 1e-13).unwrap();
        assert_abs_diff_eq!(r.root, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn no_sign_change() {
        assert!(matches!(find_root(|x| x * x + 1.0, br(-1.0, 1.0), 1e-10), Err(Error::Bracket { .. })));
        assert!(RootBracket::new(1.0, 1.0).is_err());
    }

    #[test]
    fn minimiser_cases() {
        let m = minimize_scalar(|x| (x - 1.3).powi(2) + 0.5, br(-4.0, 4.0), 1e-10).unwrap();
        assert_abs_diff_eq!(m.x, 1.3, epsilon = 1e-8);
        assert_abs_diff_eq!(m.value, 0.5, epsilon = 1e-15);
        // Minimum at the boundary.
        let m = minimize_scalar(|x| x, br(2.0, 3.0), 1e-10).unwrap();
        assert!(m.x - 2.0 < 1e-6);
        let m = minimize_scalar(|x: f64| -x.sin(), br(0.0, 3.0), 1e-10).unwrap();
        assert_abs_diff_eq!(m.x, FRAC_PI_2, epsilon = 1e-7);
    }

    proptest::proptest! {
        #[test]
        fn bracket_keeps_sign_change(shift in -4.0f64..4.0, scale in 0.1f64..10.0, tol in 1e-12f64..1e-3) {
            let f = |x: f64| scale * (x - shift).powi(3) + 0.3 * (x - shift);
            let r = find_root(f, br(-5.0, 5.0), tol).unwrap();
            let (flo, fhi) = (f(r.bracket.lo), f(r.bracket.hi));
            proptest::prop_assert!(flo * fhi <= 0.0);
            proptest::prop_assert!(r.bracket.width() <= tol + 8.0 * f64::EPSILON * r.root.abs().max(1.0));
            proptest::prop_assert!(r.bracket.lo <= r.root && r.root <= r.bracket.hi);
        }
    }
}
