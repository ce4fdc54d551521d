//! Gamma-family special functions and the normal / Student-t distribution
//! functions built on them.
//!
//! Everything that can underflow has a log-space variant; the probability
//! functions are evaluated in log space first and exponentiated last.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;
const CF_MAX_ITER: usize = 1000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("ln_gamma", x));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    // Shift to x >= 15 with the recurrence, then Stirling's series.
    let mut x = x;
    let mut prod = 1.0_f64;
    let mut ln_acc = 0.0_f64;
    while x < 15.0 {
        prod *= x;
        x += 1.0;
        if prod > 1e250 {
            ln_acc += prod.ln();
            prod = 1.0;
        }
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series - (ln_acc + prod.ln())
}

/// Digamma function psi(x) = d/dx ln Gamma(x) for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("digamma", x));
    }
    Ok(digamma_pos(x))
}

pub(crate) fn digamma_pos(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 / x - tail
}

/// `ln(1 - exp(v))` for `v <= 0`.
pub(crate) fn ln_1m_exp(v: f64) -> f64 {
    if v > -LN_2 {
        (-v.exp_m1()).ln()
    } else {
        (-v.exp()).ln_1p()
    }
}

/// Log of the regularized lower and upper incomplete gamma functions,
/// `(ln P(a, x), ln Q(a, x))`.
pub(crate) fn ln_gamma_inc(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x.is_infinite() {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_pre = a * x.ln() - x - ln_gamma_pos(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..CF_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * CF_EPS {
                break;
            }
        }
        let ln_p = ln_pre + sum.ln();
        (ln_p, ln_1m_exp(ln_p))
    } else {
        // Modified Lentz evaluation of the continued fraction for Q.
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=CF_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < CF_EPS {
                break;
            }
        }
        let ln_q = ln_pre + h.ln();
        (ln_1m_exp(ln_q), ln_q)
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Log of the regularized incomplete beta function `I_x(a, b)` and of its
/// complement. `y` must equal `1 - x` and is passed separately so callers
/// can supply it without cancellation. `ln_beta` is `ln B(a, b)`.
pub(crate) fn ln_beta_inc(a: f64, b: f64, x: f64, y: f64, ln_beta: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if y <= 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta;
    if x < (a + 1.0) / (a + b + 2.0) {
        let ln_i = ln_front + beta_cf(a, b, x).ln() - a.ln();
        (ln_i, ln_1m_exp(ln_i))
    } else {
        let ln_u = ln_front + beta_cf(b, a, y).ln() - b.ln();
        (ln_1m_exp(ln_u), ln_u)
    }
}

/// Standard normal log density.
#[inline]
pub fn normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal log cdf, accurate deep into the lower tail.
pub fn normal_ln_cdf(z: f64) -> f64 {
    if z == 0.0 {
        return -LN_2;
    }
    if z.is_infinite() {
        return if z > 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let (_, ln_q) = ln_gamma_inc(0.5, 0.5 * z * z);
    if z < 0.0 {
        ln_q - LN_2
    } else {
        ln_1m_exp(ln_q - LN_2)
    }
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    normal_ln_cdf(z).exp()
}

/// Student-t distribution with `nu` degrees of freedom and its
/// precomputed normalising constants. `nu = inf` is the standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    nu: f64,
    ln_norm: f64,
    ln_beta: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::domain("student-t degrees of freedom", nu));
        }
        if nu.is_infinite() {
            return Ok(StudentT { nu, ln_norm: -LN_SQRT_2PI, ln_beta: 0.0 });
        }
        let half = 0.5 * nu;
        let lg_half = ln_gamma_pos(half);
        let lg_half1 = ln_gamma_pos(half + 0.5);
        Ok(StudentT {
            nu,
            ln_norm: lg_half1 - lg_half - 0.5 * (nu * PI).ln(),
            ln_beta: lg_half + LN_SQRT_PI - lg_half1,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.nu.is_infinite() {
            return normal_ln_pdf(x);
        }
        self.ln_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn ln_cdf(&self, x: f64) -> f64 {
        if self.nu.is_infinite() {
            return normal_ln_cdf(x);
        }
        if x == 0.0 {
            return -LN_2;
        }
        if x.is_infinite() {
            return if x > 0.0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let x2 = x * x;
        let r = self.nu / x2;
        // xb = nu / (nu + x^2), yb = x^2 / (nu + x^2)
        let (xb, yb) = if r.is_finite() { (r / (1.0 + r), 1.0 / (1.0 + r)) } else { (1.0, 0.0) };
        let (ln_i, _) = ln_beta_inc(0.5 * self.nu, 0.5, xb, yb, self.ln_beta);
        let ln_tail = ln_i - LN_2;
        if x < 0.0 {
            ln_tail
        } else {
            ln_1m_exp(ln_tail)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.ln_cdf(x).exp()
    }
}

/// Student-t density with `nu` degrees of freedom.
pub fn student_t_pdf(x: f64, nu: f64) -> Result<f64> {
    Ok(StudentT::new(nu)?.pdf(x))
}

/// Student-t cumulative distribution function.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64> {
    Ok(StudentT::new(nu)?.cdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(2.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(0.5).unwrap(), PI.sqrt().ln(), epsilon = 1e-14);
        // ln(199!) from the exact factorial via a sum of logs.
        let exact: f64 = (1..200).map(|k| (k as f64).ln()).sum();
        assert_abs_diff_eq!(ln_gamma(200.0).unwrap(), exact, epsilon = 1e-11);
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.5).is_err());
    }

    #[test]
    fn ln_gamma_recurrence() {
        let mut x = 0.5;
        while x < 200.0 {
            let lhs = ln_gamma(x + 1.0).unwrap() - ln_gamma(x).unwrap();
            assert_abs_diff_eq!(lhs, x.ln(), epsilon = 1e-12);
            x += 0.37;
        }
    }

    #[test]
    fn digamma_identities() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-13);
        assert_abs_diff_eq!(digamma(2.0).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-13);
        // psi(1/2) = -gamma - 2 ln 2
        assert_abs_diff_eq!(digamma(0.5).unwrap(), -EULER_GAMMA - 2.0 * LN_2, epsilon = 1e-13);
        let big = digamma(1e6).unwrap();
        assert!(((big - 1e6_f64.ln()) / 1e6_f64.ln()).abs() < 1e-6);
        assert!(digamma(0.0).is_err());
        let mut x = 0.1;
        while x <= 100.0 {
            assert_abs_diff_eq!(digamma(x + 1.0).unwrap() - digamma(x).unwrap(), 1.0 / x, epsilon = 1e-10);
            x += 0.173;
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(-1.96), 0.024_997_895_148_220_43, epsilon = 1e-15);
        // Mills-ratio asymptotics deep in the tail: ln Phi(-z) ~ ln phi(z) - ln z.
        let z = 40.0;
        let approx = normal_ln_pdf(z) - z.ln() + (-1.0 / (z * z) + 3.0 / z.powi(4)).ln_1p();
        assert_abs_diff_eq!(normal_ln_cdf(-z), approx, epsilon = 1e-7);
        assert!(normal_ln_cdf(-40.0).is_finite());
    }

    #[test]
    fn student_t_basics() {
        for &nu in &[0.7, 1.0, 3.0, 30.0] {
            let t = StudentT::new(nu).unwrap();
            let mode = (ln_gamma_pos((nu + 1.0) / 2.0) - ln_gamma_pos(nu / 2.0)).exp() / (nu * PI).sqrt();
            assert_abs_diff_eq!(t.pdf(0.0), mode, epsilon = 1e-14);
            assert_abs_diff_eq!(t.cdf(0.0), 0.5, epsilon = 1e-16);
            assert_abs_diff_eq!(t.pdf(1.3), t.pdf(-1.3), epsilon = 1e-16);
            assert_abs_diff_eq!(t.cdf(1.3) + t.cdf(-1.3), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(t.cdf(f64::INFINITY), 1.0);
            assert_abs_diff_eq!(t.cdf(f64::NEG_INFINITY), 0.0);
        }
        assert!(StudentT::new(0.0).is_err());
        assert!(student_t_cdf(1.0, -2.0).is_err());
    }

    #[test]
    fn student_t_closed_forms() {
        // Cauchy: 1/2 + atan(x)/pi; nu = 2: 1/2 + x / (2 sqrt(2 + x^2)).
        for &x in &[-30.0, -2.5, -0.3, 0.01, 1.0, 4.0, 100.0] {
            let cauchy = 0.5 + f64::atan(x) / PI;
            assert_abs_diff_eq!(student_t_cdf(x, 1.0).unwrap(), cauchy, epsilon = 1e-13);
            let two = 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
            assert_abs_diff_eq!(student_t_cdf(x, 2.0).unwrap(), two, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(student_t_cdf(1.0, 1.0).unwrap(), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn student_t_log_cdf_far_tail() {
        // T_nu(-x) ~ C x^{-nu} for large x, with
        // C = Gamma((nu+1)/2) nu^{nu/2 - 1} / (sqrt(pi) Gamma(nu/2)).
        let nu = 30.0;
        let t = StudentT::new(nu).unwrap();
        let x: f64 = 1e12;
        let ln_c = ln_gamma_pos((nu + 1.0) / 2.0) + (0.5 * nu - 1.0) * nu.ln() - LN_SQRT_PI - ln_gamma_pos(nu / 2.0);
        let expected = ln_c - nu * x.ln();
        assert!(expected < -700.0);
        assert_abs_diff_eq!(t.ln_cdf(-x), expected, epsilon = 1e-9);
    }

    #[test]
    fn incomplete_gamma_complements() {
        for &(a, x) in &[(0.5, 0.1), (0.5, 3.0), (2.0, 1.0), (10.0, 15.0), (3.3, 0.4)] {
            let (lp, lq) = ln_gamma_inc(a, x);
            assert_abs_diff_eq!(lp.exp() + lq.exp(), 1.0, epsilon = 1e-14);
        }
        // P(1, x) = 1 - e^{-x}
        let (lp, _) = ln_gamma_inc(1.0, 0.7);
        assert_abs_diff_eq!(lp.exp(), 1.0 - (-0.7_f64).exp(), epsilon = 1e-14);
    }
}
