//! The Azzalini skew-t distribution ST(xi, sigma^2, lambda, nu).
//!
//! Density
//! `f(e) = (2 / sigma) t_nu(eta) T_{nu+1}(lambda eta sqrt((nu + 1) / (eta^2 + nu)))`
//! with `eta = e / sigma`. A skew-t variate has the hierarchical form
//!
//! ```text
//! y | gamma, tau ~ N(xi + alpha gamma, kappa^2 / tau)
//! gamma | tau    ~ TN(0, 1 / tau; (0, inf))
//! tau            ~ Gamma(nu / 2, nu / 2)
//! ```
//!
//! with `alpha = sigma delta`, `kappa^2 = sigma^2 (1 - delta^2)` and
//! `delta = lambda / sqrt(1 + lambda^2)`. The conditional moments of the
//! latent `(gamma, tau)` given `y` drive the E-step of the fitting engine.
//!
//! `nu = f64::INFINITY` is accepted everywhere and selects the skew-normal
//! closed forms (`tau` degenerate at one).

use std::f64::consts::{LN_2, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with_error, QuadratureSpec};
use crate::numerics::sampling::{sample_gamma, sample_normal, sample_truncated_normal_positive};
use crate::numerics::special::{digamma_pos, ln_gamma_pos, normal_ln_cdf, normal_ln_pdf, StudentT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewT {
    pub location: f64,
    pub sigma2: f64,
    pub lambda: f64,
    pub nu: f64,
}

/// The `(delta, alpha, kappa^2)` reparameterisation of a skew-t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTDerived {
    pub delta: f64,
    pub alpha: f64,
    pub kappa2: f64,
}

impl SkewT {
    pub fn new(location: f64, sigma2: f64, lambda: f64, nu: f64) -> Result<Self> {
        check_params(sigma2, lambda, nu)?;
        if !location.is_finite() {
            return Err(Error::domain("skew-t location", location));
        }
        Ok(SkewT { location, sigma2, lambda, nu })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn derived(&self) -> SkewTDerived {
        let delta = delta_of(self.lambda);
        SkewTDerived {
            delta,
            alpha: self.sigma() * delta,
            kappa2: self.sigma2 / (1.0 + self.lambda * self.lambda),
        }
    }
}

fn check_params(sigma2: f64, lambda: f64, nu: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::domain("skew-t scale sigma^2", sigma2));
    }
    if !lambda.is_finite() {
        return Err(Error::domain("skew-t skewness lambda", lambda));
    }
    if !(nu > 0.0) {
        return Err(Error::domain("skew-t degrees of freedom", nu));
    }
    Ok(())
}

/// `delta = lambda / sqrt(1 + lambda^2)`.
pub fn delta_of(lambda: f64) -> f64 {
    lambda / lambda.mul_add(lambda, 1.0).sqrt()
}

/// Inverse of [`delta_of`] for `|delta| < 1`.
pub fn lambda_of(delta: f64) -> f64 {
    delta / ((1.0 - delta) * (1.0 + delta)).sqrt()
}

/// Conditional moments of the latent scale `tau` and skewing variable
/// `gamma` given one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondMoments {
    /// E(tau | y)
    pub tau: f64,
    /// E(gamma tau | y)
    pub gamma_tau: f64,
    /// E(gamma^2 tau | y)
    pub gamma2_tau: f64,
    /// E(log tau | y); zero when `nu` is infinite.
    pub log_tau: f64,
}

/// A skew-t with its normalising constants cached, for repeated evaluation
/// at many points.
#[derive(Debug, Clone)]
pub struct SkewTKernel {
    params: SkewT,
    sigma: f64,
    ln_sigma: f64,
    delta: f64,
    // 1 - delta^2
    one_m_delta2: f64,
    t_nu: StudentT,
    t_nu1: StudentT,
    t_nu3: StudentT,
    // digamma((nu + 1) / 2), ln Gamma((nu + 1) / 2)
    dg_half1: f64,
    lg_half1: f64,
    quad: QuadratureSpec,
}

impl SkewTKernel {
    pub fn new(params: SkewT) -> Result<Self> {
        check_params(params.sigma2, params.lambda, params.nu)?;
        let nu = params.nu;
        let sigma = params.sigma();
        let finite = nu.is_finite();
        Ok(SkewTKernel {
            params,
            sigma,
            ln_sigma: sigma.ln(),
            delta: delta_of(params.lambda),
            one_m_delta2: 1.0 / params.lambda.mul_add(params.lambda, 1.0),
            t_nu: StudentT::new(nu)?,
            t_nu1: StudentT::new(nu + 1.0)?,
            t_nu3: StudentT::new(nu + 3.0)?,
            dg_half1: if finite { digamma_pos(0.5 * (nu + 1.0)) } else { 0.0 },
            lg_half1: if finite { ln_gamma_pos(0.5 * (nu + 1.0)) } else { 0.0 },
            quad: QuadratureSpec { abs_tol: 1e-11, rel_tol: 1e-10, max_subdivisions: 100 },
        })
    }

    pub fn params(&self) -> &SkewT {
        &self.params
    }

    /// Standardised residual `eta = (y - xi) / sigma`.
    fn eta(&self, y: f64) -> f64 {
        (y - self.params.location) / self.sigma
    }

    /// Argument of the skewing cdf, `lambda eta sqrt((nu + 1) / (eta^2 + nu))`.
    fn skew_arg(&self, eta: f64) -> f64 {
        let nu = self.params.nu;
        self.params.lambda * eta * ((nu + 1.0) / (eta * eta + nu)).sqrt()
    }

    /// `ln(sigma f(y))`, the log density on the standardised scale.
    fn ln_std_density(&self, eta: f64) -> (f64, f64) {
        if self.params.nu.is_infinite() {
            let ln_cdf = normal_ln_cdf(self.params.lambda * eta);
            (LN_2 + normal_ln_pdf(eta) + ln_cdf, ln_cdf)
        } else {
            let ln_cdf = self.t_nu1.ln_cdf(self.skew_arg(eta));
            (LN_2 + self.t_nu.ln_pdf(eta) + ln_cdf, ln_cdf)
        }
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        self.ln_std_density(self.eta(y)).0 - self.ln_sigma
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    /// E(tau | y), E(gamma tau | y), E(gamma^2 tau | y) and, when
    /// `with_log_tau`, E(log tau | y).
    pub fn moments(&self, y: f64, with_log_tau: bool) -> Result<CondMoments> {
        let eta = self.eta(y);
        let nu = self.params.nu;
        let lambda = self.params.lambda;
        let delta = self.delta;
        let (ln_sf, ln_skew_cdf) = self.ln_std_density(eta);
        if !ln_sf.is_finite() {
            return Err(Error::DegenerateLikelihood { observation: 0 });
        }
        if nu.is_infinite() {
            let s = self.one_m_delta2.sqrt();
            let z = lambda * eta;
            let (gamma, gamma2) = if z < -5.0 {
                // Far lower tail: z + phi(z)/Phi(z) via the Laplace continued
                // fraction to avoid cancelling two large terms.
                let x = -z;
                let g = mills_tail(x, 2.0);
                let f = 1.0 / (x + g);
                (s * f, s * s * g / (x + g))
            } else {
                let mills = (normal_ln_pdf(z) - normal_ln_cdf(z)).exp();
                let f = z + mills;
                (s * f, s * s * (1.0 + z * f))
            };
            return Ok(CondMoments { tau: 1.0, gamma_tau: gamma, gamma2_tau: gamma2, log_tau: 0.0 });
        }
        let q = eta * eta + nu;
        let m = self.skew_arg(eta);
        let ln_ratio = self.t_nu3.ln_cdf(m * ((nu + 3.0) / (nu + 1.0)).sqrt()) - ln_skew_cdf;
        let tau = (nu + 1.0) / q * ln_ratio.exp();
        let ln_h = 0.5 * self.one_m_delta2.ln()
            - PI.ln()
            - ln_sf
            - (0.5 * nu + 1.0) * (eta * eta / (nu * self.one_m_delta2)).ln_1p();
        let h = ln_h.exp();
        let de = delta * eta;
        let log_tau = if with_log_tau { self.log_tau_by_dof_derivative(eta)? } else { 0.0 };
        // gamma > 0 and E(gamma tau)^2 <= E(gamma^2 tau) E(tau); the clamps only
        // bite when rounding cancels the two terms far in the lower tail.
        let gamma_tau = (de * tau + h).max(0.0);
        let gamma2_tau = (de * de * tau + self.one_m_delta2 + de * h).max(gamma_tau * gamma_tau / tau);
        Ok(CondMoments { tau, gamma_tau, gamma2_tau, log_tau })
    }

    /// E(log tau | y) from the normaliser identity
    /// `Z(a) = int tau^{a-1} exp(-b tau) Phi(c sqrt(tau)) dtau
    ///       = Gamma(a) b^{-a} T_{2a}(c sqrt(a / b))`, valid for every `a > 0`,
    /// so that `E(log tau | y) = d ln Z / da
    ///   = digamma(a) - ln b + d/da ln T_{2a}(c sqrt(a / b))`.
    /// The last derivative is a Richardson-extrapolated central difference.
    fn log_tau_by_dof_derivative(&self, eta: f64) -> Result<f64> {
        let nu = self.params.nu;
        let a = 0.5 * (nu + 1.0);
        let b = 0.5 * (nu + eta * eta);
        let c = self.params.lambda * eta;
        let base = self.dg_half1 - b.ln();
        if c == 0.0 {
            return Ok(base);
        }
        let phi = |s: f64| -> Result<f64> { Ok(StudentT::new(2.0 * s)?.ln_cdf(c * (s / b).sqrt())) };
        let h = 1e-3 * a;
        let d1 = (phi(a + h)? - phi(a - h)?) / (2.0 * h);
        let d2 = (phi(a + 0.5 * h)? - phi(a - 0.5 * h)?) / h;
        let d = (4.0 * d2 - d1) / 3.0;
        if !d.is_finite() {
            return Err(Error::domain("log tau derivative at eta", eta));
        }
        Ok(base + d)
    }

    /// E(log tau | y) as a one-dimensional integral over `u = log tau`.
    ///
    /// Integrating gamma out leaves `tau | y` with density proportional to
    /// `tau^{a-1} exp(-b tau) Phi(c sqrt(tau))`, `a = (nu + 1) / 2`,
    /// `b = (nu + eta^2) / 2`, `c = lambda eta`, whose normaliser is
    /// `Gamma(a) b^{-a} T_{nu+1}(M)`.
    pub(crate) fn log_tau_by_quadrature(&self, eta: f64, ln_skew_cdf: f64) -> Result<f64> {
        let nu = self.params.nu;
        let a = 0.5 * (nu + 1.0);
        let b = 0.5 * (nu + eta * eta);
        let c = self.params.lambda * eta;
        if c == 0.0 {
            return Ok(self.dg_half1 - b.ln());
        }
        let ln_norm = self.lg_half1 - a * b.ln() + ln_skew_cdf;
        let log_w = |u: f64| a * u - b * u.exp() + normal_ln_cdf(c * (0.5 * u).exp()) - ln_norm;

        // Centre the window on the better of the two asymptotic modes.
        let mut center = (a / b).ln();
        if c < 0.0 {
            let alt = ((a - 0.5) / (b + 0.5 * c * c)).ln();
            if log_w(alt) > log_w(center) {
                center = alt;
            }
        }
        let peak = log_w(center);
        let cutoff = peak - 60.0;
        let reach = |dir: f64| {
            let mut step = 0.5;
            let mut u = center + dir * step;
            while log_w(u) > cutoff && step < 1e4 {
                step *= 2.0;
                u = center + dir * step;
            }
            u
        };
        let (lo, hi) = (reach(-1.0), reach(1.0));
        let r = integrate_with_error(|u| (u - center) * log_w(u).exp(), lo, hi, &self.quad)?;
        Ok(center + r.value)
    }
}

/// Tail of the Laplace continued fraction for the normal Mills ratio,
/// `k / (x + (k + 1) / (x + (k + 2) / (x + ...)))`, for `x >= 5`.
fn mills_tail(x: f64, k: f64) -> f64 {
    let mut t = 0.0;
    for j in (0..120).rev() {
        t = (k + j as f64) / (x + t);
    }
    t
}

fn kernel_at_zero(sigma2: f64, lambda: f64, nu: f64) -> Result<SkewTKernel> {
    SkewTKernel::new(SkewT { location: 0.0, sigma2, lambda, nu })
}

/// Skew-t density of an error `eps` with location zero.
pub fn skew_t_pdf(eps: f64, sigma2: f64, lambda: f64, nu: f64) -> Result<f64> {
    Ok(kernel_at_zero(sigma2, lambda, nu)?.pdf(eps))
}

/// Log of [`skew_t_pdf`].
pub fn skew_t_ln_pdf(eps: f64, sigma2: f64, lambda: f64, nu: f64) -> Result<f64> {
    Ok(kernel_at_zero(sigma2, lambda, nu)?.ln_pdf(eps))
}

/// One draw via `y = xi + sigma Z / sqrt(tau)` with
/// `Z = delta |U1| + sqrt(1 - delta^2) U2`.
pub fn skew_t_sample<R: Rng + ?Sized>(rng: &mut R, params: &SkewT) -> Result<f64> {
    check_params(params.sigma2, params.lambda, params.nu)?;
    let d = params.derived();
    let u1 = sample_truncated_normal_positive(rng, 1.0)?;
    let u2 = sample_normal(rng, 0.0, 1.0)?;
    let z = d.delta * u1 + ((1.0 - d.delta) * (1.0 + d.delta)).sqrt() * u2;
    let tau = if params.nu.is_infinite() { 1.0 } else { sample_gamma(rng, 0.5 * params.nu, 0.5 * params.nu)? };
    Ok(params.location + params.sigma() * z / tau.sqrt())
}

/// Mean of a zero-location skew-t error,
/// `sigma delta sqrt(nu / pi) Gamma((nu - 1) / 2) / Gamma(nu / 2)`.
pub fn error_mean(sigma: f64, lambda: f64, nu: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain("skew-t scale sigma", sigma));
    }
    if !(nu > 1.0) {
        return Err(Error::MeanUndefined { nu });
    }
    let delta = delta_of(lambda);
    if nu.is_infinite() {
        return Ok(sigma * delta * (2.0 / PI).sqrt());
    }
    let ln_ratio = ln_gamma_pos(0.5 * (nu - 1.0)) - ln_gamma_pos(0.5 * nu);
    Ok(sigma * delta * (nu / PI).sqrt() * ln_ratio.exp())
}

/// E(tau | y).
pub fn cond_tau(y_centered: f64, params: &SkewT) -> Result<f64> {
    Ok(centered_kernel(params)?.moments(y_centered, false)?.tau)
}

/// E(gamma tau | y).
pub fn cond_gamma_tau(y_centered: f64, params: &SkewT) -> Result<f64> {
    Ok(centered_kernel(params)?.moments(y_centered, false)?.gamma_tau)
}

/// E(gamma^2 tau | y).
pub fn cond_gamma2_tau(y_centered: f64, params: &SkewT) -> Result<f64> {
    Ok(centered_kernel(params)?.moments(y_centered, false)?.gamma2_tau)
}

/// E(log tau | y).
pub fn cond_log_tau(y_centered: f64, params: &SkewT) -> Result<f64> {
    Ok(centered_kernel(params)?.moments(y_centered, true)?.log_tau)
}

/// All four conditional moments at once. `y_centered = y - xi`.
pub fn conditional_moments(y_centered: f64, params: &SkewT) -> Result<CondMoments> {
    centered_kernel(params)?.moments(y_centered, true)
}

/// E(log tau | y) by direct quadrature over `log tau`; slower than
/// [`cond_log_tau`] and independent of it.
pub fn cond_log_tau_by_quadrature(y_centered: f64, params: &SkewT) -> Result<f64> {
    let k = centered_kernel(params)?;
    if params.nu.is_infinite() {
        return Ok(0.0);
    }
    let eta = y_centered / k.sigma;
    let (_, ln_skew_cdf) = k.ln_std_density(eta);
    k.log_tau_by_quadrature(eta, ln_skew_cdf)
}

fn centered_kernel(params: &SkewT) -> Result<SkewTKernel> {
    SkewTKernel::new(SkewT { location: 0.0, ..*params })
}

/// The closed-form (non-integral) part of the usual series for
/// E(log tau | y):
///
/// ```text
/// DG((nu+1)/2) - log((eta^2+nu)/2)
///   + (nu+1)/(eta^2+nu) (T_{nu+3}(l sqrt(nu+3)) / T_{nu+1}(l sqrt(nu+1)) - 1)
///   + lambda eta (eta^2 - 1) / sqrt((nu+1)(eta^2+nu)^3) t_{nu+1}(M) / T_{nu+1}(M)
/// ```
///
/// with `l = lambda eta / sqrt(eta^2 + nu)`. The remaining term involves an
/// integral whose kernel vanishes for `lambda = 0`, where this equals
/// [`cond_log_tau`] exactly.
pub fn cond_log_tau_closed_terms(y_centered: f64, params: &SkewT) -> Result<f64> {
    check_params(params.sigma2, params.lambda, params.nu)?;
    let nu = params.nu;
    if nu.is_infinite() {
        return Ok(0.0);
    }
    let eta = y_centered / params.sigma();
    let q = eta * eta + nu;
    let l = params.lambda * eta / q.sqrt();
    let t1 = StudentT::new(nu + 1.0)?;
    let t3 = StudentT::new(nu + 3.0)?;
    let m = l * (nu + 1.0).sqrt();
    let ln_t1 = t1.ln_cdf(m);
    let ratio = (t3.ln_cdf(l * (nu + 3.0).sqrt()) - ln_t1).exp();
    let mills = (t1.ln_pdf(m) - ln_t1).exp();
    Ok(digamma_pos(0.5 * (nu + 1.0)) - (0.5 * q).ln()
        + (nu + 1.0) / q * (ratio - 1.0)
        + params.lambda * eta * (eta * eta - 1.0) / ((nu + 1.0) * q.powi(3)).sqrt() * mills)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::integrate;
    use crate::numerics::special::student_t_pdf;
    use approx::assert_abs_diff_eq;

    fn st(sigma2: f64, lambda: f64, nu: f64) -> SkewT {
        SkewT::new(0.0, sigma2, lambda, nu).unwrap()
    }

    #[test]
    fn symmetric_case_is_scaled_student_t() {
        for &eps in &[-7.0, -1.2, 0.0, 0.4, 3.3] {
            for &(s2, nu) in &[(1.0, 3.0), (2.5, 1.0), (0.3, 30.0)] {
                let s = f64::sqrt(s2);
                let expected = student_t_pdf(eps / s, nu).unwrap() / s;
                assert_abs_diff_eq!(skew_t_pdf(eps, s2, 0.0, nu).unwrap(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reflection_symmetry() {
        for &eps in &[-3.0, -0.5, 0.7, 2.0] {
            let a = skew_t_pdf(eps, 1.7, 2.3, 4.0).unwrap();
            let b = skew_t_pdf(-eps, 1.7, -2.3, 4.0).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let spec = QuadratureSpec { abs_tol: 1e-11, rel_tol: 1e-11, max_subdivisions: 500 };
        let v = integrate(|e| skew_t_pdf(e, 1.0, 2.0, 4.0).unwrap(), f64::NEG_INFINITY, f64::INFINITY, &spec).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-7);
        let sn = integrate(|e| skew_t_pdf(e, 2.0, -3.0, f64::INFINITY).unwrap(), f64::NEG_INFINITY, f64::INFINITY, &spec)
            .unwrap();
        assert_abs_diff_eq!(sn, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn derived_identity() {
        for &(s2, l) in &[(1.0, 0.0), (2.0, 0.5), (0.01, -7.0), (9.0, 1e4)] {
            let d = st(s2, l, 5.0).derived();
            assert_abs_diff_eq!(d.alpha * d.alpha + d.kappa2, s2, epsilon = 1e-12 * s2.max(1.0));
            assert!(d.delta.abs() < 1.0);
        }
        assert_abs_diff_eq!(lambda_of(delta_of(0.37)), 0.37, epsilon = 1e-14);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SkewT::new(0.0, 0.0, 0.0, 3.0).is_err());
        assert!(SkewT::new(0.0, 1.0, f64::NAN, 3.0).is_err());
        assert!(skew_t_pdf(0.0, 1.0, 0.0, -1.0).is_err());
        assert!(matches!(error_mean(1.0, 0.5, 1.0), Err(Error::MeanUndefined { .. })));
    }

    #[test]
    fn error_mean_limits() {
        assert_eq!(error_mean(2.0, 0.0, 3.0).unwrap(), 0.0);
        let limit = error_mean(1.0, 1e6, 1e6).unwrap();
        assert_abs_diff_eq!(limit, (2.0 / PI).sqrt(), epsilon = 1e-6);
        // Against the mean integral of the density.
        let spec = QuadratureSpec { abs_tol: 1e-10, rel_tol: 1e-10, max_subdivisions: 500 };
        let m = integrate(|e| e * skew_t_pdf(e, 1.0, 0.5, 3.0).unwrap(), f64::NEG_INFINITY, f64::INFINITY, &spec)
            .unwrap();
        assert_abs_diff_eq!(m, error_mean(1.0, 0.5, 3.0).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn symmetric_conditional_moments() {
        let p = st(1.0, 0.0, 4.0);
        for &y in &[-2.0, 0.0, 1.5] {
            let eta2 = y * y;
            assert_abs_diff_eq!(cond_tau(y, &p).unwrap(), 5.0 / (eta2 + 4.0), epsilon = 1e-12);
            assert_abs_diff_eq!(cond_gamma2_tau(y, &p).unwrap(), 1.0, epsilon = 1e-12);
            let expected = digamma_pos(2.5) - (0.5 * (eta2 + 4.0)).ln();
            assert_abs_diff_eq!(cond_log_tau(y, &p).unwrap(), expected, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(cond_tau(0.0, &p).unwrap(), 5.0 / 4.0, epsilon = 1e-12);
        // lambda = 0, eta = 0: the skewing term reduces to 1 / (pi sigma f(0))
        let f0 = skew_t_pdf(0.0, 1.0, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(cond_gamma_tau(0.0, &p).unwrap(), 1.0 / (PI * f0), epsilon = 1e-12);
    }

    #[test]
    fn gamma_tau_positive_for_positive_skew() {
        let p = st(1.0, 2.0, 3.0);
        for &y in &[0.5, 2.0, 10.0, 100.0] {
            assert!(cond_gamma_tau(y, &p).unwrap() > 0.0);
        }
    }

    #[test]
    fn gamma2_tau_lower_bound_on_grid() {
        for &l in &[0.1, 0.5, 2.0, 10.0] {
            for &nu in &[1.0, 3.0, 30.0, f64::INFINITY] {
                for k in 0..40 {
                    let y = 0.25 * k as f64;
                    for &(lam, yy) in &[(l, y), (-l, -y)] {
                        let p = st(1.3, lam, nu);
                        let d = p.derived().delta;
                        let v = cond_gamma2_tau(yy, &p).unwrap();
                        assert!(v >= 1.0 - d * d - 1e-12, "lambda {lam} nu {nu} y {yy}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn log_tau_large_nu_concentrates() {
        let p = st(1.0, 0.5, 1e4);
        assert_abs_diff_eq!(cond_log_tau(1.0, &p).unwrap(), 0.0, epsilon = 1e-2);
    }

    #[test]
    fn log_tau_routes_agree() {
        let mut worst: f64 = 0.0;
        for &lambda in &[-20.0, -3.0, -0.5, 0.5, 2.0, 10.0] {
            for &nu in &[1.2, 3.0, 8.0, 50.0] {
                for &y in &[-30.0, -4.0, -1.0, -0.1, 0.4, 1.5, 6.0, 30.0] {
                    let p = st(1.3, lambda, nu);
                    let a = cond_log_tau(y, &p).unwrap();
                    let b = cond_log_tau_by_quadrature(y, &p).unwrap();
                    worst = worst.max((a - b).abs() / b.abs().max(1.0));
                }
            }
        }
        assert!(worst < 1e-8, "worst relative gap {worst}");
    }

    #[test]
    fn closed_terms_agree_without_skew() {
        for &y in &[-1.0, 0.3, 2.0] {
            let p = st(2.0, 0.0, 3.0);
            assert_abs_diff_eq!(
                cond_log_tau_closed_terms(y, &p).unwrap(),
                cond_log_tau(y, &p).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn log_tau_quadrature_matches_density_normaliser() {
        // E(tau | y) from the same u-integral must reproduce the closed form.
        let p = st(1.0, 2.0, 4.0);
        let k = SkewTKernel::new(p).unwrap();
        let eta: f64 = 1.0;
        let (a, b, c) = (2.5, 0.5 * (4.0 + eta * eta), 2.0 * eta);
        let ln_norm = ln_gamma_pos(a) - a * f64::ln(b) + k.t_nu1.ln_cdf(k.skew_arg(eta));
        let spec = QuadratureSpec::default();
        let mass = integrate(
            |u: f64| (a * u - b * u.exp() + normal_ln_cdf(c * (0.5 * u).exp()) - ln_norm).exp(),
            -80.0,
            5.0,
            &spec,
        )
        .unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-9);
        let tau = integrate(
            |u: f64| ((a + 1.0) * u - b * u.exp() + normal_ln_cdf(c * (0.5 * u).exp()) - ln_norm).exp(),
            -80.0,
            5.0,
            &spec,
        )
        .unwrap();
        assert_abs_diff_eq!(tau, cond_tau(1.0, &p).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn mills_tail_matches_direct_ratio() {
        for &x in &[5.0, 6.5, 9.0] {
            let direct = -x + (normal_ln_pdf(-x) - normal_ln_cdf(-x)).exp();
            let cf = 1.0 / (x + mills_tail(x, 2.0));
            assert_abs_diff_eq!(direct, cf, epsilon = 1e-12);
        }
    }

    #[test]
    fn far_tail_ratios_stay_finite() {
        // Both skewing cdfs are ~1e-600 here; the ratio is taken in log space.
        let p = st(1.0, 50.0, 100.0);
        let m = conditional_moments(-40.0, &p).unwrap();
        assert!(m.tau.is_finite() && m.tau > 0.0);
        assert!(m.gamma_tau.is_finite());
        assert!(m.gamma2_tau.is_finite() && m.gamma2_tau > 0.0);
        assert!(m.log_tau.is_finite());
        let sn = conditional_moments(-40.0, &st(1.0, 50.0, f64::INFINITY)).unwrap();
        assert!(sn.gamma_tau.is_finite() && sn.gamma2_tau > 0.0);
    }
}
