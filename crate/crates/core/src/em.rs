//! ECM fitting of mixture regressions with skew-t errors and its constrained
//! families.
//!
//! One iteration runs the E step (responsibilities and the latent moments
//! `s1 = E(z tau)`, `s2 = E(z gamma tau)`, `s3 = E(z gamma^2 tau)`,
//! `s4 = E(z log tau)`) and then three conditional maximisations:
//! coefficients given the previous skewness, `(alpha, kappa^2)` given the new
//! coefficients, and degrees of freedom from the same E step. Each one
//! raises the expected complete-data log-likelihood, so the observed
//! log-likelihood never decreases.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{delta_of, error_mean, lambda_of};
use crate::error::{Error, Result};
use crate::model::{
    information_criteria, joint_terms, log_likelihood, log_sum_exp, responsibilities, Component, ComponentKernel, Dataset,
    ErrorFamily, FamilyKind, MixtureParams, ParamMode,
};
use crate::numerics::special::{digamma_pos, ln_gamma_pos};
use crate::numerics::{find_root, minimize_scalar, RootBracket};

/// Below this responsibility the `log tau` moment is taken from its
/// zero-skew closed form instead of quadrature.
const Z_NEGLIGIBLE: f64 = 1e-12;

/// Largest `|delta|` an update may produce.
const DELTA_MAX: f64 = 1.0 - 1e-8;

/// Expected latent quantities, one row per observation and one column per
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepCache {
    pub z: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub s3: DMatrix<f64>,
    pub s4: DMatrix<f64>,
    /// Observed-data log-likelihood at the parameters the cache was built from.
    pub loglik: f64,
}

/// How skewness parameters are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LambdaUpdate {
    /// `delta = alpha / sigma`, `lambda = delta / sqrt(1 - delta^2)`.
    #[default]
    DeltaShortcut,
    /// Root of the score in `delta` at fixed `sigma`, highest expected
    /// log-likelihood among the roots.
    SolveScore,
}

/// How degrees of freedom are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NuUpdate {
    /// Root of the expected complete-data score (uses `s4`).
    #[default]
    Ecm,
    /// Maximiser of the observed log-likelihood in each `nu_i`, the other
    /// parameters at their new values.
    Ecme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitStrategy {
    /// Rows split uniformly at random into `g` groups, least squares per group.
    #[default]
    RandomPartition,
    /// Global least squares with jittered intercepts.
    PerturbedGlobal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Tolerance on the parameter change, measured on
    /// `(w, beta, ln sigma, delta, ln nu)`.
    pub epsilon: f64,
    pub init: InitStrategy,
    pub n_starts: usize,
    pub nu_bracket: (f64, f64),
    pub lambda_update: LambdaUpdate,
    pub nu_update: NuUpdate,
    /// Overrides the family's degrees-of-freedom mode when set.
    pub fixed_nu: Option<f64>,
    /// Keep every iterate in [`FitResult::path`].
    pub record_path: bool,
    /// When set, every start first runs this many iterations and only the
    /// best of them is iterated to convergence.
    pub screen_iterations: Option<usize>,
    /// Squared extrapolation of the ECM map. An extrapolated point is kept
    /// only when its log-likelihood is not below the cycle's start.
    pub accelerate: bool,
    /// Add the fitted nested family (t inside skew-t, normal inside the
    /// others) as one more start.
    pub nested_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 1000,
            epsilon: 1e-6,
            init: InitStrategy::RandomPartition,
            n_starts: 10,
            nu_bracket: (1.1, 100.0),
            lambda_update: LambdaUpdate::DeltaShortcut,
            nu_update: NuUpdate::Ecm,
            fixed_nu: None,
            record_path: false,
            screen_iterations: None,
            accelerate: false,
            nested_start: false,
        }
    }
}

impl FitConfig {
    /// Settings for repeated or hard fits: extrapolation, the
    /// nested start, screening of the random starts and a longer cap for
    /// the slow ridges of skewed fits whose `nu` runs to the bracket edge.
    pub fn accelerated() -> Self {
        FitConfig {
            max_iterations: 20_000,
            n_starts: 20,
            screen_iterations: Some(50),
            accelerate: true,
            nested_start: true,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.n_starts == 0 {
            return Err(Error::Config("max_iterations and n_starts must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        let (lo, hi) = self.nu_bracket;
        if !(lo > 1.0 && lo < hi && hi <= 200.0) {
            return Err(Error::Config(format!("nu bracket [{lo}, {hi}] must lie within (1, 200]")));
        }
        if self.screen_iterations == Some(0) {
            return Err(Error::Config("screen_iterations must be positive".into()));
        }
        if let Some(nu) = self.fixed_nu {
            if !(nu > 0.0) {
                return Err(Error::Config(format!("fixed nu must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    /// The family with `fixed_nu` applied.
    pub fn effective_family(&self, family: &ErrorFamily) -> ErrorFamily {
        match self.fixed_nu {
            Some(nu) => family.clone().with_fixed_nu(nu),
            None => family.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: MixtureParams,
    pub family: ErrorFamily,
    pub loglik: f64,
    /// Log-likelihood at the start and after every iteration.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `beta_i0 - E(eps_i)`; the first coefficient is taken as the intercept.
    pub corrected_intercepts: Vec<f64>,
    pub aic: f64,
    pub bic: f64,
    /// Index of the winning start.
    pub start: usize,
    /// Iterates, the start included, when requested.
    pub path: Option<Vec<MixtureParams>>,
}

/// Output of the first conditional maximisation.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryUpdate {
    pub weights: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub kappa2s: Vec<f64>,
    pub sigma2s: Vec<f64>,
}

/// E step with every moment, `s4` included.
pub fn e_step(data: &Dataset, theta: &MixtureParams) -> Result<EStepCache> {
    e_step_with(data, theta, true)
}

/// E step; `s4` is left at zero unless `with_s4`.
pub fn e_step_with(data: &Dataset, theta: &MixtureParams, with_s4: bool) -> Result<EStepCache> {
    theta.validate()?;
    let kernels = theta.kernels()?;
    let (n, g) = (data.n(), theta.g());
    let mut cache = EStepCache {
        z: DMatrix::zeros(n, g),
        s1: DMatrix::zeros(n, g),
        s2: DMatrix::zeros(n, g),
        s3: DMatrix::zeros(n, g),
        s4: DMatrix::zeros(n, g),
        loglik: 0.0,
    };
    let need_s4 = with_s4 && theta.components.iter().any(|c| c.nu.is_finite());
    let mut buf = vec![0.0; g];
    for (j, (x, y)) in data.rows().enumerate() {
        let l = joint_terms(&kernels, theta, x, y, &mut buf);
        if !l.is_finite() {
            return Err(Error::DegenerateLikelihood { observation: j });
        }
        cache.loglik += l;
        for (i, (k, c)) in kernels.iter().zip(&theta.components).enumerate() {
            let z = (buf[i] - l).exp();
            cache.z[(j, i)] = z;
            if z == 0.0 {
                continue;
            }
            let r = y - c.mean(x);
            let quad = need_s4 && z >= Z_NEGLIGIBLE;
            let m = k.moments(r, quad).map_err(|e| match e {
                Error::DegenerateLikelihood { .. } => Error::DegenerateLikelihood { observation: j },
                other => other,
            })?;
            cache.s1[(j, i)] = z * m.tau;
            cache.s2[(j, i)] = z * m.gamma_tau;
            cache.s3[(j, i)] = z * m.gamma2_tau;
            if need_s4 && c.nu.is_finite() {
                let log_tau = if quad { m.log_tau } else { zero_skew_log_tau(r, c) };
                cache.s4[(j, i)] = z * log_tau;
            }
        }
    }
    Ok(cache)
}

/// `E(log tau | y)` with the skewing factor dropped.
fn zero_skew_log_tau(r: f64, c: &Component) -> f64 {
    let eta2 = r * r / c.sigma2;
    digamma_pos(0.5 * (c.nu + 1.0)) - (0.5 * (c.nu + eta2)).ln()
}

/// Column sums of `m`.
fn col_sum(m: &DMatrix<f64>, i: usize) -> f64 {
    m.column(i).iter().sum()
}

/// Weighted sums `(A, B, C) = (sum s1 r^2, sum s2 r, sum s3)` at coefficients `beta`.
fn residual_sums(data: &Dataset, cache: &EStepCache, i: usize, beta: &[f64]) -> (f64, f64, f64) {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (j, (x, y)) in data.rows().enumerate() {
        let r = y - beta.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
        a += cache.s1[(j, i)] * r * r;
        b += cache.s2[(j, i)] * r;
        c += cache.s3[(j, i)];
    }
    (a, b, c)
}

/// Coefficients solving `(sum s1 x x') beta = sum (y s1 - alpha s2) x`.
fn weighted_least_squares(data: &Dataset, cache: &EStepCache, i: usize, alpha: f64) -> Result<Vec<f64>> {
    let p = data.p();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (j, (x, y)) in data.rows().enumerate() {
        let s1 = cache.s1[(j, i)];
        let wy = y * s1 - alpha * cache.s2[(j, i)];
        for a in 0..p {
            rhs[a] += wy * x[a];
            for b in 0..=a {
                gram[(a, b)] += s1 * x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let chol = gram.cholesky().ok_or(Error::Singular { component: i })?;
    let beta = chol.solve(&rhs);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { component: i });
    }
    Ok(beta.iter().copied().collect())
}

/// Weights, coefficients, `alpha`, `kappa^2` and `sigma^2 = kappa^2 + alpha^2`.
///
/// Components with estimated skewness get the free `(alpha, kappa^2)`
/// maximiser; components with fixed skewness keep `delta` and get the
/// maximising `sigma`. `sigma2_floor` bounds every scale from below.
pub fn m_step_primary(
    data: &Dataset,
    cache: &EStepCache,
    theta_prev: &MixtureParams,
    family: &ErrorFamily,
    sigma2_floor: f64,
) -> Result<PrimaryUpdate> {
    let g = theta_prev.g();
    let n = data.n() as f64;
    let mut up = PrimaryUpdate {
        weights: Vec::with_capacity(g),
        betas: Vec::with_capacity(g),
        alphas: Vec::with_capacity(g),
        kappa2s: Vec::with_capacity(g),
        sigma2s: Vec::with_capacity(g),
    };
    let mut wsum = 0.0;
    for i in 0..g {
        let prev = &theta_prev.components[i];
        let nz = col_sum(&cache.z, i);
        if !(nz > 0.0) {
            return Err(Error::Singular { component: i });
        }
        up.weights.push(nz / n);
        wsum += nz / n;
        let alpha_prev = prev.sigma() * delta_of(prev.lambda);
        let beta = weighted_least_squares(data, cache, i, alpha_prev)?;
        let (a, b, c) = residual_sums(data, cache, i, &beta);
        let (mut alpha, mut kappa2) = if family.lambda.is_estimated() {
            let alpha = if c > 0.0 { b / c } else { 0.0 };
            (alpha, (a - 2.0 * alpha * b + alpha * alpha * c) / nz)
        } else {
            let delta = delta_of(family.lambda.fixed_value(i).unwrap_or(0.0));
            let q = (1.0 - delta) * (1.0 + delta);
            let sigma = (-delta * b + (delta * delta * b * b + 4.0 * nz * q * a).sqrt()) / (2.0 * nz * q);
            (sigma * delta, sigma * sigma * q)
        };
        if !(kappa2 > 0.0) || !kappa2.is_finite() {
            return Err(Error::Degenerate { component: i, reason: format!("kappa^2 = {kappa2}") });
        }
        let mut sigma2 = kappa2 + alpha * alpha;
        if sigma2 < sigma2_floor {
            let scale = (sigma2_floor / sigma2).sqrt();
            alpha *= scale;
            kappa2 *= scale * scale;
            sigma2 = sigma2_floor;
        }
        up.betas.push(beta);
        up.alphas.push(alpha);
        up.kappa2s.push(kappa2);
        up.sigma2s.push(sigma2);
    }
    for w in &mut up.weights {
        *w /= wsum;
    }
    Ok(up)
}

/// `delta` from an update, clamped inside `(-1, 1)`.
fn clamp_delta(delta: f64, component: usize) -> f64 {
    if delta.abs() > DELTA_MAX {
        warn!("component {component}: |delta| = {} clamped", delta.abs());
        DELTA_MAX.copysign(delta)
    } else {
        delta
    }
}

/// Expected complete-data log-likelihood of one component's
/// `(sigma, delta)` terms, up to constants.
fn q_scale_skew(nz: f64, sums: (f64, f64, f64), sigma: f64, delta: f64) -> f64 {
    let (a, b, c) = sums;
    let alpha = sigma * delta;
    let kappa2 = sigma * sigma * (1.0 - delta) * (1.0 + delta);
    -0.5 * nz * kappa2.ln() - (a - 2.0 * alpha * b + alpha * alpha * c) / (2.0 * kappa2)
}

/// Score in `delta` at fixed `sigma`.
fn delta_score(nz: f64, sums: (f64, f64, f64), sigma: f64, delta: f64) -> f64 {
    let (a, b, c) = sums;
    delta * (1.0 - delta * delta) * nz - delta * (a / (sigma * sigma) + c) + (1.0 + delta * delta) * b / sigma
}

/// Skewness update for every component.
pub fn m_step_lambda(
    data: &Dataset,
    cache: &EStepCache,
    primary: &PrimaryUpdate,
    family: &ErrorFamily,
    mode: LambdaUpdate,
) -> Result<Vec<f64>> {
    let g = primary.betas.len();
    let mut out = Vec::with_capacity(g);
    for i in 0..g {
        if let Some(l) = family.lambda.fixed_value(i) {
            out.push(l);
            continue;
        }
        let sigma = primary.sigma2s[i].sqrt();
        let shortcut = clamp_delta(primary.alphas[i] / sigma, i);
        let delta = match mode {
            LambdaUpdate::DeltaShortcut => shortcut,
            LambdaUpdate::SolveScore => {
                let nz = col_sum(&cache.z, i);
                let sums = residual_sums(data, cache, i, &primary.betas[i]);
                match solve_delta(nz, sums, sigma) {
                    Some(d) => d,
                    None => {
                        warn!("component {i}: no root of the delta score, using the shortcut");
                        shortcut
                    }
                }
            }
        };
        out.push(lambda_of(delta));
    }
    Ok(out)
}

/// Highest-scoring root of the delta score on a grid over `(-1, 1)`.
fn solve_delta(nz: f64, sums: (f64, f64, f64), sigma: f64) -> Option<f64> {
    const GRID: usize = 400;
    let f = |d: f64| delta_score(nz, sums, sigma, d);
    let node = |k: usize| -DELTA_MAX + 2.0 * DELTA_MAX * k as f64 / GRID as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut prev = (node(0), f(node(0)));
    for k in 1..=GRID {
        let x = node(k);
        let fx = f(x);
        if prev.1 * fx <= 0.0 {
            if let Ok(r) = find_root(f, RootBracket { lo: prev.0, hi: x }, 1e-14) {
                let q = q_scale_skew(nz, sums, sigma, r.root);
                if best.is_none_or(|(_, bq)| q > bq) {
                    best = Some((r.root, q));
                }
            }
        }
        prev = (x, fx);
    }
    best.map(|(d, _)| d)
}

/// Left side of the degrees-of-freedom equation,
/// `ln(nu/2) + 1 - digamma(nu/2) + sum(s4 - s1) / sum z`.
pub fn nu_score(nu: f64, data_term: f64) -> f64 {
    (0.5 * nu).ln() + 1.0 - digamma_pos(0.5 * nu) + data_term
}

/// Degrees-of-freedom update for every component.
pub fn m_step_nu(cache: &EStepCache, family: &ErrorFamily, bracket: (f64, f64)) -> Result<Vec<f64>> {
    let g = cache.z.ncols();
    let mut out = Vec::with_capacity(g);
    for i in 0..g {
        if matches!(family.kind, FamilyKind::Normal | FamilyKind::SkewNormal) {
            out.push(f64::INFINITY);
            continue;
        }
        if let Some(v) = family.nu.fixed_value(i) {
            out.push(v);
            continue;
        }
        let nz = col_sum(&cache.z, i);
        let term = (col_sum(&cache.s4, i) - col_sum(&cache.s1, i)) / nz;
        let (lo, hi) = bracket;
        let f = |nu: f64| nu_score(nu, term);
        let (flo, fhi) = (f(lo), f(hi));
        let nu = if flo <= 0.0 {
            warn!("component {i}: nu score negative across the bracket, pinned to {lo}");
            lo
        } else if fhi >= 0.0 {
            warn!("component {i}: nu score positive across the bracket, pinned to {hi}");
            hi
        } else {
            find_root(f, RootBracket::new(lo, hi)?, 1e-10)?.root
        };
        out.push(nu);
    }
    Ok(out)
}

/// Expected complete-data log-likelihood at `theta` under `cache`, up to
/// terms free of the parameters.
pub fn q_function(data: &Dataset, cache: &EStepCache, theta: &MixtureParams) -> f64 {
    let mut q = 0.0;
    for (i, c) in theta.components.iter().enumerate() {
        let nz = col_sum(&cache.z, i);
        let delta = delta_of(c.lambda);
        let sums = residual_sums(data, cache, i, &c.beta);
        q += nz * theta.weights[i].ln() + q_scale_skew(nz, sums, c.sigma(), delta);
        if c.nu.is_finite() {
            let h = 0.5 * c.nu;
            q += nz * (h * h.ln() - ln_gamma_pos(h)) + h * (col_sum(&cache.s4, i) - col_sum(&cache.s1, i));
        }
    }
    q
}

/// `beta_i0 - E(eps_i)` per component.
pub fn correct_intercept(theta: &MixtureParams) -> Result<Vec<f64>> {
    theta
        .components
        .iter()
        .map(|c| {
            let b0 = c.beta[0];
            if c.lambda == 0.0 {
                Ok(b0)
            } else {
                Ok(b0 - error_mean(c.sigma(), c.lambda, c.nu)?)
            }
        })
        .collect()
}

/// Parameter vector used by the convergence test.
fn convergence_coords(theta: &MixtureParams) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend_from_slice(&theta.weights);
    for c in &theta.components {
        v.extend_from_slice(&c.beta);
        v.push(0.5 * c.sigma2.ln());
        v.push(delta_of(c.lambda));
        v.push(if c.nu.is_finite() { c.nu.ln() } else { 0.0 });
    }
    v
}

fn parameter_change(a: &MixtureParams, b: &MixtureParams) -> f64 {
    let (u, v) = (convergence_coords(a), convergence_coords(b));
    u.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sample variance of the response, the reference for the scale floor.
fn response_variance(data: &Dataset) -> f64 {
    let y = data.y();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let v = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Shape values a start should carry for `family`.
fn start_shapes(family: &ErrorFamily, i: usize, bracket: (f64, f64)) -> (f64, f64) {
    let lambda = family.lambda.fixed_value(i).unwrap_or(0.0);
    let nu = match family.kind {
        FamilyKind::Normal | FamilyKind::SkewNormal => f64::INFINITY,
        _ => family.nu.fixed_value(i).unwrap_or_else(|| 10.0_f64.clamp(bracket.0, bracket.1)),
    };
    (lambda, nu)
}

/// Least squares on the rows in `idx`.
struct GroupFit {
    beta: Vec<f64>,
    /// Mean squared residual.
    s2: f64,
    /// Sample skewness of the residuals.
    skew: f64,
}

fn ols(data: &Dataset, idx: &[usize]) -> Option<GroupFit> {
    let p = data.p();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for &j in idx {
        let x = data.row(j);
        let y = data.y()[j];
        for a in 0..p {
            rhs[a] += y * x[a];
            for b in 0..p {
                gram[(a, b)] += x[a] * x[b];
            }
        }
    }
    let beta: Vec<f64> = gram.cholesky()?.solve(&rhs).iter().copied().collect();
    let res: Vec<f64> = idx
        .iter()
        .map(|&j| data.y()[j] - beta.iter().zip(data.row(j)).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    let m = res.len() as f64;
    let mean = res.iter().sum::<f64>() / m;
    let m2 = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m;
    let m3 = res.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / m;
    let s2 = res.iter().map(|r| r * r).sum::<f64>() / m;
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Some(GroupFit { beta, s2, skew })
}

/// Skew-normal `delta` whose skewness matches `skew`, capped below the
/// family's maximum of about 0.995.
fn delta_from_skewness(skew: f64) -> f64 {
    let s = skew.clamp(-0.99, 0.99);
    let r = (2.0 * s.abs() / (4.0 - std::f64::consts::PI)).cbrt();
    (std::f64::consts::FRAC_PI_2.sqrt() * r / (1.0 + r * r).sqrt()).copysign(s)
}

/// A starting point for `family` with `g` components.
pub fn initialize<R: Rng + ?Sized>(
    data: &Dataset,
    family: &ErrorFamily,
    g: usize,
    strategy: InitStrategy,
    nu_bracket: (f64, f64),
    rng: &mut R,
) -> Result<MixtureParams> {
    let (n, p) = (data.n(), data.p());
    if g == 0 || n < g * (p + 1) {
        return Err(Error::InvalidData(format!("n = {n} is too small for g = {g} components with p = {p}")));
    }
    family.validate(g)?;
    let floor = 1e-8 * response_variance(data);
    // Estimated skewness starts from a moment match: lambda = 0 is a fixed
    // point of the skewness update once the residuals sum to zero.
    let make = |i: usize, fit: GroupFit| {
        let (mut lambda, nu) = start_shapes(family, i, nu_bracket);
        let mut beta = fit.beta;
        let mut sigma2 = fit.s2;
        if family.lambda.is_estimated() {
            let delta = delta_from_skewness(fit.skew);
            let c = delta * (2.0 / std::f64::consts::PI).sqrt();
            sigma2 = fit.s2 / (1.0 - c * c);
            beta[0] -= sigma2.sqrt() * c;
            lambda = lambda_of(delta);
        }
        Component { beta, sigma2: sigma2.max(floor), lambda, nu }
    };
    let weights = vec![1.0 / g as f64; g];
    let components = match strategy {
        InitStrategy::RandomPartition => {
            let mut attempt = 0;
            loop {
                let mut groups = vec![Vec::new(); g];
                for j in 0..n {
                    groups[rng.random_range(0..g)].push(j);
                }
                let fits: Option<Vec<_>> = groups
                    .iter()
                    .map(|idx| if idx.len() > p { ols(data, idx) } else { None })
                    .collect();
                match fits {
                    Some(f) if f.iter().all(|gf| gf.s2 > 0.0) => {
                        break f.into_iter().enumerate().map(|(i, gf)| make(i, gf)).collect::<Vec<_>>();
                    }
                    _ if attempt >= 20 => {
                        return Err(Error::InvalidData("random partitions kept producing degenerate groups".into()));
                    }
                    _ => attempt += 1,
                }
            }
        }
        InitStrategy::PerturbedGlobal => {
            let all: Vec<usize> = (0..n).collect();
            let global = ols(data, &all).ok_or(Error::Singular { component: 0 })?;
            let sd = global.s2.sqrt();
            (0..g)
                .map(|i| {
                    let mut beta = global.beta.clone();
                    if g > 1 {
                        beta[0] += sd * crate::numerics::sample_normal(rng, 0.0, 1.0).unwrap_or(0.0);
                    }
                    make(i, GroupFit { beta, s2: global.s2, skew: global.skew })
                })
                .collect()
        }
    };
    let weights = if g == 1 { vec![1.0] } else { normalized(weights) };
    let theta = MixtureParams { family: family.kind, weights, components };
    theta.validate()?;
    Ok(theta)
}

/// The family that `family` reduces to by dropping skewness, or tails.
fn nested_family(family: &ErrorFamily) -> Option<ErrorFamily> {
    match family.kind {
        FamilyKind::SkewT => Some(ErrorFamily { kind: FamilyKind::StudentT, lambda: ParamMode::Fixed(0.0), nu: family.nu.clone() }),
        FamilyKind::SkewNormal | FamilyKind::StudentT => Some(ErrorFamily::normal()),
        FamilyKind::Normal => None,
    }
}

/// A start for `family` from a fit of a nested family: hard assignment by
/// responsibility, then the moment match of [`initialize`] on each group's
/// residuals about the fitted line.
pub fn lift_start(
    data: &Dataset,
    fitted: &MixtureParams,
    family: &ErrorFamily,
    nu_bracket: (f64, f64),
) -> Result<MixtureParams> {
    let g = fitted.g();
    family.validate(g)?;
    let z = responsibilities(data, fitted)?.z;
    let mut groups = vec![Vec::new(); g];
    for (j, (x, y)) in data.rows().enumerate() {
        let i = (0..g).max_by(|&a, &b| z[(j, a)].total_cmp(&z[(j, b)])).unwrap_or(0);
        groups[i].push(y - fitted.components[i].mean(x));
    }
    let t_tailed = matches!(family.kind, FamilyKind::StudentT | FamilyKind::SkewT);
    let components = fitted
        .components
        .iter()
        .zip(&groups)
        .enumerate()
        .map(|(i, (c, res))| {
            let (mut lambda, mut nu) = start_shapes(family, i, nu_bracket);
            if t_tailed && family.nu.is_estimated() && c.nu.is_finite() {
                nu = c.nu.clamp(nu_bracket.0, nu_bracket.1);
            }
            let mut beta = c.beta.clone();
            let mut sigma2 = c.sigma2;
            if family.lambda.is_estimated() && res.len() > 2 {
                let m = res.len() as f64;
                let mean = res.iter().sum::<f64>() / m;
                let m2 = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m;
                let m3 = res.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / m;
                let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
                let delta = delta_from_skewness(skew);
                let c = delta * (2.0 / std::f64::consts::PI).sqrt();
                sigma2 /= 1.0 - c * c;
                beta[0] -= sigma2.sqrt() * c;
                lambda = lambda_of(delta);
            }
            Component { beta, sigma2, lambda, nu }
        })
        .collect();
    let theta = MixtureParams { family: family.kind, weights: fitted.weights.clone(), components };
    theta.validate()?;
    Ok(theta)
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    let last = w.len() - 1;
    w[last] = 1.0 - w[..last].iter().sum::<f64>();
    w
}

/// One ECM iteration from `theta`: the E step at `theta` and the updated
/// parameters.
pub fn ecm_step(
    data: &Dataset,
    theta: &MixtureParams,
    family: &ErrorFamily,
    config: &FitConfig,
    sigma2_floor: f64,
) -> Result<(EStepCache, MixtureParams)> {
    let t_tailed = matches!(family.kind, FamilyKind::StudentT | FamilyKind::SkewT);
    let ecme = config.nu_update == NuUpdate::Ecme;
    let need_s4 = t_tailed && family.nu.is_estimated() && !ecme;
    let cache = e_step_with(data, theta, need_s4)?;
    let primary = m_step_primary(data, &cache, theta, family, sigma2_floor)?;
    let lambdas = m_step_lambda(data, &cache, &primary, family, config.lambda_update)?;
    let nus = if ecme {
        theta.components.iter().map(|c| c.nu).collect()
    } else {
        m_step_nu(&cache, family, config.nu_bracket)?
    };
    let components = (0..theta.g())
        .map(|i| Component {
            beta: primary.betas[i].clone(),
            sigma2: primary.sigma2s[i],
            lambda: lambdas[i],
            nu: nus[i],
        })
        .collect();
    let mut next = MixtureParams { family: theta.family, weights: primary.weights, components };
    if ecme && t_tailed {
        m_step_nu_observed(data, &mut next, family, config.nu_bracket)?;
    }
    Ok((cache, next))
}

/// Observed-data update of each estimated `nu_i` in turn, on `ln nu` over
/// the bracket. The current value is kept unless another one is better.
pub fn m_step_nu_observed(
    data: &Dataset,
    theta: &mut MixtureParams,
    family: &ErrorFamily,
    bracket: (f64, f64),
) -> Result<()> {
    let g = theta.g();
    let n = data.n();
    for i in 0..g {
        if !family.nu.is_estimated() {
            break;
        }
        // ln(w_k f_k) of the other components, row-major n x (g - 1).
        let kernels = theta.kernels()?;
        let mut others = Vec::with_capacity(n * (g - 1));
        let mut resid = Vec::with_capacity(n);
        for (x, y) in data.rows() {
            for (k, (ker, c)) in kernels.iter().zip(&theta.components).enumerate() {
                if k != i {
                    others.push(theta.weights[k].ln() + ker.ln_pdf(y - c.mean(x)));
                }
            }
            resid.push(y - theta.components[i].mean(x));
        }
        let ln_w = theta.weights[i].ln();
        let base = theta.components[i].clone();
        let mut buf = vec![0.0; g];
        let mut neg_loglik = |ln_nu: f64| -> f64 {
            let comp = Component { nu: ln_nu.exp(), ..base.clone() };
            let Ok(ker) = ComponentKernel::new(theta.family, &comp) else { return f64::INFINITY };
            let mut total = 0.0;
            for j in 0..n {
                buf[0] = ln_w + ker.ln_pdf(resid[j]);
                buf[1..].copy_from_slice(&others[j * (g - 1)..(j + 1) * (g - 1)]);
                total += log_sum_exp(&buf);
            }
            if total.is_finite() { -total } else { f64::INFINITY }
        };
        let (lo, hi) = (bracket.0.ln(), bracket.1.ln());
        let current = base.nu.ln().clamp(lo, hi);
        let mut best = (current, neg_loglik(current));
        let m = minimize_scalar(&mut neg_loglik, RootBracket::new(lo, hi)?, 1e-8)?;
        for cand in [(m.x, m.value), (lo, neg_loglik(lo)), (hi, neg_loglik(hi))] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        theta.components[i].nu = best.0.exp().clamp(bracket.0, bracket.1);
    }
    Ok(())
}

/// Unconstrained coordinates for extrapolation: weight log-ratios against
/// the last component, then per component `beta`, `ln sigma2`,
/// `atanh delta` and `ln nu` (0 for infinite `nu`).
fn free_coords(theta: &MixtureParams) -> Vec<f64> {
    let g = theta.g();
    let last = theta.weights[g - 1].ln();
    let mut v: Vec<f64> = theta.weights[..g - 1].iter().map(|w| w.ln() - last).collect();
    for c in &theta.components {
        v.extend_from_slice(&c.beta);
        v.push(c.sigma2.ln());
        v.push(delta_of(c.lambda).atanh());
        v.push(if c.nu.is_finite() { c.nu.ln() } else { 0.0 });
    }
    v
}

/// Inverse of [`free_coords`]. Fixed shape parameters come from `template`.
fn from_free(
    v: &[f64],
    template: &MixtureParams,
    family: &ErrorFamily,
    bracket: (f64, f64),
    sigma2_floor: f64,
) -> Result<MixtureParams> {
    let g = template.g();
    let p = template.p();
    let mut w: Vec<f64> = v[..g - 1].iter().copied().chain(std::iter::once(0.0)).collect();
    let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for x in &mut w {
        *x = (*x - top).exp();
    }
    let weights = normalized(w);
    let t_tailed = matches!(family.kind, FamilyKind::StudentT | FamilyKind::SkewT);
    let mut components = Vec::with_capacity(g);
    for (i, (chunk, old)) in v[g - 1..].chunks(p + 3).zip(&template.components).enumerate() {
        let lambda = if family.kind.is_skewed() && family.lambda.is_estimated() {
            lambda_of(clamp_delta(chunk[p + 1].tanh(), i))
        } else {
            old.lambda
        };
        let nu = if t_tailed && family.nu.is_estimated() {
            chunk[p + 2].exp().clamp(bracket.0, bracket.1)
        } else {
            old.nu
        };
        components.push(Component {
            beta: chunk[..p].to_vec(),
            sigma2: chunk[p].exp().max(sigma2_floor),
            lambda,
            nu,
        });
    }
    let theta = MixtureParams { family: template.family, weights, components };
    theta.validate()?;
    Ok(theta)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ECM run with `start`; fills the trace and path with accepted iterates.
struct Run {
    theta: MixtureParams,
    trace: Vec<f64>,
    path: Option<Vec<MixtureParams>>,
    iterations: usize,
    converged: bool,
}

fn run_plain(
    data: &Dataset,
    family: &ErrorFamily,
    start: MixtureParams,
    config: &FitConfig,
    floor: f64,
) -> Result<Run> {
    let mut run = Run {
        path: config.record_path.then(|| vec![start.clone()]),
        theta: start,
        trace: Vec::new(),
        iterations: 0,
        converged: false,
    };
    while run.iterations < config.max_iterations {
        let (cache, next) = ecm_step(data, &run.theta, family, config, floor)?;
        run.trace.push(cache.loglik);
        run.iterations += 1;
        let change = parameter_change(&run.theta, &next);
        run.theta = next;
        if let Some(p) = run.path.as_mut() {
            p.push(run.theta.clone());
        }
        if !change.is_finite() {
            return Err(Error::Degenerate { component: 0, reason: "non-finite parameter update".into() });
        }
        if change < config.epsilon {
            run.converged = true;
            break;
        }
    }
    Ok(run)
}

/// Squared extrapolation cycles: two ECM steps, a step along the fitted
/// direction and one ECM step from there. `iterations` counts ECM steps.
fn run_accelerated(
    data: &Dataset,
    family: &ErrorFamily,
    start: MixtureParams,
    config: &FitConfig,
    floor: f64,
) -> Result<Run> {
    let mut run = Run {
        path: config.record_path.then(|| vec![start.clone()]),
        theta: start,
        trace: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut step_max = 1.0_f64;
    while run.iterations < config.max_iterations {
        let (c0, t1) = ecm_step(data, &run.theta, family, config, floor)?;
        run.trace.push(c0.loglik);
        run.iterations += 1;
        let change = parameter_change(&run.theta, &t1);
        if !change.is_finite() {
            return Err(Error::Degenerate { component: 0, reason: "non-finite parameter update".into() });
        }
        if change < config.epsilon || run.iterations >= config.max_iterations {
            run.converged = change < config.epsilon;
            run.theta = t1;
            if let Some(p) = run.path.as_mut() {
                p.push(run.theta.clone());
            }
            break;
        }
        let (_, t2) = ecm_step(data, &t1, family, config, floor)?;
        run.iterations += 1;
        let (x0, x1, x2) = (free_coords(&run.theta), free_coords(&t1), free_coords(&t2));
        let r: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = x2.iter().zip(&x1).zip(&r).map(|((c, b), r)| c - b - r).collect();
        let (nr, nv) = (norm(&r), norm(&v));
        let mut next = t2;
        if nv > 0.0 && run.iterations < config.max_iterations {
            let alpha = (-nr / nv).clamp(-step_max, -1.0);
            let xs: Vec<f64> =
                x0.iter().zip(&r).zip(&v).map(|((x, r), v)| x - 2.0 * alpha * r + alpha * alpha * v).collect();
            let stabilized = from_free(&xs, &run.theta, family, config.nu_bracket, floor)
                .and_then(|ext| ecm_step(data, &ext, family, config, floor));
            run.iterations += 1;
            match stabilized {
                Ok((cx, tx)) if cx.loglik >= c0.loglik => {
                    next = tx;
                    if alpha == -step_max {
                        step_max *= 4.0;
                    }
                }
                _ => step_max = (step_max / 4.0).max(1.0),
            }
        }
        run.theta = next;
        if let Some(p) = run.path.as_mut() {
            p.push(run.theta.clone());
        }
    }
    Ok(run)
}

/// Run ECM from a given start.
pub fn fit_from(data: &Dataset, family: &ErrorFamily, start: MixtureParams, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let family = config.effective_family(family);
    family.validate(start.g())?;
    if start.family != family.kind {
        return Err(Error::InvalidParams(format!("start is {} but the family is {}", start.family, family.kind)));
    }
    start.validate()?;
    let floor = 1e-8 * response_variance(data);
    let Run { theta, mut trace, path, iterations, converged } = if config.accelerate {
        run_accelerated(data, &family, start, config, floor)?
    } else {
        run_plain(data, &family, start, config, floor)?
    };
    // A component on p rows or fewer fits them exactly, and its likelihood
    // grows without bound as sigma shrinks.
    let p = data.p() as f64;
    if let Some(i) = theta.weights.iter().position(|w| w * (data.n() as f64) < p + 1.0) {
        return Err(Error::Degenerate {
            component: i,
            reason: format!("weight {:.3e} leaves fewer than p + 1 = {} effective rows", theta.weights[i], p + 1.0),
        });
    }
    let loglik = log_likelihood(data, &theta)?;
    trace.push(loglik);
    let ic = information_criteria(loglik, &family, &theta, data.n());
    let corrected_intercepts = correct_intercept(&theta)?;
    Ok(FitResult {
        theta,
        family,
        loglik,
        loglik_trace: trace,
        iterations,
        converged,
        corrected_intercepts,
        aic: ic.aic,
        bic: ic.bic,
        start: 0,
        path,
    })
}

/// Best of `config.n_starts` ECM runs by final log-likelihood.
pub fn fit<R: Rng + ?Sized>(
    data: &Dataset,
    family: &ErrorFamily,
    g: usize,
    config: &FitConfig,
    rng: &mut R,
) -> Result<FitResult> {
    config.validate()?;
    let eff = config.effective_family(family);
    let run_config = match config.screen_iterations {
        Some(k) => FitConfig { max_iterations: k, record_path: false, ..config.clone() },
        None => config.clone(),
    };
    let nested = match nested_family(&eff) {
        Some(inner) if config.nested_start => {
            let inner_config = FitConfig { fixed_nu: None, record_path: false, ..config.clone() };
            match fit(data, &inner, g, &inner_config, rng).and_then(|r| lift_start(data, &r.theta, &eff, config.nu_bracket)) {
                Ok(start) => Some(start),
                Err(e) => {
                    log::debug!("nested start failed: {e}");
                    None
                }
            }
        }
        _ => None,
    };
    let total = config.n_starts + usize::from(nested.is_some());
    let mut runs: Vec<FitResult> = Vec::with_capacity(total);
    let mut last_error = String::new();
    // The nested start, when present, is the last one.
    let mut nested = nested;
    for s in 0..total {
        let start = match nested.take() {
            Some(start) if s + 1 == total => Ok(start),
            kept => {
                nested = kept;
                initialize(data, &eff, g, config.init, config.nu_bracket, rng)
            }
        };
        match start.and_then(|start| fit_from(data, &eff, start, &run_config)) {
            Ok(mut r) => {
                r.start = s;
                runs.push(r);
            }
            Err(e) => {
                log::debug!("start {s} failed: {e}");
                last_error = e.to_string();
            }
        }
    }
    // Best first; ties keep the earlier start.
    runs.sort_by(|a, b| b.loglik.total_cmp(&a.loglik));
    if config.screen_iterations.is_none() {
        return runs.into_iter().next().ok_or(Error::FitFailure { starts: total, last: last_error });
    }
    // Carry on from the best screened iterate that completes, keeping the
    // whole trace; a recorded path starts at the screened iterate.
    for screened in runs {
        if screened.converged {
            return Ok(screened);
        }
        match fit_from(data, &eff, screened.theta.clone(), config) {
            Ok(mut full) => {
                let mut trace = screened.loglik_trace;
                trace.pop();
                trace.append(&mut full.loglik_trace);
                full.loglik_trace = trace;
                full.iterations += screened.iterations;
                full.start = screened.start;
                return Ok(full);
            }
            Err(e) => {
                log::debug!("start {} failed after screening: {e}", screened.start);
                last_error = e.to_string();
            }
        }
    }
    Err(Error::FitFailure { starts: total, last: last_error })
}
