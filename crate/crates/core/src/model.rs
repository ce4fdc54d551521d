//! Mixture-of-regressions data model: parameters, mixture density,
//! observed-data log-likelihood, responsibilities and information criteria.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions::{CondMoments, SkewT, SkewTKernel};
use crate::error::{Error, Result};
use crate::numerics::special::{normal_ln_pdf, StudentT};

/// The four error families. Normal, Student-t and skew-normal are
/// constrained skew-t models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    Normal,
    StudentT,
    SkewNormal,
    SkewT,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [FamilyKind::Normal, FamilyKind::StudentT, FamilyKind::SkewNormal, FamilyKind::SkewT];

    /// Report label (`MixregN`, `Mixregt`, `MixregSN`, `MixregST`).
    pub fn label(self) -> &'static str {
        match self {
            FamilyKind::Normal => "MixregN",
            FamilyKind::StudentT => "Mixregt",
            FamilyKind::SkewNormal => "MixregSN",
            FamilyKind::SkewT => "MixregST",
        }
    }

    /// Command-line spelling.
    pub fn flag(self) -> &'static str {
        match self {
            FamilyKind::Normal => "normal",
            FamilyKind::StudentT => "t",
            FamilyKind::SkewNormal => "skewnormal",
            FamilyKind::SkewT => "skewt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "n" | "mixregn" => Ok(FamilyKind::Normal),
            "t" | "student" | "studentt" | "mixregt" => Ok(FamilyKind::StudentT),
            "skewnormal" | "sn" | "mixregsn" => Ok(FamilyKind::SkewNormal),
            "skewt" | "st" | "mixregst" => Ok(FamilyKind::SkewT),
            other => Err(Error::Config(format!(
                "unknown family '{other}' (expected normal, t, skewnormal or skewt)"
            ))),
        }
    }

    pub fn is_skewed(self) -> bool {
        matches!(self, FamilyKind::SkewNormal | FamilyKind::SkewT)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Whether a shape parameter is estimated or held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamMode {
    Estimated,
    /// The same value for every component. `f64::INFINITY` is allowed for `nu`.
    Fixed(f64),
    /// One value per component.
    FixedEach(Vec<f64>),
}

impl ParamMode {
    pub fn is_estimated(&self) -> bool {
        matches!(self, ParamMode::Estimated)
    }

    /// Fixed value for component `i`, if any.
    pub fn fixed_value(&self, i: usize) -> Option<f64> {
        match self {
            ParamMode::Estimated => None,
            ParamMode::Fixed(v) => Some(*v),
            ParamMode::FixedEach(vs) => vs.get(i).copied(),
        }
    }
}

/// An error family together with which shape parameters are free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFamily {
    pub kind: FamilyKind,
    pub lambda: ParamMode,
    pub nu: ParamMode,
}

impl ErrorFamily {
    pub fn normal() -> Self {
        ErrorFamily { kind: FamilyKind::Normal, lambda: ParamMode::Fixed(0.0), nu: ParamMode::Fixed(f64::INFINITY) }
    }

    pub fn student_t() -> Self {
        ErrorFamily { kind: FamilyKind::StudentT, lambda: ParamMode::Fixed(0.0), nu: ParamMode::Estimated }
    }

    pub fn skew_normal() -> Self {
        ErrorFamily { kind: FamilyKind::SkewNormal, lambda: ParamMode::Estimated, nu: ParamMode::Fixed(f64::INFINITY) }
    }

    pub fn skew_t() -> Self {
        ErrorFamily { kind: FamilyKind::SkewT, lambda: ParamMode::Estimated, nu: ParamMode::Estimated }
    }

    /// The default (all shapes the family allows estimated) for `kind`.
    pub fn of_kind(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Normal => Self::normal(),
            FamilyKind::StudentT => Self::student_t(),
            FamilyKind::SkewNormal => Self::skew_normal(),
            FamilyKind::SkewT => Self::skew_t(),
        }
    }

    /// Hold the degrees of freedom fixed (no effect on families with `nu = inf`).
    pub fn with_fixed_nu(mut self, nu: f64) -> Self {
        if matches!(self.kind, FamilyKind::StudentT | FamilyKind::SkewT) {
            self.nu = ParamMode::Fixed(nu);
        }
        self
    }

    pub fn with_fixed_lambda(mut self, lambda: f64) -> Self {
        self.lambda = ParamMode::Fixed(lambda);
        self
    }

    pub fn validate(&self, g: usize) -> Result<()> {
        let lam0 = |m: &ParamMode| (0..g).all(|i| m.fixed_value(i) == Some(0.0));
        let nu_inf = |m: &ParamMode| (0..g).all(|i| m.fixed_value(i) == Some(f64::INFINITY));
        let ok = match self.kind {
            FamilyKind::Normal => lam0(&self.lambda) && nu_inf(&self.nu),
            FamilyKind::StudentT => lam0(&self.lambda),
            FamilyKind::SkewNormal => nu_inf(&self.nu),
            FamilyKind::SkewT => true,
        };
        if !ok {
            return Err(Error::InvalidParams(format!("shape constraints inconsistent with family {}", self.kind)));
        }
        for mode in [&self.lambda, &self.nu] {
            if let ParamMode::FixedEach(v) = mode {
                if v.len() != g {
                    return Err(Error::InvalidParams(format!(
                        "per-component shape values have length {}, expected {g}",
                        v.len()
                    )));
                }
            }
        }
        for i in 0..g {
            if let Some(l) = self.lambda.fixed_value(i) {
                if !l.is_finite() {
                    return Err(Error::domain("fixed lambda", l));
                }
            }
            if let Some(v) = self.nu.fixed_value(i) {
                if !(v > 0.0) {
                    return Err(Error::domain("fixed nu", v));
                }
            }
        }
        Ok(())
    }

    /// Number of free parameters: `g - 1` weights, `g p` coefficients, `g`
    /// scales, plus `g` skewness and `g` degrees-of-freedom parameters when
    /// those are estimated.
    pub fn free_parameters(&self, g: usize, p: usize) -> usize {
        let mut m = (g - 1) + g * p + g;
        if self.lambda.is_estimated() {
            m += g;
        }
        if self.nu.is_estimated() {
            m += g;
        }
        m
    }
}

/// One regression component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub lambda: f64,
    /// Degrees of freedom; `f64::INFINITY` for the normal-tailed families.
    pub nu: f64,
}

impl Component {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.beta.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

/// The full parameter vector
/// `(w_1..w_g, beta_1..beta_g, sigma_1^2..sigma_g^2, lambda_1..lambda_g, nu_1..nu_g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub family: FamilyKind,
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
}

impl MixtureParams {
    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn p(&self) -> usize {
        self.components.first().map_or(0, |c| c.beta.len())
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.g();
        if g == 0 || self.weights.len() != g {
            return Err(Error::InvalidParams(format!("{} weights for {g} components", self.weights.len())));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.weights.iter().any(|&w| !(w > 0.0 && w < 1.0 || g == 1 && w == 1.0)) {
            return Err(Error::InvalidParams(format!("weights {:?} are not a probability vector", self.weights)));
        }
        let p = self.p();
        for (i, c) in self.components.iter().enumerate() {
            if c.beta.len() != p || c.beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidParams(format!("component {i} has invalid coefficients")));
            }
            if !(c.sigma2 > 0.0) || !c.sigma2.is_finite() {
                return Err(Error::InvalidParams(format!("component {i} has scale {}", c.sigma2)));
            }
            if !(c.nu > 0.0) || !c.lambda.is_finite() {
                return Err(Error::InvalidParams(format!("component {i} has shape ({}, {})", c.lambda, c.nu)));
            }
            let ok = match self.family {
                FamilyKind::Normal => c.lambda == 0.0 && c.nu.is_infinite(),
                FamilyKind::StudentT => c.lambda == 0.0,
                FamilyKind::SkewNormal => c.nu.is_infinite(),
                FamilyKind::SkewT => true,
            };
            if !ok {
                return Err(Error::InvalidParams(format!(
                    "component {i} shape ({}, {}) violates the {} constraints",
                    c.lambda, c.nu, self.family
                )));
            }
        }
        Ok(())
    }

    /// Components reordered so that new component `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> MixtureParams {
        MixtureParams {
            family: self.family,
            weights: perm.iter().map(|&k| self.weights[k]).collect(),
            components: perm.iter().map(|&k| self.components[k].clone()).collect(),
        }
    }

    pub(crate) fn kernels(&self) -> Result<Vec<ComponentKernel>> {
        self.components.iter().map(|c| ComponentKernel::new(self.family, c)).collect()
    }
}

/// Design matrix (row-major, `n x p`) and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    p: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != y.len() {
            return Err(Error::InvalidData(format!("{} design rows but {} responses", rows.len(), y.len())));
        }
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidData("design rows have differing lengths".into()));
        }
        let x: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(x, y, p)
    }

    /// From a row-major `n x p` buffer.
    pub fn from_flat(x: Vec<f64>, y: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if p == 0 {
            return Err(Error::InvalidData("design matrix has no columns".into()));
        }
        if x.len() != n * p {
            return Err(Error::InvalidData(format!("design buffer of {} for {n} x {p}", x.len())));
        }
        if let Some(j) = (0..n).find(|&j| !y[j].is_finite() || x[j * p..(j + 1) * p].iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidData(format!("non-finite value in row {j}")));
        }
        Ok(Dataset { x, y, p })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.x[j * self.p..(j + 1) * self.p]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.x.chunks_exact(self.p).zip(self.y.iter().copied())
    }

    /// Append observations.
    pub fn with_rows(&self, extra: &[(Vec<f64>, f64)]) -> Result<Dataset> {
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        for (row, v) in extra {
            if row.len() != self.p {
                return Err(Error::InvalidData(format!("appended row of length {} for p = {}", row.len(), self.p)));
            }
            x.extend_from_slice(row);
            y.push(*v);
        }
        Dataset::from_flat(x, y, self.p)
    }

    /// Same design, new response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::from_flat(self.x.clone(), y, self.p)
    }
}

/// Posterior component probabilities, `n x g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub z: DMatrix<f64>,
}

/// Per-component density evaluator with constants cached.
#[derive(Debug, Clone)]
pub(crate) enum ComponentKernel {
    Gaussian { ln_sigma: f64, sigma: f64 },
    Student { t: StudentT, ln_sigma: f64, sigma: f64 },
    Skew(Box<SkewTKernel>),
}

impl ComponentKernel {
    pub(crate) fn new(kind: FamilyKind, c: &Component) -> Result<Self> {
        if !(c.sigma2 > 0.0) || !c.sigma2.is_finite() {
            return Err(Error::domain("component scale sigma^2", c.sigma2));
        }
        let sigma = c.sigma();
        Ok(match kind {
            FamilyKind::Normal => ComponentKernel::Gaussian { ln_sigma: sigma.ln(), sigma },
            FamilyKind::StudentT => ComponentKernel::Student { t: StudentT::new(c.nu)?, ln_sigma: sigma.ln(), sigma },
            FamilyKind::SkewNormal | FamilyKind::SkewT => {
                ComponentKernel::Skew(Box::new(SkewTKernel::new(SkewT::new(0.0, c.sigma2, c.lambda, c.nu)?)?))
            }
        })
    }

    pub(crate) fn ln_pdf(&self, residual: f64) -> f64 {
        match self {
            ComponentKernel::Gaussian { ln_sigma, sigma } => normal_ln_pdf(residual / sigma) - ln_sigma,
            ComponentKernel::Student { t, ln_sigma, sigma } => t.ln_pdf(residual / sigma) - ln_sigma,
            ComponentKernel::Skew(k) => k.ln_pdf(residual),
        }
    }

    /// Conditional latent moments for one residual.
    pub(crate) fn moments(&self, residual: f64, with_log_tau: bool) -> Result<CondMoments> {
        match self {
            ComponentKernel::Gaussian { .. } => {
                Ok(CondMoments { tau: 1.0, gamma_tau: 0.0, gamma2_tau: 1.0, log_tau: 0.0 })
            }
            ComponentKernel::Student { t, sigma, .. } => {
                let nu = t.nu();
                let eta = residual / sigma;
                let q = eta * eta + nu;
                let tau = (nu + 1.0) / q;
                let log_tau = if with_log_tau {
                    crate::numerics::special::digamma_pos(0.5 * (nu + 1.0)) - (0.5 * q).ln()
                } else {
                    0.0
                };
                Ok(CondMoments { tau, gamma_tau: 0.0, gamma2_tau: 1.0, log_tau })
            }
            ComponentKernel::Skew(k) => k.moments(residual, with_log_tau),
        }
    }
}

/// Log density of `y` given `x` under one component.
pub fn component_ln_density(kind: FamilyKind, y: f64, x: &[f64], comp: &Component) -> Result<f64> {
    Ok(ComponentKernel::new(kind, comp)?.ln_pdf(y - comp.mean(x)))
}

/// Density of `y` given `x` under one component.
pub fn component_density(kind: FamilyKind, y: f64, x: &[f64], comp: &Component) -> Result<f64> {
    component_ln_density(kind, y, x, comp).map(f64::exp)
}

/// `ln(sum_i exp(v_i))`, `-inf` when every term is `-inf`.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// Mixture density `sum_i w_i f_i(y - x' beta_i)`.
pub fn mixture_density(y: f64, x: &[f64], theta: &MixtureParams) -> Result<f64> {
    theta.validate()?;
    let kernels = theta.kernels()?;
    let terms: Vec<f64> = kernels
        .iter()
        .zip(&theta.components)
        .zip(&theta.weights)
        .map(|((k, c), w)| w.ln() + k.ln_pdf(y - c.mean(x)))
        .collect();
    Ok(log_sum_exp(&terms).exp())
}

/// Per-observation log joint terms `ln w_i + ln f_i`, written into `out`
/// (length `g`); returns the log mixture density.
pub(crate) fn joint_terms(
    kernels: &[ComponentKernel],
    theta: &MixtureParams,
    x: &[f64],
    y: f64,
    out: &mut [f64],
) -> f64 {
    for (i, ((k, c), w)) in kernels.iter().zip(&theta.components).zip(&theta.weights).enumerate() {
        out[i] = w.ln() + k.ln_pdf(y - c.mean(x));
    }
    log_sum_exp(out)
}

/// Observed-data log-likelihood, accumulated in observation order.
pub fn log_likelihood(data: &Dataset, theta: &MixtureParams) -> Result<f64> {
    theta.validate()?;
    let kernels = theta.kernels()?;
    let mut buf = vec![0.0; theta.g()];
    let mut total = 0.0;
    for (j, (x, y)) in data.rows().enumerate() {
        let l = joint_terms(&kernels, theta, x, y, &mut buf);
        if !l.is_finite() {
            return Err(Error::DegenerateLikelihood { observation: j });
        }
        total += l;
    }
    Ok(total)
}

/// Posterior probabilities that each observation came from each component.
pub fn responsibilities(data: &Dataset, theta: &MixtureParams) -> Result<Responsibilities> {
    theta.validate()?;
    let kernels = theta.kernels()?;
    let g = theta.g();
    let mut z = DMatrix::zeros(data.n(), g);
    let mut buf = vec![0.0; g];
    for (j, (x, y)) in data.rows().enumerate() {
        let l = joint_terms(&kernels, theta, x, y, &mut buf);
        if !l.is_finite() {
            return Err(Error::DegenerateLikelihood { observation: j });
        }
        for i in 0..g {
            z[(j, i)] = (buf[i] - l).exp();
        }
    }
    Ok(Responsibilities { z })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
    pub free_parameters: usize,
}

/// AIC `-2 l + 2 m` and BIC `-2 l + m ln n` for a given free-parameter count.
pub fn information_criteria_for(loglik: f64, free_parameters: usize, n: usize) -> InformationCriteria {
    let m = free_parameters as f64;
    InformationCriteria { aic: -2.0 * loglik + 2.0 * m, bic: -2.0 * loglik + m * (n as f64).ln(), free_parameters }
}

/// AIC and BIC of a fitted `theta`, counting only the parameters `family`
/// leaves free.
pub fn information_criteria(loglik: f64, family: &ErrorFamily, theta: &MixtureParams, n: usize) -> InformationCriteria {
    information_criteria_for(loglik, family.free_parameters(theta.g(), theta.p()), n)
}
