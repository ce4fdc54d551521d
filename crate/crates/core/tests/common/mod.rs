//! Shared fixtures for the integration and acceptance tests.
#![allow(dead_code)]

use mixreg::distributions::{skew_t_sample, SkewT};
use mixreg::model::{Dataset, ErrorFamily, FamilyKind, ParamMode};
use mixreg::numerics::{sample_gamma, sample_normal, sample_truncated_normal_positive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two noisy lines in one predictor with skew-t errors, about 40% of rows on
/// the first line.
pub fn two_line_data(n: usize, lambda: f64, nu: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let err = SkewT::new(0.0, 0.25, lambda, nu).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = r.random_range(-2.0..2.0);
        let e = skew_t_sample(&mut r, &err).unwrap();
        rows.push(vec![1.0, x]);
        y.push(if r.random_bool(0.4) { 1.0 + 2.0 * x + e } else { -1.0 - x + e });
    }
    Dataset::new(rows, y).unwrap()
}

/// A random dataset for invariant checks: size, slopes, error shape and the
/// number of predictors all vary with the seed.
pub fn random_dataset(seed: u64) -> Dataset {
    let mut r = rng(seed);
    let n = r.random_range(60..160);
    let p = r.random_range(2..4);
    let lambda = r.random_range(-3.0..3.0);
    let nu = r.random_range(2.0..12.0);
    let err = SkewT::new(0.0, r.random_range(0.2..1.5), lambda, nu).unwrap();
    let b: Vec<Vec<f64>> = (0..2).map(|_| (0..p).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = vec![1.0];
        x.extend((1..p).map(|_| r.random_range(-2.0..2.0)));
        let k = usize::from(r.random_bool(0.5));
        let mean: f64 = x.iter().zip(&b[k]).map(|(a, c)| a * c).sum();
        y.push(mean + skew_t_sample(&mut r, &err).unwrap());
        rows.push(x);
    }
    Dataset::new(rows, y).unwrap()
}

pub fn all_families() -> Vec<ErrorFamily> {
    FamilyKind::ALL.iter().map(|&k| ErrorFamily::of_kind(k)).collect()
}

/// The skew-t family with both shapes frozen at the normal values.
pub fn frozen_skew_t() -> ErrorFamily {
    ErrorFamily { kind: FamilyKind::SkewT, lambda: ParamMode::Fixed(0.0), nu: ParamMode::Fixed(f64::INFINITY) }
}

/// Monte Carlo estimate of a conditional expectation and its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// `E(tau | y)`, `E(gamma tau | y)`, `E(gamma^2 tau | y)` and
/// `E(log tau | y)` for a zero-location skew-t, by self-normalised
/// importance sampling from the hierarchical prior of `(gamma, tau)`.
/// The weight of a draw is the normal density of `y` given it.
pub fn hierarchical_oracle(y: f64, params: &SkewT, draws: usize, seed: u64) -> [Estimate; 4] {
    let mut r = rng(seed);
    let d = params.derived();
    let (alpha, kappa2) = (d.alpha, d.kappa2);
    let mut w = Vec::with_capacity(draws);
    let mut h = Vec::with_capacity(draws);
    for _ in 0..draws {
        let tau = sample_gamma(&mut r, 0.5 * params.nu, 0.5 * params.nu).unwrap();
        let gamma = sample_truncated_normal_positive(&mut r, 1.0).unwrap() / tau.sqrt();
        let resid = y - alpha * gamma;
        // Unnormalised N(alpha gamma, kappa^2 / tau) density.
        w.push(tau.sqrt() * (-0.5 * tau * resid * resid / kappa2).exp());
        h.push([tau, gamma * tau, gamma * gamma * tau, tau.ln()]);
    }
    let total: f64 = w.iter().sum();
    let mut out = [Estimate { mean: 0.0, se: 0.0 }; 4];
    for (k, est) in out.iter_mut().enumerate() {
        let mean = w.iter().zip(&h).map(|(wi, hi)| wi * hi[k]).sum::<f64>() / total;
        // Delta-method variance of a ratio estimator.
        let var = w.iter().zip(&h).map(|(wi, hi)| (wi * (hi[k] - mean)).powi(2)).sum::<f64>() / (total * total);
        *est = Estimate { mean, se: var.sqrt() };
    }
    out
}

/// Sample moments of `draws` normal variates, as a sampler sanity check.
pub fn normal_moments(draws: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let xs: Vec<f64> = (0..draws).map(|_| sample_normal(&mut r, 2.0, 3.0).unwrap()).collect();
    let m = xs.iter().sum::<f64>() / draws as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
    (m, v)
}
