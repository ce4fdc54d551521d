//! Random variates used by the simulations and the Monte Carlo oracles.
//! Every sampler takes the generator explicitly.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use crate::error::{Error, Result};

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
        return Err(Error::domain("normal standard deviation", sd));
    }
    let n = Normal::new(mean, sd).map_err(|_| Error::domain("normal standard deviation", sd))?;
    Ok(n.sample(rng))
}

/// Gamma variate with the given shape and *rate* (mean `shape / rate`).
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::domain("gamma shape", shape));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::domain("gamma rate", rate));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|_| Error::domain("gamma parameters", shape))?;
    Ok(g.sample(rng))
}

/// Draw from N(0, sd^2) truncated to (0, inf), i.e. the half-normal.
pub fn sample_truncated_normal_positive<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::domain("truncated normal standard deviation", sd));
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z != 0.0 {
            return Ok(sd * z.abs());
        }
    }
}
