//! Skew-t density, error mean and sampling.
//!
//! Run with `cargo run --example skew_t_density`.

use mixreg::distributions::{error_mean, skew_t_pdf, skew_t_sample, SkewT};
use mixreg::numerics::{integrate, QuadratureSpec};
use mixreg::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct DensitySummary {
    pub mass: f64,
    pub mean: f64,
    pub sample_mean: f64,
}

pub fn run_example() -> Result<DensitySummary> {
    let (sigma2, lambda, nu) = (1.0, 0.5, 3.0);
    let spec = QuadratureSpec::default();
    let mass = integrate(|e| skew_t_pdf(e, sigma2, lambda, nu).unwrap_or(f64::NAN), f64::NEG_INFINITY, f64::INFINITY, &spec)?;
    let mean = error_mean(1.0, lambda, nu)?;
    let params = SkewT::new(0.0, sigma2, lambda, nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 200_000;
    let mut total = 0.0;
    for _ in 0..draws {
        total += skew_t_sample(&mut rng, &params)?;
    }
    Ok(DensitySummary { mass, mean, sample_mean: total / draws as f64 })
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let s = run_example()?;
    println!("ST(0, 1, 0.5, 3)");
    println!("  total mass      {:.10}", s.mass);
    println!("  mean            {:.6}", s.mean);
    println!("  sample mean     {:.6} (200000 draws)", s.sample_mean);
    for e in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        println!("  f({e:+.1}) = {:.6}", skew_t_pdf(e, 1.0, 0.5, 3.0)?);
    }
    Ok(())
}
