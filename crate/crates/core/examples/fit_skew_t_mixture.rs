//! Fit a two-component skew-t mixture of regressions to simulated data with
//! skewed, heavy-tailed errors.

use mixreg::em::{fit, FitConfig, FitResult};
use mixreg::experiments::{generate_scenario, Case, SimulationScenario};
use mixreg::model::ErrorFamily;
use mixreg::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<FitResult> {
    let scenario = SimulationScenario::standard(Case::IV, 400, 1, 0);
    let sim = generate_scenario(&scenario, &mut ChaCha8Rng::seed_from_u64(4))?;
    fit(&sim.data, &ErrorFamily::skew_t(), 2, &FitConfig::accelerated(), &mut ChaCha8Rng::seed_from_u64(5))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let r = run_example()?;
    println!("{} after {} ECM steps, converged: {}", r.family.kind, r.iterations, r.converged);
    println!("log-likelihood {:.4}  AIC {:.4}  BIC {:.4}", r.loglik, r.aic, r.bic);
    for (i, (c, b0)) in r.theta.components.iter().zip(&r.corrected_intercepts).enumerate() {
        println!(
            "component {}: w {:.3}  beta {:.3?}  corrected intercept {b0:.3}  sigma {:.3}  lambda {:.3}  nu {:.2}",
            i + 1,
            r.theta.weights[i],
            c.beta,
            c.sigma(),
            c.lambda,
            c.nu
        );
    }
    Ok(())
}
