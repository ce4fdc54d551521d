//! The numerical building blocks: Student-t cdf, digamma, bracketed root
//! finding and scalar minimisation.

use mixreg::numerics::{digamma, find_root, minimize_scalar, student_t_cdf, RootBracket};
use mixreg::Result;

pub struct Values {
    pub t3_cdf_at_1: f64,
    pub digamma_1: f64,
    /// Degrees of freedom solving the score equation with data term -1.3.
    pub nu_root: f64,
    pub minimum: f64,
}

pub fn run_example() -> Result<Values> {
    let t3_cdf_at_1 = student_t_cdf(1.0, 3.0)?;
    let digamma_1 = digamma(1.0)?;
    let score = |nu: f64| (0.5 * nu).ln() + 1.0 - digamma(0.5 * nu).unwrap_or(f64::NAN) - 1.3;
    let nu_root = find_root(score, RootBracket::new(1.1, 100.0)?, 1e-12)?.root;
    let minimum = minimize_scalar(|x: f64| (x - 2.0).powi(2) + x.cos(), RootBracket::new(0.0, 5.0)?, 1e-10)?.x;
    Ok(Values { t3_cdf_at_1, digamma_1, nu_root, minimum })
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let v = run_example()?;
    println!("T_3(1)              = {:.15}", v.t3_cdf_at_1);
    println!("digamma(1)          = {:.15}", v.digamma_1);
    println!("nu score root       = {:.12}", v.nu_root);
    println!("argmin (x-2)^2+cos x = {:.10}", v.minimum);
    Ok(())
}
