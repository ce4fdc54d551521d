//! The E-step quantities for single observations: posterior means of the
//! latent scale and skewing variables under a skew-t error.

use mixreg::distributions::{cond_log_tau_by_quadrature, conditional_moments, CondMoments, SkewT};
use mixreg::Result;

pub fn run_example() -> Result<Vec<(f64, CondMoments, f64)>> {
    let params = SkewT::new(0.0, 1.5, 2.0, 4.0)?;
    [-4.0, -1.0, 0.0, 0.5, 2.0, 6.0]
        .into_iter()
        .map(|y| Ok((y, conditional_moments(y, &params)?, cond_log_tau_by_quadrature(y, &params)?)))
        .collect()
}

#[allow(dead_code)]
fn main() -> Result<()> {
    println!("ST(0, 1.5, 2, 4)");
    println!("{:>6} {:>10} {:>12} {:>13} {:>12} {:>12}", "y", "E(tau)", "E(g tau)", "E(g^2 tau)", "E(log tau)", "quadrature");
    for (y, m, q) in run_example()? {
        println!("{y:>6.1} {:>10.6} {:>12.6} {:>13.6} {:>12.6} {q:>12.6}", m.tau, m.gamma_tau, m.gamma2_tau, m.log_tau);
    }
    Ok(())
}
