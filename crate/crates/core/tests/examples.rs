//! Every runnable example, run as a test.

#[path = "../examples/compare_families.rs"]
mod compare_families;
#[path = "../examples/conditional_moments.rs"]
mod conditional_moments;
#[path = "../examples/csv_workflow.rs"]
mod csv_workflow;
#[path = "../examples/fit_skew_t_mixture.rs"]
mod fit_skew_t_mixture;
#[path = "../examples/monte_carlo_study.rs"]
mod monte_carlo_study;
#[path = "../examples/skew_t_density.rs"]
mod skew_t_density;
#[path = "../examples/special_functions.rs"]
mod special_functions;

use mixreg::model::FamilyKind;

#[test]
fn skew_t_density_example() {
    let s = skew_t_density::run_example().unwrap();
    assert!((s.mass - 1.0).abs() < 1e-7);
    // 200000 draws of a t_3 variate: the standard error is about 0.004.
    assert!((s.sample_mean - s.mean).abs() < 0.02, "{} vs {}", s.sample_mean, s.mean);
}

#[test]
fn conditional_moments_example() {
    for (y, m, quad) in conditional_moments::run_example().unwrap() {
        assert!(m.tau > 0.0 && m.gamma_tau > 0.0 && m.gamma2_tau > 0.0, "y = {y}");
        assert!((m.log_tau - quad).abs() < 1e-6, "y = {y}: {} vs {quad}", m.log_tau);
    }
}

#[test]
fn special_functions_example() {
    let v = special_functions::run_example().unwrap();
    // T_3(1) = 1/2 + (1/pi) (atan(1/sqrt 3) + sqrt(3)/4)
    let t3 = 0.5 + (std::f64::consts::FRAC_PI_6 + 3f64.sqrt() / 4.0) / std::f64::consts::PI;
    assert!((v.t3_cdf_at_1 - t3).abs() < 1e-13);
    assert!((v.digamma_1 + 0.577_215_664_901_532_9).abs() < 1e-13);
    let score = (0.5 * v.nu_root).ln() + 1.0 - mixreg::numerics::digamma(0.5 * v.nu_root).unwrap() - 1.3;
    assert!(score.abs() < 1e-10);
    // (x - 2)^2 + cos x is stationary where 2 (x - 2) = sin x.
    assert!((2.0 * (v.minimum - 2.0) - v.minimum.sin()).abs() < 1e-6);
}

#[test]
fn fit_skew_t_mixture_example() {
    let r = fit_skew_t_mixture::run_example().unwrap();
    assert!(r.converged);
    let mut slopes: Vec<f64> = r.theta.components.iter().map(|c| c.beta[1]).collect();
    slopes.sort_by(f64::total_cmp);
    // True slopes are -1 and 1.
    assert!((slopes[0] + 1.0).abs() < 0.4 && (slopes[1] - 1.0).abs() < 0.4, "{slopes:?}");
}

#[test]
fn compare_families_example() {
    let (clean, dirty) = compare_families::run_example().unwrap();
    assert_eq!(clean.fits.len(), 4);
    assert_eq!(dirty.n, clean.n + 10);
    assert_eq!(clean.aic_order()[0], FamilyKind::Normal);
    assert!(clean.fits.iter().all(|f| f.converged));
}

#[test]
fn monte_carlo_study_example() {
    let rep = monte_carlo_study::run_example().unwrap();
    assert_eq!(rep.families.len(), 2);
    let table = rep.table(4);
    assert_eq!(table.len(), 8);
    assert!(rep.families.iter().all(|f| f.replicates_used == 4));
}

#[test]
fn csv_workflow_example() {
    let (outcome, text) = csv_workflow::run_example().unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["families"][0]["name"], "Mixregt");
    assert_eq!(v["plot_series"].as_array().unwrap().len(), 2);
}
