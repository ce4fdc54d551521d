//! A small bias/MSE study: one row per scored parameter, `MSE (bias)` per
//! family.
//!
//! `cargo run --release --example monte_carlo_study -- II 200 50` runs
//! Case II with n = 200 and 50 replicates.

use mixreg::em::FitConfig;
use mixreg::experiments::{run_simulation, Case, SimulationReport, SimulationScenario};
use mixreg::model::{ErrorFamily, FamilyKind};
use mixreg::Result;

pub fn study(case: Case, n: usize, replicates: usize) -> Result<SimulationReport> {
    let scenario = SimulationScenario::standard(case, n, replicates, 2024);
    let families = [ErrorFamily::of_kind(FamilyKind::Normal), ErrorFamily::of_kind(FamilyKind::StudentT)];
    run_simulation(&scenario, &families, &FitConfig::accelerated())
}

pub fn run_example() -> Result<SimulationReport> {
    study(Case::I, 100, 4)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let report = match args.as_slice() {
        [case, n, reps] => study(
            Case::parse(case)?,
            n.parse().map_err(|_| mixreg::Error::Config(format!("bad n '{n}'")))?,
            reps.parse().map_err(|_| mixreg::Error::Config(format!("bad replicate count '{reps}'")))?,
        )?,
        _ => run_example()?,
    };
    println!("Case {}, n = {}, {} replicates", report.case, report.n, report.replicates);
    for row in report.table(4) {
        println!("{}", row.iter().map(|c| format!("{c:>20}")).collect::<String>());
    }
    for f in &report.families {
        println!("{}: {} redraws of {} allowed", f.family, f.redraws, report.redraw_budget);
    }
    Ok(())
}
