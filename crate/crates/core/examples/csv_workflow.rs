//! Write a dataset to CSV, configure a fit the way the command line does and
//! emit the JSON report with its plot series.

use std::path::PathBuf;

use mixreg::experiments::{generate_scenario, Case, SimulationScenario};
use mixreg::io::{run, write_csv, Command, LoadedData, Outcome, RunConfig, Settings};
use mixreg::model::Dataset;
use mixreg::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Runs in `dir` and returns the outcome and the report text.
pub fn run_in(dir: &std::path::Path) -> Result<(Outcome, String)> {
    let sim = generate_scenario(&SimulationScenario::standard(Case::I, 200, 1, 0), &mut ChaCha8Rng::seed_from_u64(1))?;
    // Keep the intercept and the first predictor only.
    let rows: Vec<Vec<f64>> = sim.data.rows().map(|(x, _)| x[..2].to_vec()).collect();
    let loaded = LoadedData {
        data: Dataset::new(rows, sim.data.y().to_vec())?,
        predictors: vec!["x1".into()],
        response: "y".into(),
        intercept: true,
    };
    let input = dir.join("two_lines.csv");
    write_csv(&input, &loaded)?;
    let out = dir.join("fit.json");
    let settings = Settings {
        input: Some(input),
        family: Some("t".into()),
        seed: Some(3),
        preset: Some("accelerated".into()),
        out: Some(out.clone()),
        ..Settings::default()
    };
    let outcome = run(&RunConfig::resolve(Command::Fit, settings)?)?;
    let text = std::fs::read_to_string(&out).map_err(|e| mixreg::Error::Config(e.to_string()))?;
    Ok((outcome, text))
}

#[allow(dead_code)]
pub fn run_example() -> Result<(Outcome, String)> {
    let dir = std::env::temp_dir().join(format!("mixreg-csv-workflow-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| mixreg::Error::Config(e.to_string()))?;
    let r = run_in(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    r
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let dir = PathBuf::from("target/csv_workflow");
    std::fs::create_dir_all(&dir).map_err(|e| mixreg::Error::Config(e.to_string()))?;
    let (outcome, text) = run_in(&dir)?;
    println!("{}", text.lines().skip_while(|l| !l.contains("\"families\"")).take(30).collect::<Vec<_>>().join("\n"));
    println!("...");
    println!("exit code {}; wrote {:?}", outcome.exit_code(), outcome.written);
    Ok(())
}
