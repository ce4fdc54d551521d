//! Data ingestion, run configuration and report emission for the command
//! line tool.
//!
//! Numbers are written at 12 significant digits in both CSV and JSON.
//! Infinite degrees of freedom are `inf` in CSV and `null` in JSON.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::em::{fit, FitConfig, FitResult, LambdaUpdate, NuUpdate};
use crate::error::{Error, Result};
use crate::experiments::{run_real_data, run_simulation, Case, OutlierSpec, SimulationReport, SimulationScenario};
use crate::model::{Dataset, ErrorFamily, FamilyKind};

const SIG_DIGITS: usize = 12;
const PLOT_POINTS: usize = 101;

/// `v` rounded to 12 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

/// CSV cell for `v`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", round_sig(v))
    }
}

fn json_number(v: f64) -> Value {
    // Non-finite values become null.
    Value::from(round_sig(v))
}

/// A dataset read from CSV with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub data: Dataset,
    /// Predictor names, without the intercept.
    pub predictors: Vec<String>,
    pub response: String,
    /// Whether the first design column is the prepended intercept.
    pub intercept: bool,
}

/// Read a CSV file with a header row. The response is the column named
/// `response`, or the last one; the other columns are predictors.
pub fn load_csv(path: &Path, response: Option<&str>, intercept: bool) -> Result<LoadedData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, response, intercept)
}

/// [`load_csv`] on any reader; `source` names it in errors.
pub fn read_csv<R: Read>(reader: R, source: &Path, response: Option<&str>, intercept: bool) -> Result<LoadedData> {
    let parse_err = |line: u64, message: String| Error::Parse { path: source.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(parse_err(1, "empty file or missing header row".into()));
    }
    let target = match response {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("no column named '{name}' (columns: {})", header.join(", "))))?,
        None => header.len() - 1,
    };
    if header.len() < 2 && !intercept {
        return Err(parse_err(1, "need at least one predictor column".into()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if intercept {
            x.push(1.0);
        }
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column '{}': '{cell}' is not a number", header[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column '{}': non-finite value '{cell}'", header[k])));
            }
            if k == target {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    let p = header.len() - 1 + usize::from(intercept);
    let predictors = header.iter().enumerate().filter(|&(k, _)| k != target).map(|(_, h)| h.clone()).collect();
    Ok(LoadedData { data: Dataset::from_flat(x, y, p)?, predictors, response: header[target].clone(), intercept })
}

/// Write `loaded` back as CSV: predictors then the response, values in
/// shortest round-trip form.
pub fn write_csv(path: &Path, loaded: &LoadedData) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Config(format!("writing {}: {e}", path.display()));
    let mut header = loaded.predictors.clone();
    header.push(loaded.response.clone());
    w.write_record(&header).map_err(csv_err)?;
    let skip = usize::from(loaded.intercept);
    for (x, y) in loaded.data.rows() {
        let rec: Vec<String> = x[skip..].iter().chain(std::iter::once(&y)).map(|v| format!("{v}")).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Points along one fitted line, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Each component's line `corrected intercept + slope * x` over the
/// observed range of the single predictor. Empty unless the design is an
/// intercept plus one predictor.
pub fn plot_series(result: &FitResult, loaded: &LoadedData) -> Vec<PlotSeries> {
    if !(loaded.intercept && loaded.data.p() == 2) {
        return Vec::new();
    }
    let (lo, hi) = loaded
        .data
        .rows()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(x[1]), hi.max(x[1])));
    let step = if PLOT_POINTS > 1 { (hi - lo) / (PLOT_POINTS - 1) as f64 } else { 0.0 };
    result
        .theta
        .components
        .iter()
        .zip(&result.corrected_intercepts)
        .enumerate()
        .map(|(i, (c, &b0))| PlotSeries {
            name: format!("{} component {}", result.family.kind.label(), i + 1),
            points: (0..PLOT_POINTS)
                .map(|k| {
                    let x = if k + 1 == PLOT_POINTS { hi } else { lo + step * k as f64 };
                    (round_sig(x), round_sig(b0 + c.beta[1] * x))
                })
                .collect(),
        })
        .collect()
}

/// Named estimates in the order `beta_ik`, `sigma_i`, `lambda_i`, `nu_i`,
/// `w_i`. Coefficients count from 0 when the first column is the
/// intercept and from 1 otherwise.
pub fn parameter_table(result: &FitResult, intercept: bool) -> Vec<(String, f64)> {
    let theta = &result.theta;
    let first = usize::from(!intercept);
    let mut out = Vec::new();
    for k in 0..theta.p() {
        for (i, c) in theta.components.iter().enumerate() {
            out.push((format!("beta{}{}", i + 1, k + first), c.beta[k]));
        }
    }
    for (i, c) in theta.components.iter().enumerate() {
        out.push((format!("sigma{}", i + 1), c.sigma()));
    }
    if theta.family.is_skewed() {
        for (i, c) in theta.components.iter().enumerate() {
            out.push((format!("lambda{}", i + 1), c.lambda));
        }
    }
    if matches!(theta.family, FamilyKind::StudentT | FamilyKind::SkewT) {
        for (i, c) in theta.components.iter().enumerate() {
            out.push((format!("nu{}", i + 1), c.nu));
        }
    }
    for (i, w) in theta.weights.iter().enumerate() {
        out.push((format!("w{}", i + 1), *w));
    }
    out
}

/// One entry of the report's `families` list.
pub fn family_json(result: &FitResult, intercept: bool) -> Value {
    let params: Map<String, Value> =
        parameter_table(result, intercept).into_iter().map(|(k, v)| (k, json_number(v))).collect();
    json!({
        "name": result.family.kind.label(),
        "params": params,
        "loglik": json_number(result.loglik),
        "aic": json_number(result.aic),
        "bic": json_number(result.bic),
        "converged": result.converged,
        "iterations": result.iterations,
        "corrected_intercepts": result.corrected_intercepts.iter().map(|&v| json_number(v)).collect::<Vec<_>>(),
    })
}

/// Side-by-side CSV rows: one column per fit, one row per quantity.
pub fn fits_table(fits: &[FitResult], intercept: bool) -> Vec<Vec<String>> {
    let tables: Vec<Vec<(String, f64)>> = fits.iter().map(|f| parameter_table(f, intercept)).collect();
    let mut names: Vec<String> = Vec::new();
    for t in &tables {
        for (name, _) in t {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
    }
    let mut rows = vec![std::iter::once("parameter".to_string()).chain(fits.iter().map(|f| f.family.kind.label().to_string())).collect()];
    for name in &names {
        let mut row = vec![name.clone()];
        for t in &tables {
            row.push(t.iter().find(|(n, _)| n == name).map(|(_, v)| format_number(*v)).unwrap_or_default());
        }
        rows.push(row);
    }
    let g = fits.iter().map(|f| f.corrected_intercepts.len()).max().unwrap_or(0);
    for i in 0..g {
        let mut row = vec![format!("corrected_intercept{}", i + 1)];
        row.extend(fits.iter().map(|f| f.corrected_intercepts.get(i).map(|&v| format_number(v)).unwrap_or_default()));
        rows.push(row);
    }
    type Field = fn(&FitResult) -> String;
    let summary: [(&str, Field); 5] = [
        ("loglik", |f| format_number(f.loglik)),
        ("aic", |f| format_number(f.aic)),
        ("bic", |f| format_number(f.bic)),
        ("iterations", |f| f.iterations.to_string()),
        ("converged", |f| f.converged.to_string()),
    ];
    for (label, field) in summary {
        let mut row = vec![label.to_string()];
        row.extend(fits.iter().map(field));
        rows.push(row);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fit,
    Simulate,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

/// Fit settings to start from before individual overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// [`FitConfig::default`].
    Standard,
    /// [`FitConfig::accelerated`].
    Accelerated,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(Preset::Standard),
            "accelerated" => Ok(Preset::Accelerated),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected standard or accelerated)"))),
        }
    }

    fn config(self) -> FitConfig {
        match self {
            Preset::Standard => FitConfig::default(),
            Preset::Accelerated => FitConfig::accelerated(),
        }
    }
}

/// Every setting as an optional value, from flags or a TOML file. Keys in
/// the file use the flag names with underscores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub response: Option<String>,
    pub no_intercept: Option<bool>,
    pub family: Option<String>,
    pub families: Option<String>,
    pub g: Option<usize>,
    pub fix_nu: Option<f64>,
    pub outliers: Option<String>,
    pub case: Option<String>,
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub preset: Option<String>,
    pub max_iterations: Option<usize>,
    pub epsilon: Option<f64>,
    pub starts: Option<usize>,
    pub screen_iterations: Option<usize>,
    pub accelerate: Option<bool>,
    pub nested_start: Option<bool>,
    pub nu_update: Option<String>,
    pub lambda_update: Option<String>,
}

macro_rules! or_fields {
    ($hi:ident, $lo:ident, $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    pub fn from_toml_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise `self` over `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        let (hi, lo) = (self, lower);
        or_fields!(
            hi, lo, input, response, no_intercept, family, families, g, fix_nu, outliers, case, n, replicates,
            seed, out, format, preset, max_iterations, epsilon, starts, screen_iterations, accelerate,
            nested_start, nu_update, lambda_update
        )
    }
}

/// A validated command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub response: Option<String>,
    pub intercept: bool,
    pub families: Vec<FamilyKind>,
    pub g: usize,
    pub outliers: Option<OutlierSpec>,
    pub case: Option<Case>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub fit: FitConfig,
}

fn parse_families(list: &str) -> Result<Vec<FamilyKind>> {
    let fams = list.split(',').filter(|s| !s.trim().is_empty()).map(FamilyKind::parse).collect::<Result<Vec<_>>>()?;
    if fams.is_empty() {
        return Err(Error::Config("empty family list".into()));
    }
    Ok(fams)
}

impl RunConfig {
    /// Validate `settings` for `command` and fill in defaults.
    pub fn resolve(command: Command, settings: Settings) -> Result<RunConfig> {
        let s = settings;
        let need = |what: &str| Error::Config(format!("{} requires --{what}", command_name(command)));
        let preset = match &s.preset {
            Some(p) => Preset::parse(p)?,
            None if command == Command::Simulate => Preset::Accelerated,
            None => Preset::Standard,
        };
        let mut fit = preset.config();
        if let Some(v) = s.max_iterations {
            fit.max_iterations = v;
        }
        if let Some(v) = s.epsilon {
            fit.epsilon = v;
        }
        if let Some(v) = s.starts {
            fit.n_starts = v;
        }
        if let Some(v) = s.screen_iterations {
            fit.screen_iterations = (v > 0).then_some(v);
        }
        if let Some(v) = s.accelerate {
            fit.accelerate = v;
        }
        if let Some(v) = s.nested_start {
            fit.nested_start = v;
        }
        if let Some(v) = &s.nu_update {
            fit.nu_update = match v.to_ascii_lowercase().as_str() {
                "ecm" => NuUpdate::Ecm,
                "ecme" => NuUpdate::Ecme,
                other => return Err(Error::Config(format!("unknown nu update '{other}' (expected ecm or ecme)"))),
            };
        }
        if let Some(v) = &s.lambda_update {
            fit.lambda_update = match v.to_ascii_lowercase().as_str() {
                "shortcut" => LambdaUpdate::DeltaShortcut,
                "solve" => LambdaUpdate::SolveScore,
                other => {
                    return Err(Error::Config(format!("unknown lambda update '{other}' (expected shortcut or solve)")))
                }
            };
        }
        fit.fixed_nu = s.fix_nu;
        fit.validate()?;
        let families = match command {
            Command::Fit => vec![FamilyKind::parse(s.family.as_deref().ok_or_else(|| need("family"))?)?],
            _ => match &s.families {
                Some(list) => parse_families(list)?,
                None => FamilyKind::ALL.to_vec(),
            },
        };
        let input = match command {
            Command::Simulate => None,
            _ => Some(s.input.clone().ok_or_else(|| need("input"))?),
        };
        let case = match command {
            Command::Simulate => Some(Case::parse(s.case.as_deref().ok_or_else(|| need("case"))?)?),
            _ => None,
        };
        let outliers = s.outliers.as_deref().map(OutlierSpec::parse).transpose()?;
        let g = s.g.unwrap_or(2);
        if g == 0 {
            return Err(Error::Config("--g must be at least 1".into()));
        }
        let config = RunConfig {
            command,
            input,
            response: s.response,
            intercept: !s.no_intercept.unwrap_or(false),
            families,
            g,
            outliers,
            case,
            n: s.n.unwrap_or(200),
            replicates: s.replicates.unwrap_or(100),
            seed: s.seed.unwrap_or(0),
            out: s.out.ok_or_else(|| need("out"))?,
            format: s.format.as_deref().map(OutputFormat::parse).transpose()?.unwrap_or_default(),
            fit,
        };
        Ok(config)
    }
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Fit => "fit",
        Command::Simulate => "simulate",
        Command::Compare => "compare",
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// All fits converged, or for simulations no family was flagged invalid.
    pub all_converged: bool,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    /// 0 when everything converged, 3 when reports were written but some
    /// fit did not converge.
    pub fn exit_code(&self) -> i32 {
        if self.all_converged { 0 } else { 3 }
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config.command {
        Command::Fit | Command::Compare => command_fit_or_compare(config),
        Command::Simulate => command_simulate(config),
    }
}

pub fn command_fit(config: &RunConfig) -> Result<Outcome> {
    require(config, Command::Fit)?;
    command_fit_or_compare(config)
}

pub fn command_compare(config: &RunConfig) -> Result<Outcome> {
    require(config, Command::Compare)?;
    command_fit_or_compare(config)
}

fn require(config: &RunConfig, command: Command) -> Result<()> {
    if config.command != command {
        return Err(Error::Config(format!("expected a {} configuration", command_name(command))));
    }
    Ok(())
}

fn meta(config: &RunConfig) -> Value {
    json!({
        "command": command_name(config.command),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "fit_config": serde_json::to_value(&config.fit).unwrap_or(Value::Null),
    })
}

fn command_fit_or_compare(config: &RunConfig) -> Result<Outcome> {
    let input = config.input.as_deref().ok_or_else(|| Error::Config("missing --input".into()))?;
    let loaded = load_csv(input, config.response.as_deref(), config.intercept)?;
    log::info!("{}: {} rows, predictors {:?}, response {}", input.display(), loaded.data.n(), loaded.predictors, loaded.response);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let families: Vec<ErrorFamily> = config.families.iter().map(|&k| ErrorFamily::of_kind(k)).collect();
    let extra = match &config.outliers {
        Some(spec) => {
            if spec.x.len() + usize::from(config.intercept) != loaded.data.p() {
                return Err(Error::Config(format!(
                    "outlier point has {} predictor values but the data has {}",
                    spec.x.len(),
                    loaded.predictors.len()
                )));
            }
            spec.rows(config.intercept)
        }
        None => Vec::new(),
    };
    let (fits, n, added) = if config.command == Command::Fit && extra.is_empty() {
        let r = fit(&loaded.data, &families[0], config.g, &config.fit, &mut rng)?;
        (vec![r], loaded.data.n(), 0)
    } else {
        let c = run_real_data(&loaded.data, &families, config.g, config.fit.fixed_nu, &extra, &config.fit, &mut rng)?;
        (c.fits, c.n, c.outliers_added)
    };
    let plotted = LoadedData { data: if extra.is_empty() { loaded.data.clone() } else { loaded.data.with_rows(&extra)? }, ..loaded.clone() };
    let series: Vec<PlotSeries> = fits.iter().flat_map(|f| plot_series(f, &plotted)).collect();
    let mut meta = meta(config);
    if let Value::Object(m) = &mut meta {
        m.insert("input".into(), json!(input.display().to_string()));
        m.insert("n".into(), json!(n));
        m.insert("p".into(), json!(loaded.data.p()));
        m.insert("predictors".into(), json!(loaded.predictors));
        m.insert("response".into(), json!(loaded.response));
        m.insert("intercept".into(), json!(config.intercept));
        m.insert("g".into(), json!(config.g));
        m.insert("outliers_added".into(), json!(added));
    }
    let written = match config.format {
        OutputFormat::Json => {
            let report = json!({
                "meta": meta,
                "families": fits.iter().map(|f| family_json(f, config.intercept)).collect::<Vec<_>>(),
                "plot_series": series,
            });
            write_json(&config.out, &report)?;
            vec![config.out.clone()]
        }
        OutputFormat::Csv => {
            write_rows(&config.out, &fits_table(&fits, config.intercept))?;
            let mut written = vec![config.out.clone()];
            if !series.is_empty() {
                let path = sibling(&config.out, "lines");
                let mut rows = vec![vec!["series".to_string(), "x".into(), "y".into()]];
                for s in &series {
                    rows.extend(s.points.iter().map(|&(x, y)| vec![s.name.clone(), format_number(x), format_number(y)]));
                }
                write_rows(&path, &rows)?;
                written.push(path);
            }
            written
        }
    };
    Ok(Outcome { all_converged: fits.iter().all(|f| f.converged), written })
}

pub fn command_simulate(config: &RunConfig) -> Result<Outcome> {
    require(config, Command::Simulate)?;
    let case = config.case.ok_or_else(|| Error::Config("simulate requires --case".into()))?;
    let scenario = SimulationScenario::standard(case, config.n, config.replicates, config.seed);
    let mut families: Vec<ErrorFamily> = config.families.iter().map(|&k| ErrorFamily::of_kind(k)).collect();
    if let Some(nu) = config.fit.fixed_nu {
        families = families.into_iter().map(|f| f.with_fixed_nu(nu)).collect();
    }
    let report = run_simulation(&scenario, &families, &config.fit)?;
    match config.format {
        OutputFormat::Json => write_json(&config.out, &simulation_json(config, &report))?,
        OutputFormat::Csv => write_rows(&config.out, &report.table(SIG_DIGITS))?,
    }
    Ok(Outcome { all_converged: report.families.iter().all(|f| !f.invalid), written: vec![config.out.clone()] })
}

/// Report with the scenario metadata, the per-parameter statistics and the
/// table layout.
pub fn simulation_json(config: &RunConfig, report: &SimulationReport) -> Value {
    let mut meta = meta(config);
    if let Value::Object(m) = &mut meta {
        m.insert("case".into(), json!(report.case.to_string()));
        m.insert("n".into(), json!(report.n));
        m.insert("replicates".into(), json!(report.replicates));
        m.insert("redraw_budget".into(), json!(report.redraw_budget));
    }
    let families: Vec<Value> = report
        .families
        .iter()
        .map(|f| {
            json!({
                "name": f.family.label(),
                "replicates_used": f.replicates_used,
                "redraws": f.redraws,
                "invalid": f.invalid,
                "parameters": f.parameters.iter().map(|p| json!({
                    "name": p.name,
                    "truth": json_number(p.truth),
                    "mse": json_number(p.mse),
                    "bias": json_number(p.bias),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "meta": meta, "families": families, "table": report.table(SIG_DIGITS) })
}

/// `path` with `tag` inserted before the extension.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.write_record(row).map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, response: Option<&str>, intercept: bool) -> Result<LoadedData> {
        read_csv(text.as_bytes(), Path::new("mem.csv"), response, intercept)
    }

    #[test]
    fn two_row_file() {
        let d = read("x,y\n1,2\n3,4\n", None, true).unwrap();
        assert_eq!((d.data.n(), d.data.p()), (2, 2));
        assert_eq!(d.data.row(1), &[1.0, 3.0]);
        assert_eq!(d.data.y(), &[2.0, 4.0]);
        assert_eq!(d.predictors, vec!["x"]);
        let no = read("x,y\n1,2\n3,4\n", None, false).unwrap();
        assert_eq!(no.data.p(), 1);
    }

    #[test]
    fn response_column_by_name() {
        let d = read("y,a,b\n1,2,3\n4,5,6\n", Some("y"), true).unwrap();
        assert_eq!(d.data.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(d.data.y(), &[1.0, 4.0]);
        assert!(matches!(read("a,b\n1,2\n", Some("z"), true), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn parse_errors_name_the_line() {
        match read("x,y\n1,2\n3,NaN\n", None, true) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("NaN"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        assert!(matches!(read("x,y\n1,2\n3,abc\n", None, true), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read("x,y\n1,2\n3\n", None, true), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read("", None, true), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read("x,y\n", None, true), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let text = "x,z,y\n0.1,-3e-7,2.718281828459045\n1e300,5,-0.3333333333333333\n";
        let d = read(text, None, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&path, &d).unwrap();
        let back = load_csv(&path, None, true).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(-405.553_212_345_678_9), "-405.553212346");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(json_number(f64::INFINITY), Value::Null);
        assert_eq!(round_sig(123456789012345.0), 123456789012000.0);
    }

    #[test]
    fn settings_precedence() {
        let file: Settings = toml::from_str("g = 3\nseed = 5\nfamily = \"t\"\nout = \"a.json\"").unwrap();
        let flags = Settings { seed: Some(9), input: Some("d.csv".into()), ..Settings::default() };
        let merged = flags.or(file);
        let cfg = RunConfig::resolve(Command::Fit, merged).unwrap();
        assert_eq!((cfg.g, cfg.seed), (3, 9));
        assert_eq!(cfg.families, vec![FamilyKind::StudentT]);
        assert_eq!(cfg.fit, FitConfig::default());
        assert!(toml::from_str::<Settings>("gg = 1").is_err());
    }

    #[test]
    fn resolve_rejects_incomplete_commands() {
        let fit = Settings { family: Some("normal".into()), out: Some("o".into()), ..Settings::default() };
        assert!(RunConfig::resolve(Command::Fit, fit.clone()).is_err());
        let bad = Settings { family: Some("laplace".into()), input: Some("d".into()), ..fit.clone() };
        assert!(RunConfig::resolve(Command::Fit, bad).is_err());
        let sim = Settings { case: Some("VI".into()), out: Some("o".into()), ..Settings::default() };
        assert!(RunConfig::resolve(Command::Simulate, sim).is_err());
        let sim = Settings { case: Some("II".into()), out: Some("o".into()), ..Settings::default() };
        let cfg = RunConfig::resolve(Command::Simulate, sim).unwrap();
        assert_eq!(cfg.fit, FitConfig::accelerated());
        assert_eq!(cfg.families, FamilyKind::ALL.to_vec());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/t/out.csv"), "lines"), PathBuf::from("/t/out.lines.csv"));
        assert_eq!(sibling(Path::new("out"), "lines"), PathBuf::from("out.lines"));
    }
}
