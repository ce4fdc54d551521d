//! Monte Carlo robustness study and real-data family comparison.
//!
//! The simulation model is the two-line regression
//! `y = x1 + x2 + e` (probability 0.25) or `y = -x1 - x2 + e`, with
//! `x1, x2 ~ N(0, 1)` and the error law chosen by [`Case`].

use std::fmt;

use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{skew_t_sample, SkewT};
use crate::em::{fit, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::model::{Component, Dataset, ErrorFamily, FamilyKind, MixtureParams};
use crate::numerics::sample_normal;

/// Error laws of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// `N(0, 1)`.
    I,
    /// `t_3`.
    II,
    /// `0.95 N(0, 1) + 0.05 N(0, 25)`.
    III,
    /// `ST(0, 1, 0.5, 3)`.
    IV,
    /// `N(0, 1)` with 5% of the rows replaced by `(20, 20, 100)`.
    V,
}

impl Case {
    pub const ALL: [Case; 5] = [Case::I, Case::II, Case::III, Case::IV, Case::V];

    pub fn parse(s: &str) -> Result<Case> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "IV" | "4" => Ok(Case::IV),
            "V" | "5" => Ok(Case::V),
            other => Err(Error::Config(format!("unknown case '{other}' (expected I, II, III, IV or V)"))),
        }
    }

    fn sample_error<R: Rng + ?Sized>(self, rng: &mut R) -> Result<f64> {
        match self {
            Case::I | Case::V => sample_normal(rng, 0.0, 1.0),
            Case::II => skew_t_sample(rng, &SkewT::new(0.0, 1.0, 0.0, 3.0)?),
            Case::III => {
                let sd = if rng.random_bool(0.05) { 5.0 } else { 1.0 };
                sample_normal(rng, 0.0, sd)
            }
            Case::IV => skew_t_sample(rng, &SkewT::new(0.0, 1.0, 0.5, 3.0)?),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::IV => "IV",
            Case::V => "V",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub case: Case,
    pub n: usize,
    pub replicates: usize,
    /// True weights and coefficients; scales and shapes are unused.
    pub true_params: MixtureParams,
    pub seed: u64,
    /// Multiplies every error draw; zero gives noiseless data.
    pub error_scale: f64,
}

impl SimulationScenario {
    /// The study design: `w1 = 0.25`, `beta1 = (0, 1, 1)`, `beta2 = (0, -1, -1)`.
    pub fn standard(case: Case, n: usize, replicates: usize, seed: u64) -> Self {
        let comp = |beta: Vec<f64>| Component { beta, sigma2: 1.0, lambda: 0.0, nu: f64::INFINITY };
        SimulationScenario {
            case,
            n,
            replicates,
            true_params: MixtureParams {
                family: FamilyKind::Normal,
                weights: vec![0.25, 0.75],
                components: vec![comp(vec![0.0, 1.0, 1.0]), comp(vec![0.0, -1.0, -1.0])],
            },
            seed,
            error_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        self.true_params.validate()?;
        if self.true_params.p() != 3 {
            return Err(Error::Config("the simulation design has an intercept and two predictors".into()));
        }
        let g = self.true_params.g();
        if self.n < g * 4 {
            return Err(Error::Config(format!("n = {} is too small", self.n)));
        }
        if !(self.error_scale >= 0.0) {
            return Err(Error::Config(format!("error scale {} must be non-negative", self.error_scale)));
        }
        Ok(())
    }
}

/// A generated sample with its true component labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub data: Dataset,
    /// True component per row; replaced rows keep the label they were drawn with.
    pub labels: Vec<usize>,
    /// Rows overwritten by the leverage point (Case V only), ascending.
    pub replaced: Vec<usize>,
}

/// Draw one sample.
pub fn generate_scenario<R: Rng + ?Sized>(scenario: &SimulationScenario, rng: &mut R) -> Result<SimulatedData> {
    scenario.validate()?;
    let theta = &scenario.true_params;
    let n = scenario.n;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let cum: Vec<f64> = theta.weights.iter().scan(0.0, |s, w| { *s += w; Some(*s) }).collect();
    for _ in 0..n {
        let x1 = sample_normal(rng, 0.0, 1.0)?;
        let x2 = sample_normal(rng, 0.0, 1.0)?;
        let u: f64 = rng.random();
        let k = cum.iter().position(|&c| u < c).unwrap_or(theta.g() - 1);
        let e = scenario.case.sample_error(rng)? * scenario.error_scale;
        let x = vec![1.0, x1, x2];
        y.push(theta.components[k].mean(&x) + e);
        rows.push(x);
        labels.push(k);
    }
    let mut replaced = Vec::new();
    if scenario.case == Case::V {
        let k = (0.05 * n as f64).round() as usize;
        replaced = index::sample(rng, n, k).into_vec();
        replaced.sort_unstable();
        for &j in &replaced {
            rows[j] = vec![1.0, 20.0, 20.0];
            y[j] = 100.0;
        }
    }
    Ok(SimulatedData { data: Dataset::new(rows, y)?, labels, replaced })
}

/// Permutation `perm` (estimated component `perm[i]` matches true component
/// `i`) minimising `sum_i |beta_hat_perm[i] - beta_i|^2`. Ties go to the
/// lexicographically smallest permutation.
pub fn align_labels(estimated: &MixtureParams, truth: &MixtureParams) -> Vec<usize> {
    let g = truth.g();
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &k)| {
                estimated.components[k]
                    .beta
                    .iter()
                    .zip(&truth.components[i].beta)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum()
    };
    let mut perm: Vec<usize> = (0..g).collect();
    let mut best = perm.clone();
    let mut best_cost = cost(&perm);
    while next_permutation(&mut perm) {
        let c = cost(&perm);
        if c < best_cost {
            best_cost = c;
            best = perm.clone();
        }
    }
    best
}

/// Advance to the next permutation in lexicographic order.
fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Names and true values of the scored parameters, in table order:
/// `beta_10, beta_20, beta_11, beta_21, ..., w_1, ..., w_{g-1}`.
pub fn scored_parameters(truth: &MixtureParams) -> Vec<(String, f64)> {
    let (g, p) = (truth.g(), truth.p());
    let mut out = Vec::new();
    for k in 0..p {
        for i in 0..g {
            out.push((format!("beta{}{}", i + 1, k), truth.components[i].beta[k]));
        }
    }
    for i in 0..g - 1 {
        out.push((format!("w{}", i + 1), truth.weights[i]));
    }
    out
}

/// Aligned estimates in [`scored_parameters`] order; skewed families
/// contribute corrected intercepts.
pub fn scored_estimates(result: &FitResult, truth: &MixtureParams) -> Vec<f64> {
    let perm = align_labels(&result.theta, truth);
    let (g, p) = (truth.g(), truth.p());
    let skewed = result.theta.family.is_skewed();
    let mut out = Vec::new();
    for k in 0..p {
        for &e in perm.iter().take(g) {
            let v = if k == 0 && skewed {
                result.corrected_intercepts[e]
            } else {
                result.theta.components[e].beta[k]
            };
            out.push(v);
        }
    }
    for &e in perm.iter().take(g - 1) {
        out.push(result.theta.weights[e]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStat {
    pub name: String,
    pub truth: f64,
    pub bias: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: FamilyKind,
    pub parameters: Vec<ParameterStat>,
    /// Replicates that entered the averages.
    pub replicates_used: usize,
    /// Redrawn samples after a failed fit.
    pub redraws: usize,
    /// Redraws exceeded the budget; the statistics cover fewer replicates.
    pub invalid: bool,
}

impl FamilyReport {
    pub fn stat(&self, name: &str) -> Option<&ParameterStat> {
        self.parameters.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub case: Case,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Allowed redraws per family.
    pub redraw_budget: usize,
    pub families: Vec<FamilyReport>,
}

impl SimulationReport {
    pub fn family(&self, kind: FamilyKind) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == kind)
    }

    /// Rows are parameters, columns families, cells `MSE (bias)`.
    pub fn table(&self, digits: usize) -> Vec<Vec<String>> {
        let mut rows = vec![std::iter::once("parameter".to_string())
            .chain(self.families.iter().map(|f| f.family.label().to_string()))
            .collect::<Vec<_>>()];
        let names: Vec<String> =
            self.families.first().map(|f| f.parameters.iter().map(|s| s.name.clone()).collect()).unwrap_or_default();
        for (k, name) in names.iter().enumerate() {
            let mut row = vec![name.clone()];
            for f in &self.families {
                let s = &f.parameters[k];
                row.push(format!("{:.*} ({:.*})", digits, s.mse, digits, s.bias));
            }
            rows.push(row);
        }
        rows
    }
}

/// Generator for replicate `r`, redraw `attempt` and purpose `slot`.
fn stream(seed: u64, r: usize, attempt: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((r as u64) << 24) | ((attempt as u64) << 8) | slot as u64);
    rng
}

/// Fit every family on every replicate and aggregate bias and MSE.
///
/// Replicate `r` draws its sample from a stream keyed by `(seed, r)`; a
/// family whose fit fails or does not converge redraws a fresh sample for
/// itself, at most `ceil(0.2 R)` times in total.
pub fn run_simulation(
    scenario: &SimulationScenario,
    families: &[ErrorFamily],
    config: &FitConfig,
) -> Result<SimulationReport> {
    scenario.validate()?;
    config.validate()?;
    let reps = scenario.replicates;
    let budget = (0.2 * reps as f64).ceil() as usize;
    let g = scenario.true_params.g();
    let truth = &scenario.true_params;

    // Per replicate, per family: the estimates (if any) and redraws used.
    let outcomes: Vec<Vec<(Option<Vec<f64>>, usize)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut samples: Vec<Option<Result<SimulatedData>>> = Vec::new();
            let mut sample = |attempt: usize| -> Result<SimulatedData> {
                while samples.len() <= attempt {
                    let a = samples.len();
                    samples.push(Some(generate_scenario(scenario, &mut stream(scenario.seed, r, a, 0))));
                }
                match samples[attempt].as_ref().expect("filled above") {
                    Ok(s) => Ok(s.clone()),
                    Err(e) => Err(Error::InvalidData(e.to_string())),
                }
            };
            families
                .iter()
                .enumerate()
                .map(|(f, family)| {
                    for attempt in 0..=budget {
                        let Ok(sim) = sample(attempt) else { continue };
                        let mut rng = stream(scenario.seed, r, attempt, f + 1);
                        match fit(&sim.data, family, g, config, &mut rng) {
                            Ok(res) if res.converged => return (Some(scored_estimates(&res, truth)), attempt),
                            Ok(_) => log::debug!("replicate {r}, {}: not converged", family.kind),
                            Err(e) => log::debug!("replicate {r}, {}: {e}", family.kind),
                        }
                    }
                    (None, budget + 1)
                })
                .collect()
        })
        .collect();

    let params = scored_parameters(truth);
    let mut reports = Vec::with_capacity(families.len());
    for (f, family) in families.iter().enumerate() {
        let mut used = 0usize;
        let mut redraws = 0usize;
        let mut sum = vec![0.0; params.len()];
        let mut sum2 = vec![0.0; params.len()];
        for rep in &outcomes {
            let (est, tries) = &rep[f];
            redraws += tries;
            if redraws > budget {
                continue;
            }
            if let Some(est) = est {
                used += 1;
                for (k, (v, (_, t))) in est.iter().zip(&params).enumerate() {
                    let d = v - t;
                    sum[k] += d;
                    sum2[k] += d * d;
                }
            }
        }
        let m = used.max(1) as f64;
        let parameters = params
            .iter()
            .enumerate()
            .map(|(k, (name, t))| ParameterStat {
                name: name.clone(),
                truth: *t,
                bias: if used > 0 { sum[k] / m } else { f64::NAN },
                mse: if used > 0 { sum2[k] / m } else { f64::NAN },
            })
            .collect();
        reports.push(FamilyReport {
            family: family.kind,
            parameters,
            replicates_used: used,
            redraws: redraws.min(budget + 1),
            invalid: redraws > budget,
        });
    }
    Ok(SimulationReport {
        case: scenario.case,
        n: scenario.n,
        replicates: reps,
        seed: scenario.seed,
        redraw_budget: budget,
        families: reports,
    })
}

/// A point to append `count` times, as `(x, y)` on the original scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub x: Vec<f64>,
    pub y: f64,
    pub count: usize,
}

impl OutlierSpec {
    /// Parse `"x1,...,xk,y:count"`; the count defaults to 1.
    pub fn parse(s: &str) -> Result<OutlierSpec> {
        let (point, count) = match s.split_once(':') {
            Some((p, c)) => {
                let c: usize = c
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid outlier count in '{s}'")))?;
                (p, c)
            }
            None => (s, 1),
        };
        let vals: Vec<f64> = point
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("invalid outlier point in '{s}'")))?;
        if vals.len() < 2 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("outlier '{s}' needs finite predictor values and a response")));
        }
        let (y, x) = vals.split_last().expect("at least two values");
        Ok(OutlierSpec { x: x.to_vec(), y: *y, count })
    }

    /// Design rows to append, with a leading one when `intercept`.
    pub fn rows(&self, intercept: bool) -> Vec<(Vec<f64>, f64)> {
        let row: Vec<f64> = if intercept {
            std::iter::once(1.0).chain(self.x.iter().copied()).collect()
        } else {
            self.x.clone()
        };
        vec![(row, self.y); self.count]
    }
}

/// Fits of several families to one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Sample size after outlier injection.
    pub n: usize,
    pub outliers_added: usize,
    pub fits: Vec<FitResult>,
}

impl Comparison {
    pub fn fit_of(&self, kind: FamilyKind) -> Option<&FitResult> {
        self.fits.iter().find(|f| f.family.kind == kind)
    }

    /// Family kinds ordered by AIC, best first.
    pub fn aic_order(&self) -> Vec<FamilyKind> {
        let mut v: Vec<&FitResult> = self.fits.iter().collect();
        v.sort_by(|a, b| a.aic.total_cmp(&b.aic));
        v.into_iter().map(|f| f.family.kind).collect()
    }
}

/// Fit each family with `g` components, after appending `outliers`. A
/// given `fixed_nu` holds the degrees of freedom of the t-tailed families.
pub fn run_real_data<R: Rng + ?Sized>(
    data: &Dataset,
    families: &[ErrorFamily],
    g: usize,
    fixed_nu: Option<f64>,
    outliers: &[(Vec<f64>, f64)],
    config: &FitConfig,
    rng: &mut R,
) -> Result<Comparison> {
    let data = if outliers.is_empty() { data.clone() } else { data.with_rows(outliers)? };
    let config = FitConfig { fixed_nu: fixed_nu.or(config.fixed_nu), ..config.clone() };
    let fits = families
        .iter()
        .map(|fam| fit(&data, fam, g, &config, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { n: data.n(), outliers_added: outliers.len(), fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params_with(betas: Vec<Vec<f64>>) -> MixtureParams {
        let g = betas.len();
        MixtureParams {
            family: FamilyKind::Normal,
            weights: vec![1.0 / g as f64; g],
            components: betas
                .into_iter()
                .map(|beta| Component { beta, sigma2: 1.0, lambda: 0.0, nu: f64::INFINITY })
                .collect(),
        }
    }

    #[test]
    fn label_alignment() {
        let truth = params_with(vec![vec![0.0, 1.0], vec![0.0, -1.0]]);
        assert_eq!(align_labels(&truth, &truth), vec![0, 1]);
        let swapped = params_with(vec![vec![0.0, -1.0], vec![0.0, 1.0]]);
        assert_eq!(align_labels(&swapped, &truth), vec![1, 0]);
        let tie = params_with(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(align_labels(&tie, &truth), vec![0, 1]);
        let t3 = params_with(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let e3 = params_with(vec![vec![2.1], vec![-0.1], vec![0.9]]);
        assert_eq!(align_labels(&e3, &t3), vec![1, 2, 0]);
    }

    #[test]
    fn generated_labels_follow_weights() {
        let sc = SimulationScenario::standard(Case::I, 100_000, 1, 3);
        let sim = generate_scenario(&sc, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p = sim.labels.iter().filter(|&&k| k == 0).count() as f64 / 1e5;
        let se = (0.25_f64 * 0.75 / 1e5).sqrt();
        assert!((p - 0.25).abs() < 4.0 * se, "p = {p}");
    }

    #[test]
    fn case_five_replaces_five_percent() {
        let sc = SimulationScenario::standard(Case::V, 200, 1, 3);
        let sim = generate_scenario(&sc, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(sim.replaced.len(), 10);
        let hits = sim.data.rows().filter(|(x, y)| x == &[1.0, 20.0, 20.0] && *y == 100.0).count();
        assert_eq!(hits, 10);
    }

    #[test]
    fn case_one_component_regression() {
        let sc = SimulationScenario::standard(Case::I, 100_000, 1, 3);
        let sim = generate_scenario(&sc, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let idx: Vec<usize> = (0..sc.n).filter(|&j| sim.labels[j] == 0).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&j| sim.data.row(j).to_vec()).collect();
        let y: Vec<f64> = idx.iter().map(|&j| sim.data.y()[j]).collect();
        let sub = Dataset::new(rows, y).unwrap();
        let start = MixtureParams {
            family: FamilyKind::Normal,
            weights: vec![1.0],
            components: vec![Component { beta: vec![0.0; 3], sigma2: 1.0, lambda: 0.0, nu: f64::INFINITY }],
        };
        let cfg = FitConfig::default();
        let r = crate::em::fit_from(&sub, &ErrorFamily::normal(), start, &cfg).unwrap();
        // Unit errors and unit-variance predictors: the standard error is 1/sqrt(n1).
        let se = 1.0 / (idx.len() as f64).sqrt();
        for (b, t) in r.theta.components[0].beta.iter().zip([0.0, 1.0, 1.0]) {
            assert!((b - t).abs() < 3.0 * se, "{b} vs {t}");
        }
    }

    #[test]
    fn noiseless_simulation_is_exact() {
        let mut sc = SimulationScenario::standard(Case::I, 80, 3, 11);
        sc.error_scale = 0.0;
        let cfg = FitConfig { n_starts: 5, ..FitConfig::default() };
        let rep = run_simulation(&sc, &[ErrorFamily::normal()], &cfg).unwrap();
        let f = &rep.families[0];
        assert_eq!(f.replicates_used, 3);
        // The weight estimate is the sample label share, which varies without noise.
        for s in f.parameters.iter().filter(|s| s.name.starts_with("beta")) {
            assert!(s.mse <= 1e-8, "{}: mse {}", s.name, s.mse);
            assert!(s.bias.abs() <= 1e-4, "{}: bias {}", s.name, s.bias);
        }
    }

    #[test]
    fn report_table_layout_and_identity() {
        let sc = SimulationScenario::standard(Case::I, 200, 2, 7);
        let cfg = FitConfig { n_starts: 2, ..FitConfig::default() };
        let rep = run_simulation(&sc, &[ErrorFamily::normal()], &cfg).unwrap();
        let t = rep.table(4);
        assert_eq!(t.len(), 8);
        assert_eq!(t[1][0], "beta10");
        assert_eq!(t[7][0], "w1");
        for s in &rep.families[0].parameters {
            assert!(s.mse >= s.bias * s.bias - 1e-12);
        }
        let again = run_simulation(&sc, &[ErrorFamily::normal()], &cfg).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn outlier_spec_parsing() {
        let o = OutlierSpec::parse("0,5:10").unwrap();
        assert_eq!(o, OutlierSpec { x: vec![0.0], y: 5.0, count: 10 });
        let rows = o.rows(true);
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0], (vec![1.0, 0.0], 5.0));
        assert_eq!(OutlierSpec::parse("1,2").unwrap().count, 1);
        assert!(OutlierSpec::parse("5").is_err());
        assert!(OutlierSpec::parse("a,5:2").is_err());
        assert!(OutlierSpec::parse("0,5:x").is_err());
    }

    #[test]
    fn scored_names() {
        let sc = SimulationScenario::standard(Case::I, 200, 1, 0);
        let names: Vec<String> = scored_parameters(&sc.true_params).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["beta10", "beta20", "beta11", "beta21", "beta12", "beta22", "w1"]);
        let w = scored_parameters(&sc.true_params).last().unwrap().1;
        assert_abs_diff_eq!(w, 0.25);
        assert!(Case::parse("vi").is_err());
        for c in Case::ALL {
            assert_eq!(Case::parse(&c.to_string()).unwrap(), c);
        }
    }
}
