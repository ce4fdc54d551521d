//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature.
//!
//! Infinite limits are mapped onto finite ones: `[a, inf)` through
//! `x = a + t / (1 - t)`, `(-inf, b]` through `x = b - (1 - t) / t` and the
//! whole line through `x = t / (1 - t^2)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Nodes and weights as tabulated, digits beyond f64 kept.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_06,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_13,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_512_762,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_39,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "quadrature tolerances must be positive (abs {abs_tol}, rel {rel_tol})"
            )));
        }
        if max_subdivisions == 0 {
            return Err(Error::InvalidParams("max_subdivisions must be at least 1".into()));
        }
        Ok(QuadratureSpec { abs_tol, rel_tol, max_subdivisions })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, max_subdivisions: 200 }
    }
}

/// Integral estimate with its error bound and the number of integrand calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = fc * WGK[10];
    let mut gauss = 0.0;
    for (k, (&x, &w)) in XGK[..10].iter().zip(WGK[..10].iter()).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let (value, error) = kronrod(f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { lo, hi, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 21;
    let mut segments = 1;
    loop {
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if !total.is_finite() {
            return Err(Error::Quadrature { estimate: total, error_bound: total_err });
        }
        if segments >= spec.max_subdivisions {
            return Err(Error::Quadrature { estimate: total, error_bound: total_err });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        let (lv, le) = kronrod(f, worst.lo, mid);
        let (rv, re) = kronrod(f, mid, worst.hi);
        evaluations += 42;
        segments += 1;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { lo: worst.lo, hi: mid, value: lv, error: le });
        heap.push(Segment { lo: mid, hi: worst.hi, value: rv, error: re });
    }
    // Re-sum to shed the drift of the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadratureResult { value, error, evaluations })
}

/// Integrate `f` over `[lower, upper]`, either limit possibly infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_with_error(f, lower, upper, spec).map(|r| r.value)
}

/// As [`integrate`], also reporting the error bound and evaluation count.
pub fn integrate_with_error<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    if lower.is_nan() || upper.is_nan() {
        return Err(Error::InvalidParams("integration limits must not be NaN".into()));
    }
    if lower == upper {
        return Ok(QuadratureResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if lower > upper {
        return integrate_with_error(f, upper, lower, spec).map(|r| QuadratureResult { value: -r.value, ..r });
    }
    // A zero integrand times an infinite Jacobian at the mapped ends is zero.
    let guard = |v: f64, jac: f64| if v == 0.0 { 0.0 } else { v * jac };
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => adaptive(&f, lower, upper, spec),
        (true, false) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                guard(f(lower + t / s), 1.0 / (s * s))
            };
            adaptive(&g, 0.0, 1.0, spec)
        }
        (false, true) => {
            let g = |t: f64| guard(f(upper - (1.0 - t) / t), 1.0 / (t * t));
            adaptive(&g, 0.0, 1.0, spec)
        }
        (false, false) => {
            let g = |t: f64| {
                let s = 1.0 - t * t;
                guard(f(t / s), (1.0 + t * t) / (s * s))
            };
            adaptive(&g, -1.0, 1.0, spec)
        }
    }
}
