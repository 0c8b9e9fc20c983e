//! Moduli of continuity and the Dini-integral machinery.
//!
//! A [`Modulus`] is a nondecreasing function ω with ω(0) = 0. The built-in
//! parametric families are
//!
//! | id            | ω(r)                                   | Dini        |
//! |---------------|----------------------------------------|-------------|
//! | `zero`        | 0                                      | yes         |
//! | `power:γ`     | r^γ                                    | yes (γ > 0) |
//! | `log_power:p` | ((p+1) / (p+1+ln(1/r)))^p              | iff p > 1   |
//! | `log_inverse` | 1 / ln(1/r), valid on (0, 1/e]         | no          |
//! | `table:<csv>` | log-linear interpolation of samples    | measured    |
//!
//! Apart from `power`, every family is extended by the constant ω(r_max)
//! beyond its radius of validity, which keeps it a modulus on all of [0, ∞).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

#[derive(Clone, Debug, PartialEq)]
pub enum ModulusFamily {
    Zero,
    Power { gamma: f64 },
    LogPower { p: f64 },
    LogInverse,
    Tabulated { r: Vec<f64>, omega: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Modulus {
    family: ModulusFamily,
    r_max: f64,
    scale: f64,
}

const LOG_INVERSE_RMAX: f64 = 0.367_879_441_171_442_33; // 1/e, where ω(r)/r stops decreasing

impl Modulus {
    pub fn zero() -> Self {
        Self {
            family: ModulusFamily::Zero,
            r_max: 1.0,
            scale: 1.0,
        }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidModulus(format!("power exponent {gamma}")));
        }
        Ok(Self {
            family: ModulusFamily::Power { gamma },
            r_max: 1.0,
            scale: 1.0,
        })
    }

    pub fn log_power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidModulus(format!("log_power exponent {p}")));
        }
        Ok(Self {
            family: ModulusFamily::LogPower { p },
            r_max: 1.0,
            scale: 1.0,
        })
    }

    pub fn log_inverse() -> Self {
        Self {
            family: ModulusFamily::LogInverse,
            r_max: LOG_INVERSE_RMAX,
            scale: 1.0,
        }
    }

    /// Tabulated modulus from strictly increasing radii and positive,
    /// nondecreasing values.
    pub fn tabulated(r: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != omega.len() {
            return Err(Error::InvalidModulus(
                "table needs at least two (r, omega) rows".into(),
            ));
        }
        for w in r.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidModulus("table radii not strictly increasing".into()));
            }
        }
        if r[0] <= 0.0 || omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidModulus("table entries must be positive".into()));
        }
        if omega.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidModulus("table values decrease".into()));
        }
        let r_max = *r.last().unwrap();
        Ok(Self {
            family: ModulusFamily::Tabulated { r, omega },
            r_max,
            scale: 1.0,
        })
    }

    /// Reads a two-column CSV `(r, omega)`; a non-numeric first row is
    /// treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::InvalidModulus(format!("{}: {e}", path.display())))?;
        let (mut r, mut omega) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidModulus(e.to_string()))?;
            if rec.len() < 2 {
                return Err(Error::InvalidModulus(format!("line {}: expected 2 columns", line + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    r.push(a);
                    omega.push(b);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::InvalidModulus(format!(
                        "line {}: non-numeric entry",
                        line + 1
                    )))
                }
            }
        }
        Self::tabulated(r, omega)
    }

    /// `c · ω` for a constant `c ≥ 0`.
    pub fn scaled(mut self, c: f64) -> Self {
        assert!(c >= 0.0 && c.is_finite());
        self.scale *= c;
        self
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Parses a registry id such as `power:0.5`, `log_power:2`,
    /// `log_inverse`, `zero`, `table:<path>`, optionally prefixed by a
    /// scale factor as in `0.1*log_power:2`.
    pub fn from_id(id: &str) -> Result<Self> {
        if let Some((c, rest)) = id.split_once('*') {
            let c: f64 = c.trim().parse().map_err(|_| Error::Registry(id.to_string()))?;
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Registry(id.to_string()));
            }
            return Ok(Self::from_id(rest)?.scaled(c));
        }
        let (head, arg) = match id.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (id, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Registry(id.to_string()))
        };
        match head {
            "zero" => Ok(Self::zero()),
            "power" => Self::power(num(arg)?),
            "log_power" => Self::log_power(num(arg)?),
            "log_inverse" => Ok(Self::log_inverse()),
            "table" => Self::from_csv(Path::new(arg.ok_or_else(|| Error::Registry(id.into()))?)),
            _ => Err(Error::Registry(id.to_string())),
        }
    }

    pub fn id(&self) -> String {
        let base = self.base_id();
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }

    fn base_id(&self) -> String {
        match &self.family {
            ModulusFamily::Zero => "zero".into(),
            ModulusFamily::Power { gamma } => format!("power:{gamma}"),
            ModulusFamily::LogPower { p } => format!("log_power:{p}"),
            ModulusFamily::LogInverse => "log_inverse".into(),
            ModulusFamily::Tabulated { .. } => "table".into(),
        }
    }

    pub fn family(&self) -> &ModulusFamily {
        &self.family
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, ModulusFamily::Zero) || self.scale == 0.0
    }

    /// Families for which ω(r)/r is nonincreasing on (0, r_max], hence subadditive.
    pub fn declared_subadditive(&self) -> bool {
        match &self.family {
            ModulusFamily::Power { gamma } => *gamma <= 1.0,
            ModulusFamily::Tabulated { .. } => false,
            _ => true,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.scale * self.eval_unscaled(r)
    }

    fn eval_unscaled(&self, r: f64) -> f64 {
        match &self.family {
            ModulusFamily::Zero => 0.0,
            ModulusFamily::Power { gamma } => r.powf(*gamma),
            ModulusFamily::LogPower { p } => {
                let r = r.min(self.r_max);
                let c = p + 1.0;
                (c / (c + (1.0 / r).ln())).powf(*p)
            }
            ModulusFamily::LogInverse => {
                let r = r.min(self.r_max);
                1.0 / (1.0 / r).ln()
            }
            ModulusFamily::Tabulated { r: rs, omega } => {
                if r >= self.r_max {
                    return *omega.last().unwrap();
                }
                let seg = match rs.iter().position(|&x| x > r) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => rs.len() - 2,
                };
                let (r0, r1) = (rs[seg].ln(), rs[seg + 1].ln());
                let (w0, w1) = (omega[seg].ln(), omega[seg + 1].ln());
                let slope = (w1 - w0) / (r1 - r0);
                if seg == 0 && r < rs[0] && slope <= 0.0 {
                    // flat first segment: fall back to linear decay to 0
                    return omega[0] * r / rs[0];
                }
                (w0 + slope * (r.ln() - r0)).exp()
            }
        }
    }

    /// Closed form of `∫_0^t ω(r)/r dr` for `t ≤ r_max`, where one exists.
    pub fn dini_primitive(&self, t: f64) -> Option<f64> {
        if !(t > 0.0 && t <= self.r_max * (1.0 + 1e-12)) {
            return None;
        }
        let v = match &self.family {
            ModulusFamily::Zero => 0.0,
            ModulusFamily::Power { gamma } => t.powf(*gamma) / gamma,
            // ∫_S^∞ c^p (c + s)^{-p} ds with s = ln(1/r)
            ModulusFamily::LogPower { p } if *p > 1.0 => {
                let c = p + 1.0;
                c.powf(*p) * (c + (1.0 / t).ln()).powf(1.0 - p) / (p - 1.0)
            }
            _ => return None,
        };
        Some(self.scale * v)
    }

    fn eval_checked(&self, r: f64) -> Result<f64> {
        let v = self.eval(r);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidModulus(format!(
                "{} evaluates to {v} at r = {r}",
                self.id()
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiniClass {
    Dini,
    NonDini,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiniReport {
    /// `None` when the integral is classified divergent.
    pub integral_value: Option<f64>,
    pub t0: f64,
    /// Cumulative integrals over `[t0 2^{-j-1}, t0]`, `j = 0..levels`.
    pub partial_sums: Vec<f64>,
    pub classification: DiniClass,
    /// Geometric-mean ratio of the last increments used for classification.
    pub tail_ratio: f64,
}

/// Knobs of the divergence heuristic.
#[derive(Clone, Copy, Debug)]
pub struct DiniOptions {
    /// Classify non-Dini when the tail increments decay slower than this.
    pub plateau_ratio: f64,
    /// Number of trailing increments inspected.
    pub window: usize,
    /// Gauss–Legendre points per dyadic band.
    pub points_per_band: usize,
}

impl Default for DiniOptions {
    fn default() -> Self {
        Self {
            plateau_ratio: 0.95,
            window: 4,
            points_per_band: 32,
        }
    }
}

/// Default number of dyadic levels used by callers that do not choose.
pub const DEFAULT_LEVELS: usize = 24;

/// `∫_a^b ω(t)/t dt` via Gauss–Legendre in the variable `s = ln t`.
pub fn log_integral(omega: &Modulus, a: f64, b: f64, points: usize) -> Result<f64> {
    let gl = GaussLegendre::new(points);
    let mut bad = None;
    let v = gl.integrate(a.ln(), b.ln(), |s| {
        let r = s.exp();
        match omega.eval_checked(r) {
            Ok(w) => w,
            Err(e) => {
                bad.get_or_insert(e);
                0.0
            }
        }
    });
    match bad {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Tail ratio of a sequence of nonnegative increments: geometric mean of the
/// last `window - 1` successive ratios. Zero increments count as decayed.
pub fn tail_decay_ratio(increments: &[f64], window: usize) -> f64 {
    let n = increments.len();
    if n < window || window < 2 {
        return 0.0;
    }
    let first = increments[n - window];
    let last = increments[n - 1];
    if first <= 0.0 || last <= 0.0 {
        return 0.0;
    }
    (last / first).powf(1.0 / (window - 1) as f64)
}

pub fn dini_integral(omega: &Modulus, t0: f64, levels: usize) -> Result<DiniReport> {
    dini_integral_with(omega, t0, levels, DiniOptions::default())
}

pub fn dini_integral_with(
    omega: &Modulus,
    t0: f64,
    levels: usize,
    opts: DiniOptions,
) -> Result<DiniReport> {
    if !(t0 > 0.0 && t0 <= omega.r_max() * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "t0 = {t0} outside (0, r_max = {}]",
            omega.r_max()
        )));
    }
    if levels < 8 {
        return Err(Error::config("levels", "at least 8 dyadic levels required"));
    }
    let mut increments = Vec::with_capacity(levels);
    let mut partial_sums = Vec::with_capacity(levels);
    let mut acc = 0.0;
    let mut hi = t0;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        let d = log_integral(omega, lo, hi, opts.points_per_band)?;
        increments.push(d);
        acc += d;
        partial_sums.push(acc);
        hi = lo;
    }
    let ratio = tail_decay_ratio(&increments, opts.window);
    let classification = if ratio > opts.plateau_ratio {
        DiniClass::NonDini
    } else {
        DiniClass::Dini
    };
    let integral_value = match classification {
        DiniClass::NonDini => None,
        DiniClass::Dini => {
            let last = *increments.last().unwrap();
            let tail = if ratio > 0.0 && ratio < 1.0 {
                last * ratio / (1.0 - ratio)
            } else {
                0.0
            };
            Some(acc + tail)
        }
    };
    Ok(DiniReport {
        integral_value,
        t0,
        partial_sums,
        classification,
        tail_ratio: ratio,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DoublingReport {
    pub holds: bool,
    /// max over pairs of (ω(r)/r) / (ω(h)/h).
    pub worst_ratio: f64,
}

/// Checks `ω(r)/r ≤ 2 ω(h)/h` on every sampled pair `(h, r)` with `h < r`.
pub fn doubling_check(omega: &Modulus, pairs: &[(f64, f64)]) -> Result<DoublingReport> {
    let mut worst: f64 = 0.0;
    let mut holds = true;
    for &(h, r) in pairs {
        if !(h > 0.0 && h < r && r <= omega.r_max() * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("pair (h, r) = ({h}, {r})")));
        }
        let wh = omega.eval_checked(h)? / h;
        let wr = omega.eval_checked(r)? / r;
        if wh == 0.0 {
            if wr > 0.0 {
                holds = false;
                worst = f64::INFINITY;
            }
            continue;
        }
        let q = wr / wh;
        worst = worst.max(q);
        if q > 2.0 * (1.0 + 1e-12) {
            holds = false;
        }
    }
    Ok(DoublingReport {
        holds,
        worst_ratio: worst,
    })
}

/// All ordered pairs `h < r` drawn from a radius grid.
pub fn ordered_pairs(radii: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (i, &a) in radii.iter().enumerate() {
        for &b in &radii[i + 1..] {
            let (h, r) = if a < b { (a, b) } else { (b, a) };
            if h < r {
                out.push((h, r));
            }
        }
    }
    out
}

/// `count` radii `r_max · ratio^i`, i = 0..count, decreasing.
pub fn geometric_radii(r_max: f64, count: usize, ratio: f64) -> Vec<f64> {
    (0..count).map(|i| r_max * ratio.powi(i as i32)).collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailSum {
    pub sum: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `Σ_{i ≥ k0} ω(λ^i)` against `(1/ln(1/λ)) ∫_0^{λ^{k0-1}} ω(r)/r dr`. The
/// integral is taken in closed form for the parametric families and by
/// [`dini_integral`] otherwise.
pub fn dini_tail_sum(omega: &Modulus, lambda: f64, k0: usize) -> Result<TailSum> {
    if !(lambda > 0.0 && lambda < 1.0) || k0 == 0 {
        return Err(Error::config("lambda/k0", "need 0 < lambda < 1 and k0 >= 1"));
    }
    let top = lambda.powi(k0 as i32 - 1).min(omega.r_max());
    let integral = match omega.dini_primitive(top) {
        Some(v) => v,
        None => dini_integral(omega, top, DEFAULT_LEVELS)?
            .integral_value
            .ok_or_else(|| Error::Divergent(omega.id()))?,
    };
    let bound = integral / (1.0 / lambda).ln();

    // Direct summation; slowly decaying families get an integral tail
    // correction once terms become tiny compared with the running sum.
    const MAX_TERMS: usize = 200_000;
    let mut sum = 0.0;
    let mut i = k0;
    let mut scale = lambda.powi(k0 as i32);
    loop {
        let term = omega.eval_checked(scale)?;
        sum += term;
        if term <= 1e-17 * sum.max(f64::MIN_POSITIVE) || scale < 1e-300 {
            break;
        }
        i += 1;
        if i - k0 >= MAX_TERMS {
            // ∫_{i}^{∞} ω(λ^s) ds = (1/ln(1/λ)) ∫_0^{λ^i} ω(r)/r dr,
            // which lies between the remaining sum and itself plus ω(λ^i).
            let rest = match omega.dini_primitive(scale * lambda) {
                Some(v) => v,
                None => dini_integral(omega, scale * lambda, DEFAULT_LEVELS)?
                    .integral_value
                    .unwrap_or(0.0),
            };
            sum += rest / (1.0 / lambda).ln();
            break;
        }
        scale *= lambda;
    }
    Ok(TailSum {
        sum,
        bound,
        holds: sum <= bound * (1.0 + 1e-12),
    })
}

/// Structural checks of a modulus on a sampled grid of radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusInvariants {
    pub monotone: bool,
    pub vanishes_at_zero: bool,
    pub doubling: DoublingReport,
    /// `None` when the family is not declared subadditive.
    pub subadditive: Option<bool>,
}

impl ModulusInvariants {
    pub fn all_hold(&self) -> bool {
        self.monotone && self.vanishes_at_zero && self.doubling.holds && self.subadditive.unwrap_or(true)
    }
}

pub fn check_invariants(omega: &Modulus, radii: &[f64]) -> Result<ModulusInvariants> {
    let mut sorted: Vec<f64> = radii.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut values = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        values.push(omega.eval_checked(r)?);
    }
    let monotone = omega.eval(0.0) == 0.0 && values.windows(2).all(|w| w[1] >= w[0] - 1e-15);
    let vanishes_at_zero =
        omega.eval(0.0) == 0.0 && omega.eval(1e-300) < values[0].max(f64::MIN_POSITIVE);
    let doubling = doubling_check(omega, &ordered_pairs(&sorted))?;
    let subadditive = omega.declared_subadditive().then(|| {
        let r_max = omega.r_max();
        sorted.iter().all(|&s| {
            sorted
                .iter()
                .filter(|&&t| s + t <= r_max)
                .all(|&t| omega.eval(s + t) <= omega.eval(s) + omega.eval(t) + 1e-12)
        })
    });
    Ok(ModulusInvariants {
        monotone,
        vanishes_at_zero,
        doubling,
        subadditive,
    })
}

/// Built-in families with their expected Dini classification.
pub const BUILTIN_FAMILIES: [(&str, DiniClass); 6] = [
    ("power:0.5", DiniClass::Dini),
    ("power:1", DiniClass::Dini),
    ("0.1*log_power:2", DiniClass::Dini),
    ("log_power:3", DiniClass::Dini),
    ("log_power:1", DiniClass::NonDini),
    ("log_inverse", DiniClass::NonDini),
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusCase {
    pub id: String,
    pub invariants_hold: bool,
    pub expected: DiniClass,
    pub classification: DiniClass,
    /// `(λ, k0, holds)` for every tail-sum check of a Dini family.
    pub tail_sums: Vec<(f64, usize, bool)>,
}

impl ModulusCase {
    pub fn pass(&self) -> bool {
        self.invariants_hold && self.expected == self.classification && self.tail_sums.iter().all(|t| t.2)
    }
}

/// Invariants, classification and `dini_tail_sum` for each `(id, expected)`
/// pair at every `λ` and `k0`.
pub fn modulus_suite(families: &[(String, DiniClass)], lambdas: &[f64], k0s: &[usize]) -> Result<Vec<ModulusCase>> {
    families
        .iter()
        .map(|(id, expected)| {
            let omega = Modulus::from_id(id)?;
            let radii = geometric_radii(omega.r_max(), 60, 0.8);
            let invariants_hold = check_invariants(&omega, &radii)?.all_hold();
            let classification = dini_integral(&omega, omega.r_max(), DEFAULT_LEVELS)?.classification;
            let mut tail_sums = Vec::new();
            if classification == DiniClass::Dini {
                for &lambda in lambdas {
                    for &k0 in k0s {
                        tail_sums.push((lambda, k0, dini_tail_sum(&omega, lambda, k0)?.holds));
                    }
                }
            }
            Ok(ModulusCase {
                id: id.clone(),
                invariants_hold,
                expected: *expected,
                classification,
                tail_sums,
            })
        })
        .collect()
}
