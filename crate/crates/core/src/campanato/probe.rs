use serde::{Deserialize, Serialize};

use super::approx::{taylor_fit, FrozenProblem, LinearApprox, QuadApprox};
use super::calibrate::Constants;
use super::certificate::verify_recurrence;
use crate::elliptic::{DiscreteField, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{frobenius, measured_nu, norm2, ProblemSpec, ScalarFn};
use crate::modulus::{geometric_radii, Modulus};
use crate::quadrature::ball_sup;
use crate::Point;

const ORIGIN: Point = [0.0, 0.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    C1,
    C11,
}

impl Mode {
    pub fn order(self) -> usize {
        match self {
            Mode::C1 => 1,
            Mode::C11 => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationConfig {
    /// Scale ratio λ.
    pub lambda: f64,
    /// Number of scales K; records are produced for `k = 0..=K`.
    pub scales: usize,
    /// Spacing of the frozen-coefficient grid on `B_{3/4}`.
    pub frozen_spacing: f64,
    pub fit_radius: f64,
    pub safety: f64,
    pub cert_rtol: f64,
    pub cert_atol: f64,
    /// Tail ratio of the `S_k` increments above which the trace fails.
    pub plateau_ratio: f64,
    pub plateau_window: usize,
    /// Smallest admissible `λ^k` in grid spacings of a numeric solution.
    pub scale_floor_spacings: f64,
    /// Overrides the calibrated constants when present.
    pub constants: Option<Constants>,
    pub solver: SolverConfig,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            scales: 6,
            frozen_spacing: 1.0 / 64.0,
            fit_radius: 0.25,
            safety: 1.5,
            cert_rtol: 1e-3,
            cert_atol: 1e-8,
            plateau_ratio: 0.95,
            plateau_window: 4,
            scale_floor_spacings: 16.0,
            constants: None,
            solver: SolverConfig::default(),
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 0.25) {
            return Err(Error::config("iteration.lambda", "λ must lie in (0, 1/4)"));
        }
        if self.scales == 0 {
            return Err(Error::config("iteration.scales", "at least one scale required"));
        }
        if !(self.frozen_spacing > 0.0 && self.frozen_spacing <= 0.75 / 16.0) {
            return Err(Error::config("iteration.frozen_spacing", "spacing must lie in (0, 3/64]"));
        }
        if !(self.fit_radius >= 4.0 * self.frozen_spacing && self.fit_radius <= 0.5) {
            return Err(Error::config("iteration.fit_radius", "fit radius must lie in [4h, 1/2]"));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::config("iteration.safety", "safety factor must be at least 1"));
        }
        if !(self.cert_rtol > 0.0 && self.cert_atol >= 0.0) {
            return Err(Error::config("iteration.cert_rtol", "certificate tolerances must be positive"));
        }
        if !(self.plateau_ratio > 0.0 && self.plateau_ratio < 1.0) || self.plateau_window < 2 {
            return Err(Error::config("iteration.plateau_ratio", "ratio in (0, 1) and window ≥ 2 required"));
        }
        if let Some(c) = &self.constants {
            c.validate()?;
        }
        Ok(())
    }
}

/// The solution entering a probe.
#[derive(Clone)]
pub enum Solution {
    /// Closed form; only the frozen solves are numerical.
    Closed(ScalarFn),
    /// A computed field, resampled by bicubic interpolation.
    Field(DiscreteField),
}

impl Solution {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Solution::Closed(u) => u(x),
            Solution::Field(u) => u.interpolate(x),
        }
    }

    fn spacing(&self) -> Option<f64> {
        match self {
            Solution::Closed(_) => None,
            Solution::Field(u) => Some(u.grid.h),
        }
    }
}

/// Smallness data of the problem and the regime flags they imply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smallness {
    pub nu: f64,
    pub lambda1: f64,
    pub q: f64,
    pub tau: f64,
    pub ellipticity: f64,
    pub omega1_at_1: f64,
    pub omega2_at_1: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// `2 C1 λ < 1/4`.
    pub lambda_small: bool,
    /// `(ν + Λ1)^α ≤ λ²` in C¹ mode, `(ω1(1) + τ)^α ≤ λ³` in C^{1,1} mode.
    pub data_small: bool,
    /// `τ C0 / (2Λ) ≤ 1/4`; C^{1,1} mode only.
    pub drift_small: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub k: usize,
    pub scale: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub xi: f64,
    pub eta: f64,
    #[serde(rename = "S")]
    pub s: f64,
    /// `L_k` or `P_k` (a linear approximant has `G = 0`).
    pub approx: QuadApprox,
    /// Coefficients of `P_k(λ^k z) / λ^{2k}`.
    pub rescaled: QuadApprox,
    /// Polynomial fitted at this scale, in rescaled coordinates.
    pub increment: QuadApprox,
    /// `sup_{B_{1/2}} |w̃ − h|` at this scale.
    pub gap: f64,
    /// `‖f(x, u) − f(x, u(0))‖_{L^∞(B_{λ^k})}`, measured.
    pub f_oscillation: f64,
    /// `φ(‖u − u(0)‖_{L^∞(B_{λ^k})})`.
    pub phi_bound: f64,
    /// `M_{k+1} ≤ safety (ξ_k M_k + η_k)`; `None` on the last record.
    pub recurrence_ok: Option<bool>,
    pub margin: Option<f64>,
}

impl ScaleRecord {
    pub fn linear(&self) -> LinearApprox {
        self.approx.linear_part()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub mode: Mode,
    pub lambda: f64,
    pub records: Vec<ScaleRecord>,
    /// Last constructed polynomial, standing in for the limit.
    pub limit: QuadApprox,
    pub limit_rescaled: QuadApprox,
    pub limit_index: usize,
    pub truncated: bool,
    pub smallness: Smallness,
    pub constants: Constants,
    /// `u(0)`, subtracted before the loop.
    pub u0: f64,
    pub a0: [[f64; 2]; 2],
    pub b0: [f64; 2],
}

impl IterationTrace {
    pub fn m(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.m).collect()
    }
}

/// `ν = sup_r r^{-1} ‖a − a(0)‖_{L²(B_r)}`, declared or measured.
fn nu_of(spec: &ProblemSpec) -> Result<f64> {
    match spec.field.leading.nu {
        Some(nu) => Ok(nu),
        None => measured_nu(&spec.field, &geometric_radii(1.0, 8, 0.5)),
    }
}

fn smallness(spec: &ProblemSpec, mode: Mode, lambda: f64, c: &Constants) -> Result<Smallness> {
    let drift = &spec.field.drift;
    let nu = nu_of(spec)?;
    let ell = spec.field.ellipticity();
    let omega1_at_1 = spec.field.leading.omega1.eval(1.0);
    let (c1, _) = c.pair(mode);
    let (data_small, drift_small) = match mode {
        Mode::C1 => ((nu + drift.lambda1).powf(c.alpha) <= lambda * lambda, None),
        Mode::C11 => (
            (omega1_at_1 + drift.sup).powf(c.alpha) <= lambda.powi(3),
            Some(drift.sup * c.c0 / (2.0 * ell) <= 0.25),
        ),
    };
    Ok(Smallness {
        nu,
        lambda1: drift.lambda1,
        q: drift.q,
        tau: drift.sup,
        ellipticity: ell,
        omega1_at_1,
        omega2_at_1: drift.omega2.eval(1.0),
        t: spec.potential.hessian_bound,
        lambda_small: 2.0 * c1 * lambda < 0.25,
        data_small,
        drift_small,
    })
}

/// `λ^{k(1 − n/q)}` with `n = 2`.
fn drift_scale(s: f64, q: f64) -> f64 {
    if q.is_infinite() {
        s
    } else {
        s.powf(1.0 - 2.0 / q)
    }
}

/// Multiscale linear approximation of `u − v` at the origin.
pub fn c1_probe(spec: &ProblemSpec, u: &Solution, cfg: &IterationConfig) -> Result<IterationTrace> {
    probe(Mode::C1, spec, u, cfg)
}

/// Multiscale quadratic approximation of `u − v` at the origin, with the
/// drift correction `b(0)·F_k x1² / (2 a11(0))`.
pub fn c11_probe(spec: &ProblemSpec, u: &Solution, cfg: &IterationConfig) -> Result<IterationTrace> {
    probe(Mode::C11, spec, u, cfg)
}

pub fn probe(mode: Mode, spec: &ProblemSpec, u: &Solution, cfg: &IterationConfig) -> Result<IterationTrace> {
    cfg.validate()?;
    let constants = match &cfg.constants {
        Some(c) => c.clone(),
        None => super::calibrate::calibrated()?.constants.clone(),
    };
    let lambda = cfg.lambda;
    let field = &spec.field;
    let f = &spec.nonlinearity;
    let a0 = field.a(ORIGIN);
    let b0 = field.b(ORIGIN);
    if !(a0[0][0] >= field.ellipticity() * (1.0 - 1e-12)) {
        return Err(Error::InvalidField(format!(
            "a11(0) = {} is below the ellipticity constant",
            a0[0][0]
        )));
    }
    let u0 = u.eval(ORIGIN);
    if let Some(t) = spec.potential.t_support {
        if (t - u0).abs() > 1e-12 * (1.0 + u0.abs()) {
            return Err(Error::InvalidField(format!(
                "potential family `{}` exists only at level {t}, but u(0) = {u0}",
                spec.potential.id
            )));
        }
    }
    let potential = spec.potential.clone();
    let v = move |x: Point| potential.eval(ORIGIN, u0, x);
    let small = smallness(spec, mode, lambda, &constants)?;
    let (c1, c2) = constants.pair(mode);
    let alpha = constants.alpha;
    let omega1: &Modulus = &field.leading.omega1;
    let omega2: &Modulus = &field.drift.omega2;
    let frozen = FrozenProblem::new(a0, ORIGIN, 1.0, cfg.frozen_spacing)?;
    let floor = u.spacing().map(|h| cfg.scale_floor_spacings * h);

    let mut q = QuadApprox::default();
    let mut records: Vec<ScaleRecord> = Vec::with_capacity(cfg.scales + 1);
    let mut truncated = false;
    let mut s_sum = 0.0;
    for k in 0..=cfg.scales {
        let s = lambda.powi(k as i32);
        if floor.is_some_and(|fl| s < fl) {
            truncated = true;
            break;
        }
        let qk = q;
        let corr = match mode {
            Mode::C1 => 0.0,
            Mode::C11 => s * (b0[0] * qk.f[0] + b0[1] * qk.f[1]) / (2.0 * a0[0][0]),
        };
        let w = |z: Point| {
            let x = [s * z[0], s * z[1]];
            (u.eval(x) - u0 - v(x)) / (s * s) - qk.eval(z) + corr * z[0] * z[0]
        };
        let (w_sup, _) = ball_sup(ORIGIN, 1.0, w);
        let m = match mode {
            Mode::C1 => s * w_sup,
            Mode::C11 => w_sup,
        };
        let approx = frozen.approximate(&w, &cfg.solver)?;
        let inc = taylor_fit(&approx.h, ORIGIN, cfg.fit_radius, mode.order(), &a0)?.as_quad();
        let next = QuadApprox {
            e: (qk.e + inc.e) / (lambda * lambda),
            f: [(qk.f[0] + inc.f[0]) / lambda, (qk.f[1] + inc.f[1]) / lambda],
            g: match mode {
                Mode::C1 => [[0.0; 2]; 2],
                Mode::C11 => qk.add(&QuadApprox { e: 0.0, f: [0.0; 2], g: inc.g }).g,
            },
        };
        let abs = QuadApprox {
            e: s * s * qk.e,
            f: [s * qk.f[0], s * qk.f[1]],
            g: qk.g,
        };
        let (f_osc, _) = ball_sup(ORIGIN, s, |x| f.eval(x, u.eval(x)) - f.eval(x, u0));
        let (u_osc, _) = ball_sup(ORIGIN, s, |x| u.eval(x) - u0);
        let t = small.t;
        let (xi, eta) = match mode {
            Mode::C1 => {
                let d = small.lambda1 * drift_scale(s, small.q);
                let xi = c1 / lambda * (lambda * lambda + (small.nu + d).powf(alpha));
                let eta = c2 / lambda * (s * f_osc + t * s * (small.nu + d) + d * norm2(&abs.f));
                (xi, eta)
            }
            Mode::C11 => {
                let (tau, ell) = (small.tau, small.ellipticity);
                let o1 = omega1.eval(s) + tau * s;
                let xi = c1 / (lambda * lambda) * (lambda.powi(3) + o1.powf(alpha));
                let fk = norm2(&abs.f);
                // F_{k+1} − F_k = λ^k F, available once this scale is fitted
                let df = s * norm2(&inc.f);
                let eta = c2 / (lambda * lambda)
                    * (f_osc + o1 * (t + 2.0 * frobenius(&abs.g) + tau / ell * fk) + omega2.eval(s) * fk)
                    + tau / (2.0 * ell) * df;
                (xi, eta)
            }
        };
        s_sum += m;
        records.push(ScaleRecord {
            k,
            scale: s,
            m,
            xi,
            eta,
            s: s_sum,
            approx: abs,
            rescaled: qk,
            increment: inc,
            gap: approx.gap,
            f_oscillation: f_osc,
            phi_bound: f.phi.eval(u_osc),
            recurrence_ok: None,
            margin: None,
        });
        q = next;
    }
    if records.is_empty() {
        return Err(Error::Domain("the first scale already lies below the grid floor".into()));
    }
    let limit_index = records.len();
    let sl = lambda.powi(limit_index as i32);
    let limit = QuadApprox {
        e: sl * sl * q.e,
        f: [sl * q.f[0], sl * q.f[1]],
        g: q.g,
    };
    let mut trace = IterationTrace {
        mode,
        lambda,
        records,
        limit,
        limit_rescaled: q,
        limit_index,
        truncated,
        smallness: small,
        constants,
        u0,
        a0,
        b0,
    };
    for c in verify_recurrence(&trace, cfg.safety) {
        trace.records[c.k].recurrence_ok = Some(c.ok);
        trace.records[c.k].margin = Some(c.margin);
    }
    Ok(trace)
}
