use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::approx::{taylor_fit, FrozenProblem};
use super::probe::Mode;
use crate::elliptic::{assemble, least_squares_slope, solve_with, DiscreteField, DiskGrid, Role, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{field_from_ids, frobenius, ln_distance, nonlinearity_from_id, norm2, DEFAULT_CELLS_PER_RADIUS};
use crate::quadrature::ball_sup;
use crate::Point;

/// Empirical constants of the approximation lemma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub c0: f64,
    /// `C1`, `C2` for linear approximants.
    pub c1: f64,
    pub c2: f64,
    /// `C1`, `C2` for quadratic approximants.
    pub c1_quad: f64,
    pub c2_quad: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Constants {
    pub fn pair(&self, mode: Mode) -> (f64, f64) {
        match mode {
            Mode::C1 => (self.c1, self.c2),
            Mode::C11 => (self.c1_quad, self.c2_quad),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.c0, self.c1, self.c2, self.c1_quad, self.c2_quad];
        if all.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::config("iteration.constants", "constants must be finite and nonnegative"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("iteration.constants.beta", "β must lie in (0, 1)"));
        }
        if (self.alpha - self.beta / (2.0 + self.beta)).abs() > 1e-12 {
            return Err(Error::config("iteration.constants.alpha", "α must equal β / (2 + β)"));
        }
        Ok(())
    }
}

/// Boundary shapes of the calibration suite.
pub const SHAPES: [&str; 4] = ["exp_cos", "quadratic", "sin_mix", "cubic"];

pub fn shape(id: usize) -> fn(Point) -> f64 {
    match id {
        0 => |x| x[0].exp() * x[1].cos(),
        1 => |x| x[0] * x[0] - x[1] * x[1] + 0.5 * x[0] * x[1] + x[0],
        2 => |x| (2.0 * x[0] + x[1]).sin(),
        _ => |x| (x[0] + 0.3).powi(3) - x[1],
    }
}

/// Experiment families: an anisotropic perturbation of the leading part, a
/// constant drift with forcing, the perturbed leading part with forcing, and
/// a constant drift acting on a tilted potential `v = TILT·x1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Leading,
    Drift,
    LeadingForced,
    DriftTilted,
}

/// Slope of the tilted potential.
pub const TILT: f64 = 4.0;

impl Family {
    pub const ALL: [Family; 4] = [Family::Leading, Family::Drift, Family::LeadingForced, Family::DriftTilted];

    fn ids(self, eps: f64) -> (String, String, String) {
        match self {
            Family::Leading => (format!("perturbed_diag:{eps}"), "zero".into(), "const:0".into()),
            Family::Drift => ("identity".into(), format!("constant:{eps},0"), "const:2".into()),
            Family::LeadingForced => (format!("perturbed_diag:{eps}"), "zero".into(), "const:2".into()),
            Family::DriftTilted => ("identity".into(), format!("constant:{eps},0"), "const:0".into()),
        }
    }

    fn tilt(self) -> f64 {
        match self {
            Family::DriftTilted => TILT,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSuite {
    pub eps: Vec<f64>,
    pub train_shapes: Vec<usize>,
    pub holdout_shapes: Vec<usize>,
    pub spacing: f64,
    pub lambda: f64,
    pub fit_radius: f64,
    pub solver: SolverConfig,
}

impl Default for CalibrationSuite {
    fn default() -> Self {
        Self {
            eps: vec![0.02, 0.05, 0.1, 0.2],
            train_shapes: vec![0, 1, 2],
            holdout_shapes: vec![3],
            spacing: 1.0 / 64.0,
            lambda: 0.2,
            fit_radius: 0.25,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub family: Family,
    pub eps: f64,
    pub shape: usize,
    pub eps1: f64,
    pub eps2: f64,
    /// `‖w‖_{L^∞(B_1)}` with `w = u − v`.
    pub w_sup: f64,
    pub gap: f64,
    /// `‖w − L‖_{L^∞(B_λ)}` and `‖w − P‖_{L^∞(B_λ)}`.
    pub y_linear: f64,
    pub y_quad: f64,
    /// `‖f(x,u) − f(x,u(0))‖ + T1 ε1 + T2 ε2` with `T1 = ‖D²v‖`, `T2 = ‖Dv‖`.
    pub forcing: f64,
    /// Fitted boundary Hölder exponent of `u`.
    pub beta0: f64,
    /// `(|h(0)| + |Dh(0)| + sup_{B_{1/4}} |D²h|) / ‖h‖_{L^∞(B_{1/2})}`.
    pub c0_ratio: f64,
    pub sup_dh0_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub eps_sum: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Log-log slope of `gap / ‖w‖` against `ε1 + ε2`, training shapes.
    pub slope: f64,
    pub holdout_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constants: Constants,
    pub experiments: Vec<Experiment>,
    pub sweep: SweepReport,
    /// Largest `|Dh(0)| / ‖h‖` over the harmonic test functions.
    pub harmonic_dh0: f64,
}

/// β is capped strictly below 1: smooth data saturate the measured exponent.
pub const BETA_CAP: f64 = 0.99;

/// Harmonic test functions for `a0 = I`.
pub fn harmonic_tests() -> Vec<fn(Point) -> f64> {
    vec![
        |x| x[0],
        |x| x[0] * x[0] - x[1] * x[1],
        |x| x[0].exp() * x[1].cos(),
        |x| x[0].powi(3) - 3.0 * x[0] * x[1] * x[1],
        |x| (2.0 * x[1]).cos() * (2.0 * x[0]).cosh(),
    ]
}

/// `(c0 ratio, |Dh(0)| / ‖h‖_{B_{1/2}})` of a frozen solution `h` on `B_{3/4}`.
fn derivative_ratios(h: &DiscreteField, a0: &[[f64; 2]; 2]) -> Result<(f64, f64)> {
    let (hsup, _) = ball_sup([0.0, 0.0], 0.5, |x| h.interpolate(x));
    if hsup == 0.0 {
        return Ok((0.0, 0.0));
    }
    let at0 = taylor_fit(h, [0.0, 0.0], 0.125, 2, a0)?.as_quad();
    let mut d2 = 2.0 * frobenius(&at0.g);
    for c in [[0.25, 0.0], [-0.25, 0.0], [0.0, 0.25], [0.0, -0.25]] {
        let p = taylor_fit(h, c, 0.125, 2, a0)?.as_quad();
        d2 = d2.max(2.0 * frobenius(&p.g));
    }
    let dh0 = norm2(&at0.f);
    Ok(((at0.e.abs() + dh0 + d2) / hsup, dh0 / hsup))
}

/// Slope of `max |u(x) − g(x/|x|)|` over nodes at distance `(δ/2, δ]` from
/// the circle, against `δ`.
fn boundary_holder_exponent(u: &DiscreteField, g: impl Fn(Point) -> f64) -> f64 {
    let deltas = [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0];
    let mut osc = [0.0f64; 4];
    for (x, &val) in u.grid.nodes.iter().zip(&u.values) {
        let r = x[0].hypot(x[1]);
        let d = u.grid.radius - r;
        for (o, delta) in osc.iter_mut().zip(deltas) {
            if d > 0.5 * delta && d <= delta {
                let x0 = [x[0] / r, x[1] / r];
                *o = o.max((val - g(x0)).abs());
            }
        }
    }
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = osc.iter().map(|o| o.max(1e-300).ln()).collect();
    least_squares_slope(&lx, &ly)
}

struct Raw {
    family: Family,
    eps: f64,
    shape: usize,
    eps1: f64,
    eps2: f64,
    w: DiscreteField,
    t1: f64,
    t2: f64,
    beta0: f64,
}

fn solve_experiment(family: Family, eps: f64, shape_id: usize, suite: &CalibrationSuite) -> Result<Raw> {
    let (lead, drift, nl) = family.ids(eps);
    let field = field_from_ids(&lead, &drift)?;
    let (f, v) = nonlinearity_from_id(&nl, &field)?;
    if !f.u_independent {
        return Err(Error::Calibration(format!("suite forcing `{nl}` must not depend on u")));
    }
    let tilt = family.tilt();
    let g0 = shape(shape_id);
    let g = move |x: Point| g0(x) + tilt * x[0];
    let grid = Arc::new(DiskGrid::new([0.0, 0.0], 1.0, suite.spacing)?);
    let op = assemble(&field, grid.clone(), Default::default())?;
    let (u, _) = solve_with(&op, |x| f.eval(x, 0.0), g, &suite.solver)?;
    let beta0 = boundary_holder_exponent(&u, g);
    let vv = |x: Point| v.eval([0.0, 0.0], 0.0, x) + tilt * x[0];
    let dh = 1e-5;
    let (t2, _) = ball_sup([0.0, 0.0], 1.0, |x| {
        let d1 = vv([x[0] + dh, x[1]]) - vv([x[0] - dh, x[1]]);
        let d2 = vv([x[0], x[1] + dh]) - vv([x[0], x[1] - dh]);
        d1.hypot(d2) / (2.0 * dh)
    });
    let values = u.values.iter().zip(&grid.nodes).map(|(a, &x)| a - vv(x)).collect();
    let boundary = u.boundary.iter().zip(&grid.boundary_points).map(|(a, &x)| a - vv(x)).collect();
    let w = DiscreteField::new(grid, Role::Solution, values, boundary)?;
    let eps1 = ln_distance(&field, [0.0, 0.0], 1.0, DEFAULT_CELLS_PER_RADIUS)?.value;
    let eps2 = field.drift.lambda1;
    Ok(Raw {
        family,
        eps,
        shape: shape_id,
        eps1,
        eps2,
        w,
        t1: v.hessian_bound,
        t2,
        beta0,
    })
}

/// Minimises `Σ (C1 x1_i/y_i + C2 x2_i/y_i − 1)²` over `C1, C2 ≥ 0` subject
/// to `C1 x1_i + C2 x2_i ≥ y_i` for every row, by enumerating active sets.
pub fn envelope_fit(rows: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    let r: Vec<[f64; 2]> = rows
        .iter()
        .filter(|row| row.2 > 0.0)
        .map(|&(x1, x2, y)| [x1 / y, x2 / y])
        .collect();
    if r.is_empty() {
        return Err(Error::Calibration("no rows with a positive left-hand side".into()));
    }
    // constraints n·c ≥ 1 (rows) and n·c ≥ 0 (bounds)
    let mut cons: Vec<([f64; 2], f64)> = r.iter().map(|ri| (*ri, 1.0)).collect();
    cons.push(([1.0, 0.0], 0.0));
    cons.push(([0.0, 1.0], 0.0));
    let (mut h, mut gv) = ([[0.0; 2]; 2], [0.0; 2]);
    for ri in &r {
        for a in 0..2 {
            gv[a] += ri[a];
            for b in 0..2 {
                h[a][b] += ri[a] * ri[b];
            }
        }
    }
    let obj = |c: [f64; 2]| r.iter().map(|ri| (ri[0] * c[0] + ri[1] * c[1] - 1.0).powi(2)).sum::<f64>();
    let feasible = |c: [f64; 2]| cons.iter().all(|(n, b)| n[0] * c[0] + n[1] * c[1] >= b * (1.0 - 1e-12) - 1e-15);
    let solve2 = |m: [[f64; 2]; 2], rhs: [f64; 2]| -> Option<[f64; 2]> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        if det.abs() <= 1e-13 * scale * scale {
            return None;
        }
        Some([
            (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ])
    };
    let mut cands: Vec<[f64; 2]> = Vec::new();
    if let Some(c) = solve2(h, gv) {
        cands.push(c);
    }
    for (n, b) in &cons {
        // min ½cᵀHc − gᵀc subject to n·c = b
        let m = [[h[0][0], h[0][1], n[0]], [h[1][0], h[1][1], n[1]], [n[0], n[1], 0.0]];
        if let Some(c) = solve3(m, [gv[0], gv[1], *b]) {
            cands.push([c[0], c[1]]);
        }
    }
    for i in 0..cons.len() {
        for j in i + 1..cons.len() {
            let (ni, bi) = cons[i];
            let (nj, bj) = cons[j];
            if let Some(c) = solve2([ni, nj], [bi, bj]) {
                cands.push(c);
            }
        }
    }
    cands
        .into_iter()
        .filter(|c| c.iter().all(|v| v.is_finite()) && feasible(*c))
        .map(|c| (obj(c), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| (c[0].max(0.0), c[1].max(0.0)))
        .ok_or_else(|| Error::Calibration("degenerate regression: no feasible constants".into()))
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if d.abs() <= 1e-13 * scale.powi(3) {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = rhs[r];
        }
        *o = det(mc) / d;
    }
    Some(out)
}

/// Runs the frozen-coefficient suite and fits `C0, C1, C2, α, β`.
pub fn calibrate_constants(suite: &CalibrationSuite) -> Result<Calibration> {
    if suite.eps.len() < 4 {
        return Err(Error::Calibration("the sweep needs at least four perturbation sizes".into()));
    }
    if suite.train_shapes.len() < 3 {
        return Err(Error::Calibration("at least three boundary-data shapes are required".into()));
    }
    let lambda = suite.lambda;
    let families = Family::ALL;
    let shapes: Vec<usize> = suite.train_shapes.iter().chain(&suite.holdout_shapes).copied().collect();
    let mut jobs: Vec<(Family, f64, usize)> = Vec::new();
    for &fam in &families {
        for &e in &suite.eps {
            jobs.extend(shapes.iter().map(|&s| (fam, e, s)));
        }
    }
    let raws: Vec<Raw> = jobs
        .par_iter()
        .map(|&(fam, e, s)| solve_experiment(fam, e, s, suite))
        .collect::<Result<_>>()?;

    let beta = raws
        .iter()
        .filter(|r| suite.train_shapes.contains(&r.shape))
        .map(|r| r.beta0)
        .fold(f64::INFINITY, f64::min)
        .min(BETA_CAP);
    if !(beta > 0.0) {
        return Err(Error::Calibration(format!("measured boundary Hölder exponent {beta} is not positive")));
    }
    let alpha = beta / (2.0 + beta);

    let a0 = [[1.0, 0.0], [0.0, 1.0]];
    let frozen = FrozenProblem::new(a0, [0.0, 0.0], 1.0, suite.spacing)?;
    let experiments: Vec<Experiment> = raws
        .par_iter()
        .map(|raw| -> Result<Experiment> {
            let w = |x: Point| raw.w.interpolate(x);
            let approx = frozen.approximate(&w, &suite.solver)?;
            let lin = taylor_fit(&approx.h, [0.0, 0.0], suite.fit_radius, 1, &a0)?.as_quad();
            let quad = taylor_fit(&approx.h, [0.0, 0.0], suite.fit_radius, 2, &a0)?.as_quad();
            let (y_linear, _) = ball_sup([0.0, 0.0], lambda, |x| w(x) - lin.eval(x));
            let (y_quad, _) = ball_sup([0.0, 0.0], lambda, |x| w(x) - quad.eval(x));
            let (w_sup, _) = ball_sup([0.0, 0.0], 1.0, w);
            let (c0_ratio, sup_dh0_ratio) = derivative_ratios(&approx.h, &a0)?;
            Ok(Experiment {
                family: raw.family,
                eps: raw.eps,
                shape: raw.shape,
                eps1: raw.eps1,
                eps2: raw.eps2,
                w_sup,
                gap: approx.gap,
                y_linear,
                y_quad,
                forcing: raw.t1 * raw.eps1 + raw.t2 * raw.eps2,
                beta0: raw.beta0,
                c0_ratio,
                sup_dh0_ratio,
            })
        })
        .collect::<Result<_>>()?;

    let mut c0 = experiments.iter().map(|e| e.c0_ratio).fold(0.0, f64::max);
    let mut harmonic_dh0 = 0.0f64;
    for h in harmonic_tests() {
        let approx = frozen.approximate(&h, &suite.solver)?;
        let (r, d) = derivative_ratios(&approx.h, &a0)?;
        c0 = c0.max(r);
        harmonic_dh0 = harmonic_dh0.max(d);
    }

    let train: Vec<&Experiment> = experiments.iter().filter(|e| suite.train_shapes.contains(&e.shape)).collect();
    let rows = |lam_pow: f64, y: fn(&Experiment) -> f64| -> Vec<(f64, f64, f64)> {
        train
            .iter()
            .map(|e| ((lam_pow + (e.eps1 + e.eps2).powf(alpha)) * e.w_sup, e.forcing, y(e)))
            .collect()
    };
    let (c1, c2) = envelope_fit(&rows(lambda * lambda, |e| e.y_linear))?;
    let (c1_quad, c2_quad) = envelope_fit(&rows(lambda.powi(3), |e| e.y_quad))?;

    let sweep_of = |shapes: &[usize]| -> (Vec<f64>, Vec<f64>) {
        experiments
            .iter()
            .filter(|e| e.family == Family::Leading && shapes.contains(&e.shape))
            .map(|e| (e.eps1 + e.eps2, e.gap / e.w_sup))
            .unzip()
    };
    let (eps_sum, ratio) = sweep_of(&suite.train_shapes);
    let log = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    let slope = least_squares_slope(&log(&eps_sum), &log(&ratio));
    let holdout_slope = if suite.holdout_shapes.is_empty() {
        f64::NAN
    } else {
        let (he, hr) = sweep_of(&suite.holdout_shapes);
        least_squares_slope(&log(&he), &log(&hr))
    };
    let constants = Constants {
        c0,
        c1,
        c2,
        c1_quad,
        c2_quad,
        alpha,
        beta,
    };
    constants.validate().map_err(|e| Error::Calibration(e.to_string()))?;
    Ok(Calibration {
        constants,
        experiments,
        sweep: SweepReport {
            eps_sum,
            ratio,
            slope,
            holdout_slope,
        },
        harmonic_dh0,
    })
}

static CALIBRATION: OnceLock<std::result::Result<Calibration, String>> = OnceLock::new();

/// Calibration over the default suite, computed once per process.
pub fn calibrated() -> Result<&'static Calibration> {
    CALIBRATION
        .get_or_init(|| calibrate_constants(&CalibrationSuite::default()).map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| Error::Calibration(e.clone()))
}
