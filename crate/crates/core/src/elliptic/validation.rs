use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checks::{abp_check, convergence_order, manufactured_error, solve_with, OrderReport};
use super::grid::DiskGrid;
use super::operator::{assemble, AssembleOptions, ANISOTROPY_LIMIT};
use super::solver::SolverConfig;
use crate::error::{Error, Result};
use crate::fields::{field_from_ids, rotated_diag, CoefficientField, Mat2, Vec2};
use crate::Point;

/// A manufactured Dirichlet problem on the unit disk with closed-form
/// derivatives; the right-hand side is `a : D²u + b · Du`.
pub struct ValidationProblem {
    pub id: &'static str,
    pub field: CoefficientField,
    pub u: fn(Point) -> f64,
    pub du: fn(Point) -> Vec2,
    pub d2u: fn(Point) -> Mat2,
    /// `u` is a quadratic in the kernel of a constant operator, so every
    /// stencil reproduces it.
    pub quadratic: bool,
}

impl ValidationProblem {
    pub fn rhs(&self, x: Point) -> f64 {
        let (a, b) = (self.field.a(x), self.field.b(x));
        let (du, d2u) = ((self.du)(x), (self.d2u)(x));
        a[0][0] * d2u[0][0] + 2.0 * a[0][1] * d2u[0][1] + a[1][1] * d2u[1][1] + b[0] * du[0] + b[1] * du[1]
    }
}

pub const VALIDATION_PROBLEMS: [&str; 4] = ["sin_cosh", "exp_drift", "variable_diag", "anisotropic_quadratic"];

/// `x1² − 3 x2² + 0.8 x1 x2 + x1`, in the kernel of `anisotropic:3,0`.
const AQ: [f64; 3] = [1.0, -3.0, 0.4];

pub fn validation_problem(id: &str) -> Result<ValidationProblem> {
    let p = match id {
        "sin_cosh" => ValidationProblem {
            id: "sin_cosh",
            field: field_from_ids("identity", "zero")?,
            u: |x| x[0].sin() * x[1].cosh(),
            du: |x| [x[0].cos() * x[1].cosh(), x[0].sin() * x[1].sinh()],
            d2u: |x| {
                let (s, c) = x[0].sin_cos();
                [[-s * x[1].cosh(), c * x[1].sinh()], [c * x[1].sinh(), s * x[1].cosh()]]
            },
            quadratic: false,
        },
        "exp_drift" => ValidationProblem {
            id: "exp_drift",
            field: field_from_ids("identity", "constant:1,-0.5")?,
            u: |x| (x[0] + 0.5 * x[1]).exp(),
            du: |x| {
                let e = (x[0] + 0.5 * x[1]).exp();
                [e, 0.5 * e]
            },
            d2u: |x| {
                let e = (x[0] + 0.5 * x[1]).exp();
                [[e, 0.5 * e], [0.5 * e, 0.25 * e]]
            },
            quadratic: false,
        },
        "variable_diag" => ValidationProblem {
            id: "variable_diag",
            field: field_from_ids("perturbed_diag:0.3", "zero")?,
            u: |x| x[0].cos() * x[1].exp(),
            du: |x| [-x[0].sin() * x[1].exp(), x[0].cos() * x[1].exp()],
            d2u: |x| {
                let (s, c) = x[0].sin_cos();
                let e = x[1].exp();
                [[-c * e, -s * e], [-s * e, c * e]]
            },
            quadratic: false,
        },
        "anisotropic_quadratic" => ValidationProblem {
            id: "anisotropic_quadratic",
            field: field_from_ids("anisotropic:3,0", "zero")?,
            u: |x| AQ[0] * x[0] * x[0] + AQ[1] * x[1] * x[1] + 2.0 * AQ[2] * x[0] * x[1] + x[0],
            du: |x| [2.0 * AQ[0] * x[0] + 2.0 * AQ[2] * x[1] + 1.0, 2.0 * AQ[1] * x[1] + 2.0 * AQ[2] * x[0]],
            d2u: |_| [[2.0 * AQ[0], 2.0 * AQ[2]], [2.0 * AQ[2], 2.0 * AQ[1]]],
            quadratic: true,
        },
        _ => return Err(Error::Registry(id.into())),
    };
    Ok(p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub id: String,
    pub order: OrderReport,
    pub pass: bool,
}

/// Observed order `2 ± order_tol`, or error below `1e-10` for quadratics.
/// The solves use `rtol ≤ 1e-16`, which in practice stops at the rounding
/// floor of the residual.
pub fn validate_solver(
    p: &ValidationProblem,
    spacings: &[f64],
    order_tol: f64,
    cfg: &SolverConfig,
) -> Result<ValidationReport> {
    let cfg = &SolverConfig { rtol: cfg.rtol.min(1e-16), ..*cfg };
    let errors = spacings
        .iter()
        .map(|&h| manufactured_error(&p.field, p.u, |x| p.rhs(x), h, cfg))
        .collect::<Result<Vec<f64>>>()?;
    let order = convergence_order(spacings, &errors)?;
    let pass = if p.quadratic {
        order.errors.iter().all(|e| *e <= 1e-10)
    } else {
        order.monotone && order.order.is_some_and(|o| (o - 2.0).abs() <= order_tol)
    };
    Ok(ValidationReport {
        id: p.id.into(),
        order,
        pass,
    })
}

/// `s(x) R(θ) diag(√κ, 1/√κ) R(θ)ᵀ` with `s = 1 + ε sin(x1 + 2x2)` and a
/// constant drift `b`.
pub fn random_operator(kappa: f64, theta: f64, b: Vec2, eps: f64) -> CoefficientField {
    let base = rotated_diag(kappa.sqrt(), 1.0 / kappa.sqrt(), theta);
    let mut f = CoefficientField::constant(base);
    f.leading.id = format!("random:{kappa},{theta},{eps}");
    f.leading.a = Arc::new(move |x| {
        let s = 1.0 + eps * (x[0] + 2.0 * x[1]).sin();
        [[s * base[0][0], s * base[0][1]], [s * base[1][0], s * base[1][1]]]
    });
    f.leading.ellipticity = ((1.0 - eps) / kappa.sqrt()).min(1.0 / ((1.0 + eps) * kappa.sqrt()));
    f.drift.b = Arc::new(move |_| b);
    f.drift.sup = b[0].abs().max(b[1].abs());
    f.drift.lambda1 = b[0].abs() + b[1].abs();
    f
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DmpCase {
    pub kappa: f64,
    pub theta: f64,
    pub b: Vec2,
    pub eps: f64,
    /// `max_interior u − max_boundary u` for `L u = 0`.
    pub excess: f64,
    pub dmp_ok: bool,
    /// ABP implied constants for `L u = f < 0`, `u = 0` on the circle, at
    /// the two spacings.
    pub implied_c: [f64; 2],
    pub c_stable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DmpReport {
    pub cases: Vec<DmpCase>,
    pub pass: bool,
}

/// Maximum principle and ABP stability on `count` random operators with
/// anisotropy below `max_kappa`.
pub fn dmp_suite(count: usize, max_kappa: f64, seed: u64, spacings: [f64; 2], cfg: &SolverConfig) -> Result<DmpReport> {
    if !(1.0..=ANISOTROPY_LIMIT).contains(&max_kappa) {
        return Err(Error::config("validation.max_kappa", "anisotropy must lie in [1, 5]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forcing = |x: Point| -(1.0 + 0.5 * (2.0 * x[0]).sin() * (x[1] + 0.3).cos()).powi(2);
    let mut cases = Vec::with_capacity(count);
    for _ in 0..count {
        let kappa = rng.gen_range(1.0..max_kappa);
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let b = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let eps = rng.gen_range(0.0..0.3);
        let (m, phase) = (rng.gen_range(1..6) as f64, rng.gen_range(0.0..std::f64::consts::TAU));
        let field = random_operator(kappa, theta, b, eps);
        let mut excess = f64::NEG_INFINITY;
        let mut implied_c = [0.0; 2];
        for (i, &h) in spacings.iter().enumerate() {
            let grid = Arc::new(DiskGrid::new([0.0, 0.0], 1.0, h)?);
            let op = assemble(&field, grid, AssembleOptions::default())?;
            let (u, _) = solve_with(&op, |_| 0.0, |x| (m * x[1].atan2(x[0]) + phase).cos(), cfg)?;
            excess = excess.max(u.interior_max() - u.boundary_max());
            let (u, _) = solve_with(&op, forcing, |_| 0.0, cfg)?;
            implied_c[i] = abp_check(&u, forcing, 0.0).implied_c;
        }
        cases.push(DmpCase {
            kappa,
            theta,
            b,
            eps,
            excess,
            dmp_ok: excess <= 1e-10,
            implied_c,
            c_stable: (implied_c[1] / implied_c[0] - 1.0).abs() <= 0.2,
        });
    }
    let pass = cases.iter().all(|c| c.dmp_ok && c.c_stable);
    Ok(DmpReport { cases, pass })
}
