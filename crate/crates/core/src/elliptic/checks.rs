use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::{DiscreteField, Role};
use super::grid::DiskGrid;
use super::operator::{assemble, AssembleOptions, LinearOperator};
use super::solver::{SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{sym_eigenvalues, CoefficientField, Mat2};
use crate::quadrature::BallQuadrature;
use crate::Point;

/// Solves `a0 : D²h = rhs` in `B_radius(center)` with `h = boundary` on
/// the circle, through the general assembly path.
pub fn constant_coeff_solve(
    a0: Mat2,
    rhs: impl Fn(Point) -> f64,
    boundary: impl Fn(Point) -> f64,
    center: Point,
    radius: f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<(DiscreteField, SolveStats)> {
    let (lo, _) = sym_eigenvalues(&a0);
    if !(lo > 0.0) {
        return Err(Error::InvalidField("frozen matrix is not positive definite".into()));
    }
    let grid = Arc::new(DiskGrid::new(center, radius, h)?);
    let op = assemble(&CoefficientField::constant(a0), grid.clone(), AssembleOptions::default())?;
    solve_with(&op, rhs, boundary, cfg)
}

/// Samples `rhs` at nodes, `boundary` at boundary points, and solves.
pub fn solve_with(
    op: &LinearOperator,
    rhs: impl Fn(Point) -> f64,
    boundary: impl Fn(Point) -> f64,
    cfg: &SolverConfig,
) -> Result<(DiscreteField, SolveStats)> {
    let grid = &op.grid;
    let f: Vec<f64> = grid.nodes.iter().map(|&p| rhs(p)).collect();
    let g: Vec<f64> = grid.boundary_points.iter().map(|&p| boundary(p)).collect();
    op.factorize()?.solve(&f, &g, cfg)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AbpReport {
    /// `max` of u over interior nodes.
    pub lhs: f64,
    pub boundary_max: f64,
    pub f_ln_norm: f64,
    pub implied_c: f64,
    pub pass: bool,
}

/// Compares `max u` with `max_∂ u + C ‖f‖_{L²}` for a discrete solution of
/// `L u = f`. `f` is integrated over the grid disk by cell quadrature.
pub fn abp_check(u: &DiscreteField, f: impl Fn(Point) -> f64, c_cal: f64) -> AbpReport {
    let grid = &u.grid;
    let lhs = u.interior_max();
    let boundary_max = u.boundary_max();
    let q = BallQuadrature::new(grid.center, grid.radius, 64);
    let f_ln_norm = q.lp_norm(2.0, &f);
    let implied_c = if f_ln_norm == 0.0 { 0.0 } else { (lhs - boundary_max) / f_ln_norm };
    let slack = if f_ln_norm == 0.0 { 1e-10 } else { 1e-12 };
    AbpReport {
        lhs,
        boundary_max,
        f_ln_norm,
        implied_c,
        pass: lhs <= boundary_max + c_cal * f_ln_norm + slack,
    }
}

/// Number of random far pairs sampled by [`holder_seminorm`].
pub const FAR_PAIRS: usize = 10_000;

/// `max |u(x) − u(y)| / |x − y|^α` over nodes within `radius` of the grid
/// center: every pair closer than `8h`, plus seeded random far pairs.
pub fn holder_seminorm(u: &DiscreteField, alpha: f64, radius: f64, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config("alpha", "Hölder exponent must lie in (0, 1]"));
    }
    let grid = &u.grid;
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let p = grid.nodes[k];
            (p[0] - grid.center[0]).hypot(p[1] - grid.center[1]) <= radius + 1e-12
        })
        .collect();
    let ratio = |a: usize, b: usize| {
        let (p, q) = (grid.nodes[a], grid.nodes[b]);
        let d = (p[0] - q[0]).hypot(p[1] - q[1]);
        (u.values[a] - u.values[b]).abs() / d.powf(alpha)
    };
    let mut best: f64 = 0.0;
    let mut member = vec![false; grid.len()];
    inside.iter().for_each(|&k| member[k] = true);
    for &k in &inside {
        let [i, j] = grid.lattice[k];
        for dj in -8i64..=8 {
            for di in -8i64..=8 {
                if (di, dj) <= (0, 0) || di * di + dj * dj > 64 {
                    continue;
                }
                if let Some(m) = grid.node_at(i + di, j + dj) {
                    if member[m] {
                        best = best.max(ratio(k, m));
                    }
                }
            }
        }
    }
    if inside.len() > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..FAR_PAIRS {
            let a = inside[rng.gen_range(0..inside.len())];
            let b = inside[rng.gen_range(0..inside.len())];
            if a != b {
                best = best.max(ratio(a, b));
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderReport {
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln h`; `None` when the
    /// errors are at rounding level.
    pub order: Option<f64>,
    pub exact_on_stencil: bool,
    /// `false` when the errors do not decrease with h.
    pub monotone: bool,
}

/// Observed convergence order from `(h, sup-error)` pairs.
pub fn convergence_order(spacings: &[f64], errors: &[f64]) -> Result<OrderReport> {
    if spacings.len() < 3 || spacings.len() != errors.len() {
        return Err(Error::config("resolutions", "at least three resolutions required"));
    }
    let ratios: Vec<f64> = spacings.windows(2).map(|w| w[0] / w[1]).collect();
    if ratios.iter().any(|r| (r - ratios[0]).abs() > 1e-9 * ratios[0] || *r <= 1.0) {
        return Err(Error::config("resolutions", "spacings must form a decreasing geometric progression"));
    }
    let exact = errors.iter().all(|e| *e < 1e-11);
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let order = if exact {
        None
    } else {
        let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
        Some(least_squares_slope(&xs, &ys))
    };
    Ok(OrderReport {
        spacings: spacings.to_vec(),
        errors: errors.to_vec(),
        order,
        exact_on_stencil: exact,
        monotone,
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Sup-error of the discrete solution of `L u = L u_exact` on the unit disk
/// with `u = u_exact` on the circle, `rhs` being `L u_exact`.
pub fn manufactured_error(
    field: &CoefficientField,
    u_exact: impl Fn(Point) -> f64,
    rhs: impl Fn(Point) -> f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let grid = Arc::new(DiskGrid::new([0.0, 0.0], 1.0, h)?);
    let op = assemble(field, grid, AssembleOptions::default())?;
    let (u, _) = solve_with(&op, rhs, &u_exact, cfg)?;
    Ok(u.sup_error(u_exact))
}

/// Nodal discrete field for `g`.
pub fn sample(grid: &Arc<DiskGrid>, role: Role, g: impl Fn(Point) -> f64) -> Result<DiscreteField> {
    DiscreteField::from_fn(grid.clone(), role, g)
}
