use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elliptic::{assemble, AssembleOptions, DiscreteField, DiskGrid, LinearOperator, SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{sym_eigenvalues, CoefficientField, Mat2, Vec2};
use crate::quadrature::ball_sup;
use crate::Point;

/// `L(x) = A + B·x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearApprox {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: Vec2,
}

impl LinearApprox {
    pub fn eval(&self, x: Point) -> f64 {
        self.a + self.b[0] * x[0] + self.b[1] * x[1]
    }
}

/// `P(x) = E + F·x + xᵀGx` with `G` symmetric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadApprox {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: Vec2,
    #[serde(rename = "G")]
    pub g: Mat2,
}

impl QuadApprox {
    pub fn eval(&self, x: Point) -> f64 {
        let g = &self.g;
        self.e
            + self.f[0] * x[0]
            + self.f[1] * x[1]
            + g[0][0] * x[0] * x[0]
            + 2.0 * g[0][1] * x[0] * x[1]
            + g[1][1] * x[1] * x[1]
    }

    /// `a0_ij D_ij P = Σ a0_ij · 2 G_ij`.
    pub fn frozen_trace(&self, a0: &Mat2) -> f64 {
        2.0 * frob_dot(a0, &self.g)
    }

    pub fn linear_part(&self) -> LinearApprox {
        LinearApprox { a: self.e, b: self.f }
    }

    pub fn add(&self, o: &QuadApprox) -> QuadApprox {
        let mut g = self.g;
        for (r, or) in g.iter_mut().zip(&o.g) {
            for (v, ov) in r.iter_mut().zip(or) {
                *v += ov;
            }
        }
        QuadApprox {
            e: self.e + o.e,
            f: [self.f[0] + o.f[0], self.f[1] + o.f[1]],
            g,
        }
    }

    pub fn scaled(&self, s: f64) -> QuadApprox {
        QuadApprox {
            e: s * self.e,
            f: [s * self.f[0], s * self.f[1]],
            g: [[s * self.g[0][0], s * self.g[0][1]], [s * self.g[1][0], s * self.g[1][1]]],
        }
    }
}

impl From<LinearApprox> for QuadApprox {
    fn from(l: LinearApprox) -> Self {
        QuadApprox {
            e: l.a,
            f: l.b,
            g: [[0.0; 2]; 2],
        }
    }
}

/// Result of [`taylor_fit`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "snake_case")]
pub enum Approx {
    Linear(LinearApprox),
    Quad(QuadApprox),
}

impl Approx {
    pub fn as_quad(&self) -> QuadApprox {
        match *self {
            Approx::Linear(l) => l.into(),
            Approx::Quad(q) => q,
        }
    }
}

fn frob_dot(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Orthogonal projection of `g` onto `{G : a0 : G = 0}`.
pub fn trace_free_projection(g: &Mat2, a0: &Mat2) -> Mat2 {
    let c = frob_dot(a0, g) / frob_dot(a0, a0);
    let mut out = *g;
    for (r, ar) in out.iter_mut().zip(a0) {
        for (v, av) in r.iter_mut().zip(ar) {
            *v -= c * av;
        }
    }
    // restore exact symmetry after rounding
    let off = 0.5 * (out[0][1] + out[1][0]);
    out[0][1] = off;
    out[1][0] = off;
    out
}

/// Least-squares polynomial of degree `order + 2` over the nodes of `h` in
/// `B_fit_radius(center)`, truncated to degree `order`. For order 2 the
/// quadratic part is projected onto the `a0`-trace-free matrices.
pub fn taylor_fit(h: &DiscreteField, center: Point, fit_radius: f64, order: usize, a0: &Mat2) -> Result<Approx> {
    if !(order == 1 || order == 2) {
        return Err(Error::Fit(format!("order {order} not in {{1, 2}}")));
    }
    if fit_radius < 4.0 * h.grid.h {
        return Err(Error::Fit(format!(
            "fit radius {fit_radius} is below four grid spacings ({})",
            4.0 * h.grid.h
        )));
    }
    let degree = order + 2;
    let monomials: Vec<(i32, i32)> = (0..=degree as i32).flat_map(|d| (0..=d).map(move |j| (d - j, j))).collect();
    let pts: Vec<(Point, f64)> = h
        .grid
        .nodes
        .iter()
        .zip(&h.values)
        .filter(|(p, _)| (p[0] - center[0]).hypot(p[1] - center[1]) <= fit_radius)
        .map(|(&p, &v)| ([(p[0] - center[0]) / fit_radius, (p[1] - center[1]) / fit_radius], v))
        .collect();
    if pts.len() < 2 * monomials.len() {
        return Err(Error::Fit(format!(
            "{} nodes in the fit ball for {} unknowns",
            pts.len(),
            monomials.len()
        )));
    }
    let m = DMatrix::from_fn(pts.len(), monomials.len(), |r, c| {
        let (i, j) = monomials[c];
        pts[r].0[0].powi(i) * pts[r].0[1].powi(j)
    });
    let rhs = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let svd = m.svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), s| (hi.max(*s), lo.min(*s)));
    if !(smin > 1e-10 * smax) {
        return Err(Error::Fit(format!("rank-deficient design (singular values {smin:.3e} / {smax:.3e})")));
    }
    let c = svd.solve(&rhs, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let coef = |i: i32, j: i32| c[monomials.iter().position(|&mj| mj == (i, j)).unwrap()];
    let r = fit_radius;
    let e = coef(0, 0);
    let f = [coef(1, 0) / r, coef(0, 1) / r];
    if order == 1 {
        return Ok(Approx::Linear(LinearApprox { a: e, b: f }));
    }
    let g = [
        [coef(2, 0) / (r * r), 0.5 * coef(1, 1) / (r * r)],
        [0.5 * coef(1, 1) / (r * r), coef(0, 2) / (r * r)],
    ];
    Ok(Approx::Quad(QuadApprox {
        e,
        f,
        g: trace_free_projection(&g, a0),
    }))
}

/// The frozen-coefficient comparison problem `a0 : D²h = 0` on
/// `B_{3r/4}(center)`, assembled once and reused for every boundary trace.
pub struct FrozenProblem {
    pub a0: Mat2,
    pub center: Point,
    pub radius: f64,
    op: LinearOperator,
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub h: DiscreteField,
    /// `sup_{B_{r/2}} |w − h|`.
    pub gap: f64,
    pub stats: SolveStats,
}

impl FrozenProblem {
    pub fn new(a0: Mat2, center: Point, radius: f64, spacing: f64) -> Result<Self> {
        let (lo, _) = sym_eigenvalues(&a0);
        if !(lo > 0.0) {
            return Err(Error::InvalidField("frozen matrix is not positive definite".into()));
        }
        let grid = Arc::new(DiskGrid::new(center, 0.75 * radius, spacing)?);
        let op = assemble(&CoefficientField::constant(a0), grid, AssembleOptions::default())?;
        Ok(Self { a0, center, radius, op })
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.op.grid
    }

    /// Solves with `h = w` on `∂B_{3r/4}` and measures the gap on `B_{r/2}`.
    pub fn approximate(&self, w: &dyn Fn(Point) -> f64, solver: &SolverConfig) -> Result<Approximation> {
        let grid = &self.op.grid;
        let g: Vec<f64> = grid.boundary_points.iter().map(|&p| w(p)).collect();
        let rhs = vec![0.0; grid.len()];
        let (h, stats) = self.op.factorize()?.solve(&rhs, &g, solver)?;
        let (gap, _) = ball_sup(self.center, 0.5 * self.radius, |x| w(x) - h.interpolate(x));
        Ok(Approximation { h, gap, stats })
    }
}

/// Frozen-coefficient approximation of a field given on `B_r`: the boundary
/// trace on `∂B_{3r/4}` is taken by interpolation and the frozen problem is
/// solved at the spacing of `w`.
pub fn approximate(w: &DiscreteField, a0: Mat2, solver: &SolverConfig) -> Result<Approximation> {
    let frozen = FrozenProblem::new(a0, w.grid.center, w.grid.radius, w.grid.h)?;
    frozen.approximate(&|x| w.interpolate(x), solver)
}
