//! Coefficient fields, nonlinearities and frozen-coefficient potentials, with
//! the integral norms and pointwise moduli used to qualify them.

mod registry;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::quadrature::{ball_sup, BallQuadrature};
use crate::Point;

pub use registry::{
    anisotropy, drift_from_id, field_from_ids, leading_from_id, loglog_laplacian, loglog_u, manufactured_from_id,
    nonlinearity_from_id, rotated_diag, Manufactured,
};

/// Space dimension exercised by the laboratory.
pub const DIM: usize = 2;

pub type Mat2 = [[f64; 2]; 2];
pub type Vec2 = [f64; 2];

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> Vec2 + Send + Sync>;
pub type NonlinearFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
/// `(x0, t, x) ↦ v_{x0}(x; t)`.
pub type PotentialFn = Arc<dyn Fn(Point, f64, Point) -> f64 + Send + Sync>;

pub fn frobenius(m: &Mat2) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

pub fn norm2(v: &Vec2) -> f64 {
    v[0].hypot(v[1])
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

/// Leading coefficients `a_ij(x)`.
#[derive(Clone)]
pub struct Leading {
    pub id: String,
    pub a: MatrixFn,
    /// Ellipticity constant Λ ∈ (0, 1].
    pub ellipticity: f64,
    /// Declared `C_n^{-1,1}` modulus ν at the origin, if any.
    pub nu: Option<f64>,
    /// Declared pointwise Dini modulus ω₁ at the origin.
    pub omega1: Modulus,
}

/// Drift `b_i(x)`.
#[derive(Clone)]
pub struct Drift {
    pub id: String,
    pub b: VectorFn,
    /// Integrability exponent q (may be infinite).
    pub q: f64,
    /// Declared bound Λ₁ on Σ_i ‖b_i‖_{L^q(B_1)}.
    pub lambda1: f64,
    /// Declared sup bound τ of |b_i| on B_1 (infinite for unbounded drifts).
    pub sup: f64,
    /// Declared pointwise Dini modulus ω₂ at the origin.
    pub omega2: Modulus,
}

/// Coefficient field `(a, b)` on a disk Ω ⊇ B_1.
#[derive(Clone)]
pub struct CoefficientField {
    pub leading: Leading,
    pub drift: Drift,
    pub domain_radius: f64,
}

impl CoefficientField {
    pub fn new(leading: Leading, drift: Drift) -> Self {
        Self {
            leading,
            drift,
            domain_radius: 2.0,
        }
    }

    pub fn a(&self, x: Point) -> Mat2 {
        (self.leading.a)(x)
    }

    pub fn b(&self, x: Point) -> Vec2 {
        (self.drift.b)(x)
    }

    pub fn ellipticity(&self) -> f64 {
        self.leading.ellipticity
    }

    /// Constant field `a ≡ a0`, `b ≡ 0`.
    pub fn constant(a0: Mat2) -> Self {
        let (lo, hi) = sym_eigenvalues(&a0);
        let ell = lo.min(1.0 / hi).min(1.0);
        Self::new(
            Leading {
                id: "constant".into(),
                a: Arc::new(move |_| a0),
                ellipticity: ell,
                nu: Some(0.0),
                omega1: Modulus::zero(),
            },
            Drift::zero(),
        )
    }

    pub fn check_domain(&self, center: Point, r: f64) -> Result<()> {
        if norm2(&center) + r > self.domain_radius + 1e-12 {
            return Err(Error::Domain(format!(
                "ball B_{r}({:?}) leaves the field domain of radius {}",
                center, self.domain_radius
            )));
        }
        Ok(())
    }
}

impl Drift {
    pub fn zero() -> Self {
        Self {
            id: "zero".into(),
            b: Arc::new(|_| [0.0, 0.0]),
            q: f64::INFINITY,
            lambda1: 0.0,
            sup: 0.0,
            omega2: Modulus::zero(),
        }
    }
}

/// Van der Corput radical inverse.
fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Quasi-random points in `B_radius(0)`.
pub fn halton_disk(count: usize, radius: f64) -> Vec<Point> {
    (1..=count as u64)
        .map(|i| {
            let rho = radius * halton(i, 2).sqrt();
            let th = std::f64::consts::TAU * halton(i, 3);
            [rho * th.cos(), rho * th.sin()]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Samples Rayleigh quotients `ξᵀa(x)ξ` with `|ξ| = 1` at quasi-random
/// `(x, ξ)` pairs of the domain.
pub fn check_ellipticity(field: &CoefficientField, sample_count: usize) -> Result<EllipticityReport> {
    if sample_count < 100 {
        return Err(Error::config("sample_count", "at least 100 samples required"));
    }
    let ell = field.ellipticity();
    let pts = halton_disk(sample_count, field.domain_radius);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, x) in pts.into_iter().enumerate() {
        let a = field.a(x);
        let scale = frobenius(&a).max(1.0);
        if (a[0][1] - a[1][0]).abs() > 1e-14 * scale {
            return Err(Error::InvalidField(format!("a(x) not symmetric at {x:?}")));
        }
        if a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("a(x) not finite at {x:?}")));
        }
        let th = std::f64::consts::PI * halton(i as u64 + 1, 5);
        let xi = [th.cos(), th.sin()];
        let q = (xi[0] * (a[0][0] * xi[0] + a[0][1] * xi[1]) + xi[1] * (a[1][0] * xi[0] + a[1][1] * xi[1]))
            / (xi[0] * xi[0] + xi[1] * xi[1]);
        lo = lo.min(q);
        hi = hi.max(q);
        // the extreme directions as well, so the bounds are not missed
        let (emin, emax) = sym_eigenvalues(&a);
        lo = lo.min(emin);
        hi = hi.max(emax);
    }
    let tol = 1e-12;
    Ok(EllipticityReport {
        min_ratio: lo,
        max_ratio: hi,
        pass: lo >= ell - tol && hi <= 1.0 / ell + tol,
    })
}

/// Default quadrature resolution (cells per radius) for ball norms.
pub const DEFAULT_CELLS_PER_RADIUS: usize = 64;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LnDistance {
    /// `‖a_ij − a_ij(x0)‖_{L^n(B_r(x0))}` per entry.
    pub entries: Mat2,
    /// Maximum over entries.
    pub value: f64,
}

pub fn ln_distance(field: &CoefficientField, x0: Point, r: f64, cells: usize) -> Result<LnDistance> {
    field.check_domain(x0, r)?;
    let q = BallQuadrature::new(x0, r, cells);
    let a0 = field.a(x0);
    let n = DIM as f64;
    let mut acc = [[0.0; 2]; 2];
    for (p, w) in q.points.iter().zip(&q.weights) {
        let a = field.a(*p);
        for i in 0..2 {
            for j in 0..2 {
                acc[i][j] += w * (a[i][j] - a0[i][j]).abs().powf(n);
            }
        }
    }
    let mut entries = [[0.0; 2]; 2];
    let mut value: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            entries[i][j] = acc[i][j].powf(1.0 / n);
            value = value.max(entries[i][j]);
        }
    }
    Ok(LnDistance { entries, value })
}

/// Largest `ln_distance(r)/r` over the given radii: a measured ν.
pub fn measured_nu(field: &CoefficientField, radii: &[f64]) -> Result<f64> {
    let mut nu: f64 = 0.0;
    for &r in radii {
        nu = nu.max(ln_distance(field, [0.0, 0.0], r, DEFAULT_CELLS_PER_RADIUS)?.value / r);
    }
    Ok(nu)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointwiseModulusReport {
    pub radii: Vec<f64>,
    /// `‖g − g(x0)‖_{L^∞(B_r(x0))}` per radius.
    pub values: Vec<f64>,
    /// `max values[i] / radii[i]`.
    pub fitted_nu: f64,
}

impl PointwiseModulusReport {
    /// Worst `values[i] / ω(radii[i])`; a value ≤ 1 means ω dominates.
    pub fn worst_ratio(&self, omega: &Modulus) -> f64 {
        self.radii
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| {
                let w = omega.eval(r);
                if v == 0.0 {
                    0.0
                } else if w == 0.0 {
                    f64::INFINITY
                } else {
                    v / w
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn dominated_by(&self, omega: &Modulus, tol: f64) -> bool {
        self.worst_ratio(omega) <= 1.0 + tol
    }
}

/// Dense-sampling estimate of `‖g − g(x0)‖_{L^∞(B_r(x0))}` for decreasing radii.
pub fn pointwise_modulus_fit(
    g: &(dyn Fn(Point) -> f64 + Sync),
    x0: Point,
    radii: &[f64],
) -> Result<PointwiseModulusReport> {
    if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("radii must be positive and strictly decreasing".into()));
    }
    let g0 = g(x0);
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| ball_sup(x0, r, |x| g(x) - g0).0)
        .collect();
    let fitted_nu = radii
        .iter()
        .zip(&values)
        .map(|(r, v)| v / r)
        .fold(0.0, f64::max);
    Ok(PointwiseModulusReport {
        radii: radii.to_vec(),
        values,
        fitted_nu,
    })
}

/// Entrywise max of the pointwise oscillation of `a` at `x0`.
pub fn leading_modulus_fit(field: &CoefficientField, x0: Point, radii: &[f64]) -> Result<PointwiseModulusReport> {
    field.check_domain(x0, radii.first().copied().unwrap_or(0.0))?;
    let a0 = field.a(x0);
    let g = |x: Point| {
        let a = field.a(x);
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((a[i][j] - a0[i][j]).abs());
            }
        }
        m + a0[0][0]
    };
    pointwise_modulus_fit(&g, x0, radii)
}

/// Componentwise max of the pointwise oscillation of `b` at `x0`.
pub fn drift_modulus_fit(field: &CoefficientField, x0: Point, radii: &[f64]) -> Result<PointwiseModulusReport> {
    field.check_domain(x0, radii.first().copied().unwrap_or(0.0))?;
    let b0 = field.b(x0);
    let g = |x: Point| {
        let b = field.b(x);
        (b[0] - b0[0]).abs().max((b[1] - b0[1]).abs())
    };
    pointwise_modulus_fit(&g, x0, radii)
}

/// `‖g‖_{L^q(B_radius(center))}` in two dimensions; `q = ∞` gives the sampled sup.
pub fn lq_norm(g: &(dyn Fn(Point) -> f64 + Sync), center: Point, radius: f64, q: f64) -> Result<f64> {
    if !(q > DIM as f64) {
        return Err(Error::Exponent { q, n: DIM });
    }
    if q.is_infinite() {
        return Ok(ball_sup(center, radius, g).0);
    }
    let quad = BallQuadrature::new(center, radius, DEFAULT_CELLS_PER_RADIUS);
    Ok(quad.lp_norm(q, g))
}

/// `Σ_i ‖b_i‖_{L^q(B_1)}` measured for a drift field.
pub fn measured_lambda1(drift: &Drift) -> Result<f64> {
    let q = drift.q;
    let b = drift.b.clone();
    let b2 = drift.b.clone();
    Ok(lq_norm(&move |x| b(x)[0], [0.0, 0.0], 1.0, q)? + lq_norm(&move |x| b2(x)[1], [0.0, 0.0], 1.0, q)?)
}

/// `f(x, t)`, Dini in `t` uniformly in `x` with modulus φ.
#[derive(Clone)]
pub struct Nonlinearity {
    pub id: String,
    pub f: NonlinearFn,
    pub phi: Modulus,
    /// Declared `‖f‖_{L^∞(Ω×ℝ)}`.
    pub sup_bound: f64,
    /// `true` when f does not depend on t.
    pub u_independent: bool,
}

impl Nonlinearity {
    pub fn eval(&self, x: Point, t: f64) -> f64 {
        (self.f)(x, t)
    }

    /// `s · f(x, t / s)`: the nonlinearity seen by `s·u`.
    pub fn rescaled(&self, s: f64) -> Self {
        let f = self.f.clone();
        Self {
            id: format!("{}*{}", s, self.id),
            f: Arc::new(move |x, t| s * f(x, t / s)),
            // s·φ(r/s) ≤ s·⌈1/s⌉·φ(r) for a subadditive φ
            phi: self.phi.clone().scaled(if s >= 1.0 { s } else { s * (1.0 / s).ceil() }),
            sup_bound: s * self.sup_bound,
            u_independent: self.u_independent,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub pass: bool,
    /// Largest `|f(x,t2) − f(x,t1)| − φ(|t2 − t1|)` (≤ 0 when the bound holds).
    pub worst_violation: f64,
    pub sup_ok: bool,
}

/// Random triples `(x, t1, t2)` with `x ∈ B_1`, `t` in `[-t_range, t_range]`;
/// half of the pairs are drawn close together to probe small increments.
pub fn verify_nonlinearity(f: &Nonlinearity, triple_count: usize, t_range: f64, seed: u64) -> Result<NonlinearityReport> {
    if triple_count < 1000 {
        return Err(Error::config("triple_count", "at least 1000 triples required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut sup_ok = true;
    for i in 0..triple_count {
        let rho = rng.gen::<f64>().sqrt();
        let th = rng.gen::<f64>() * std::f64::consts::TAU;
        let x = [rho * th.cos(), rho * th.sin()];
        let t1 = rng.gen_range(-t_range..=t_range);
        let t2 = if i % 2 == 0 {
            rng.gen_range(-t_range..=t_range)
        } else {
            t1 + 10f64.powf(rng.gen_range(-8.0..0.0)) * if rng.gen::<bool>() { 1.0 } else { -1.0 }
        };
        let (f1, f2) = (f.eval(x, t1), f.eval(x, t2));
        if !(f1.is_finite() && f2.is_finite()) || f1.abs() > f.sup_bound + 1e-12 || f2.abs() > f.sup_bound + 1e-12 {
            sup_ok = false;
        }
        worst = worst.max((f2 - f1).abs() - f.phi.eval((t2 - t1).abs()));
    }
    Ok(NonlinearityReport {
        pass: sup_ok && worst <= 1e-10,
        worst_violation: worst,
        sup_ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Solved,
}

/// Frozen-coefficient potentials `v_{x0}(·; t)` with
/// `a_ij(x0) D_ij v = f(·, t)` in `B_1(x0)`, normalised by
/// `v(x0) = |Dv(x0)| = 0`.
#[derive(Clone)]
pub struct PotentialFamily {
    pub id: String,
    pub v: PotentialFn,
    /// Uniform bound T on the Frobenius norm of D²v.
    pub hessian_bound: f64,
    pub provenance: Provenance,
    /// `Some(t)` when the family is only available for the single level `t`.
    pub t_support: Option<f64>,
}

impl PotentialFamily {
    pub fn eval(&self, x0: Point, t: f64, x: Point) -> f64 {
        (self.v)(x0, t, x)
    }

    /// Centered-difference Hessian of `v_{x0}(·; t)` at `x`.
    pub fn hessian(&self, x0: Point, t: f64, x: Point, h: f64) -> Mat2 {
        let v = |dx: f64, dy: f64| self.eval(x0, t, [x[0] + dx, x[1] + dy]);
        let c = v(0.0, 0.0);
        let d11 = (v(h, 0.0) - 2.0 * c + v(-h, 0.0)) / (h * h);
        let d22 = (v(0.0, h) - 2.0 * c + v(0.0, -h)) / (h * h);
        let d12 = (v(h, h) - v(h, -h) - v(-h, h) + v(-h, -h)) / (4.0 * h * h);
        [[d11, d12], [d12, d22]]
    }

    /// Max stencil residual `|a_ij(x0) D_ij v − f(x, t)|` over test points.
    pub fn residual(&self, field: &CoefficientField, f: &Nonlinearity, x0: Point, t: f64, h: f64, points: &[Point]) -> f64 {
        let a0 = field.a(x0);
        points
            .iter()
            .map(|&x| {
                let d2 = self.hessian(x0, t, x, h);
                let lhs = a0[0][0] * d2[0][0] + 2.0 * a0[0][1] * d2[0][1] + a0[1][1] * d2[1][1];
                (lhs - f.eval(x, t)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest sampled `|D²v|` over `B_1(x0)` (second differences).
    pub fn sampled_hessian_sup(&self, x0: Point, t: f64, h: f64, samples: usize) -> f64 {
        halton_disk(samples, 1.0 - 2.0 * h)
            .into_iter()
            .map(|p| frobenius(&self.hessian(x0, t, [x0[0] + p[0], x0[1] + p[1]], h)))
            .fold(0.0, f64::max)
    }
}

/// Everything that defines the equation `a_ij D_ij u + b_i D_i u = f(x, u)`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub field: CoefficientField,
    pub nonlinearity: Nonlinearity,
    pub potential: PotentialFamily,
}

/// Samples `g` at random points of `B_1` with a fixed seed.
pub fn random_disk_points(count: usize, radius: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rho = radius * rng.gen::<f64>().sqrt();
            let th = rng.gen::<f64>() * std::f64::consts::TAU;
            [rho * th.cos(), rho * th.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests;
