//! Built-in families addressable by string id from scenario files.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{
    sym_eigenvalues, CoefficientField, Drift, Leading, Mat2, Nonlinearity, PotentialFamily, ProblemSpec,
    Provenance,
};
use crate::error::{Error, Result};
use crate::modulus::Modulus;
use crate::Point;

fn split_id(id: &str) -> (&str, Vec<&str>) {
    match id.split_once(':') {
        Some((name, args)) => (name, args.split(',').map(str::trim).collect()),
        None => (id, Vec::new()),
    }
}

fn parse_args(id: &str, args: &[&str], count: usize) -> Result<Vec<f64>> {
    if args.len() != count {
        return Err(Error::Registry(id.to_string()));
    }
    args.iter()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Registry(id.to_string())))
        .collect()
}

fn scaled_identity(s: f64) -> Mat2 {
    [[s, 0.0], [0.0, s]]
}

fn radius(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// Leading coefficients by id: `identity`, `radial_lipschitz:ν`, `dini_log:p`,
/// `perturbed_sin:ε`, `perturbed_diag:ε`, `anisotropic:κ,θ`.
pub fn leading_from_id(id: &str) -> Result<Leading> {
    let (name, args) = split_id(id);
    let leading = match name {
        "identity" => {
            parse_args(id, &args, 0)?;
            Leading {
                id: id.into(),
                a: Arc::new(|_| scaled_identity(1.0)),
                ellipticity: 1.0,
                nu: Some(0.0),
                omega1: Modulus::zero(),
            }
        }
        "radial_lipschitz" => {
            let nu = parse_args(id, &args, 1)?[0];
            if !(nu >= 0.0) {
                return Err(Error::Registry(id.into()));
            }
            // ‖c|x|‖_{L²(B_r)} = c r² √(π/2)
            let c = nu / (PI / 2.0).sqrt();
            Leading {
                id: id.into(),
                a: Arc::new(move |x| scaled_identity(1.0 + c * radius(x))),
                ellipticity: 1.0 / (1.0 + 2.0 * c),
                nu: Some(nu),
                omega1: Modulus::power(1.0)?.scaled(c),
            }
        }
        "dini_log" => {
            let p = parse_args(id, &args, 1)?[0];
            let omega = Modulus::log_power(p).map_err(|_| Error::Registry(id.into()))?;
            let w = omega.clone();
            Leading {
                id: id.into(),
                a: Arc::new(move |x| scaled_identity(1.0 + 0.1 * w.eval(radius(x)))),
                ellipticity: 1.0 / 1.1,
                nu: None,
                omega1: omega.scaled(0.1),
            }
        }
        "perturbed_sin" => {
            let eps = parse_args(id, &args, 1)?[0];
            if !(0.0..0.5).contains(&eps) {
                return Err(Error::Registry(id.into()));
            }
            Leading {
                id: id.into(),
                a: Arc::new(move |x| scaled_identity(1.0 + eps * x[0].sin())),
                ellipticity: 1.0 - eps,
                nu: Some(eps),
                omega1: Modulus::power(1.0)?.scaled(eps),
            }
        }
        "perturbed_diag" => {
            let eps = parse_args(id, &args, 1)?[0];
            if !(0.0..0.5).contains(&eps) {
                return Err(Error::Registry(id.into()));
            }
            // |sin x1| ≤ |x|, and ‖x1‖_{L²(B_r)} = r² √π / 2 ≤ r
            Leading {
                id: id.into(),
                a: Arc::new(move |x| [[1.0 + eps * x[0].sin(), 0.0], [0.0, 1.0]]),
                ellipticity: 1.0 - eps,
                nu: Some(eps),
                omega1: Modulus::power(1.0)?.scaled(eps),
            }
        }
        "anisotropic" => {
            let v = parse_args(id, &args, 2)?;
            let (kappa, theta) = (v[0], v[1]);
            if !(kappa >= 1.0) {
                return Err(Error::Registry(id.into()));
            }
            let a0 = rotated_diag(kappa.sqrt(), 1.0 / kappa.sqrt(), theta);
            Leading {
                id: id.into(),
                a: Arc::new(move |_| a0),
                ellipticity: 1.0 / kappa.sqrt(),
                nu: Some(0.0),
                omega1: Modulus::zero(),
            }
        }
        _ => return Err(Error::Registry(id.into())),
    };
    Ok(leading)
}

/// `R(θ) diag(d1, d2) R(θ)ᵀ`.
pub fn rotated_diag(d1: f64, d2: f64, theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    let a11 = c * c * d1 + s * s * d2;
    let a22 = s * s * d1 + c * c * d2;
    let a12 = c * s * (d1 - d2);
    [[a11, a12], [a12, a22]]
}

/// Drift by id: `zero`, `constant:β1,β2`, `lq_spike:q`.
pub fn drift_from_id(id: &str) -> Result<Drift> {
    let (name, args) = split_id(id);
    let drift = match name {
        "zero" => {
            parse_args(id, &args, 0)?;
            Drift::zero()
        }
        "constant" => {
            let v = parse_args(id, &args, 2)?;
            let (b1, b2) = (v[0], v[1]);
            Drift {
                id: id.into(),
                b: Arc::new(move |_| [b1, b2]),
                q: f64::INFINITY,
                lambda1: b1.abs() + b2.abs(),
                sup: b1.abs().max(b2.abs()),
                omega2: Modulus::zero(),
            }
        }
        "lq_spike" => {
            let q = parse_args(id, &args, 1)?[0];
            if !(q > 2.0) || q.is_infinite() {
                return Err(Error::Exponent { q, n: 2 });
            }
            Drift {
                id: id.into(),
                b: Arc::new(move |x| [(x[0] * x[0] + x[1] * x[1] + 1e-12).powf(-0.5 / q), 0.0]),
                q,
                // ∫_{B_1} |x|^{-1} dx = 2π
                lambda1: (2.0 * PI).powf(1.0 / q),
                sup: f64::INFINITY,
                omega2: Modulus::zero(),
            }
        }
        _ => return Err(Error::Registry(id.into())),
    };
    Ok(drift)
}

/// `c|y|²/(2 tr a0)` potentials for an x-independent right side `c(t)`.
fn quadratic_potential(id: &str, field: &CoefficientField, level: Arc<dyn Fn(f64) -> f64 + Send + Sync>, c_max: f64) -> PotentialFamily {
    let a = field.leading.a.clone();
    let ell = field.ellipticity();
    PotentialFamily {
        id: id.into(),
        v: Arc::new(move |x0, t, x| {
            let a0 = a(x0);
            let y = [x[0] - x0[0], x[1] - x0[1]];
            level(t) * (y[0] * y[0] + y[1] * y[1]) / (2.0 * (a0[0][0] + a0[1][1]))
        }),
        // D²v = c I / tr a0 and tr a0 ≥ 2Λ
        hessian_bound: c_max.abs() * 2f64.sqrt() / (2.0 * ell),
        provenance: Provenance::ClosedForm,
        t_support: None,
    }
}

/// Nonlinearity by id, with the matching closed-form potential family for `field`:
/// `const:c`, `sqrt_dini`, `exp_x1`, `from_manufactured:<id>`.
pub fn nonlinearity_from_id(id: &str, field: &CoefficientField) -> Result<(Nonlinearity, PotentialFamily)> {
    let (name, args) = split_id(id);
    match name {
        "const" => {
            let c = parse_args(id, &args, 1)?[0];
            let f = Nonlinearity {
                id: id.into(),
                f: Arc::new(move |_, _| c),
                phi: Modulus::zero(),
                sup_bound: c.abs(),
                u_independent: true,
            };
            let v = quadratic_potential(id, field, Arc::new(move |_| c), c);
            Ok((f, v))
        }
        "sqrt_dini" => {
            parse_args(id, &args, 0)?;
            let g = |t: f64| t.abs().min(1.0).sqrt();
            let f = Nonlinearity {
                id: id.into(),
                f: Arc::new(move |_, t| g(t)),
                phi: Modulus::power(0.5)?,
                sup_bound: 1.0,
                u_independent: false,
            };
            let v = quadratic_potential(id, field, Arc::new(g), 1.0);
            Ok((f, v))
        }
        "exp_x1" => {
            parse_args(id, &args, 0)?;
            let f = Nonlinearity {
                id: id.into(),
                f: Arc::new(|x, _| x[0].exp()),
                phi: Modulus::zero(),
                sup_bound: field.domain_radius.exp(),
                u_independent: true,
            };
            let a = field.leading.a.clone();
            let v = PotentialFamily {
                id: id.into(),
                v: Arc::new(move |x0, _, x| {
                    let e0 = x0[0].exp();
                    (x[0].exp() - e0 - e0 * (x[0] - x0[0])) / a(x0)[0][0]
                }),
                // D11 v = e^{x1}/a11(x0) on B_1(x0), |x0| ≤ 1
                hessian_bound: 2f64.exp() / field.ellipticity(),
                provenance: Provenance::ClosedForm,
                t_support: None,
            };
            Ok((f, v))
        }
        "from_manufactured" => {
            let rest = id.split_once(':').map(|(_, r)| r).unwrap_or("");
            let m = manufactured_from_id(rest)?;
            Ok((m.spec.nonlinearity, m.spec.potential))
        }
        _ => Err(Error::Registry(id.into())),
    }
}

/// A closed-form solution `u` of `a_ij D_ij u + b_i D_i u = f(x, u)` with
/// its problem data; `u(0) = 0` and the potential is taken at `t = 0`.
#[derive(Clone)]
pub struct Manufactured {
    pub id: String,
    pub u: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub spec: ProblemSpec,
}

impl Manufactured {
    /// Joint rescaling `u ↦ s u`, `v ↦ s v`, `f(x,t) ↦ s f(x, t/s)`.
    pub fn scaled(&self, s: f64) -> Self {
        let u = self.u.clone();
        let v = self.spec.potential.v.clone();
        let mut potential = self.spec.potential.clone();
        potential.v = Arc::new(move |x0, t, x| s * v(x0, t / s, x));
        potential.hessian_bound *= s;
        potential.t_support = potential.t_support.map(|t| s * t);
        Self {
            id: format!("{}*{}", s, self.id),
            u: Arc::new(move |x| s * u(x)),
            spec: ProblemSpec {
                field: self.spec.field.clone(),
                nonlinearity: self.spec.nonlinearity.rescaled(s),
                potential,
            },
        }
    }
}

fn identity_field(drift: Drift) -> CoefficientField {
    CoefficientField::new(leading_from_id("identity").expect("identity"), drift)
}

/// Manufactured problems by id: `paraboloid`, `drift_linear`,
/// `cubic_drift:β1`, `loglog:ε`.
pub fn manufactured_from_id(id: &str) -> Result<Manufactured> {
    let (name, args) = split_id(id);
    match name {
        "paraboloid" => {
            parse_args(id, &args, 0)?;
            let field = identity_field(Drift::zero());
            let (f, v) = nonlinearity_from_id("const:4", &field)?;
            Ok(Manufactured {
                id: id.into(),
                u: Arc::new(|x| x[0] * x[0] + x[1] * x[1]),
                spec: ProblemSpec {
                    field,
                    nonlinearity: f,
                    potential: v,
                },
            })
        }
        "drift_linear" => {
            parse_args(id, &args, 0)?;
            // Δu + D1u = 2 + 2
            let field = identity_field(drift_from_id("constant:1,0")?);
            let (f, v) = nonlinearity_from_id("const:4", &field)?;
            Ok(Manufactured {
                id: id.into(),
                u: Arc::new(|x| x[1] * x[1] + 2.0 * x[0]),
                spec: ProblemSpec {
                    field,
                    nonlinearity: f,
                    potential: v,
                },
            })
        }
        "cubic_drift" => {
            let beta = parse_args(id, &args, 1)?[0];
            let field = identity_field(drift_from_id(&format!("constant:{beta},0"))?);
            let f = Nonlinearity {
                id: id.into(),
                f: Arc::new(move |x, _| 4.0 + 2.0 * beta * x[0]),
                phi: Modulus::zero(),
                sup_bound: 4.0 + 2.0 * beta.abs() * field.domain_radius,
                u_independent: true,
            };
            let a = field.leading.a.clone();
            let v = PotentialFamily {
                id: id.into(),
                v: Arc::new(move |x0, _, x| {
                    let a0 = a(x0);
                    let y = [x[0] - x0[0], x[1] - x0[1]];
                    let c = 4.0 + 2.0 * beta * x0[0];
                    c * (y[0] * y[0] + y[1] * y[1]) / (2.0 * (a0[0][0] + a0[1][1])) + beta * y[0].powi(3) / (3.0 * a0[0][0])
                }),
                hessian_bound: (4.0 + 2.0 * beta.abs()) * 2f64.sqrt() / 2.0 + 2.0 * beta.abs(),
                provenance: Provenance::ClosedForm,
                t_support: None,
            };
            Ok(Manufactured {
                id: id.into(),
                u: Arc::new(|x| x[0] * x[0] + x[1] * x[1]),
                spec: ProblemSpec {
                    field,
                    nonlinearity: f,
                    potential: v,
                },
            })
        }
        "loglog" => {
            let eps = parse_args(id, &args, 1)?[0];
            if !(eps > 0.0 && eps <= 0.1) {
                return Err(Error::Registry(id.into()));
            }
            Ok(loglog(id, eps))
        }
        _ => Err(Error::Registry(id.into())),
    }
}

/// `ε (x1² − x2²) ln(2 + ln(1/r))`.
pub fn loglog_u(eps: f64, x: Point) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return 0.0;
    }
    let l = -0.5 * r2.ln();
    eps * (x[0] * x[0] - x[1] * x[1]) * (2.0 + l).ln()
}

/// Laplacian of [`loglog_u`]: `−ε cos 2θ (4/(2+ℓ) + 1/(2+ℓ)²)`, `ℓ = ln(1/r)`.
pub fn loglog_laplacian(eps: f64, x: Point) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return 0.0;
    }
    let l = -0.5 * r2.ln();
    let cos2 = (x[0] * x[0] - x[1] * x[1]) / r2;
    -eps * cos2 * (4.0 / (2.0 + l) + 1.0 / ((2.0 + l) * (2.0 + l)))
}

/// Non-Dini stressor: `f(x, t) = sgn F(x) · min(|F(x)|, φ(|t|))` with
/// `F = Δu` and `φ(s) = 1/ln(1/s)`, so that `f(x, u(x)) = F(x)` and
/// `f(x, 0) = 0`.
fn loglog(id: &str, eps: f64) -> Manufactured {
    let field = identity_field(Drift::zero());
    let phi = Modulus::log_inverse();
    let p = phi.clone();
    let f = Nonlinearity {
        id: id.into(),
        f: Arc::new(move |x, t| {
            let big_f = loglog_laplacian(eps, x);
            big_f.signum() * big_f.abs().min(p.eval(t.abs()))
        }),
        phi,
        sup_bound: 1.0,
        u_independent: false,
    };
    let v = PotentialFamily {
        id: id.into(),
        v: Arc::new(|_, _, _| 0.0),
        hessian_bound: 0.0,
        provenance: Provenance::ClosedForm,
        t_support: Some(0.0),
    };
    Manufactured {
        id: id.into(),
        u: Arc::new(move |x| loglog_u(eps, x)),
        spec: ProblemSpec {
            field,
            nonlinearity: f,
            potential: v,
        },
    }
}

/// Builds a coefficient field from leading and drift ids.
pub fn field_from_ids(leading: &str, drift: &str) -> Result<CoefficientField> {
    Ok(CoefficientField::new(leading_from_id(leading)?, drift_from_id(drift)?))
}

/// Anisotropy ratio `λ_max / λ_min` of a symmetric matrix.
pub fn anisotropy(a: &Mat2) -> f64 {
    let (lo, hi) = sym_eigenvalues(a);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
