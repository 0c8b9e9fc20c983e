use super::*;
use crate::modulus::geometric_radii;
use crate::quadrature::GaussLegendre;
use proptest::prelude::*;

fn field(leading: &str, drift: &str) -> CoefficientField {
    field_from_ids(leading, drift).unwrap()
}

/// Tensor Gauss–Legendre rule in polar coordinates, `nr × nt` points.
fn polar_oracle(center: Point, r: f64, nr: usize, nt: usize, g: impl Fn(Point) -> f64) -> f64 {
    let gr = GaussLegendre::new(nr);
    let gt = GaussLegendre::new(nt);
    gr.integrate(0.0, r, |rho| {
        rho * gt.integrate(0.0, std::f64::consts::TAU, |th| g([center[0] + rho * th.cos(), center[1] + rho * th.sin()]))
    })
}

#[test]
fn ellipticity_examples() {
    let rep = check_ellipticity(&field("identity", "zero"), 200).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.min_ratio, 1.0);
    assert_eq!(rep.max_ratio, 1.0);

    let mut f = CoefficientField::constant([[2.0, 0.0], [0.0, 0.5]]);
    assert_eq!(f.ellipticity(), 0.5);
    let rep = check_ellipticity(&f, 200).unwrap();
    assert!(rep.pass && rep.min_ratio >= 0.5 - 1e-15 && rep.max_ratio <= 2.0 + 1e-15);

    f = CoefficientField::constant([[3.0, 0.0], [0.0, 1.0]]);
    f.leading.ellipticity = 0.5;
    assert!(!check_ellipticity(&f, 200).unwrap().pass);
}

#[test]
fn ellipticity_rejects_asymmetry_and_few_samples() {
    let mut f = CoefficientField::constant([[1.0, 0.1], [0.0, 1.0]]);
    f.leading.ellipticity = 0.5;
    assert!(matches!(check_ellipticity(&f, 200), Err(Error::InvalidField(_))));
    assert!(check_ellipticity(&f, 10).is_err());
}

#[test]
fn registry_fields_are_elliptic() {
    for id in ["identity", "radial_lipschitz:0.3", "dini_log:2", "perturbed_sin:0.2", "perturbed_diag:0.3", "anisotropic:5,0.5"] {
        let rep = check_ellipticity(&field(id, "zero"), 2000).unwrap();
        assert!(rep.pass, "{id}: {rep:?}");
    }
}

#[test]
fn ln_distance_radial() {
    let f = field("radial_lipschitz:1.2533141373155", "zero");
    // a = (1 + |x|) I
    for r in [0.5, 0.25, 0.125] {
        let d = ln_distance(&f, [0.0, 0.0], r, 128).unwrap();
        let exact = r * r * (std::f64::consts::PI / 2.0).sqrt();
        assert!((d.value - exact).abs() < 2e-3 * exact, "{r}: {} vs {exact}", d.value);
        assert_eq!(d.entries[0][1], 0.0);
    }
    let d = ln_distance(&field("identity", "zero"), [0.0, 0.0], 0.5, 32).unwrap();
    assert_eq!(d.value, 0.0);
}

#[test]
fn ln_distance_matches_fine_oracle() {
    let mut f = field("identity", "zero");
    f.leading.a = Arc::new(|x| {
        let s = 1.0 + (5.0 * x[0]).sin() / 10.0;
        [[s, 0.0], [0.0, s]]
    });
    let d = ln_distance(&f, [0.0, 0.0], 0.25, 256).unwrap();
    let oracle = polar_oracle([0.0, 0.0], 0.25, 1000, 1000, |x| ((5.0 * x[0]).sin() / 10.0).powi(2)).sqrt();
    assert!((d.value - oracle).abs() < 1e-4, "{} vs {oracle}", d.value);
}

#[test]
fn ln_distance_leaves_domain() {
    assert!(matches!(
        ln_distance(&field("identity", "zero"), [1.5, 0.0], 1.0, 16),
        Err(Error::Domain(_))
    ));
}

#[test]
fn declared_nu_dominates_ln_distance() {
    for id in ["radial_lipschitz:0.3", "perturbed_sin:0.2", "perturbed_diag:0.2"] {
        let f = field(id, "zero");
        let nu = f.leading.nu.unwrap();
        let radii = geometric_radii(1.0, 6, 0.5);
        assert!(measured_nu(&f, &radii).unwrap() <= nu * (1.0 + 1e-3), "{id}");
    }
}

#[test]
fn pointwise_modulus_examples() {
    let radii = geometric_radii(0.5, 6, 0.5);
    let rep = pointwise_modulus_fit(&|x: Point| x[0].hypot(x[1]), [0.0, 0.0], &radii).unwrap();
    for (r, v) in rep.radii.iter().zip(&rep.values) {
        assert!((v - r).abs() < 1e-14);
    }
    assert!((rep.fitted_nu - 1.0).abs() < 1e-12);

    let li = Modulus::log_inverse();
    let radii = geometric_radii(0.3, 6, 0.5);
    let g = |x: Point| {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            0.0
        } else {
            1.0 / (1.0 / r).ln()
        }
    };
    let rep = pointwise_modulus_fit(&g, [0.0, 0.0], &radii).unwrap();
    for (r, v) in rep.radii.iter().zip(&rep.values) {
        // oracle: dense 10⁵-sample sup over the ball
        let oracle = halton_disk(100_000, *r)
            .into_iter()
            .chain((0..360).map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 360.0;
                [r * t.cos(), r * t.sin()]
            }))
            .map(g)
            .fold(0.0, f64::max);
        assert!((v - oracle).abs() < 1e-3);
        assert!((v - li.eval(*r)).abs() < 1e-3);
    }
    assert!(rep.dominated_by(&li, 1e-9));

    let rep = pointwise_modulus_fit(&|_| 3.0, [0.0, 0.0], &radii).unwrap();
    assert!(rep.values.iter().all(|v| *v == 0.0));
    assert!(pointwise_modulus_fit(&|_| 3.0, [0.0, 0.0], &[0.1, 0.2]).is_err());
}

#[test]
fn declared_omega1_dominates() {
    for id in ["dini_log:2", "perturbed_sin:0.1", "perturbed_diag:0.1", "radial_lipschitz:0.2"] {
        let f = field(id, "zero");
        let radii = geometric_radii(0.5, 8, 0.5);
        let rep = leading_modulus_fit(&f, [0.0, 0.0], &radii).unwrap();
        let a0 = f.a([0.0, 0.0])[0][0];
        // the report carries the offset a(0); strip it
        let values: Vec<f64> = rep.values.clone();
        assert!(values.iter().all(|v| *v >= 0.0));
        for (r, v) in radii.iter().zip(&values) {
            let osc = halton_disk(4000, *r)
                .into_iter()
                .map(|x| (f.a(x)[0][0] - a0).abs())
                .fold(0.0, f64::max);
            assert!(osc <= f.leading.omega1.eval(*r) * (1.0 + 1e-9), "{id} r={r}");
            let _ = v;
        }
    }
}

#[test]
fn lq_norm_examples() {
    let pi = std::f64::consts::PI;
    let c = 0.7;
    let v = lq_norm(&|_| c, [0.0, 0.0], 1.0, 4.0).unwrap();
    assert!((v - c * pi.powf(0.25)).abs() < 1e-3);
    assert_eq!(lq_norm(&|_| 0.0, [0.0, 0.0], 1.0, 4.0).unwrap(), 0.0);
    let v = lq_norm(&|x| x[0], [0.0, 0.0], 1.0, 4.0).unwrap();
    assert!((v - (pi / 8.0).powf(0.25)).abs() < 1e-3, "{v}");
    assert!(matches!(lq_norm(&|_| 1.0, [0.0, 0.0], 1.0, 2.0), Err(Error::Exponent { .. })));
    assert!(matches!(drift_from_id("lq_spike:1.5"), Err(Error::Exponent { .. })));
}

#[test]
fn declared_lambda1_matches_quadrature() {
    let d = drift_from_id("lq_spike:4").unwrap();
    let m = measured_lambda1(&d).unwrap();
    assert!((m - d.lambda1).abs() < 0.02 * d.lambda1, "{m} vs {}", d.lambda1);
    let d = drift_from_id("constant:1,-0.5").unwrap();
    assert!((measured_lambda1(&d).unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn nonlinearity_examples() {
    let id = field("identity", "zero");
    let (f, _) = nonlinearity_from_id("sqrt_dini", &id).unwrap();
    let rep = verify_nonlinearity(&f, 5000, 3.0, 7).unwrap();
    assert!(rep.pass, "{rep:?}");

    let sq = Nonlinearity {
        id: "square".into(),
        f: Arc::new(|_, t| t * t),
        phi: Modulus::power(1.0).unwrap(),
        sup_bound: f64::INFINITY,
        u_independent: false,
    };
    assert!(!verify_nonlinearity(&sq, 2000, 10.0, 1).unwrap().pass);

    let g = Nonlinearity {
        id: "g".into(),
        f: Arc::new(|x, _| x[0].sin()),
        phi: Modulus::zero(),
        sup_bound: 1.0,
        u_independent: true,
    };
    let rep = verify_nonlinearity(&g, 2000, 10.0, 2).unwrap();
    assert!(rep.pass && rep.worst_violation <= 0.0);
    assert!(verify_nonlinearity(&g, 10, 1.0, 0).is_err());
}

#[test]
fn odd_square_root_violates_its_modulus() {
    // |√a + √b| exceeds √(a + b) when t1, t2 have opposite signs
    let odd = Nonlinearity {
        id: "odd_sqrt".into(),
        f: Arc::new(|_, t: f64| t.abs().min(1.0).sqrt() * t.signum()),
        phi: Modulus::power(0.5).unwrap(),
        sup_bound: 1.0,
        u_independent: false,
    };
    let rep = verify_nonlinearity(&odd, 5000, 1.0, 3).unwrap();
    assert!(!rep.pass);
    assert!(rep.worst_violation > 0.1);
}

#[test]
fn stressor_nonlinearity_reproduces_laplacian() {
    let m = manufactured_from_id("loglog:0.05").unwrap();
    for x in halton_disk(20_000, 1.0) {
        let u = (m.u)(x);
        let lap = loglog_laplacian(0.05, x);
        assert!(lap.abs() <= m.spec.nonlinearity.phi.eval(u.abs()) + 1e-15, "{x:?}");
        assert_eq!(m.spec.nonlinearity.eval(x, u), lap);
        assert_eq!(m.spec.nonlinearity.eval(x, 0.0), 0.0);
    }
    assert!(verify_nonlinearity(&m.spec.nonlinearity, 4000, 0.3, 11).unwrap().pass);
}

#[test]
fn stressor_laplacian_matches_differences() {
    let eps = 0.05;
    let h = 1e-4;
    for x in [[0.3, 0.1], [-0.5, 0.4], [0.05, -0.02]] {
        let u = |dx: f64, dy: f64| loglog_u(eps, [x[0] + dx, x[1] + dy]);
        let lap = (u(h, 0.0) + u(-h, 0.0) + u(0.0, h) + u(0.0, -h) - 4.0 * u(0.0, 0.0)) / (h * h);
        assert!((lap - loglog_laplacian(eps, x)).abs() < 1e-5, "{x:?}");
    }
}

fn manufactured_residual(m: &Manufactured, x: Point, h: f64) -> f64 {
    let u = |dx: f64, dy: f64| (m.u)([x[0] + dx, x[1] + dy]);
    let c = u(0.0, 0.0);
    let d11 = (u(h, 0.0) - 2.0 * c + u(-h, 0.0)) / (h * h);
    let d22 = (u(0.0, h) - 2.0 * c + u(0.0, -h)) / (h * h);
    let d12 = (u(h, h) - u(h, -h) - u(-h, h) + u(-h, -h)) / (4.0 * h * h);
    let d1 = (u(h, 0.0) - u(-h, 0.0)) / (2.0 * h);
    let d2 = (u(0.0, h) - u(0.0, -h)) / (2.0 * h);
    let a = m.spec.field.a(x);
    let b = m.spec.field.b(x);
    a[0][0] * d11 + 2.0 * a[0][1] * d12 + a[1][1] * d22 + b[0] * d1 + b[1] * d2 - m.spec.nonlinearity.eval(x, c)
}

#[test]
fn manufactured_solutions_solve_their_equations() {
    for id in ["paraboloid", "drift_linear", "cubic_drift:0.5"] {
        let m = manufactured_from_id(id).unwrap();
        assert_eq!((m.u)([0.0, 0.0]), 0.0);
        for x in halton_disk(50, 0.9) {
            assert!(manufactured_residual(&m, x, 1e-3).abs() < 1e-6, "{id} at {x:?}");
        }
    }
}

#[test]
fn potentials_normalised_and_bounded() {
    let ids = ["paraboloid", "drift_linear", "cubic_drift:0.5", "cubic_drift:-1"];
    for id in ids {
        let m = manufactured_from_id(id).unwrap();
        let p = &m.spec.potential;
        for x0 in [[0.0, 0.0], [0.3, -0.2]] {
            let h = 1e-4;
            assert!(p.eval(x0, 0.0, x0).abs() < 1e-15);
            let g1 = (p.eval(x0, 0.0, [x0[0] + h, x0[1]]) - p.eval(x0, 0.0, [x0[0] - h, x0[1]])) / (2.0 * h);
            let g2 = (p.eval(x0, 0.0, [x0[0], x0[1] + h]) - p.eval(x0, 0.0, [x0[0], x0[1] - h])) / (2.0 * h);
            assert!(g1.abs() < 1e-8 && g2.abs() < 1e-8, "{id}");
            assert!(p.sampled_hessian_sup(x0, 0.0, 1e-3, 500) <= p.hessian_bound * (1.0 + 1e-6), "{id}");
        }
    }
}

#[test]
fn potential_residual_second_order() {
    let f = field("perturbed_sin:0.2", "zero");
    let (nl, pot) = nonlinearity_from_id("exp_x1", &f).unwrap();
    let x0 = [0.2, 0.1];
    let pts: Vec<Point> = halton_disk(40, 0.8).into_iter().map(|p| [x0[0] + p[0], x0[1] + p[1]]).collect();
    let r1 = pot.residual(&f, &nl, x0, 0.0, 0.02, &pts);
    let r2 = pot.residual(&f, &nl, x0, 0.0, 0.01, &pts);
    let order = (r1 / r2).log2();
    assert!(order >= 1.8, "order {order} ({r1}, {r2})");

    let (nl, pot) = nonlinearity_from_id("const:3", &f).unwrap();
    assert!(pot.residual(&f, &nl, x0, 0.0, 0.01, &pts) < 1e-9);
    let (nl, pot) = nonlinearity_from_id("sqrt_dini", &f).unwrap();
    assert!(pot.residual(&f, &nl, x0, 0.49, 0.01, &pts) < 1e-9);
}

#[test]
fn registry_misses() {
    assert!(matches!(leading_from_id("nope"), Err(Error::Registry(_))));
    assert!(matches!(leading_from_id("radial_lipschitz"), Err(Error::Registry(_))));
    assert!(matches!(leading_from_id("radial_lipschitz:x"), Err(Error::Registry(_))));
    assert!(matches!(drift_from_id("constant:1"), Err(Error::Registry(_))));
    let f = field("identity", "zero");
    assert!(matches!(nonlinearity_from_id("from_manufactured:zzz", &f), Err(Error::Registry(_))));
    assert!(nonlinearity_from_id("from_manufactured:paraboloid", &f).is_ok());
}

#[test]
fn rescaled_nonlinearity_keeps_modulus() {
    let f = field("identity", "zero");
    let (nl, _) = nonlinearity_from_id("sqrt_dini", &f).unwrap();
    for s in [0.1, 0.5, 10.0] {
        let r = nl.rescaled(s);
        assert!(verify_nonlinearity(&r, 3000, 5.0 * s, 5).unwrap().pass, "s={s}");
    }
}

proptest! {
    #[test]
    fn ln_distance_nondecreasing(nu in 0.0f64..1.0, r in 0.05f64..0.9) {
        let f = field(&format!("radial_lipschitz:{nu}"), "zero");
        let d1 = ln_distance(&f, [0.0, 0.0], r, 32).unwrap().value;
        let d2 = ln_distance(&f, [0.0, 0.0], r * 1.1, 32).unwrap().value;
        prop_assert!(d2 >= d1);
    }

    #[test]
    fn declared_nu_bound(nu in 0.01f64..1.0, r in 0.02f64..1.0) {
        let f = field(&format!("radial_lipschitz:{nu}"), "zero");
        let d = ln_distance(&f, [0.0, 0.0], r, 48).unwrap().value;
        prop_assert!(d / r <= nu * (1.0 + 2e-3));
    }

    #[test]
    fn ellipticity_holds_for_rotations(kappa in 1.0f64..5.0, theta in 0.0f64..3.2) {
        let f = field(&format!("anisotropic:{kappa},{theta}"), "zero");
        prop_assert!(check_ellipticity(&f, 100).unwrap().pass);
        prop_assert!((anisotropy(&f.a([0.0, 0.0])) - kappa).abs() < 1e-9 * kappa);
    }
}
