//! Damped Picard iteration for `a_ij D_ij u + b_i D_i u = f(x, u)` over
//! the linear Dirichlet solver.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elliptic::{assemble, AssembleOptions, DiscreteField, DiskGrid, Role, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::ProblemSpec;
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub max_outer: usize,
    pub tol: f64,
    /// Initial damping θ ∈ (0, 1]; halved once on the first non-monotone step.
    pub damping: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            max_outer: 200,
            tol: 1e-10,
            damping: 1.0,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self, solver: &SolverConfig) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("picard.damping", "damping must lie in (0, 1]"));
        }
        if !(self.tol > solver.rtol) {
            return Err(Error::config("picard.tol", "tolerance must exceed solver.rtol"));
        }
        if self.max_outer == 0 {
            return Err(Error::config("picard.max_outer", "at least one outer step required"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub u: DiscreteField,
    /// `sup |u^{m+1} − u^m|` per outer step.
    pub history: Vec<f64>,
    pub steps: usize,
    pub damping: f64,
}

impl PicardResult {
    /// Geometric mean of successive ratios of the history tail.
    pub fn contraction_ratio(&self) -> Option<f64> {
        let h: Vec<f64> = self.history.iter().copied().filter(|d| *d > 0.0).collect();
        if h.len() < 3 {
            return None;
        }
        let tail = &h[h.len().saturating_sub(6)..];
        let logs: Vec<f64> = tail.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
    }
}

/// Consecutive non-decreasing steps that signal a non-contraction.
const STALL_STEPS: usize = 5;

/// Picard iteration on `grid` with Dirichlet data `g` at the boundary points.
pub fn picard_solve(
    spec: &ProblemSpec,
    grid: Arc<DiskGrid>,
    g: impl Fn(Point) -> f64,
    cfg: &PicardConfig,
    solver: &SolverConfig,
    options: AssembleOptions,
) -> Result<PicardResult> {
    cfg.validate(solver)?;
    let op = assemble(&spec.field, grid.clone(), options)?;
    let fac = op.factorize()?;
    let boundary: Vec<f64> = grid.boundary_points.iter().map(|&p| g(p)).collect();
    let f = &spec.nonlinearity;
    let rhs_at = |u: &[f64]| -> Vec<f64> { grid.nodes.iter().zip(u).map(|(&x, &t)| f.eval(x, t)).collect() };

    let mut u = vec![0.0; grid.len()];
    let mut theta = cfg.damping;
    let mut history: Vec<f64> = Vec::new();
    let mut stall = 0usize;
    for step in 1..=cfg.max_outer {
        let (s, _) = fac.solve(&rhs_at(&u), &boundary, solver)?;
        let next: Vec<f64> = u.iter().zip(&s.values).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        let diff = u.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        u = next;
        if let Some(&prev) = history.last() {
            if diff >= prev {
                stall += 1;
                if theta == 1.0 {
                    theta = 0.5;
                }
            } else {
                stall = 0;
            }
        }
        history.push(diff);
        if f.u_independent || diff <= cfg.tol {
            let u = DiscreteField::new(grid.clone(), Role::Solution, u, boundary)?;
            return Ok(PicardResult {
                u,
                history,
                steps: step,
                damping: theta,
            });
        }
        if stall >= STALL_STEPS {
            return Err(Error::FixedPoint {
                steps: step,
                reason: format!("sup-differences failed to decrease for {STALL_STEPS} consecutive steps"),
                history,
            });
        }
    }
    Err(Error::FixedPoint {
        steps: cfg.max_outer,
        reason: "outer-step budget exhausted".into(),
        history,
    })
}

/// `sup |L u − f(x, u)|` over interior nodes.
pub fn fixed_point_residual(spec: &ProblemSpec, u: &DiscreteField, options: AssembleOptions) -> Result<f64> {
    let op = assemble(&spec.field, u.grid.clone(), options)?;
    let lu = op.apply(u);
    Ok(lu
        .iter()
        .zip(&u.grid.nodes)
        .zip(&u.values)
        .fold(0.0, |m, ((l, &x), &t)| m.max((l - spec.nonlinearity.eval(x, t)).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_with;
    use crate::fields::{field_from_ids, manufactured_from_id, nonlinearity_from_id, Nonlinearity};
    use crate::modulus::Modulus;

    fn grid(h: f64) -> Arc<DiskGrid> {
        Arc::new(DiskGrid::new([0.0, 0.0], 1.0, h).unwrap())
    }

    fn spec_with(f: Nonlinearity) -> ProblemSpec {
        let field = field_from_ids("perturbed_sin:0.1", "constant:0.5,0.2").unwrap();
        let (_, potential) = nonlinearity_from_id("const:0", &field).unwrap();
        ProblemSpec {
            field,
            nonlinearity: f,
            potential,
        }
    }

    fn linear_in_u(eps: f64) -> Nonlinearity {
        Nonlinearity {
            id: "linear".into(),
            f: Arc::new(move |x, t| eps * t + (x[0] * 2.0).cos()),
            phi: Modulus::power(1.0).unwrap().scaled(eps),
            sup_bound: f64::INFINITY,
            u_independent: false,
        }
    }

    #[test]
    fn zero_data_one_step() {
        let field = field_from_ids("identity", "zero").unwrap();
        let (nonlinearity, potential) = nonlinearity_from_id("const:0", &field).unwrap();
        let spec = ProblemSpec {
            field,
            nonlinearity,
            potential,
        };
        let r = picard_solve(&spec, grid(1.0 / 32.0), |_| 0.0, &PicardConfig::default(), &SolverConfig::default(), Default::default()).unwrap();
        assert_eq!(r.steps, 1);
        assert!(r.u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn paraboloid_reproduced() {
        let m = manufactured_from_id("paraboloid").unwrap();
        let r = picard_solve(&m.spec, grid(1.0 / 32.0), |x| x[0] * x[0] + x[1] * x[1], &PicardConfig::default(), &SolverConfig::default(), Default::default()).unwrap();
        assert_eq!(r.steps, 1);
        assert!(r.u.sup_error(|x| x[0] * x[0] + x[1] * x[1]) < 1e-10);
    }

    #[test]
    fn u_independent_matches_linear_solve_exactly() {
        let m = manufactured_from_id("cubic_drift:0.5").unwrap();
        let g = grid(1.0 / 32.0);
        let r = picard_solve(&m.spec, g.clone(), |x| x[0].sin(), &PicardConfig::default(), &SolverConfig::default(), Default::default()).unwrap();
        let op = assemble(&m.spec.field, g, Default::default()).unwrap();
        let f = m.spec.nonlinearity.clone();
        let (u, _) = solve_with(&op, |x| f.eval(x, 0.0), |x| x[0].sin(), &SolverConfig::default()).unwrap();
        assert_eq!(r.u.values, u.values);
    }

    #[test]
    fn absorbed_linear_term_oracle() {
        let eps = 0.1;
        let spec = spec_with(linear_in_u(eps));
        let g = grid(1.0 / 32.0);
        let bnd = |x: Point| x[0] * x[1] + 1.0;
        let r = picard_solve(&spec, g.clone(), bnd, &PicardConfig::default(), &SolverConfig::default(), Default::default()).unwrap();
        let op = assemble(&spec.field, g, AssembleOptions { shift: eps, ..Default::default() }).unwrap();
        let (u, _) = solve_with(&op, |x| (x[0] * 2.0).cos(), bnd, &SolverConfig::default()).unwrap();
        let diff = r.u.values.iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-8, "{diff}");

        let res = fixed_point_residual(&spec, &r.u, Default::default()).unwrap();
        assert!(res <= 10.0 * PicardConfig::default().tol, "{res}");
        // solution operator of the unit disk has sup-norm 1/4
        let ratio = r.contraction_ratio().unwrap();
        assert!(ratio <= eps / 4.0 * 1.2 + 0.1, "{ratio}");
    }

    #[test]
    fn sqrt_dini_converges() {
        let field = field_from_ids("identity", "zero").unwrap();
        let (nonlinearity, potential) = nonlinearity_from_id("sqrt_dini", &field).unwrap();
        let spec = ProblemSpec {
            field,
            nonlinearity,
            potential,
        };
        let r = picard_solve(&spec, grid(1.0 / 32.0), |x| 0.5 + 0.2 * x[0], &PicardConfig::default(), &SolverConfig::default(), Default::default()).unwrap();
        assert!(*r.history.last().unwrap() <= 1e-10);
    }

    #[test]
    fn divergent_iteration_reported() {
        let spec = spec_with(Nonlinearity {
            id: "expanding".into(),
            f: Arc::new(|_, t| -60.0 * t + 1.0),
            phi: Modulus::power(1.0).unwrap().scaled(60.0),
            sup_bound: f64::INFINITY,
            u_independent: false,
        });
        let cfg = PicardConfig { max_outer: 100, ..Default::default() };
        match picard_solve(&spec, grid(1.0 / 16.0), |_| 0.0, &cfg, &SolverConfig::default(), Default::default()) {
            Err(Error::FixedPoint { history, .. }) => assert!(history.len() >= STALL_STEPS),
            other => panic!("expected fixed-point failure, got {:?}", other.map(|r| r.history)),
        }
    }

    #[test]
    fn config_validation() {
        let s = SolverConfig::default();
        assert!(PicardConfig { damping: 0.0, ..Default::default() }.validate(&s).is_err());
        assert!(PicardConfig { tol: 1e-20, ..Default::default() }.validate(&s).is_err());
        assert!(PicardConfig::default().validate(&s).is_ok());
    }
}
