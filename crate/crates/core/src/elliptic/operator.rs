use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::{DiscreteField, Role};
use super::grid::{Arm, DiskGrid};
use super::solver::{bicgstab, Csr, Ilu0, SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{anisotropy, CoefficientField};

/// Largest eigenvalue ratio of `a(x)` accepted by [`assemble`].
pub const ANISOTROPY_LIMIT: f64 = 5.0;

/// Discretisation of the mixed derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `D_12 u ≈ (D²_{d+} − D²_{d−}) / 2` along the two diagonals; the
    /// four-point cross stencil at regular nodes.
    #[default]
    Cross,
    /// `(a11 − |a12|) D²_{e1} + (a22 − |a12|) D²_{e2} + 2|a12| D²_{d±}`:
    /// nonnegative off-diagonal weights whenever `a11, a22 ≥ |a12|`.
    Monotone,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleOptions {
    pub stencil: Stencil,
    /// Zero-order term: the operator becomes `a:D² + b·D − shift`.
    pub shift: f64,
}

/// Discrete `a_ij D_ij + b_i D_i` on the interior nodes of a grid, split into
/// node couplings and couplings to the boundary points.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub grid: Arc<DiskGrid>,
    pub matrix: Csr,
    pub boundary: Vec<Vec<(usize, f64)>>,
    pub options: AssembleOptions,
}

/// Shortley–Weller weights `(w+, w−, w0)` of the second difference with
/// arms `tp`, `tm`; exact on quadratics.
pub fn second_difference_weights(tp: f64, tm: f64) -> (f64, f64, f64) {
    let s = tp + tm;
    (2.0 / (tp * s), 2.0 / (tm * s), -2.0 / (tp * tm))
}

/// Weights of the first difference with arms `tp`, `tm`; exact on quadratics.
pub fn first_difference_weights(tp: f64, tm: f64) -> (f64, f64, f64) {
    let s = tp + tm;
    (tm / (tp * s), -tp / (tm * s), (tp - tm) / (tp * tm))
}

struct RowBuilder<'a> {
    grid: &'a DiskGrid,
    node: usize,
    cols: Vec<(usize, f64)>,
    bnd: Vec<(usize, f64)>,
    center: f64,
}

impl RowBuilder<'_> {
    fn arm(&mut self, d: usize, w: f64) {
        match self.grid.arms[self.node][d] {
            Arm::Node(k) => self.cols.push((k, w)),
            Arm::Boundary { point, .. } => self.bnd.push((point, w)),
        }
    }

    /// Adds `c · D²_m` for direction pair `m` (arms `2m`, `2m + 1`).
    fn second(&mut self, m: usize, c: f64) {
        if c == 0.0 {
            return;
        }
        let (tp, tm) = (self.grid.arm_t(self.node, 2 * m), self.grid.arm_t(self.node, 2 * m + 1));
        let (wp, wm, w0) = second_difference_weights(tp, tm);
        self.arm(2 * m, c * wp);
        self.arm(2 * m + 1, c * wm);
        self.center += c * w0;
    }

    fn first(&mut self, m: usize, c: f64) {
        if c == 0.0 {
            return;
        }
        let (tp, tm) = (self.grid.arm_t(self.node, 2 * m), self.grid.arm_t(self.node, 2 * m + 1));
        let (wp, wm, w0) = first_difference_weights(tp, tm);
        self.arm(2 * m, c * wp);
        self.arm(2 * m + 1, c * wm);
        self.center += c * w0;
    }
}

/// Assembles the operator of `field` on `grid`.
pub fn assemble(field: &CoefficientField, grid: Arc<DiskGrid>, options: AssembleOptions) -> Result<LinearOperator> {
    let n = grid.len();
    let mut rows = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    for node in 0..n {
        let x = grid.nodes[node];
        let a = field.a(x);
        let b = field.b(x);
        if a.iter().flatten().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite coefficient at {x:?}")));
        }
        if (a[0][1] - a[1][0]).abs() > 1e-14 * (a[0][0].abs() + a[1][1].abs()).max(1.0) {
            return Err(Error::InvalidField(format!("a(x) not symmetric at {x:?}")));
        }
        let ratio = anisotropy(&a);
        if ratio > ANISOTROPY_LIMIT * (1.0 + 1e-9) {
            return Err(Error::Anisotropy {
                ratio,
                limit: ANISOTROPY_LIMIT,
            });
        }
        let mut rb = RowBuilder {
            grid: &grid,
            node,
            cols: Vec::with_capacity(9),
            bnd: Vec::new(),
            center: -options.shift,
        };
        let a12 = a[0][1];
        match options.stencil {
            Stencil::Cross => {
                rb.second(0, a[0][0]);
                rb.second(1, a[1][1]);
                rb.second(2, a12);
                rb.second(3, -a12);
            }
            Stencil::Monotone => {
                rb.second(0, a[0][0] - a12.abs());
                rb.second(1, a[1][1] - a12.abs());
                rb.second(if a12 >= 0.0 { 2 } else { 3 }, 2.0 * a12.abs());
            }
        }
        rb.first(0, b[0]);
        rb.first(1, b[1]);
        let mut cols = rb.cols;
        cols.push((node, rb.center));
        rows.push(cols);
        let mut bnd = rb.bnd;
        bnd.sort_by_key(|e| e.0);
        bnd.dedup_by(|later, kept| {
            let same = later.0 == kept.0;
            if same {
                kept.1 += later.1;
            }
            same
        });
        boundary.push(bnd);
    }
    Ok(LinearOperator {
        grid,
        matrix: Csr::from_rows(n, rows),
        boundary,
        options,
    })
}

impl LinearOperator {
    /// Applies the operator to a field carrying interior and boundary values.
    pub fn apply(&self, u: &DiscreteField) -> Vec<f64> {
        let mut y = self.matrix.mul(&u.values);
        for (yi, row) in y.iter_mut().zip(&self.boundary) {
            *yi += row.iter().map(|(p, w)| w * u.boundary[*p]).sum::<f64>();
        }
        y
    }

    /// Nodal residual `L u − rhs` as a field.
    pub fn residual(&self, u: &DiscreteField, rhs: &DiscreteField) -> DiscreteField {
        let values = self.apply(u).iter().zip(&rhs.values).map(|(a, b)| a - b).collect();
        DiscreteField {
            grid: self.grid.clone(),
            role: Role::Residual,
            values,
            boundary: vec![0.0; self.grid.boundary_points.len()],
        }
    }

    /// Row-equilibrates by the diagonal and builds the ILU(0) preconditioner.
    pub fn factorize(&self) -> Result<Factorized<'_>> {
        let diag = self.matrix.diagonal();
        if diag.iter().any(|d| *d == 0.0 || !d.is_finite()) {
            return Err(Error::InvalidField("operator has a zero diagonal entry".into()));
        }
        let row_scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.abs()).collect();
        let mut scaled = self.matrix.clone();
        for (i, s) in row_scale.iter().enumerate() {
            for v in &mut scaled.val[scaled.row_ptr[i]..scaled.row_ptr[i + 1]] {
                *v *= s;
            }
        }
        Ok(Factorized {
            op: self,
            ilu: Ilu0::new(&scaled)?,
            scaled,
            row_scale,
        })
    }
}

/// An operator with its preconditioner, reusable across right-hand sides.
pub struct Factorized<'a> {
    pub op: &'a LinearOperator,
    scaled: Csr,
    row_scale: Vec<f64>,
    ilu: Ilu0,
}

impl Factorized<'_> {
    /// Solves `L u = rhs` in the interior with `u = g` at the boundary points.
    pub fn solve(&self, rhs: &[f64], g: &[f64], cfg: &SolverConfig) -> Result<(DiscreteField, SolveStats)> {
        let grid = &self.op.grid;
        if rhs.len() != grid.len() || g.len() != grid.boundary_points.len() {
            return Err(Error::InvalidField("rhs/boundary length does not match the grid".into()));
        }
        if rhs.iter().chain(g).any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite rhs or boundary data".into()));
        }
        let b: Vec<f64> = rhs
            .iter()
            .zip(&self.op.boundary)
            .zip(&self.row_scale)
            .map(|((f, row), s)| s * (f - row.iter().map(|(p, w)| w * g[*p]).sum::<f64>()))
            .collect();
        let mut x = vec![0.0; grid.len()];
        let stats = bicgstab(&self.scaled, &self.ilu, &b, &mut x, cfg)?;
        let u = DiscreteField::new(grid.clone(), Role::Solution, x, g.to_vec())?;
        Ok((u, stats))
    }
}

/// Solves `L u = rhs` with `u = boundary` on the circle.
pub fn solve_dirichlet(
    op: &LinearOperator,
    rhs: &DiscreteField,
    boundary: &DiscreteField,
    cfg: &SolverConfig,
) -> Result<(DiscreteField, SolveStats)> {
    if !Arc::ptr_eq(&rhs.grid, &op.grid) || !Arc::ptr_eq(&boundary.grid, &op.grid) {
        return Err(Error::InvalidField("fields live on a different grid than the operator".into()));
    }
    op.factorize()?.solve(&rhs.values, &boundary.boundary, cfg)
}
