use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::DiskGrid;
use crate::error::{Error, Result};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Solution,
    Rhs,
    Boundary,
    Residual,
}

/// Nodal values on a [`DiskGrid`]: one value per interior node and one per
/// boundary point.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub grid: Arc<DiskGrid>,
    pub role: Role,
    pub values: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: Arc<DiskGrid>, role: Role, values: Vec<f64>, boundary: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || boundary.len() != grid.boundary_points.len() {
            return Err(Error::InvalidField("field length does not match its grid".into()));
        }
        if values.iter().chain(&boundary).any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite nodal value".into()));
        }
        Ok(Self {
            grid,
            role,
            values,
            boundary,
        })
    }

    /// Samples `g` at every node and boundary point.
    pub fn from_fn(grid: Arc<DiskGrid>, role: Role, g: impl Fn(Point) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&p| g(p)).collect();
        let boundary = grid.boundary_points.iter().map(|&p| g(p)).collect();
        Self::new(grid, role, values, boundary)
    }

    pub fn zeros(grid: Arc<DiskGrid>, role: Role) -> Self {
        let (n, m) = (grid.len(), grid.boundary_points.len());
        Self {
            grid,
            role,
            values: vec![0.0; n],
            boundary: vec![0.0; m],
        }
    }

    pub fn interior_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn boundary_max(&self) -> f64 {
        self.boundary.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |value|` over nodes and boundary points.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().chain(&self.boundary).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self − g|` over nodes and boundary points.
    pub fn sup_error(&self, g: impl Fn(Point) -> f64) -> f64 {
        let a = self
            .grid
            .nodes
            .iter()
            .zip(&self.values)
            .fold(0.0f64, |m, (p, v)| m.max((v - g(*p)).abs()));
        self.grid
            .boundary_points
            .iter()
            .zip(&self.boundary)
            .fold(a, |m, (p, v)| m.max((v - g(*p)).abs()))
    }

    /// Nodal sup of `|self|` over interior nodes within `radius` of `center`.
    pub fn sup_in_ball(&self, center: Point, radius: f64) -> f64 {
        self.grid
            .nodes
            .iter()
            .zip(&self.values)
            .filter(|(p, _)| (p[0] - center[0]).hypot(p[1] - center[1]) <= radius + 1e-12)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    fn lattice_value(&self, i: i64, j: i64) -> Option<f64> {
        self.grid.node_at(i, j).map(|k| self.values[k])
    }

    /// Keys bicubic interpolation, falling back to bilinear and then to the
    /// nearest node where the 4×4 patch leaves the interior.
    pub fn interpolate(&self, x: Point) -> f64 {
        let [s, t] = self.grid.to_lattice(x);
        let (i0, j0) = (s.floor() as i64, t.floor() as i64);
        let (fx, fy) = (s - i0 as f64, t - j0 as f64);
        if let Some(v) = self.bicubic(i0, j0, fx, fy) {
            return v;
        }
        let corners = [
            self.lattice_value(i0, j0),
            self.lattice_value(i0 + 1, j0),
            self.lattice_value(i0, j0 + 1),
            self.lattice_value(i0 + 1, j0 + 1),
        ];
        if let [Some(a), Some(b), Some(c), Some(d)] = corners {
            return a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + c * (1.0 - fx) * fy + d * fx * fy;
        }
        self.nearest(x)
    }

    fn bicubic(&self, i0: i64, j0: i64, fx: f64, fy: f64) -> Option<f64> {
        let wx = keys_weights(fx);
        let wy = keys_weights(fy);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            for (a, wxa) in wx.iter().enumerate() {
                acc += wxa * wyb * self.lattice_value(i0 - 1 + a as i64, j0 - 1 + b as i64)?;
            }
        }
        Some(acc)
    }

    fn nearest(&self, x: Point) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let pts = self.grid.nodes.iter().zip(&self.values);
        let bnd = self.grid.boundary_points.iter().zip(&self.boundary);
        for (p, v) in pts.chain(bnd) {
            let d = (p[0] - x[0]).hypot(p[1] - x[1]);
            if d < best.0 {
                best = (d, *v);
            }
        }
        best.1
    }

    /// Writes `x,y,value` rows for nodes then boundary points.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,y,value")?;
        let pts = self.grid.nodes.iter().zip(&self.values);
        let bnd = self.grid.boundary_points.iter().zip(&self.boundary);
        for (p, v) in pts.chain(bnd) {
            writeln!(w, "{},{},{}", p[0], p[1], v)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Keys cubic convolution weights (a = −1/2) for offsets −1, 0, 1, 2.
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}
