use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::Point;

/// The eight stencil directions: ±e1, ±e2, ±(1,1)/√2, ±(1,−1)/√2.
/// Index `2m` is the positive and `2m + 1` the negative arm of direction `m`.
pub const DIRECTIONS: [[i64; 2]; 8] = [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]];

/// Where a stencil arm ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arm {
    /// Another interior node, at the full arm length.
    Node(usize),
    /// The circle, at distance `t` along the arm; `point` indexes
    /// [`DiskGrid::boundary_points`].
    Boundary { t: f64, point: usize },
}

/// Cartesian lattice restricted to a disk, with Shortley–Weller cut arms.
///
/// Interior nodes are lattice points `center + h (i, j)` with
/// `radius − |x − center| > 0.01 h`.
#[derive(Debug)]
pub struct DiskGrid {
    pub center: Point,
    pub radius: f64,
    pub h: f64,
    /// Lattice coordinates of interior nodes, row-major.
    pub lattice: Vec<[i64; 2]>,
    pub nodes: Vec<Point>,
    pub arms: Vec<[Arm; 8]>,
    pub boundary_points: Vec<Point>,
    index: HashMap<[i64; 2], usize>,
}

impl DiskGrid {
    pub fn new(center: Point, radius: f64, h: f64) -> Result<Self> {
        if !(radius > 0.0 && h > 0.0) || !(center[0].is_finite() && center[1].is_finite()) {
            return Err(Error::Domain("grid radius and spacing must be positive".into()));
        }
        if h > radius / 16.0 * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("spacing {h} exceeds radius/16 = {}", radius / 16.0)));
        }
        let n = (radius / h).ceil() as i64 + 1;
        let inside = |i: i64, j: i64| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            radius - x.hypot(y) > 0.01 * h
        };
        let mut lattice = Vec::new();
        let mut index = HashMap::new();
        for j in -n..=n {
            for i in -n..=n {
                if inside(i, j) {
                    index.insert([i, j], lattice.len());
                    lattice.push([i, j]);
                }
            }
        }
        let nodes: Vec<Point> = lattice
            .iter()
            .map(|&[i, j]| [center[0] + i as f64 * h, center[1] + j as f64 * h])
            .collect();
        let mut boundary_points = Vec::new();
        let mut arms = Vec::with_capacity(lattice.len());
        for &[i, j] in &lattice {
            let mut row = [Arm::Node(0); 8];
            for (d, off) in DIRECTIONS.iter().enumerate() {
                let nb = [i + off[0], j + off[1]];
                row[d] = match index.get(&nb) {
                    Some(&k) => Arm::Node(k),
                    None => {
                        let len = ((off[0] * off[0] + off[1] * off[1]) as f64).sqrt();
                        let dir = [off[0] as f64 / len, off[1] as f64 / len];
                        let p = [i as f64 * h, j as f64 * h];
                        let pd = p[0] * dir[0] + p[1] * dir[1];
                        let pp = p[0] * p[0] + p[1] * p[1];
                        let t = -pd + (pd * pd - (pp - radius * radius)).sqrt();
                        let q = [center[0] + p[0] + t * dir[0], center[1] + p[1] + t * dir[1]];
                        boundary_points.push(q);
                        Arm::Boundary {
                            t,
                            point: boundary_points.len() - 1,
                        }
                    }
                };
            }
            arms.push(row);
        }
        Ok(Self {
            center,
            radius,
            h,
            lattice,
            nodes,
            arms,
            boundary_points,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Full arm length in direction index `d`.
    pub fn arm_length(&self, d: usize) -> f64 {
        if d < 4 {
            self.h
        } else {
            self.h * std::f64::consts::SQRT_2
        }
    }

    /// Physical arm length of `arms[node][d]`.
    pub fn arm_t(&self, node: usize, d: usize) -> f64 {
        match self.arms[node][d] {
            Arm::Node(_) => self.arm_length(d),
            Arm::Boundary { t, .. } => t,
        }
    }

    /// Index of the interior node at lattice position `(i, j)`.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        self.index.get(&[i, j]).copied()
    }

    /// Nodes with at least one cut arm.
    pub fn is_near_boundary(&self, node: usize) -> bool {
        self.arms[node].iter().any(|a| matches!(a, Arm::Boundary { .. }))
    }

    /// Lattice coordinates of `x` relative to the grid center, in units of h.
    pub fn to_lattice(&self, x: Point) -> [f64; 2] {
        [(x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h]
    }
}
