//! Quadrature helpers: Gauss–Legendre rules and cell-midpoint rules on disks.

use crate::Point;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pnm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            // Newton on the odd polynomial lands exactly on 0 for the middle node.
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Cell-midpoint quadrature on a disk `B_r(center)`.
///
/// Cells of a Cartesian lattice that are cut by the circle are weighted by
/// the covered-area fraction estimated from a 4×4 subsample, and evaluated
/// at the centroid of the covered sub-cells.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

const SUBSAMPLE: usize = 4;

impl BallQuadrature {
    pub fn new(center: Point, radius: f64, cells_per_radius: usize) -> Self {
        let h = radius / cells_per_radius as f64;
        let n = cells_per_radius as i64;
        let r2 = radius * radius;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in -n..n {
            for j in -n..n {
                let x0 = i as f64 * h;
                let y0 = j as f64 * h;
                let corners_in = [(x0, y0), (x0 + h, y0), (x0, y0 + h), (x0 + h, y0 + h)]
                    .iter()
                    .filter(|(x, y)| x * x + y * y <= r2)
                    .count();
                if corners_in == 4 {
                    points.push([center[0] + x0 + 0.5 * h, center[1] + y0 + 0.5 * h]);
                    weights.push(h * h);
                    continue;
                }
                let sub = h / SUBSAMPLE as f64;
                let (mut cx, mut cy, mut hits) = (0.0, 0.0, 0usize);
                for a in 0..SUBSAMPLE {
                    for b in 0..SUBSAMPLE {
                        let x = x0 + (a as f64 + 0.5) * sub;
                        let y = y0 + (b as f64 + 0.5) * sub;
                        if x * x + y * y <= r2 {
                            cx += x;
                            cy += y;
                            hits += 1;
                        }
                    }
                }
                if hits > 0 {
                    let frac = hits as f64 / (SUBSAMPLE * SUBSAMPLE) as f64;
                    points.push([center[0] + cx / hits as f64, center[1] + cy / hits as f64]);
                    weights.push(frac * h * h);
                }
            }
        }
        Self { points, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }

    /// `(∫ |g|^p)^{1/p}` over the ball.
    pub fn lp_norm(&self, p: f64, mut g: impl FnMut(Point) -> f64) -> f64 {
        self.integrate(|x| g(x).abs().powf(p)).powf(1.0 / p)
    }
}

/// Samples `f` on a polar pattern over `B_r(center)` (including the centre and
/// the bounding circle) and refines around the maximiser of `|f|`.
///
/// Returns `(sup |f|, argmax)`.
pub fn ball_sup(center: Point, radius: f64, f: impl Fn(Point) -> f64) -> (f64, Point) {
    const NR: usize = 24;
    const NT: usize = 96;
    let eval = |rho: f64, theta: f64| {
        let p = [
            center[0] + radius * rho * theta.cos(),
            center[1] + radius * rho * theta.sin(),
        ];
        (f(p).abs(), p, rho, theta)
    };
    let mut best = eval(0.0, 0.0);
    let dt = std::f64::consts::TAU / NT as f64;
    let mut best_rt = (0.0, 0.0);
    for ir in 1..=NR {
        let rho = ir as f64 / NR as f64;
        for it in 0..NT {
            let theta = it as f64 * dt;
            let cand = eval(rho, theta);
            if cand.0 > best.0 {
                best = cand;
                best_rt = (rho, theta);
            }
        }
    }
    // 3x refined patch around the maximiser.
    let (rho0, th0) = best_rt;
    let dr = 1.0 / NR as f64;
    for a in -3i32..=3 {
        for b in -3i32..=3 {
            let rho = (rho0 + a as f64 * dr / 3.0).clamp(0.0, 1.0);
            let theta = th0 + b as f64 * dt / 3.0;
            let cand = eval(rho, theta);
            if cand.0 > best.0 {
                best = cand;
            }
        }
    }
    (best.0, best.1)
}
