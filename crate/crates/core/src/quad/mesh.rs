//! Interior quadrature meshes with geometric boundary layers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, fibonacci_sphere, BallSpec, Domain, Point, Shape};

/// Widths of the boundary layers replacing the outermost regular cell, as fractions of it.
const LAYERS: [f64; 4] = [0.5, 0.25, 0.125, 0.125];

/// Interior nodes with positive cell-volume weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InteriorMesh {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl InteriorMesh {
    /// Mesh with about `resolution` cells across each axis (≥ 3).
    pub fn new(domain: &Domain, resolution: usize) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::ResolutionTooSmall { got: resolution, min: 3 });
        }
        let mesh = match domain.shape() {
            Shape::Ball(b) => ball_mesh(b, resolution)?,
            Shape::Box { min, max } => box_mesh(min, max, resolution),
            Shape::Polytope(_) => polytope_mesh(domain, resolution)?,
        };
        debug_assert!(mesh.nodes.iter().all(|p| domain.dist_to_boundary(p) > 0.0));
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |p| p.dim())
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Radius of the ball with the same volume as cell `i`.
    pub fn cell_radius(&self, i: usize) -> f64 {
        let n = self.dim();
        (self.weights[i] / ball_volume(n)).powf(1.0 / n as f64)
    }

    pub fn nearest(&self, p: &Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.nodes.iter().enumerate() {
            let d = q.dist_sq(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Σ_i f(x_i) w_i.
    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| f(p) * w).sum()
    }
}

/// Cell edges on [0, len]: regular cells with the last one (or both ends) split into layers.
fn graded_edges(len: f64, res: usize, both_ends: bool) -> Vec<f64> {
    let h = len / res as f64;
    let mut e = vec![0.0];
    if both_ends {
        let mut acc = 0.0;
        for w in LAYERS.iter().rev() {
            acc += w * h;
            e.push(acc);
        }
    }
    let (start, stop) = if both_ends { (2, res - 1) } else { (1, res - 1) };
    for k in start..=stop {
        e.push(k as f64 * h);
    }
    let mut acc = (res - 1) as f64 * h;
    for w in LAYERS {
        acc += w * h;
        e.push(acc);
    }
    *e.last_mut().unwrap() = len;
    e
}

fn ball_mesh(b: &BallSpec, res: usize) -> Result<InteriorMesh> {
    let n = b.dim();
    let r = b.radius;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match n {
        1 => {
            let edges = graded_edges(2.0 * r, res.max(3), true);
            for w in edges.windows(2) {
                nodes.push(Point::from([b.center[0] - r + 0.5 * (w[0] + w[1])]));
                weights.push(w[1] - w[0]);
            }
        }
        2 | 3 => {
            let edges = graded_edges(r, res, false);
            let h = r / res as f64;
            nodes.push(b.center.clone());
            weights.push(ball_volume(n) * edges[1].powi(n as i32));
            for (j, w) in edges.windows(2).enumerate().skip(1) {
                let (a, bb) = (w[0], w[1]);
                let mid = 0.5 * (a + bb);
                if n == 2 {
                    let k = ((2.0 * PI * mid / h).round() as usize).max(6);
                    let dth = 2.0 * PI / k as f64;
                    let rc = 2.0 / 3.0 * (bb.powi(3) - a.powi(3)) / (bb * bb - a * a);
                    let off = if j % 2 == 1 { 0.5 * dth } else { 0.0 };
                    for i in 0..k {
                        let th = off + i as f64 * dth;
                        nodes.push(b.center.add(&Point::from([rc * th.cos(), rc * th.sin()])));
                        weights.push(0.5 * (bb * bb - a * a) * dth);
                    }
                } else {
                    let k = ((4.0 * PI * mid * mid / (h * h)).round() as usize).max(8);
                    let rc = 0.75 * (bb.powi(4) - a.powi(4)) / (bb.powi(3) - a.powi(3));
                    let (c, s) = ((0.7 * j as f64).cos(), (0.7 * j as f64).sin());
                    let vol = (bb.powi(3) - a.powi(3)) / 3.0 * 4.0 * PI / k as f64;
                    for u in fibonacci_sphere(k) {
                        let v = Point::from([c * u[0] - s * u[1], s * u[0] + c * u[1], u[2]]);
                        nodes.push(b.center.add_scaled(rc, &v));
                        weights.push(vol);
                    }
                }
            }
        }
        _ => return Err(Error::Unsupported("interior meshes on balls need n <= 3".into())),
    }
    Ok(InteriorMesh { nodes, weights })
}

fn box_mesh(min: &Point, max: &Point, res: usize) -> InteriorMesh {
    let n = min.dim();
    let axes: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|k| {
            let e = graded_edges(max[k] - min[k], res, true);
            e.windows(2).map(|w| (min[k] + 0.5 * (w[0] + w[1]), w[1] - w[0])).collect()
        })
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = Point::zeros(n);
        let mut w = 1.0;
        for k in 0..n {
            let (c, len) = axes[k][rem % axes[k].len()];
            rem /= axes[k].len();
            p[k] = c;
            w *= len;
        }
        nodes.push(p);
        weights.push(w);
    }
    InteriorMesh { nodes, weights }
}

fn polytope_mesh(domain: &Domain, res: usize) -> Result<InteriorMesh> {
    let Shape::Polytope(poly) = domain.shape() else { unreachable!() };
    let n = poly.dim();
    if n > 3 {
        return Err(Error::Unsupported("polytope meshes need n <= 3".into()));
    }
    let (lo, hi) = poly.bounding_box();
    let side = (0..n).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    let h = side / res as f64;
    let counts: Vec<usize> = (0..n).map(|k| (((hi[k] - lo[k]) / h).ceil() as usize).max(1)).collect();
    let cell: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / counts[k] as f64).collect();
    let total: usize = counts.iter().product();
    let mut mesh = InteriorMesh { nodes: Vec::new(), weights: Vec::new() };
    for flat in 0..total {
        let mut rem = flat;
        let mut corner = Point::zeros(n);
        for k in 0..n {
            corner[k] = lo[k] + (rem % counts[k]) as f64 * cell[k];
            rem /= counts[k];
        }
        refine_cell(domain, &corner, &cell, 0, &mut mesh);
    }
    Ok(mesh)
}

enum CellClass {
    Inside,
    Outside,
    Cut,
}

fn classify(domain: &Domain, corner: &Point, size: &[f64]) -> CellClass {
    let Shape::Polytope(poly) = domain.shape() else { unreachable!() };
    let n = corner.dim();
    let mut all_in = true;
    for h in poly.halfspaces() {
        // Extreme values of a·x over the cell.
        let mut lo = 0.0;
        let mut hi = 0.0;
        for k in 0..n {
            let a = h.normal[k];
            let (u, v) = (a * corner[k], a * (corner[k] + size[k]));
            lo += u.min(v);
            hi += u.max(v);
        }
        if lo >= h.offset {
            return CellClass::Outside;
        }
        if hi >= h.offset {
            all_in = false;
        }
    }
    if all_in {
        CellClass::Inside
    } else {
        CellClass::Cut
    }
}

fn refine_cell(domain: &Domain, corner: &Point, size: &[f64], depth: usize, mesh: &mut InteriorMesh) {
    let n = corner.dim();
    let vol: f64 = size.iter().product();
    match classify(domain, corner, size) {
        CellClass::Outside => {}
        CellClass::Inside => {
            let c: Point = (0..n).map(|k| corner[k] + 0.5 * size[k]).collect();
            mesh.nodes.push(c);
            mesh.weights.push(vol);
        }
        CellClass::Cut if depth < 3 => {
            let half: Vec<f64> = size.iter().map(|s| 0.5 * s).collect();
            for mask in 0..1usize << n {
                let child: Point =
                    (0..n).map(|k| corner[k] + if mask >> k & 1 == 1 { half[k] } else { 0.0 }).collect();
                refine_cell(domain, &child, &half, depth + 1, mesh);
            }
        }
        CellClass::Cut => {
            // Inside fraction from a 4ⁿ subgrid; the node is the centroid of the inside samples.
            let sub = 4usize;
            let total = sub.pow(n as u32);
            let mut acc = Point::zeros(n);
            let mut inside = 0usize;
            for flat in 0..total {
                let mut rem = flat;
                let p: Point = (0..n)
                    .map(|k| {
                        let i = rem % sub;
                        rem /= sub;
                        corner[k] + (i as f64 + 0.5) * size[k] / sub as f64
                    })
                    .collect();
                if domain.dist_to_boundary(&p) > 0.0 {
                    acc = acc.add(&p);
                    inside += 1;
                }
            }
            if inside > 0 {
                mesh.nodes.push(acc.scale(1.0 / inside as f64));
                mesh.weights.push(vol * inside as f64 / total as f64);
            }
        }
    }
}
