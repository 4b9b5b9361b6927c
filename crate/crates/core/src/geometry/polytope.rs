use nalgebra::{DMatrix, DVector};

use super::Point;
use crate::error::{Error, Result};

/// Tolerance for face-membership tests on vertices and points.
pub(crate) const FACE_TOL: f64 = 1e-12;

/// `normal · x ≤ offset` with a unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Point,
    pub offset: f64,
}

/// A face of a polytope in n ≤ 3: the bounding halfspace plus its ordered vertex loop
/// (two endpoints for n = 2, one point for n = 1).
#[derive(Clone, Debug)]
pub struct Face {
    pub halfspace: Halfspace,
    pub vertices: Vec<Point>,
}

/// Bounded convex polytope given as an intersection of halfspaces.
#[derive(Clone, Debug)]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Point>,
    center: Point,
    inradius: f64,
    faces: Vec<Face>,
}

impl Polytope {
    pub fn new(raw: &[(Point, f64)]) -> Result<Self> {
        let n = raw
            .first()
            .map(|(a, _)| a.dim())
            .ok_or_else(|| Error::InvalidDomain("polytope needs at least one halfspace".into()))?;
        if n == 0 {
            return Err(Error::InvalidDomain("zero-dimensional polytope".into()));
        }
        let mut halfspaces = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            if a.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.dim() });
            }
            let len = a.norm();
            if !(len > 0.0) || !b.is_finite() {
                return Err(Error::InvalidDomain("degenerate halfspace normal".into()));
            }
            halfspaces.push(Halfspace { normal: a.scale(1.0 / len), offset: b / len });
        }
        if !is_bounded(&halfspaces, n) {
            return Err(Error::InvalidDomain("polytope is unbounded".into()));
        }
        let vertices = enumerate_vertices(&halfspaces, n);
        let (center, inradius) = chebyshev_center(&halfspaces, n)
            .ok_or_else(|| Error::InvalidDomain("polytope has empty interior".into()))?;
        if !(inradius > 0.0) {
            return Err(Error::InvalidDomain("polytope has empty interior".into()));
        }
        let faces = if n <= 3 { build_faces(&halfspaces, &vertices, n) } else { Vec::new() };
        Ok(Polytope { halfspaces, vertices, center, inradius, faces })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Faces with their vertex loops; empty for n > 3.
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Chebyshev center (deepest interior point).
    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Signed distance: exact inside (minimum over faces), exact Euclidean outside.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        let inner = self
            .halfspaces
            .iter()
            .map(|h| h.offset - h.normal.dot(p))
            .fold(f64::INFINITY, f64::min);
        if inner >= 0.0 {
            return inner;
        }
        // Outside: the nearest face plane whose projection lands on the face, else Dykstra.
        let mut best = f64::INFINITY;
        for h in &self.halfspaces {
            let viol = h.normal.dot(p) - h.offset;
            if viol <= 0.0 {
                continue;
            }
            let q = p.add_scaled(-viol, &h.normal);
            if self.halfspaces.iter().all(|g| g.normal.dot(&q) <= g.offset + FACE_TOL) {
                best = best.min(viol);
            }
        }
        if best.is_finite() {
            return -best;
        }
        -p.dist(&self.project(p))
    }

    /// Euclidean projection onto the polytope by Dykstra's alternating projections.
    pub fn project(&self, p: &Point) -> Point {
        let m = self.halfspaces.len();
        let mut x = p.clone();
        let mut incr = vec![Point::zeros(p.dim()); m];
        for _ in 0..20_000 {
            let prev = x.clone();
            for (h, inc) in self.halfspaces.iter().zip(incr.iter_mut()) {
                let y = x.add(inc);
                let viol = h.normal.dot(&y) - h.offset;
                let proj = if viol > 0.0 { y.add_scaled(-viol, &h.normal) } else { y.clone() };
                *inc = y.sub(&proj);
                x = proj;
            }
            if x.dist_sq(&prev) < 1e-30 {
                break;
            }
        }
        x
    }

    /// Distance from `p` (in the closure) along unit direction `u` to the boundary.
    pub fn ray_exit(&self, p: &Point, u: &Point) -> f64 {
        let mut t = f64::INFINITY;
        for h in &self.halfspaces {
            let rate = h.normal.dot(u);
            if rate > 0.0 {
                let slack = (h.offset - h.normal.dot(p)).max(0.0);
                t = t.min(slack / rate);
            }
        }
        t
    }

    /// Halfspaces active at `z` within `tol`.
    pub fn active(&self, z: &Point, tol: f64) -> Vec<&Halfspace> {
        self.halfspaces
            .iter()
            .filter(|h| (h.offset - h.normal.dot(z)).abs() <= tol)
            .collect()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let n = self.dim();
        let mut lo = Point::from(vec![f64::INFINITY; n]);
        let mut hi = Point::from(vec![f64::NEG_INFINITY; n]);
        for v in &self.vertices {
            for k in 0..n {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Volume for n ≤ 3 by the cone decomposition from the Chebyshev center.
    pub fn volume(&self) -> Option<f64> {
        let n = self.dim();
        if n > 3 {
            return None;
        }
        let c = &self.center;
        Some(
            self.faces
                .iter()
                .map(|f| {
                    let h = f.halfspace.offset - f.halfspace.normal.dot(c);
                    h * face_measure(f, n) / n as f64
                })
                .sum(),
        )
    }

    pub fn surface_area(&self) -> Option<f64> {
        let n = self.dim();
        (n <= 3).then(|| self.faces.iter().map(|f| face_measure(f, n)).sum())
    }
}

/// (n−1)-dimensional measure of a face.
pub(crate) fn face_measure(f: &Face, n: usize) -> f64 {
    match n {
        1 => 1.0,
        2 => f.vertices[0].dist(&f.vertices[1]),
        _ => {
            let v0 = &f.vertices[0];
            f.vertices
                .windows(2)
                .skip(1)
                .map(|w| triangle_area(v0, &w[0], &w[1]))
                .sum()
        }
    }
}

pub(crate) fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    let u = b.sub(a);
    let v = c.sub(a);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > m {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 && idx[0] == m - k {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn normals_matrix(hs: &[Halfspace], rows: &[usize], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| hs[rows[i]].normal[j])
}

/// Bounded iff the recession cone {d : a_i·d ≤ 0} is trivial.
fn is_bounded(hs: &[Halfspace], n: usize) -> bool {
    let all: Vec<usize> = (0..hs.len()).collect();
    let a = normals_matrix(hs, &all, n);
    if a.clone().svd(false, false).rank(1e-10) < n {
        return false;
    }
    if n == 1 {
        let pos = hs.iter().any(|h| h.normal[0] > 0.0);
        let neg = hs.iter().any(|h| h.normal[0] < 0.0);
        return pos && neg;
    }
    for rows in combinations(hs.len(), n - 1) {
        // Pad with a zero row so that V is square; the smallest singular direction spans the null space.
        let sub = normals_matrix(hs, &rows, n).insert_row(n - 1, 0.0);
        let svd = sub.svd(false, true);
        let Some(vt) = svd.v_t else { continue };
        let sv = &svd.singular_values;
        let imin = sv.imin();
        if (0..n).any(|i| i != imin && sv[i] < 1e-10) {
            continue;
        }
        let d: Vec<f64> = (0..n).map(|j| vt[(imin, j)]).collect();
        for sign in [1.0, -1.0] {
            if hs
                .iter()
                .all(|h| sign * h.normal.coords().iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() <= 1e-12)
            {
                return false;
            }
        }
    }
    true
}

fn enumerate_vertices(hs: &[Halfspace], n: usize) -> Vec<Point> {
    let mut verts: Vec<Point> = Vec::new();
    for rows in combinations(hs.len(), n) {
        let a = normals_matrix(hs, &rows, n);
        let b = DVector::from_iterator(n, rows.iter().map(|&r| hs[r].offset));
        let Some(x) = a.lu().solve(&b) else { continue };
        let p = Point::from(x.iter().copied().collect::<Vec<_>>());
        if !p.is_finite() {
            continue;
        }
        let scale = 1.0 + p.norm();
        if hs.iter().all(|h| h.normal.dot(&p) <= h.offset + 1e-9 * scale)
            && !verts.iter().any(|v| v.dist(&p) < 1e-9 * scale)
        {
            verts.push(p);
        }
    }
    verts
}

/// Maximizes t subject to a_i·x + t ≤ b_i by enumerating LP vertices.
fn chebyshev_center(hs: &[Halfspace], n: usize) -> Option<(Point, f64)> {
    let mut best_t = f64::NEG_INFINITY;
    let mut sols: Vec<Point> = Vec::new();
    for rows in combinations(hs.len(), n + 1) {
        let a = DMatrix::from_fn(n + 1, n + 1, |i, j| if j < n { hs[rows[i]].normal[j] } else { 1.0 });
        let b = DVector::from_iterator(n + 1, rows.iter().map(|&r| hs[r].offset));
        let Some(x) = a.lu().solve(&b) else { continue };
        let t = x[n];
        let p = Point::from(x.iter().take(n).copied().collect::<Vec<_>>());
        if !p.is_finite() || !t.is_finite() {
            continue;
        }
        let scale = 1.0 + p.norm();
        if !hs.iter().all(|h| h.normal.dot(&p) + t <= h.offset + 1e-9 * scale) {
            continue;
        }
        if t > best_t + 1e-12 * scale {
            best_t = t;
            sols.clear();
            sols.push(p);
        } else if (t - best_t).abs() <= 1e-12 * scale {
            sols.push(p);
        }
    }
    if sols.is_empty() {
        return None;
    }
    let mut c = Point::zeros(n);
    for s in &sols {
        c = c.add(s);
    }
    let c = c.scale(1.0 / sols.len() as f64);
    let r = hs.iter().map(|h| h.offset - h.normal.dot(&c)).fold(f64::INFINITY, f64::min);
    Some((c, r))
}

fn build_faces(hs: &[Halfspace], verts: &[Point], n: usize) -> Vec<Face> {
    let mut faces = Vec::new();
    for h in hs {
        let on: Vec<&Point> = verts
            .iter()
            .filter(|v| (h.offset - h.normal.dot(v)).abs() <= 1e-9 * (1.0 + v.norm()))
            .collect();
        if on.len() < n {
            continue;
        }
        let ordered: Vec<Point> = match n {
            1 => vec![on[0].clone()],
            2 => {
                let t = Point::from([-h.normal[1], h.normal[0]]);
                let (mut lo, mut hi) = (on[0], on[0]);
                for v in &on {
                    if v.dot(&t) < lo.dot(&t) {
                        lo = v;
                    }
                    if v.dot(&t) > hi.dot(&t) {
                        hi = v;
                    }
                }
                if lo.dist(hi) < 1e-12 {
                    continue;
                }
                vec![lo.clone(), hi.clone()]
            }
            _ => {
                let (e1, e2) = plane_basis(&h.normal);
                let mut c = Point::zeros(3);
                for v in &on {
                    c = c.add(v);
                }
                let c = c.scale(1.0 / on.len() as f64);
                let mut with_angle: Vec<(f64, Point)> = on
                    .iter()
                    .map(|v| {
                        let d = v.sub(&c);
                        (d.dot(&e2).atan2(d.dot(&e1)), (*v).clone())
                    })
                    .collect();
                with_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
                with_angle.into_iter().map(|(_, v)| v).collect()
            }
        };
        let face = Face { halfspace: h.clone(), vertices: ordered };
        if n == 3 && face_measure(&face, 3) < 1e-14 {
            continue;
        }
        faces.push(face);
    }
    faces
}

/// Orthonormal basis of the plane orthogonal to the unit vector `a` (n = 3).
pub(crate) fn plane_basis(a: &Point) -> (Point, Point) {
    let helper = if a[0].abs() < 0.9 { Point::from([1.0, 0.0, 0.0]) } else { Point::from([0.0, 1.0, 0.0]) };
    let e1 = helper.add_scaled(-helper.dot(a), a).normalized().expect("nonzero");
    let e2 = Point::from([
        a[1] * e1[2] - a[2] * e1[1],
        a[2] * e1[0] - a[0] * e1[2],
        a[0] * e1[1] - a[1] * e1[0],
    ]);
    (e1, e2)
}
