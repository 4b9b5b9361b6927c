//! Computational domains: balls, boxes and convex polytopes, with the geometric
//! queries the samplers and quadratures need.

mod point;
mod polytope;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConstants;

pub use point::Point;
pub use polytope::{Face, Halfspace, Polytope};
pub(crate) use polytope::{face_measure, plane_basis, triangle_area};

/// Dimension `n ≥ 1` and stability index `α ∈ (0, 2)`, together with the kernel
/// constants they determine.
#[derive(Clone, Debug, PartialEq)]
pub struct StableIndex {
    n: usize,
    alpha: f64,
    consts: KernelConstants,
}

impl StableIndex {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidIndex("dimension n must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidIndex(format!(
                "alpha = {alpha} must lie in the open interval (0, 2)"
            )));
        }
        Ok(StableIndex { n, alpha, consts: KernelConstants::new(n, alpha) })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn consts(&self) -> &KernelConstants {
        &self.consts
    }

    /// Whole-space process is transient (`n > α`).
    pub fn is_transient(&self) -> bool {
        (self.n as f64) > self.alpha
    }
}

/// Surface area of the unit sphere S^{n−1} (2 for n = 1).
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// Volume of the unit ball in ℝⁿ.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Open ball B(center, radius).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() || center.dim() == 0 {
            return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
        }
        Ok(BallSpec { center, radius })
    }

    pub fn unit(n: usize) -> Self {
        BallSpec { center: Point::zeros(n), radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Ball-centered, radius-normalized coordinates `(x − c)/r`.
    #[inline]
    pub fn tilde(&self, x: &Point) -> Point {
        x.sub(&self.center).scale(1.0 / self.radius)
    }

    /// Inverse of [`BallSpec::tilde`].
    #[inline]
    pub fn untilde(&self, t: &Point) -> Point {
        self.center.add_scaled(self.radius, t)
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.radius - p.dist(&self.center)
    }

    /// Distance from `p` (inside) along the unit direction `u` to the sphere.
    pub fn ray_exit(&self, p: &Point, u: &Point) -> f64 {
        let d = p.sub(&self.center);
        let b = d.dot(u);
        let c = d.norm_sq() - self.radius * self.radius;
        let disc = (b * b - c).max(0.0);
        (-b + disc.sqrt()).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub enum Shape {
    Ball(BallSpec),
    Box { min: Point, max: Point },
    Polytope(Polytope),
}

/// A bounded domain D ⊂ ℝⁿ with nonempty interior.
#[derive(Clone, Debug)]
pub struct Domain {
    shape: Shape,
    lipschitz: Option<(f64, f64)>,
    spec: DomainSpec,
    center: Point,
    inradius: f64,
    diameter: f64,
}

/// JSON form of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<(f64, f64)>,
    },
    Box {
        min: Vec<f64>,
        max: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<(f64, f64)>,
    },
    Polytope {
        halfspaces: Vec<HalfspaceSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub a: Vec<f64>,
    pub b: f64,
}

impl TryFrom<DomainSpec> for Domain {
    type Error = Error;
    fn try_from(spec: DomainSpec) -> Result<Domain> {
        Domain::from_spec(spec)
    }
}

impl From<Domain> for DomainSpec {
    fn from(d: Domain) -> DomainSpec {
        d.spec
    }
}

impl Serialize for Domain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DomainSpec::deserialize(d)?;
        Domain::from_spec(spec).map_err(serde::de::Error::custom)
    }
}

/// Boundary nodes with positive surface weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryMesh {
    pub nodes: Vec<Point>,
    pub patch_areas: Vec<f64>,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.patch_areas.iter().sum()
    }

    /// Index of the node closest to `p`.
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
}

impl Domain {
    pub fn from_spec(spec: DomainSpec) -> Result<Self> {
        let (shape, lipschitz) = match &spec {
            DomainSpec::Ball { center, radius, lipschitz } => {
                (Shape::Ball(BallSpec::new(Point::new(center), *radius)?), *lipschitz)
            }
            DomainSpec::Box { min, max, lipschitz } => {
                if min.len() != max.len() {
                    return Err(Error::DimensionMismatch { expected: min.len(), got: max.len() });
                }
                if min.is_empty() || min.iter().zip(max).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::InvalidDomain("box needs min < max in every coordinate".into()));
                }
                (Shape::Box { min: Point::new(min), max: Point::new(max) }, *lipschitz)
            }
            DomainSpec::Polytope { halfspaces, lipschitz } => {
                let raw: Vec<(Point, f64)> =
                    halfspaces.iter().map(|h| (Point::new(&h.a), h.b)).collect();
                (Shape::Polytope(Polytope::new(&raw)?), *lipschitz)
            }
        };
        if let Some((r0, a0)) = lipschitz {
            if !(r0 > 0.0 && a0 > 0.0) {
                return Err(Error::InvalidDomain("Lipschitz constants must be positive".into()));
            }
        }
        let (center, inradius, diameter) = match &shape {
            Shape::Ball(b) => (b.center.clone(), b.radius, 2.0 * b.radius),
            Shape::Box { min, max } => {
                let c = min.add(max).scale(0.5);
                let r = (0..min.dim()).map(|k| 0.5 * (max[k] - min[k])).fold(f64::INFINITY, f64::min);
                (c, r, min.dist(max))
            }
            Shape::Polytope(p) => {
                let v = p.vertices();
                let mut diam: f64 = 0.0;
                for i in 0..v.len() {
                    for j in i + 1..v.len() {
                        diam = diam.max(v[i].dist(&v[j]));
                    }
                }
                (p.center().clone(), p.inradius(), diam)
            }
        };
        Ok(Domain { shape, lipschitz, spec, center, inradius, diameter })
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        Self::from_spec(DomainSpec::Ball { center: center.coords().to_vec(), radius, lipschitz: None })
    }

    pub fn unit_ball(n: usize) -> Self {
        Self::ball(Point::zeros(n), 1.0).expect("unit ball is valid")
    }

    pub fn boxed(min: Point, max: Point) -> Result<Self> {
        Self::from_spec(DomainSpec::Box {
            min: min.coords().to_vec(),
            max: max.coords().to_vec(),
            lipschitz: None,
        })
    }

    /// The unit cube [0,1]ⁿ.
    pub fn unit_cube(n: usize) -> Self {
        Self::boxed(Point::zeros(n), Point::from(vec![1.0; n])).expect("unit cube is valid")
    }

    pub fn polytope(halfspaces: &[(Point, f64)]) -> Result<Self> {
        Self::from_spec(DomainSpec::Polytope {
            halfspaces: halfspaces
                .iter()
                .map(|(a, b)| HalfspaceSpec { a: a.coords().to_vec(), b: *b })
                .collect(),
            lipschitz: None,
        })
    }

    pub fn with_lipschitz(mut self, r0: f64, a0: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        match &mut spec {
            DomainSpec::Ball { lipschitz, .. }
            | DomainSpec::Box { lipschitz, .. }
            | DomainSpec::Polytope { lipschitz, .. } => *lipschitz = Some((r0, a0)),
        }
        let d = Self::from_spec(spec)?;
        self = d;
        Ok(self)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn lipschitz_constants(&self) -> Option<(f64, f64)> {
        self.lipschitz
    }

    pub fn as_ball(&self) -> Option<&BallSpec> {
        match &self.shape {
            Shape::Ball(b) => Some(b),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Deepest interior point (ball center, box midpoint, polytope Chebyshev center).
    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Tolerance used to decide that a point lies on ∂D.
    pub fn boundary_tol(&self) -> f64 {
        1e-8 * self.diameter
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        Ok(())
    }

    /// `true` iff `p` lies in the open interior.
    pub fn contains(&self, p: &Point) -> Result<bool> {
        self.check_dim(p)?;
        Ok(self.dist_to_boundary(p) > 0.0)
    }

    /// Signed distance to ∂D: positive inside, negative outside.
    pub fn dist_to_boundary(&self, p: &Point) -> f64 {
        debug_assert_eq!(p.dim(), self.dim());
        match &self.shape {
            Shape::Ball(b) => b.signed_distance(p),
            Shape::Box { min, max } => {
                let mut inner = f64::INFINITY;
                let mut outer = 0.0;
                for k in 0..p.dim() {
                    let lo = p[k] - min[k];
                    let hi = max[k] - p[k];
                    inner = inner.min(lo.min(hi));
                    let ex = (-lo).max(-hi).max(0.0);
                    outer += ex * ex;
                }
                if inner >= 0.0 {
                    inner
                } else {
                    -outer.sqrt()
                }
            }
            Shape::Polytope(poly) => poly.signed_distance(p),
        }
    }

    /// Ball centered at `p` with radius `shrink · δ(p)`.
    pub fn inscribed_ball(&self, p: &Point, shrink: f64) -> Result<BallSpec> {
        if !(shrink > 0.0 && shrink <= 1.0) {
            return Err(Error::InvalidArgument(format!("shrink {shrink} must lie in (0, 1]")));
        }
        if !self.contains(p)? {
            return Err(Error::NotInterior(p.clone()));
        }
        Ok(BallSpec { center: p.clone(), radius: shrink * self.dist_to_boundary(p) })
    }

    /// Distance from the interior point `p` along the unit direction `u` to ∂D.
    pub fn ray_exit(&self, p: &Point, u: &Point) -> f64 {
        match &self.shape {
            Shape::Ball(b) => b.ray_exit(p, u),
            Shape::Box { min, max } => {
                let mut t = f64::INFINITY;
                for k in 0..p.dim() {
                    if u[k] > 0.0 {
                        t = t.min(((max[k] - p[k]) / u[k]).max(0.0));
                    } else if u[k] < 0.0 {
                        t = t.min(((min[k] - p[k]) / u[k]).max(0.0));
                    }
                }
                t
            }
            Shape::Polytope(poly) => poly.ray_exit(p, u),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        match &self.shape {
            Shape::Ball(b) => {
                let n = b.dim();
                let r = Point::from(vec![b.radius; n]);
                (b.center.sub(&r), b.center.add(&r))
            }
            Shape::Box { min, max } => (min.clone(), max.clone()),
            Shape::Polytope(p) => p.bounding_box(),
        }
    }

    /// Lebesgue measure of D (polytopes only for n ≤ 3).
    pub fn volume(&self) -> Option<f64> {
        match &self.shape {
            Shape::Ball(b) => Some(ball_volume(b.dim()) * b.radius.powi(b.dim() as i32)),
            Shape::Box { min, max } => Some((0..min.dim()).map(|k| max[k] - min[k]).product()),
            Shape::Polytope(p) => p.volume(),
        }
    }

    /// Surface measure of ∂D (counting measure for n = 1).
    pub fn surface_area(&self) -> Option<f64> {
        match &self.shape {
            Shape::Ball(b) => {
                let n = b.dim();
                Some(sphere_area(n) * b.radius.powi(n as i32 - 1))
            }
            Shape::Box { min, max } => {
                let n = min.dim();
                let side: Vec<f64> = (0..n).map(|k| max[k] - min[k]).collect();
                Some(
                    (0..n)
                        .map(|k| {
                            2.0 * side.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, s)| s).product::<f64>()
                        })
                        .sum(),
                )
            }
            Shape::Polytope(p) => p.surface_area(),
        }
    }

    /// Image of D under x ↦ c + s(x − c) with c the origin.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("dilation factor must be positive".into()));
        }
        let scale = |v: &Vec<f64>| v.iter().map(|a| a * s).collect::<Vec<_>>();
        let spec = match &self.spec {
            DomainSpec::Ball { center, radius, lipschitz } => {
                DomainSpec::Ball { center: scale(center), radius: radius * s, lipschitz: *lipschitz }
            }
            DomainSpec::Box { min, max, lipschitz } => {
                DomainSpec::Box { min: scale(min), max: scale(max), lipschitz: *lipschitz }
            }
            DomainSpec::Polytope { halfspaces, lipschitz } => DomainSpec::Polytope {
                halfspaces: halfspaces.iter().map(|h| HalfspaceSpec { a: h.a.clone(), b: h.b * s }).collect(),
                lipschitz: *lipschitz,
            },
        };
        Self::from_spec(spec)
    }

    /// Unit inward direction at a boundary point: toward the center for balls,
    /// the normalized sum of active inward face normals otherwise.
    pub fn inward_direction(&self, z: &Point) -> Result<Point> {
        self.check_dim(z)?;
        let tol = self.boundary_tol().max(1e-12);
        let d = self.dist_to_boundary(z);
        if d.abs() > tol {
            return Err(Error::NotOnBoundary { point: z.clone(), distance: d });
        }
        let dir = match &self.shape {
            Shape::Ball(b) => b.center.sub(z),
            Shape::Box { min, max } => {
                let mut v = Point::zeros(z.dim());
                for k in 0..z.dim() {
                    if (z[k] - min[k]).abs() <= tol {
                        v[k] += 1.0;
                    }
                    if (max[k] - z[k]).abs() <= tol {
                        v[k] -= 1.0;
                    }
                }
                v
            }
            Shape::Polytope(p) => {
                let mut v = Point::zeros(z.dim());
                for h in p.active(z, tol) {
                    v = v.add_scaled(-1.0, &h.normal);
                }
                v
            }
        };
        dir.normalized()
            .ok_or_else(|| Error::Degenerate(format!("no inward direction at {z:?}")))
    }

    /// Points `z + t0·2^{−k}·u`, k = 0..count, along the inward direction `u`.
    pub fn approach_sequence(&self, z: &Point, t0: f64, count: usize) -> Result<Vec<Point>> {
        if !(t0 > 0.0 && t0 < self.inradius) {
            return Err(Error::InvalidArgument(format!(
                "t0 = {t0} must lie in (0, inradius = {})",
                self.inradius
            )));
        }
        let u = self.inward_direction(z)?;
        let mut out = Vec::with_capacity(count);
        let mut t = t0;
        for level in 0..count {
            let y = z.add_scaled(t, &u);
            if !(self.dist_to_boundary(&y) > 0.0) {
                return Err(Error::ApproachEscapes { level });
            }
            out.push(y);
            t *= 0.5;
        }
        Ok(out)
    }

    /// Quasi-uniform boundary nodes with surface weights.
    pub fn boundary_mesh(&self, resolution: usize) -> Result<BoundaryMesh> {
        if resolution < 4 {
            return Err(Error::ResolutionTooSmall { got: resolution, min: 4 });
        }
        let n = self.dim();
        match &self.shape {
            Shape::Ball(b) => ball_boundary_mesh(b, resolution),
            Shape::Box { min, max } => Ok(box_boundary_mesh(min, max, resolution)),
            Shape::Polytope(p) => {
                if n > 3 {
                    return Err(Error::Unsupported("polytope boundary meshes need n <= 3".into()));
                }
                Ok(polytope_boundary_mesh(p, resolution))
            }
        }
    }
}

fn ball_boundary_mesh(b: &BallSpec, res: usize) -> Result<BoundaryMesh> {
    let n = b.dim();
    let r = b.radius;
    let dirs: Vec<Point> = match n {
        1 => vec![Point::from([-1.0]), Point::from([1.0])],
        2 => (0..res)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / res as f64;
                Point::from([t.cos(), t.sin()])
            })
            .collect(),
        3 => fibonacci_sphere(res * res),
        _ => return Err(Error::Unsupported("ball boundary meshes need n <= 3".into())),
    };
    let w = if n == 1 { 1.0 } else { sphere_area(n) * r.powi(n as i32 - 1) / dirs.len() as f64 };
    Ok(BoundaryMesh {
        patch_areas: vec![w; dirs.len()],
        nodes: dirs.iter().map(|u| b.untilde(u)).collect(),
    })
}

/// Fibonacci lattice of `m` nearly equal-area points on S².
pub fn fibonacci_sphere(m: usize) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Point::from([s * phi.cos(), s * phi.sin(), z])
        })
        .collect()
}

fn box_boundary_mesh(min: &Point, max: &Point, res: usize) -> BoundaryMesh {
    let n = min.dim();
    let mut nodes = Vec::new();
    let mut areas = Vec::new();
    if n == 1 {
        return BoundaryMesh { nodes: vec![min.clone(), max.clone()], patch_areas: vec![1.0, 1.0] };
    }
    for k in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != k).collect();
        let cell: f64 = others.iter().map(|&j| (max[j] - min[j]) / res as f64).product();
        let total = res.pow(others.len() as u32);
        for side in [min[k], max[k]] {
            for flat in 0..total {
                let mut p = Point::zeros(n);
                p[k] = side;
                let mut rem = flat;
                for &j in &others {
                    let i = rem % res;
                    rem /= res;
                    p[j] = min[j] + (i as f64 + 0.5) * (max[j] - min[j]) / res as f64;
                }
                nodes.push(p);
                areas.push(cell);
            }
        }
    }
    BoundaryMesh { nodes, patch_areas: areas }
}

fn polytope_boundary_mesh(p: &Polytope, res: usize) -> BoundaryMesh {
    let n = p.dim();
    let mut nodes = Vec::new();
    let mut areas = Vec::new();
    match n {
        1 => {
            for f in p.faces() {
                nodes.push(f.vertices[0].clone());
                areas.push(1.0);
            }
        }
        2 => {
            let longest = p.faces().iter().map(|f| face_measure(f, 2)).fold(0.0, f64::max);
            for f in p.faces() {
                let len = face_measure(f, 2);
                let pieces = ((res as f64 * len / longest).ceil() as usize).max(1);
                let (a, b) = (&f.vertices[0], &f.vertices[1]);
                for i in 0..pieces {
                    let t = (i as f64 + 0.5) / pieces as f64;
                    nodes.push(a.add_scaled(t, &b.sub(a)));
                    areas.push(len / pieces as f64);
                }
            }
        }
        _ => {
            for f in p.faces() {
                let v0 = &f.vertices[0];
                for w in f.vertices.windows(2).skip(1) {
                    subdivide_triangle(v0, &w[0], &w[1], res, &mut nodes, &mut areas);
                }
            }
        }
    }
    BoundaryMesh { nodes, patch_areas: areas }
}

/// Splits a triangle into `m²` congruent pieces and records their centroids and areas.
fn subdivide_triangle(a: &Point, b: &Point, c: &Point, m: usize, nodes: &mut Vec<Point>, areas: &mut Vec<f64>) {
    let area = triangle_area(a, b, c) / (m * m) as f64;
    let e1 = b.sub(a).scale(1.0 / m as f64);
    let e2 = c.sub(a).scale(1.0 / m as f64);
    let at = |i: f64, j: f64| a.add_scaled(i, &e1).add_scaled(j, &e2);
    for i in 0..m {
        for j in 0..m - i {
            let (fi, fj) = (i as f64, j as f64);
            nodes.push(at(fi + 1.0 / 3.0, fj + 1.0 / 3.0));
            areas.push(area);
            if i + j + 1 < m {
                nodes.push(at(fi + 2.0 / 3.0, fj + 2.0 / 3.0));
                areas.push(area);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_index_validation() {
        assert!(StableIndex::new(2, 1.0).is_ok());
        assert!(StableIndex::new(2, 2.0).is_err());
        assert!(StableIndex::new(2, 0.0).is_err());
        assert!(StableIndex::new(0, 1.0).is_err());
        assert!(StableIndex::new(1, f64::NAN).is_err());
    }

    #[test]
    fn contains_examples() {
        let b = Domain::unit_ball(3);
        assert!(b.contains(&Point::zeros(3)).unwrap());
        assert!(!b.contains(&Point::unit(3, 0)).unwrap());
        let sq = Domain::unit_cube(2);
        assert!(!sq.contains(&Point::from([0.5, 2.0])).unwrap());
        assert!(sq.contains(&Point::from([0.5])).is_err());
    }

    #[test]
    fn distance_examples() {
        let b = Domain::unit_ball(2);
        assert_eq!(b.dist_to_boundary(&Point::zeros(2)), 1.0);
        assert_eq!(b.dist_to_boundary(&Point::from([2.0, 0.0])), -1.0);
        let sq = Domain::unit_cube(2);
        assert_eq!(sq.dist_to_boundary(&Point::from([0.25, 0.5])), 0.25);
        assert!((sq.dist_to_boundary(&Point::from([2.0, 2.0])) + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inscribed_ball_examples() {
        let b = Domain::unit_ball(2);
        let ib = b.inscribed_ball(&Point::zeros(2), 1.0).unwrap();
        assert_eq!(ib.radius, 1.0);
        assert_eq!(b.inscribed_ball(&Point::from([0.5, 0.0]), 1.0).unwrap().radius, 0.5);
        let sq = Domain::unit_cube(2);
        assert_eq!(sq.inscribed_ball(&Point::from([0.5, 0.5]), 0.5).unwrap().radius, 0.25);
        assert!(matches!(
            sq.inscribed_ball(&Point::from([1.5, 0.5]), 0.5),
            Err(Error::NotInterior(_))
        ));
    }

    #[test]
    fn boundary_mesh_examples() {
        let m = Domain::unit_ball(2).boundary_mesh(8).unwrap();
        assert_eq!(m.len(), 8);
        for (k, (p, a)) in m.nodes.iter().zip(&m.patch_areas).enumerate() {
            let t = 2.0 * PI * k as f64 / 8.0;
            assert!(p.dist(&Point::from([t.cos(), t.sin()])) < 1e-15);
            assert!((a - 2.0 * PI / 8.0).abs() < 1e-15);
        }
        let s = Domain::unit_ball(3).boundary_mesh(12).unwrap();
        assert!((s.total_area() - 4.0 * PI).abs() < 0.01 * 4.0 * PI);
        for p in &s.nodes {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        let sq = Domain::unit_cube(2).boundary_mesh(5).unwrap();
        assert!((sq.total_area() - 4.0).abs() < 1e-12);
        let one = Domain::unit_ball(1).boundary_mesh(4).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one.total_area(), 2.0);
        assert!(Domain::unit_ball(2).boundary_mesh(3).is_err());
    }

    #[test]
    fn polytope_mesh_areas() {
        let tri = Domain::polytope(&[
            (Point::from([0.0, -1.0]), 0.0),
            (Point::from([-1.0, 0.0]), 0.0),
            (Point::from([1.0, 1.0]), 1.0),
        ])
        .unwrap();
        let m = tri.boundary_mesh(6).unwrap();
        assert!((m.total_area() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        for p in &m.nodes {
            assert!(tri.dist_to_boundary(p).abs() < 1e-12);
        }
        let mut hs = Vec::new();
        for k in 0..3 {
            hs.push((Point::unit(3, k), 1.0));
            hs.push((Point::unit(3, k).scale(-1.0), 0.0));
        }
        let cube = Domain::polytope(&hs).unwrap();
        let m = cube.boundary_mesh(4).unwrap();
        assert!((m.total_area() - 6.0).abs() < 1e-12);
        assert!((cube.volume().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn approach_sequence_examples() {
        let b = Domain::unit_ball(2);
        let seq = b.approach_sequence(&Point::from([1.0, 0.0]), 0.5, 3).unwrap();
        let expect = [0.5, 0.75, 0.875];
        for (p, e) in seq.iter().zip(expect) {
            assert!(p.dist(&Point::from([e, 0.0])) < 1e-15);
        }
        let sq = Domain::unit_cube(2);
        let seq = sq.approach_sequence(&Point::from([0.5, 0.0]), 0.25, 4).unwrap();
        for p in &seq {
            assert_eq!(p[0], 0.5);
        }
        let seq = sq.approach_sequence(&Point::from([0.0, 0.0]), 0.2, 6).unwrap();
        for p in &seq {
            assert!((p[0] - p[1]).abs() < 1e-15 && sq.contains(p).unwrap());
        }
        assert!(matches!(
            b.approach_sequence(&Point::from([0.5, 0.0]), 0.1, 2),
            Err(Error::NotOnBoundary { .. })
        ));
        assert!(b.approach_sequence(&Point::from([1.0, 0.0]), 1.5, 2).is_err());
    }

    #[test]
    fn domain_json_round_trip() {
        let js = r#"{"type":"polytope","halfspaces":[{"a":[1,0],"b":1},{"a":[-1,0],"b":1},{"a":[0,1],"b":1},{"a":[0,-1],"b":1}]}"#;
        let d: Domain = serde_json::from_str(js).unwrap();
        assert!((d.inradius() - 1.0).abs() < 1e-12);
        let back = serde_json::to_string(&d).unwrap();
        let again: Domain = serde_json::from_str(&back).unwrap();
        assert_eq!(again.spec(), d.spec());
        let bad = r#"{"type":"ball","center":[0,0],"radius":-1}"#;
        assert!(serde_json::from_str::<Domain>(bad).is_err());
    }

    #[test]
    fn sphere_area_values() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
