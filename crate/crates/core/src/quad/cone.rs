//! Star-shaped quadrature from an apex: ∫_D f = ∫_{S^{n−1}} ∫_0^{L(u)} f(p + s u) s^{n−1} ds dΩ(u).
//!
//! The radial variable is graded toward the apex according to the declared
//! singularity exponent and toward the far (boundary) end by a fixed power, so
//! integrands of the form |y−p|^{−σ}·δ(y)^{γ} converge at a high algebraic rate.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::rules::{gauss_legendre, Rule};
use crate::error::{Error, Result};
use crate::geometry::{plane_basis, Domain, Point, Shape};

/// Point singularity |y − point|^{−exponent} of an integrand.
#[derive(Clone, Debug)]
pub struct Singularity {
    pub point: Point,
    pub exponent: f64,
}

impl Singularity {
    pub fn new(point: Point, exponent: f64) -> Self {
        Singularity { point, exponent }
    }
}

#[derive(Clone, Debug)]
pub struct InteriorOptions {
    /// Base number of nodes per radial half and per angular unit; doubled per level.
    pub order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Grading power at the far end of each ray.
    pub boundary_power: f64,
}

impl Default for InteriorOptions {
    fn default() -> Self {
        InteriorOptions { order: 12, rel_tol: 1e-6, abs_tol: 1e-13, boundary_power: 3.0 }
    }
}

/// Quadrature value with the difference between the last two refinement levels as error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub levels: usize,
}

#[derive(Clone, Debug)]
enum Apex {
    Interior,
    Boundary(Point),
}

/// 1 − (1−t)³-type map of [−1,1] onto itself with vanishing first and second derivatives at ±1.
#[inline]
fn graded(t: f64) -> (f64, f64) {
    let t2 = t * t;
    let tau = (15.0 * t - 10.0 * t * t2 + 3.0 * t * t2 * t2) / 8.0;
    let d = 15.0 * (1.0 - t2) * (1.0 - t2) / 8.0;
    (tau, d)
}

/// Unit direction in ℝ³ with polar cosine `mu` about `axis` and azimuth `phi`.
fn spherical(axis: &Point, e1: &Point, e2: &Point, mu: f64, phi: f64) -> Point {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    axis.scale(mu).add_scaled(s * phi.cos(), e1).add_scaled(s * phi.sin(), e2)
}

fn vertices_of(domain: &Domain) -> Option<Vec<Point>> {
    match domain.shape() {
        Shape::Ball(_) => None,
        Shape::Box { min, max } => {
            let n = min.dim();
            Some(
                (0..1usize << n)
                    .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { max[k] } else { min[k] }).collect())
                    .collect(),
            )
        }
        Shape::Polytope(p) => Some(p.vertices().to_vec()),
    }
}

/// Angular rule (direction, weight) for the apex `p`.
fn directions(domain: &Domain, p: &Point, apex: &Apex, m: usize) -> Result<Vec<(Point, f64)>> {
    let n = domain.dim();
    match n {
        1 => Ok(match apex {
            Apex::Interior => vec![(Point::from([1.0]), 1.0), (Point::from([-1.0]), 1.0)],
            Apex::Boundary(u) => vec![(u.clone(), 1.0)],
        }),
        2 => {
            let gl = gauss_legendre(m);
            let mut out = Vec::new();
            let sector = |a: f64, b: f64, out: &mut Vec<(Point, f64)>| {
                let h = 0.5 * (b - a);
                let c = 0.5 * (a + b);
                for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                    let (tau, d) = graded(*t);
                    let th = c + h * tau;
                    out.push((Point::from([th.cos(), th.sin()]), w * h * d));
                }
            };
            match (vertices_of(domain), apex) {
                (None, Apex::Interior) => {
                    let k = 4 * m;
                    for i in 0..k {
                        let th = 2.0 * PI * i as f64 / k as f64;
                        out.push((Point::from([th.cos(), th.sin()]), 2.0 * PI / k as f64));
                    }
                }
                (None, Apex::Boundary(u)) => {
                    let th = u[1].atan2(u[0]);
                    sector(th - PI / 2.0, th + PI / 2.0, &mut out);
                }
                (Some(verts), _) => {
                    let tol = 1e-12 * domain.diameter();
                    let mut angles: Vec<f64> = verts
                        .iter()
                        .filter(|v| v.dist(p) > tol)
                        .map(|v| (v[1] - p[1]).atan2(v[0] - p[0]))
                        .collect();
                    angles.sort_by(|a, b| a.total_cmp(b));
                    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
                    let k = angles.len();
                    for i in 0..k {
                        let a = angles[i];
                        let b = if i + 1 < k { angles[i + 1] } else { angles[0] + 2.0 * PI };
                        if b - a < 1e-14 {
                            continue;
                        }
                        let mid = 0.5 * (a + b);
                        let u = Point::from([mid.cos(), mid.sin()]);
                        if domain.ray_exit(p, &u) > tol && inside_cone(domain, p, &u, apex) {
                            sector(a, b, &mut out);
                        }
                    }
                }
            }
            Ok(out)
        }
        3 if vertices_of(domain).is_some() => Ok(pyramid_directions(domain, p, m)),
        3 => {
            let gl = gauss_legendre(m);
            let nphi = 2 * m;
            let (axis, lo) = match apex {
                Apex::Interior => (Point::from([0.0, 0.0, 1.0]), -1.0),
                Apex::Boundary(u) => (u.clone(), 0.0),
            };
            let (e1, e2) = plane_basis(&axis);
            let mut out = Vec::with_capacity(m * nphi);
            for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                let (mu, wmu) = if lo == 0.0 {
                    // μ = v³ removes the tangential endpoint behaviour at μ = 0.
                    let v = 0.5 * (t + 1.0);
                    (v * v * v, 0.5 * w * 3.0 * v * v)
                } else {
                    (*t, *w)
                };
                for j in 0..nphi {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
                    let u = spherical(&axis, &e1, &e2, mu, phi);
                    out.push((u, wmu * 2.0 * PI / nphi as f64));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("singular quadrature needs n <= 3, got n = {n}"))),
    }
}

/// Faces of a 3-d box or polytope as cyclically ordered vertex lists.
fn faces_3d(domain: &Domain) -> Vec<Vec<Point>> {
    match domain.shape() {
        Shape::Ball(_) => Vec::new(),
        Shape::Box { min, max } => {
            let mut out = Vec::new();
            for axis in 0..3 {
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                for side in [min[axis], max[axis]] {
                    let corner = |ua: f64, ub: f64| {
                        let mut c = Point::zeros(3);
                        c[axis] = side;
                        c[a] = ua;
                        c[b] = ub;
                        c
                    };
                    out.push(vec![
                        corner(min[a], min[b]),
                        corner(max[a], min[b]),
                        corner(max[a], max[b]),
                        corner(min[a], max[b]),
                    ]);
                }
            }
            out
        }
        Shape::Polytope(p) => p.faces().iter().map(|f| f.vertices.clone()).collect(),
    }
}

/// Directions through a collapsed Gauss rule on every face triangle (fan from
/// the face centroid). The weight h·dA/|q−p|³ turns the ray integral into the
/// cone volume integral, so the ray length is smooth on each triangle.
fn pyramid_directions(domain: &Domain, p: &Point, m: usize) -> Vec<(Point, f64)> {
    let gl = gauss_legendre(m);
    let tol = 1e-12 * domain.diameter();
    let mut out = Vec::new();
    for face in faces_3d(domain) {
        let k = face.len();
        if k < 3 {
            continue;
        }
        let mut c = Point::zeros(3);
        for v in &face {
            c = c.add_scaled(1.0 / k as f64, v);
        }
        for i in 0..k {
            let (a, b) = (&face[i], &face[(i + 1) % k]);
            let e1 = a.sub(&c);
            let e2 = b.sub(&c);
            let nrm = cross(&e1, &e2);
            let area2 = nrm.norm();
            if area2 < tol * tol {
                continue;
            }
            let nhat = nrm.scale(1.0 / area2);
            let h = c.sub(p).dot(&nhat).abs();
            if h < tol {
                continue;
            }
            for (t1, w1) in gl.nodes.iter().zip(&gl.weights) {
                let xi = 0.5 * (t1 + 1.0);
                for (t2, w2) in gl.nodes.iter().zip(&gl.weights) {
                    let eta = 0.5 * (t2 + 1.0);
                    // q = c + ξ(e1 + η(e2 − e1)), dA = |e1×e2| ξ dξ dη.
                    let q = c.add_scaled(xi * (1.0 - eta), &e1).add_scaled(xi * eta, &e2);
                    let d = q.sub(p);
                    let l = d.norm();
                    let w = 0.25 * w1 * w2 * area2 * xi * h / (l * l * l);
                    out.push((d.scale(1.0 / l), w));
                }
            }
        }
    }
    out
}

fn cross(a: &Point, b: &Point) -> Point {
    Point::from([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
}

fn inside_cone(domain: &Domain, p: &Point, u: &Point, apex: &Apex) -> bool {
    match apex {
        Apex::Interior => true,
        Apex::Boundary(_) => {
            let probe = p.add_scaled(1e-9 * domain.diameter(), u);
            domain.dist_to_boundary(&probe) > 0.0
        }
    }
}

/// Number of geometric panels on the near half, chosen so that 4^{−J n} ≈ 6e-8.
fn panel_count(n: usize) -> usize {
    12usize.div_ceil(n)
}

/// ∫_0^L g(s) s^{n−1} ds for g ~ s^{−σ} at 0, with grading power `k` at L.
///
/// For σ ≠ 0 the near half is split into geometric panels of ratio 1/4; the
/// innermost panel uses s = ε v^q with q = 1/(n − σ).
#[inline]
fn radial<G: Fn(f64) -> f64>(g: G, n: usize, l: f64, sigma: f64, k: f64, gl: &Rule) -> f64 {
    if !(l > 0.0) {
        return 0.0;
    }
    let h = 0.5 * l;
    let nm1 = n as i32 - 1;
    let mut acc = 0.0;
    let panels = if sigma == 0.0 { 0 } else { panel_count(n) };
    let eps = h * 0.25f64.powi(panels as i32);
    let q = if sigma == 0.0 { 1.0 } else { 1.0 / (n as f64 - sigma) };
    for (t, w) in gl.nodes.iter().zip(&gl.weights) {
        let v = 0.5 * (t + 1.0);
        let w = 0.5 * w;
        let s = eps * v.powf(q);
        let ds = eps * q * v.powf(q - 1.0);
        acc += w * g(s) * s.powi(nm1) * ds;
        let mut hi = h;
        for _ in 0..panels {
            let lo = 0.25 * hi;
            let s = lo + (hi - lo) * v;
            acc += w * (hi - lo) * g(s) * s.powi(nm1);
            hi = lo;
        }
        // Far half: s = L − h (1−v)^k.
        let om = 1.0 - v;
        let s = l - h * om.powf(k);
        let ds = h * k * om.powf(k - 1.0);
        acc += w * g(s) * s.powi(nm1) * ds;
    }
    acc
}

/// ∫ over {p + s u : 0 < s < min(L(u), cap)} of `f` with apex exponent `sigma`.
pub(crate) fn star_integral<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    p: &Point,
    cap: f64,
    f: &F,
    sigma: f64,
    m: usize,
    k: f64,
) -> Result<f64> {
    let n = domain.dim();
    let d = domain.dist_to_boundary(p);
    let tol = domain.boundary_tol().max(1e-14);
    let apex = if d.abs() <= tol {
        Apex::Boundary(domain.inward_direction(p)?)
    } else if d > 0.0 {
        Apex::Interior
    } else {
        return Err(Error::NotInterior(p.clone()));
    };
    if sigma >= n as f64 {
        return Err(Error::InvalidArgument(format!(
            "singularity exponent {sigma} is not integrable in dimension {n}"
        )));
    }
    let dirs = directions(domain, p, &apex, m)?;
    let gl = gauss_legendre(m);
    let parts: Vec<f64> = dirs
        .par_iter()
        .map(|(u, w)| {
            let exit = domain.ray_exit(p, u);
            let (l, kk) = if cap < exit { (cap, 1.0) } else { (exit, k) };
            w * radial(|s| f(&p.add_scaled(s, u)), n, l, sigma, kk, &gl)
        })
        .collect();
    Ok(parts.iter().sum())
}

fn merge_singularities(domain: &Domain, sing: &[Singularity]) -> Vec<Singularity> {
    let mut out: Vec<Singularity> = Vec::new();
    let tol = domain.boundary_tol().max(1e-14);
    for s in sing {
        if domain.dist_to_boundary(&s.point) < -tol {
            continue;
        }
        if let Some(t) = out.iter_mut().find(|t| t.point.dist(&s.point) <= 1e-14 * (1.0 + s.point.norm())) {
            t.exponent += s.exponent;
        } else {
            out.push(s.clone());
        }
    }
    out
}

fn evaluate_level<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    f: &F,
    sing: &[Singularity],
    m: usize,
    k: f64,
) -> Result<f64> {
    if sing.is_empty() {
        return star_integral(domain, domain.center(), f64::INFINITY, f, 0.0, m, k);
    }
    if sing.len() == 1 {
        return star_integral(domain, &sing[0].point, f64::INFINITY, f, sing[0].exponent, m, k);
    }
    let mut total = 0.0;
    for s in sing {
        let chi = |y: &Point| {
            let wi = y.dist_sq(&s.point).powi(-4);
            if !wi.is_finite() {
                return f(y);
            }
            let mut sum = 0.0;
            for t in sing {
                let wt = y.dist_sq(&t.point).powi(-4);
                if !wt.is_finite() {
                    return 0.0;
                }
                sum += wt;
            }
            let fy = f(y);
            if fy == 0.0 {
                0.0
            } else {
                wi / sum * fy
            }
        };
        total += star_integral(domain, &s.point, f64::INFINITY, &chi, s.exponent, m, k)?;
    }
    Ok(total)
}

/// ∫_D f(y) dy for integrands with optional point singularities (n ≤ 3).
///
/// Doubles the order from m until two successive levels agree (at most 16m,
/// or 8m in three dimensions) and reports the last difference as the error.
pub fn integrate_interior<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    f: F,
    singular: &[Singularity],
    opts: &InteriorOptions,
) -> Result<QuadResult> {
    for s in singular {
        if s.point.dim() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: s.point.dim() });
        }
    }
    let sing = merge_singularities(domain, singular);
    let m = opts.order.max(2);
    let k = opts.boundary_power;
    let mut prev = evaluate_level(domain, &f, &sing, m, k)?;
    let mut last = prev;
    let max_level = if domain.dim() == 3 { 3 } else { 4 };
    for level in 1..=max_level {
        last = evaluate_level(domain, &f, &sing, m << level, k)?;
        let err = (last - prev).abs();
        if err <= opts.abs_tol.max(opts.rel_tol * last.abs()) {
            return Ok(QuadResult { value: last, error: err, levels: level + 1 });
        }
        if level == max_level {
            break;
        }
        prev = last;
    }
    Err(Error::QuadratureNonConvergence { last, previous: prev })
}

#[derive(Clone, Debug)]
pub struct ExteriorOptions {
    /// Decay exponent p with |f(z)| ≲ |z|^{−p} at infinity; must exceed n.
    pub decay: f64,
    /// Exponent γ of an integrable blow-up dist(z, ∂D)^{−γ} at the boundary, γ < 1.
    pub boundary_exponent: f64,
    /// Truncation radius measured from the domain center; `None` means 10·diam(D).
    pub radius: Option<f64>,
    /// Largest admissible analytic tail remainder.
    pub tail_tol: f64,
    pub order: usize,
}

impl ExteriorOptions {
    pub fn new(decay: f64) -> Self {
        ExteriorOptions { decay, boundary_exponent: 0.0, radius: None, tail_tol: f64::INFINITY, order: 16 }
    }
}

/// Value of an exterior integral with its certified analytic tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExteriorResult {
    /// Finite part plus the analytic tail estimate.
    pub value: f64,
    /// Quadrature error estimate of the finite part (difference of two orders).
    pub error: f64,
    /// Magnitude of the analytic tail beyond the truncation radius.
    pub remainder: f64,
    pub radius: f64,
}

/// ∫_{D^c} f(z) dz: graded quadrature from ∂D out to R, then the power-law tail
/// f(c+Ru) Rⁿ/(p−n) per direction.
pub fn integrate_exterior_tail<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    f: F,
    opts: &ExteriorOptions,
) -> Result<ExteriorResult> {
    let n = domain.dim();
    if !(opts.decay > n as f64) {
        return Err(Error::InvalidArgument(format!(
            "decay exponent {} must exceed the dimension {n}",
            opts.decay
        )));
    }
    if !(opts.boundary_exponent < 1.0) {
        return Err(Error::InvalidArgument("boundary exponent must be < 1".into()));
    }
    let mut radius = opts.radius.unwrap_or(10.0 * domain.diameter());
    for attempt in 0..4 {
        let lo = exterior_level(domain, &f, opts, radius, opts.order)?;
        let hi = exterior_level(domain, &f, opts, radius, 2 * opts.order)?;
        let remainder = hi.2.abs();
        if remainder <= opts.tail_tol {
            return Ok(ExteriorResult {
                value: hi.0 + hi.1,
                error: (hi.0 + hi.1 - lo.0 - lo.1).abs(),
                remainder,
                radius,
            });
        }
        if attempt == 3 || opts.radius.is_some() {
            return Err(Error::TailRemainder { remainder, tolerance: opts.tail_tol, radius });
        }
        radius *= 10.0;
    }
    unreachable!()
}

/// (finite part, tail integral, leading-order tail) at one order. The tail
/// ∫_R^∞ uses s = R v^{−1/(p−n)}, which makes a pure power law constant in v.
fn exterior_level<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    f: &F,
    opts: &ExteriorOptions,
    radius: f64,
    m: usize,
) -> Result<(f64, f64, f64)> {
    let n = domain.dim();
    let c = domain.center();
    let dirs = directions(domain, c, &Apex::Interior, m.max(4) / 2)?;
    let gl = gauss_legendre(m);
    let q = 1.0 / (1.0 - opts.boundary_exponent);
    let p = opts.decay;
    let parts: Vec<(f64, f64, f64)> = dirs
        .par_iter()
        .map(|(u, w)| {
            let l = domain.ray_exit(c, u);
            let ell = l.min(radius - l).max(0.0);
            let mut acc = 0.0;
            // [L, L + ℓ]: s = L + ℓ v^q.
            for (t, wt) in gl.nodes.iter().zip(&gl.weights) {
                let v = 0.5 * (t + 1.0);
                let s = l + ell * v.powf(q);
                let ds = ell * q * v.powf(q - 1.0);
                acc += 0.5 * wt * f(&c.add_scaled(s, u)) * s.powi(n as i32 - 1) * ds;
            }
            // [L + ℓ, R]: s = (L + ℓ) e^τ, unit-length panels in τ.
            let s0 = l + ell;
            if radius > s0 {
                let span = (radius / s0).ln();
                let panels = span.ceil().max(1.0) as usize;
                let hpan = span / panels as f64;
                for j in 0..panels {
                    let a = j as f64 * hpan;
                    acc += gl.integrate(a, a + hpan, |tau| {
                        let s = s0 * tau.exp();
                        f(&c.add_scaled(s, u)) * s.powi(n as i32)
                    });
                }
            }
            let k = p - n as f64;
            let lead = f(&c.add_scaled(radius, u)) * radius.powi(n as i32) / k;
            let tail = gl.integrate(0.0, 1.0, |v| {
                let s = radius * v.powf(-1.0 / k);
                f(&c.add_scaled(s, u)) * s.powi(n as i32) / (k * v)
            });
            (w * acc, w * tail, w * lead)
        })
        .collect();
    Ok(parts.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sphere_area, Domain};

    #[test]
    fn volumes() {
        let opts = InteriorOptions::default();
        let b = Domain::unit_ball(2);
        let r = integrate_interior(&b, |_| 1.0, &[], &opts).unwrap();
        assert!((r.value - PI).abs() < 1e-10);
        let sq = Domain::boxed(Point::from([0.0, 0.0]), Point::from([2.0, 1.0])).unwrap();
        let r = integrate_interior(&sq, |_| 1.0, &[], &opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
        let r = integrate_interior(&Domain::unit_ball(3), |_| 1.0, &[], &opts).unwrap();
        assert!((r.value - 4.0 * PI / 3.0).abs() < 1e-9);
        let r = integrate_interior(&Domain::unit_cube(3), |_| 1.0, &[], &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn riesz_kernel_over_ball() {
        for (n, a) in [(2usize, 1.0), (3, 1.5), (2, 0.5), (1, 0.5)] {
            let b = Domain::unit_ball(n);
            let sig = n as f64 - a;
            let r = integrate_interior(
                &b,
                |y: &Point| y.norm().powf(a - n as f64),
                &[Singularity::new(Point::zeros(n), sig)],
                &InteriorOptions::default(),
            )
            .unwrap();
            let want = sphere_area(n) / a;
            assert!((r.value / want - 1.0).abs() < 1e-9, "n={n}: {} vs {want}", r.value);
        }
    }

    #[test]
    fn singularity_at_boundary_and_two_poles() {
        // ∫_B |y − z|^{−1} over the unit disk with z on the circle equals 4.
        let b = Domain::unit_ball(2);
        let z = Point::from([1.0, 0.0]);
        let r = integrate_interior(&b, |y: &Point| 1.0 / y.dist(&z), &[Singularity::new(z.clone(), 1.0)], &Default::default())
            .unwrap();
        assert!((r.value - 4.0).abs() < 1e-6, "{}", r.value);
        // Sum of two poles integrates as the sum of the separate integrals.
        let x = Point::from([-0.3, 0.2]);
        let both = integrate_interior(
            &b,
            |y: &Point| 1.0 / y.dist(&z) + 1.0 / y.dist(&x),
            &[Singularity::new(z.clone(), 1.0), Singularity::new(x.clone(), 1.0)],
            &Default::default(),
        )
        .unwrap();
        let single = integrate_interior(&b, |y: &Point| 1.0 / y.dist(&x), &[Singularity::new(x.clone(), 1.0)], &Default::default())
            .unwrap();
        assert!((both.value - 4.0 - single.value).abs() < 1e-5, "{} {}", both.value, single.value);
    }

    #[test]
    fn polytope_sector_rule_is_exact_for_constants() {
        let tri = Domain::polytope(&[
            (Point::from([0.0, -1.0]), 0.0),
            (Point::from([-1.0, 0.0]), 0.0),
            (Point::from([1.0, 1.0]), 1.0),
        ])
        .unwrap();
        let r = integrate_interior(&tri, |_| 1.0, &[], &Default::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9, "{}", r.value);
        // Apex at a corner.
        let r = integrate_interior(
            &tri,
            |y: &Point| y.norm().powf(-0.5),
            &[Singularity::new(Point::zeros(2), 0.5)],
            &Default::default(),
        )
        .unwrap();
        let want = crate::quad::rules::adaptive(
            |th: f64| {
                let l = 1.0 / (th.cos() + th.sin());
                l.powf(1.5) / 1.5
            },
            0.0,
            PI / 2.0,
            1e-14,
            1e-13,
        )
        .value;
        assert!((r.value - want).abs() < 1e-8, "{} vs {want}", r.value);
    }

    #[test]
    fn exterior_power_tail() {
        let d = Domain::ball(Point::zeros(2), 10.0).unwrap();
        let r = integrate_exterior_tail(&d, |z: &Point| z.norm().powi(-3), &ExteriorOptions::new(3.0)).unwrap();
        assert!((r.value - 2.0 * PI / 10.0).abs() < 1e-10, "{:?}", r);
        let z = integrate_exterior_tail(&d, |_| 0.0, &ExteriorOptions::new(3.0)).unwrap();
        assert_eq!(z.value, 0.0);
    }
}
