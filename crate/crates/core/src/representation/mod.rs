//! Integral representations of harmonic and superharmonic functions: exterior
//! harmonic extension, the Green-to-Poisson identity, Martin/Riesz decompositions
//! by nonnegative least squares, and discrete identifiability of exterior data.

mod nnls;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use nnls::nnls;

use crate::error::{Error, Result};
use crate::geometry::{fibonacci_sphere, BallSpec, BoundaryMesh, Domain, Point, StableIndex};
use crate::kernels::{green_ball_unchecked, poisson_ball_unchecked};
use crate::martin::KernelSource;
use crate::quad::{integrate_exterior_tail, integrate_interior, ExteriorOptions, InteriorMesh, InteriorOptions, MeshGreenOperator, Singularity};
use crate::sampler::{harmonic_measure, McEstimate, RngStream, TestFunction, WosOptions};

/// Nonnegative weights on the nodes of a boundary mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteBoundaryMeasure {
    pub mesh: BoundaryMesh,
    pub weights: Vec<f64>,
}

impl DiscreteBoundaryMeasure {
    pub fn new(mesh: BoundaryMesh, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != mesh.len() {
            return Err(Error::InvalidArgument(format!("{} weights for {} nodes", weights.len(), mesh.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weight {w} is not a finite nonnegative number")));
        }
        Ok(DiscreteBoundaryMeasure { mesh, weights })
    }

    /// Surface measure: weights equal to the patch areas.
    pub fn surface(mesh: BoundaryMesh) -> Self {
        let weights = mesh.patch_areas.clone();
        DiscreteBoundaryMeasure { mesh, weights }
    }

    /// a·δ_{z_j}.
    pub fn point_mass(mesh: BoundaryMesh, j: usize, a: f64) -> Result<Self> {
        let mut w = vec![0.0; mesh.len()];
        *w.get_mut(j).ok_or_else(|| Error::InvalidArgument(format!("node {j} out of range")))? = a;
        Self::new(mesh, w)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ExtensionMethod {
    /// Deterministic quadrature against the closed-form Poisson kernel (balls).
    BallQuadrature,
    MonteCarlo { n_samples: usize },
}

fn require_ball<'a>(domain: &'a Domain, what: &str) -> Result<&'a BallSpec> {
    domain.as_ball().ok_or_else(|| Error::Unsupported(format!("{what} needs a ball domain")))
}

/// E_x[f(X_{τ_D})] = ∫_{D^c} K_D(x, z) f(z) dz. The quadrature route reports its
/// refinement difference as `std_error`.
pub fn harmonic_extension<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    idx: &StableIndex,
    f_ext: &TestFunction<F>,
    x: &Point,
    method: ExtensionMethod,
    stream: &RngStream,
) -> Result<McEstimate> {
    f_ext.check(idx.alpha())?;
    if !domain.contains(x)? {
        return Err(Error::NotInterior(x.clone()));
    }
    match method {
        ExtensionMethod::MonteCarlo { n_samples } => {
            harmonic_measure(domain, idx, x, f_ext, n_samples, stream, &WosOptions::default())
        }
        ExtensionMethod::BallQuadrature => {
            let b = require_ball(domain, "ball quadrature")?;
            let tx = b.tilde(x).norm();
            let n = idx.n() as f64;
            let opts = ExteriorOptions {
                boundary_exponent: idx.alpha() / 2.0,
                ..ExteriorOptions::new(n + idx.alpha() - f_ext.growth)
            };
            let r = integrate_exterior_tail(
                domain,
                |z: &Point| {
                    let tz = b.tilde(z).norm();
                    if tz <= 1.0 {
                        return 0.0;
                    }
                    poisson_ball_unchecked(idx, b, x, z, tx, tz) * f_ext.eval(z)
                },
                &opts,
            )?;
            Ok(McEstimate { value: r.value, std_error: r.error, n_samples: 0, seed: stream.seed, heavy_tail: false })
        }
    }
}

/// Constant A(n, α) ∫_D G_D(x, y) |y − z|^{−n−α} dy on a ball, by singular quadrature.
pub fn poisson_from_green(domain: &Domain, idx: &StableIndex, x: &Point, z: &Point, order: usize) -> Result<f64> {
    let b = require_ball(domain, "poisson_from_green")?;
    if !domain.contains(x)? {
        return Err(Error::NotInterior(x.clone()));
    }
    check_exterior(domain, z)?;
    let n = idx.n() as f64;
    let p = n + idx.alpha();
    let tx = b.tilde(x).norm();
    let sx = if n == idx.alpha() { 0.5 } else { n - idx.alpha() };
    let r = integrate_interior(
        domain,
        |y: &Point| {
            let ty = b.tilde(y).norm().min(1.0);
            green_ball_unchecked(idx, b, x, y, tx, ty) * y.dist(z).powf(-p)
        },
        &[Singularity::new(x.clone(), sx)],
        &InteriorOptions { order, ..Default::default() },
    )?;
    Ok(idx.consts().levy_const * r.value)
}

/// Mesh version of the identity for node `i` of a Green operator.
pub fn poisson_from_green_mesh(op: &MeshGreenOperator, domain: &Domain, idx: &StableIndex, i: usize, z: &Point) -> Result<f64> {
    check_exterior(domain, z)?;
    if i >= op.len() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    let p = idx.n() as f64 + idx.alpha();
    let s: f64 = (0..op.len()).map(|j| op.matrix[(i, j)] * op.mesh.weights[j] * op.mesh.nodes[j].dist(z).powf(-p)).sum();
    Ok(idx.consts().levy_const * s)
}

fn check_exterior(domain: &Domain, z: &Point) -> Result<()> {
    let d = domain.dist_to_boundary(z);
    if d > -1e-6 {
        return Err(Error::InvalidArgument(format!(
            "exterior point {z:?} must lie farther than 1e-6 outside the domain (signed distance {d:e})"
        )));
    }
    Ok(())
}

/// Interior probes on two shells at depth 0.3 and 0.6 of the inradius, with
/// directions staggered between the shells.
pub fn probe_points(domain: &Domain, count: usize) -> Result<Vec<Point>> {
    let n = domain.dim();
    if count < 2 {
        return Err(Error::InvalidArgument("need at least two probes".into()));
    }
    let per = [count / 2, count - count / 2];
    let mut out = Vec::with_capacity(count);
    for (shell, (&m, depth)) in per.iter().zip([0.3, 0.6]).enumerate() {
        let dirs: Vec<Point> = match n {
            1 => (0..m).map(|k| Point::from([if k % 2 == 0 { 1.0 } else { -1.0 }])).collect(),
            2 => (0..m)
                .map(|k| {
                    let t = 2.0 * PI * (k as f64 + 0.5 * shell as f64 + 0.25) / m as f64;
                    Point::from([t.cos(), t.sin()])
                })
                .collect(),
            _ => fibonacci_sphere(m)
                .into_iter()
                .map(|u| if shell == 1 { Point::from_iter(u.coords().iter().map(|v| -v)) } else { u })
                .collect(),
        };
        let target = depth * domain.inradius();
        for (k, u) in dirs.iter().enumerate() {
            let c = domain.center();
            let l = domain.ray_exit(c, u);
            // δ(c + t u) − target changes sign on [0, L].
            let (mut lo, mut hi) = (0.0, l);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if domain.dist_to_boundary(&c.add_scaled(mid, u)) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut p = c.add_scaled(0.5 * (lo + hi), u);
            if n == 1 {
                // Alternate sides and spread along the segment.
                let frac = (k / 2) as f64 / (m.div_ceil(2)).max(1) as f64;
                p = c.add_scaled((0.5 * (lo + hi)) * (1.0 - 0.5 * frac), u);
            }
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeOptions {
    pub allow_interior_charge: bool,
    /// Interior mesh resolution for the Green columns.
    pub interior_resolution: usize,
    pub extension: ExtensionMethod,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { allow_interior_charge: false, interior_resolution: 4, extension: ExtensionMethod::BallQuadrature }
    }
}

/// Interior charge ν on mesh nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InteriorCharge {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl InteriorCharge {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// f = exterior part + ∫ G_D dν + ∫ M_D dμ at the probes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub probes: Vec<Point>,
    pub exterior_part: Vec<f64>,
    pub exterior_std_errors: Vec<f64>,
    /// f − exterior part at the probes.
    pub singular_part: Vec<f64>,
    pub martin_measure: DiscreteBoundaryMeasure,
    pub interior_charge: Option<InteriorCharge>,
    /// Largest absolute fit residual over the probes.
    pub fit_residual: f64,
}

impl Decomposition {
    /// ∫ M_D(x, ·) dμ + ∫ G_D(x, ·) dν.
    pub fn singular_value(&self, source: &dyn KernelSource, x: &Point) -> Result<f64> {
        let mut s = 0.0;
        for (z, m) in self.martin_measure.mesh.nodes.iter().zip(&self.martin_measure.weights) {
            if *m > 0.0 {
                s += m * source.martin(x, z)?;
            }
        }
        if let Some(c) = &self.interior_charge {
            for (y, m) in c.nodes.iter().zip(&c.weights) {
                if *m > 0.0 {
                    s += m * source.green(x, y)?;
                }
            }
        }
        Ok(s)
    }
}

/// Nonnegative fit of the singular part s = f − E_·[f(X_{τ_D})] at the probes by
/// Martin columns on `mesh` (and Green columns on an interior mesh when allowed).
pub fn decompose<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    idx: &StableIndex,
    f: &TestFunction<F>,
    probes: &[Point],
    mesh: &BoundaryMesh,
    source: &dyn KernelSource,
    opts: &DecomposeOptions,
    stream: &RngStream,
) -> Result<Decomposition> {
    if probes.len() < 2 * mesh.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probes for {} boundary nodes; at least twice as many probes are needed",
            probes.len(),
            mesh.len()
        )));
    }
    for p in probes {
        if !domain.contains(p)? {
            return Err(Error::NotInterior(p.clone()));
        }
    }
    let ext: Vec<McEstimate> = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| harmonic_extension(domain, idx, f, p, opts.extension, &stream.substream(i as u64)))
        .collect::<Result<_>>()?;
    let singular: Vec<f64> = probes.iter().zip(&ext).map(|(p, e)| f.eval(p) - e.value).collect();
    for ((p, s), e) in probes.iter().zip(&singular).zip(&ext) {
        let tol = 3.0 * e.std_error + 1e-9 * f.eval(p).abs();
        if *s < -tol {
            return Err(Error::NegativeSingularPart { probe: p.clone(), value: *s, std_error: e.std_error });
        }
    }
    let interior: Vec<Point> = if opts.allow_interior_charge {
        InteriorMesh::new(domain, opts.interior_resolution)?.nodes
    } else {
        Vec::new()
    };
    let nb = mesh.len();
    let cols = nb + interior.len();
    if cols > probes.len() {
        return Err(Error::RankDeficient);
    }
    let rows: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|x| {
            let mut row = Vec::with_capacity(cols);
            for z in &mesh.nodes {
                row.push(source.martin(x, z)?);
            }
            for y in &interior {
                row.push(source.green(x, y)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let a = DMatrix::from_fn(probes.len(), cols, |i, j| rows[i][j]);
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if !(sv.min() > 1e-14 * smax * probes.len() as f64) {
        return Err(Error::RankDeficient);
    }
    // Tikhonov damping λ = 1e-8 σ_max².
    let lam = 1e-8 * smax * smax;
    let mut aug = DMatrix::zeros(probes.len() + cols, cols);
    aug.view_mut((0, 0), (probes.len(), cols)).copy_from(&a);
    for j in 0..cols {
        aug[(probes.len() + j, j)] = lam.sqrt();
    }
    let mut rhs = DVector::zeros(probes.len() + cols);
    for (i, s) in singular.iter().enumerate() {
        rhs[i] = *s;
    }
    let x = nnls(&aug, &rhs);
    let fit = &a * &x;
    let fit_residual = singular.iter().enumerate().map(|(i, s)| (fit[i] - s).abs()).fold(0.0, f64::max);
    let martin_measure = DiscreteBoundaryMeasure::new(mesh.clone(), x.rows(0, nb).iter().copied().collect())?;
    let interior_charge = opts
        .allow_interior_charge
        .then(|| InteriorCharge { nodes: interior.clone(), weights: x.rows(nb, interior.len()).iter().copied().collect() });
    Ok(Decomposition {
        probes: probes.to_vec(),
        exterior_part: ext.iter().map(|e| e.value).collect(),
        exterior_std_errors: ext.iter().map(|e| e.std_error).collect(),
        singular_part: singular,
        martin_measure,
        interior_charge,
        fit_residual,
    })
}

/// Smallest singular value of the probe × data matrix K_D(x_i, z_j) w_j on a ball.
pub fn exterior_identifiability(
    domain: &Domain,
    idx: &StableIndex,
    data: &[Point],
    weights: &[f64],
    probes: &[Point],
) -> Result<f64> {
    let b = require_ball(domain, "exterior_identifiability")?;
    if data.len() != weights.len() || data.is_empty() {
        return Err(Error::InvalidArgument("one weight per exterior node is required".into()));
    }
    if probes.len() < data.len() {
        return Err(Error::InvalidArgument("need at least as many probes as data nodes".into()));
    }
    for z in data {
        check_exterior(domain, z)?;
    }
    for x in probes {
        if !domain.contains(x)? {
            return Err(Error::NotInterior(x.clone()));
        }
    }
    let a = DMatrix::from_fn(probes.len(), data.len(), |i, j| {
        let (x, z) = (&probes[i], &data[j]);
        poisson_ball_unchecked(idx, b, x, z, b.tilde(x).norm(), b.tilde(z).norm()) * weights[j]
    });
    Ok(a.svd(false, false).singular_values.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martin::BallKernels;

    fn setup(a: f64) -> (Domain, StableIndex, BallKernels) {
        let d = Domain::unit_ball(2);
        let i = StableIndex::new(2, a).unwrap();
        let k = BallKernels::new(i.clone(), BallSpec::unit(2));
        (d, i, k)
    }

    #[test]
    fn extension_of_constants_and_half_spaces() {
        let (d, i, _) = setup(1.0);
        let s = RngStream::new(0, 0);
        let one = harmonic_extension(&d, &i, &TestFunction::bounded(|_: &Point| 1.0), &Point::from([0.3, 0.2]), ExtensionMethod::BallQuadrature, &s).unwrap();
        assert!((one.value - 1.0).abs() < 1e-6, "{one:?}");
        let half = TestFunction::bounded(|z: &Point| if z[0] > 0.0 { 1.0 } else { 0.0 });
        let h = harmonic_extension(&d, &i, &half, &Point::zeros(2), ExtensionMethod::BallQuadrature, &s).unwrap();
        assert!((h.value - 0.5).abs() < 1e-6, "{h:?}");
    }

    #[test]
    fn green_to_poisson_identity_on_the_disk() {
        let (d, i, _) = setup(1.5);
        let x = Point::from([0.2, -0.1]);
        let z = Point::from([1.3, 0.4]);
        let want = crate::kernels::poisson_ball(&i, &BallSpec::unit(2), &x, &z).unwrap();
        let got = poisson_from_green(&d, &i, &x, &z, 12).unwrap();
        assert!((got / want - 1.0).abs() < 1e-3, "{got} vs {want}");
    }

    #[test]
    fn duplicate_exterior_node_is_not_identifiable() {
        let (d, i, _) = setup(1.0);
        let z = vec![Point::from([1.5, 0.0]), Point::from([1.5, 0.0]), Point::from([0.0, -2.0])];
        let probes = probe_points(&d, 8).unwrap();
        let s = exterior_identifiability(&d, &i, &z, &[1.0, 1.0, 1.0], &probes).unwrap();
        assert!(s < 1e-12);
    }

    #[test]
    fn probes_sit_at_the_requested_depths() {
        for d in [Domain::unit_ball(2), Domain::unit_cube(2), Domain::unit_ball(3)] {
            let p = probe_points(&d, 20).unwrap();
            assert_eq!(p.len(), 20);
            for (k, q) in p.iter().enumerate() {
                let want = if k < 10 { 0.3 } else { 0.6 } * d.inradius();
                assert!((d.dist_to_boundary(q) - want).abs() < 1e-9, "{q:?}");
            }
        }
    }

    #[test]
    fn point_mass_is_recovered() {
        let (d, i, k) = setup(1.0);
        let mesh = d.boundary_mesh(8).unwrap();
        let probes = probe_points(&d, 24).unwrap();
        let z0 = mesh.nodes[3].clone();
        let f = TestFunction::bounded(move |x: &Point| {
            if x.norm() < 1.0 {
                0.7 * crate::kernels::martin_ball(&StableIndex::new(2, 1.0).unwrap(), &BallSpec::unit(2), x, &z0).unwrap()
            } else {
                0.0
            }
        });
        let dec = decompose(&d, &i, &f, &probes, &mesh, &k, &DecomposeOptions::default(), &RngStream::new(0, 0)).unwrap();
        let w = &dec.martin_measure.weights;
        assert!((w[3] - 0.7).abs() < 0.035, "{w:?}");
        assert!(dec.martin_measure.total_mass() - w[3] < 0.035, "{w:?}");
    }
}
