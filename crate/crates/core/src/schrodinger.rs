//! Schrödinger perturbations: Kato moduli, the gauge function, the perturbed
//! Green function V_q by Neumann series on the mesh operator, and conditional
//! gauges with their boundary ratio limits.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point, StableIndex};
use crate::martin::KernelSource;
use crate::quad::{integrate_interior, InteriorOptions, MeshGreenOperator, Singularity};

/// Spectral radius above which (D, q) is declared non-gaugeable.
pub const GAUGE_MARGIN: f64 = 0.95;
const POWER_ITERATIONS: usize = 50;
const SERIES_CAP: usize = 5000;

/// A potential q with optional bound and declared point singularities |y − p|^{−β}.
#[derive(Clone)]
pub struct Potential {
    f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    pub declared_bound: Option<f64>,
    pub singularities: Vec<Singularity>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("declared_bound", &self.declared_bound)
            .field("singularities", &self.singularities)
            .finish()
    }
}

impl Potential {
    pub fn new<F: Fn(&Point) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Potential { f: Arc::new(f), declared_bound: None, singularities: Vec::new() }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Potential { declared_bound: Some(c.abs()), ..Self::new(move |_| c) }
    }

    /// c·|y − p|^{−β}.
    pub fn radial_power(p: Point, c: f64, beta: f64) -> Self {
        let q = p.clone();
        Potential {
            f: Arc::new(move |y: &Point| c * y.dist(&q).powf(-beta)),
            declared_bound: None,
            singularities: vec![Singularity::new(p, beta)],
        }
    }

    pub fn with_bound(mut self, m: f64) -> Self {
        self.declared_bound = Some(m);
        self
    }

    pub fn with_singularity(mut self, s: Singularity) -> Self {
        self.singularities.push(s);
        self
    }

    #[inline]
    pub fn eval(&self, y: &Point) -> f64 {
        (self.f)(y)
    }

    fn check(&self, idx: &StableIndex) -> Result<()> {
        for s in &self.singularities {
            if s.exponent >= idx.alpha() {
                return Err(Error::DivergentKato { exponent: s.exponent, alpha: idx.alpha() });
            }
        }
        Ok(())
    }

    fn on_mesh(&self, op: &MeshGreenOperator) -> DVector<f64> {
        DVector::from_iterator(op.len(), op.mesh.nodes.iter().map(|p| self.eval(p)))
    }
}

/// max over `probes` of ∫_{|x−y|≤r} |q(y)| |x−y|^{α−n} dy.
pub fn kato_modulus(idx: &StableIndex, q: &Potential, r: f64, probes: &[Point]) -> Result<f64> {
    q.check(idx)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
    }
    let e = idx.alpha() - idx.n() as f64;
    let mut best: f64 = 0.0;
    for x in probes {
        let ball = Domain::ball(x.clone(), r)?;
        let mut sing = vec![Singularity::new(x.clone(), -e)];
        sing.extend(q.singularities.iter().filter(|s| s.point.dist(x) < r).cloned());
        let v = integrate_interior(
            &ball,
            |y: &Point| {
                let d = y.dist(x);
                if d == 0.0 {
                    0.0
                } else {
                    q.eval(y).abs() * d.powf(e)
                }
            },
            &sing,
            &InteriorOptions::default(),
        )?;
        best = best.max(v.value);
    }
    Ok(best)
}

/// Gauge function on the mesh nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeSolution {
    /// g(x_i); `None` when the spectral radius estimate is at least 1.
    pub values: Option<Vec<f64>>,
    pub series_terms_used: usize,
    pub spectral_radius_estimate: f64,
    pub gaugeable: bool,
    /// Spectral radius in [0.95, 1): values are computed but the verdict is not certain.
    pub marginal: bool,
    /// Sup norm of the last series term (or of the LU residual).
    pub residual: f64,
}

/// Perron root of v ↦ G (|q| w ⊙ v) by the power method from the all-ones vector.
pub fn spectral_radius(op: &MeshGreenOperator, qv: &DVector<f64>) -> f64 {
    let aq = qv.abs();
    let mut v = DVector::from_element(op.len(), 1.0);
    let mut rho = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let t = op.apply(&aq.component_mul(&v));
        let norm = t.amax();
        if norm == 0.0 {
            return 0.0;
        }
        rho = norm / v.amax();
        v = t / norm;
    }
    rho
}

/// g = Σ_k (G_D q)^k 1 on the mesh, i.e. the fixed point of g = 1 + G_D(q g).
pub fn gauge(idx: &StableIndex, q: &Potential, op: &MeshGreenOperator, tol: f64) -> Result<GaugeSolution> {
    q.check(idx)?;
    let qv = q.on_mesh(op);
    if let Some(i) = qv.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("potential is not finite at mesh node {i}")));
    }
    let n = op.len();
    if qv.iter().all(|v| *v == 0.0) {
        return Ok(GaugeSolution {
            values: Some(vec![1.0; n]),
            series_terms_used: 1,
            spectral_radius_estimate: 0.0,
            gaugeable: true,
            marginal: false,
            residual: 0.0,
        });
    }
    let rho = spectral_radius(op, &qv);
    let marginal = (GAUGE_MARGIN..1.0).contains(&rho);
    if rho >= 1.0 {
        return Ok(GaugeSolution {
            values: None,
            series_terms_used: 0,
            spectral_radius_estimate: rho,
            gaugeable: false,
            marginal: false,
            residual: f64::INFINITY,
        });
    }
    let mut g = DVector::from_element(n, 1.0);
    let mut term = g.clone();
    let mut terms = 1;
    let mut rising = 0;
    let mut last = term.amax();
    let cap = if marginal { SERIES_CAP } else { 10 * SERIES_CAP };
    while term.amax() > tol * g.amax() {
        if terms >= cap || rising >= 5 {
            // Direct solve of (I − G Q) g = 1.
            let t = DMatrix::from_fn(n, n, |i, j| op.matrix[(i, j)] * op.mesh.weights[j] * qv[j]);
            let a = DMatrix::identity(n, n) - &t;
            let ones = DVector::from_element(n, 1.0);
            let sol = a.clone().lu().solve(&ones).ok_or(Error::NotGaugeable { spectral_radius: rho })?;
            let residual = (&a * &sol - ones).amax();
            let ok = rising < 5 && sol.iter().all(|v| *v > 0.0);
            return Ok(GaugeSolution {
                values: ok.then(|| sol.iter().copied().collect()),
                series_terms_used: terms,
                spectral_radius_estimate: rho,
                gaugeable: ok && !marginal,
                marginal,
                residual,
            });
        }
        term = op.apply(&qv.component_mul(&term));
        g += &term;
        terms += 1;
        let norm = term.amax();
        rising = if norm >= last { rising + 1 } else { 0 };
        last = norm;
    }
    let positive = g.iter().all(|v| *v > 0.0);
    Ok(GaugeSolution {
        values: positive.then(|| g.iter().copied().collect()),
        series_terms_used: terms,
        spectral_radius_estimate: rho,
        gaugeable: positive && !marginal,
        marginal,
        residual: term.amax(),
    })
}

/// Resolvent (I − G_D Q)^{−1} on the mesh, with Q = diag(q_j w_j); off-mesh values
/// of V_q follow from V_q = G_D + G_D q V_q (Nyström interpolation).
pub struct PerturbedGreen<'a> {
    op: &'a MeshGreenOperator,
    q: Potential,
    qw: DVector<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub spectral_radius_estimate: f64,
}

impl<'a> PerturbedGreen<'a> {
    /// Fails with `NotGaugeable` unless the spectral radius estimate is below 1.
    pub fn new(idx: &StableIndex, q: &Potential, op: &'a MeshGreenOperator) -> Result<Self> {
        q.check(idx)?;
        let qv = q.on_mesh(op);
        let rho = spectral_radius(op, &qv);
        if rho >= 1.0 {
            return Err(Error::NotGaugeable { spectral_radius: rho });
        }
        let n = op.len();
        let qw = qv.component_mul(&op.weights());
        let a = DMatrix::identity(n, n) - DMatrix::from_fn(n, n, |i, j| op.matrix[(i, j)] * qw[j]);
        Ok(PerturbedGreen { op, q: q.clone(), qw, lu: a.lu(), spectral_radius_estimate: rho })
    }

    /// V_q(x_i, x_j) = Σ_k ((G_D Q)^k G_D)_{ij}.
    pub fn mesh_matrix(&self) -> DMatrix<f64> {
        self.lu.solve(&self.op.matrix).expect("nonsingular resolvent")
    }

    /// (I − G Q)^{−1} b.
    pub fn resolve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("nonsingular resolvent")
    }

    /// V_q(x, y) for off-mesh points, with G_D from `source`.
    pub fn value(&self, source: &dyn KernelSource, x: &Point, y: &Point) -> Result<f64> {
        let gy = self.green_column(source, y)?;
        let vy = self.resolve(&gy);
        if let Some(k) = self.node_index(x) {
            return Ok(vy[k]);
        }
        let gx = self.green_column(source, x)?;
        Ok((source.green(x, y)? + gx.dot(&self.qw.component_mul(&vy))) / self.damping(source, x, &gx)?)
    }

    fn node_index(&self, x: &Point) -> Option<usize> {
        self.op.mesh.nodes.iter().position(|p| p == x)
    }

    /// Singularity subtraction at an off-mesh x: with T(x) = ∫ G_D(x, u) du and
    /// S(x) = Σ_k G_D(x, x_k) w_k, ∫ G_D(x, u) q(u) f(u) du ≈ Σ_k G_D(x, x_k) w_k (q_k f_k − q(x) f(x))
    /// + q(x) f(x) T(x). For f(x) the unknown itself this divides by 1 − q(x)(T − S).
    fn damping(&self, source: &dyn KernelSource, x: &Point, gx: &DVector<f64>) -> Result<f64> {
        let Some(t) = source.exit_time(x)? else {
            return Ok(1.0);
        };
        let s = gx.dot(&self.op.weights());
        let d = 1.0 - self.q.eval(x) * (t - s);
        Ok(if d > 0.0 { d } else { 1.0 })
    }

    fn green_column(&self, source: &dyn KernelSource, y: &Point) -> Result<DVector<f64>> {
        let col: Vec<f64> = self.op.mesh.nodes.par_iter().map(|p| source.green(p, y)).collect::<Result<_>>()?;
        Ok(DVector::from_vec(col))
    }
}

/// Perturbed Green function on the mesh: V_q(x_i, x_j).
pub fn vq(idx: &StableIndex, q: &Potential, op: &MeshGreenOperator) -> Result<DMatrix<f64>> {
    Ok(PerturbedGreen::new(idx, q, op)?.mesh_matrix())
}

/// How ψ(p) = ∫_D G_D(p, u) q(u) M(u, z) du is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PsiRule {
    /// Mesh sums; at the nodes the cell-averaged diagonal of G_D is used.
    Mesh,
    /// Mesh sums at the nodes, singular quadrature at the query points (balls only).
    Hybrid { order: usize },
    /// Singular quadrature everywhere (balls only).
    Quadrature { order: usize },
}

impl Default for PsiRule {
    fn default() -> Self {
        PsiRule::Mesh
    }
}

/// E_x^z[e_q(τ_D)] = 1 + (1/M(x, z)) ∫_D V_q(x, u) q(u) M(u, z) du.
///
/// With φ(x) = ∫ V_q(x, u) q(u) M(u, z) du and ψ(x) = ∫ G_D(x, u) q(u) M(u, z) du,
/// the resolvent identity gives φ = ψ + G_D q φ, solved on the mesh and
/// extended to x by the same identity.
#[allow(clippy::too_many_arguments)]
pub fn conditional_gauge(
    domain: &Domain,
    idx: &StableIndex,
    q: &Potential,
    op: &MeshGreenOperator,
    x: &Point,
    z: &Point,
    source: &dyn KernelSource,
    rule: PsiRule,
) -> Result<f64> {
    Ok(conditional_gauges(domain, idx, q, op, std::slice::from_ref(x), z, source, rule)?[0])
}

/// [`conditional_gauge`] at several starting points sharing one pole; the
/// node values of φ are computed once.
#[allow(clippy::too_many_arguments)]
pub fn conditional_gauges(
    domain: &Domain,
    idx: &StableIndex,
    q: &Potential,
    op: &MeshGreenOperator,
    xs: &[Point],
    z: &Point,
    source: &dyn KernelSource,
    rule: PsiRule,
) -> Result<Vec<f64>> {
    if rule != PsiRule::Mesh && domain.as_ball().is_none() {
        return Err(Error::Unsupported("quadrature of psi needs a ball domain; use the mesh rule".into()));
    }
    let pg = PerturbedGreen::new(idx, q, op)?;
    let qv = q.on_mesh(op);
    for x in xs {
        if !domain.contains(x)? {
            return Err(Error::NotInterior(x.clone()));
        }
    }
    if qv.iter().all(|v| *v == 0.0) {
        return Ok(vec![1.0; xs.len()]);
    }
    let m: Vec<f64> = op.mesh.nodes.par_iter().map(|u| source.martin(u, z)).collect::<Result<_>>()?;
    let qwm = pg.qw.component_mul(&DVector::from_vec(m));
    let psi_nodes = match rule {
        PsiRule::Quadrature { order } => {
            let v: Vec<f64> = op.mesh.nodes.par_iter().map(|p| psi_quadrature(domain, idx, q, p, z, source, order)).collect::<Result<_>>()?;
            DVector::from_vec(v)
        }
        _ => &op.matrix * &qwm,
    };
    let qphi = pg.qw.component_mul(&pg.resolve(&psi_nodes));
    xs.iter()
        .map(|x| {
            let mx = source.martin(x, z)?;
            if let Some(k) = pg.node_index(x) {
                // φ_k = ψ_k + (G Q φ)_k on the mesh.
                let phi = psi_nodes[k] + op.matrix.row(k).transpose().dot(&qphi);
                return Ok(1.0 + phi / mx);
            }
            let gx = pg.green_column(source, x)?;
            let psi_x = match rule {
                PsiRule::Mesh => {
                    let t = source.exit_time(x)?;
                    gx.dot(&qwm) + t.map_or(0.0, |t| q.eval(x) * mx * (t - gx.dot(&op.weights())))
                }
                PsiRule::Hybrid { order } | PsiRule::Quadrature { order } => psi_quadrature(domain, idx, q, x, z, source, order)?,
            };
            Ok(1.0 + (psi_x + gx.dot(&qphi)) / (pg.damping(source, x, &gx)? * mx))
        })
        .collect()
}

fn psi_quadrature(
    domain: &Domain,
    idx: &StableIndex,
    q: &Potential,
    p: &Point,
    z: &Point,
    source: &dyn KernelSource,
    order: usize,
) -> Result<f64> {
    let n = idx.n() as f64;
    let sx = if n == idx.alpha() { 0.5 } else { n - idx.alpha() };
    let mut sing = vec![Singularity::new(p.clone(), sx), Singularity::new(z.clone(), n - idx.alpha() / 2.0)];
    sing.extend(q.singularities.iter().cloned());
    let r = integrate_interior(
        domain,
        |u: &Point| {
            let qu = q.eval(u);
            if qu == 0.0 || u == p {
                return 0.0;
            }
            // Nodes on the boundary itself carry no mass.
            qu * source.green(p, u).unwrap_or(0.0) * source.martin(u, z).unwrap_or(0.0)
        },
        &sing,
        &InteriorOptions { order, rel_tol: 1e-5, ..Default::default() },
    )?;
    Ok(r.value)
}

/// Left and right sides of lim_{y→z} V_q(x, y)/V_q(x0, y) = (E_x^z[e_q]/E_{x0}^z[e_q]) M(x, z)/M(x0, z).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioLimit {
    pub sequence: Vec<f64>,
    pub limit: f64,
    pub prediction: f64,
    pub contraction: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn vq_ratio_limit(
    domain: &Domain,
    idx: &StableIndex,
    q: &Potential,
    op: &MeshGreenOperator,
    x: &Point,
    x0: &Point,
    z: &Point,
    source: &dyn KernelSource,
    t0: f64,
    levels: usize,
    rule: PsiRule,
) -> Result<RatioLimit> {
    if levels < 3 {
        return Err(Error::InvalidArgument("at least three approach levels are needed".into()));
    }
    let pg = PerturbedGreen::new(idx, q, op)?;
    let ys = domain.approach_sequence(z, t0, levels)?;
    let mut seq = Vec::with_capacity(levels);
    for y in &ys {
        seq.push(pg.value(source, x, y)? / pg.value(source, x0, y)?);
    }
    let k = seq.len() - 1;
    let (d1, d0) = (seq[k] - seq[k - 1], seq[k - 1] - seq[k - 2]);
    let rho = if d0 == 0.0 { 0.0 } else { (d1 / d0).abs() };
    if !(rho < 1.0) {
        return Err(Error::NonContraction { factor: rho, levels });
    }
    let limit = seq[k] + d1 * rho / (1.0 - rho);
    let prediction = if x == x0 {
        1.0
    } else {
        let c = conditional_gauges(domain, idx, q, op, &[x.clone(), x0.clone()], z, source, rule)?;
        c[0] / c[1] * source.martin(x, z)? / source.martin(x0, z)?
    };
    Ok(RatioLimit { sequence: seq, limit, prediction, contraction: rho })
}
