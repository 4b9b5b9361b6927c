//! Doob h-transforms of the killed process: conditioned ball steps, paths
//! conditioned to converge to a boundary pole, conditional lifetimes and the
//! boundary-limit law of mixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::geometry::{sphere_area, BallSpec, BoundaryMesh, Domain, Point, StableIndex};
use crate::kernels::{green_ball, martin_ball, martin_ball_unchecked};
use crate::quad::{integrate_interior, InteriorOptions, QuadResult, Singularity};
use crate::representation::DiscreteBoundaryMeasure;
use crate::sampler::{mc_collect, mean_value_residual_xd, uniform_direction, CenterExit, RngStream};

/// Acceptance rates below this abort a conditioned step.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Interior values of an h-function on scattered nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tabulated {
    pub nodes: Vec<Point>,
    pub values: Vec<f64>,
}

impl Tabulated {
    /// Inverse-distance interpolation over the n+1 nearest nodes.
    fn eval(&self, w: &Point) -> f64 {
        let k = (w.dim() + 1).min(self.nodes.len());
        let mut near: Vec<(f64, usize)> = self.nodes.iter().enumerate().map(|(i, q)| (q.dist_sq(w), i)).collect();
        near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, i) in &near[..k] {
            if d2 == 0.0 {
                return self.values[i];
            }
            num += self.values[i] / d2;
            den += 1.0 / d2;
        }
        num / den
    }

    fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HKind {
    MartinPole { z: Point },
    Mixture { measure: DiscreteBoundaryMeasure },
    GreenPole { y0: Point },
    Tabulated(Tabulated),
}

/// A positive X^D-harmonic function used as the conditioning weight; zero off D.
#[derive(Clone, Debug)]
pub struct HFunction {
    domain: Domain,
    idx: StableIndex,
    kind: HKind,
}

fn ball_of(domain: &Domain, what: &str) -> Result<BallSpec> {
    domain
        .as_ball()
        .cloned()
        .ok_or_else(|| Error::Unsupported(format!("{what} needs closed-form kernels, i.e. a ball domain")))
}

impl HFunction {
    /// h = M_D(·, z) on a ball.
    pub fn martin_pole(domain: &Domain, idx: &StableIndex, z: &Point) -> Result<Self> {
        let b = ball_of(domain, "MartinPole")?;
        martin_ball(idx, &b, &b.center, z)?;
        Ok(HFunction { domain: domain.clone(), idx: idx.clone(), kind: HKind::MartinPole { z: z.clone() } })
    }

    /// h = Σ_j μ_j M_D(·, z_j) on a ball.
    pub fn mixture(domain: &Domain, idx: &StableIndex, measure: DiscreteBoundaryMeasure) -> Result<Self> {
        let b = ball_of(domain, "Mixture")?;
        if measure.total_mass() <= 0.0 {
            return Err(Error::InvalidArgument("mixture measure has zero mass".into()));
        }
        for z in &measure.mesh.nodes {
            martin_ball(idx, &b, &b.center, z)?;
        }
        Ok(HFunction { domain: domain.clone(), idx: idx.clone(), kind: HKind::Mixture { measure } })
    }

    /// h = G_D(·, y0) on a ball (evaluation only).
    pub fn green_pole(domain: &Domain, idx: &StableIndex, y0: &Point) -> Result<Self> {
        ball_of(domain, "GreenPole")?;
        if !domain.contains(y0)? {
            return Err(Error::NotInterior(y0.clone()));
        }
        Ok(HFunction { domain: domain.clone(), idx: idx.clone(), kind: HKind::GreenPole { y0: y0.clone() } })
    }

    /// Tabulated h, rejected unless positive and harmonic within 5 standard errors
    /// on probe balls around the four deepest nodes.
    pub fn tabulated(domain: &Domain, idx: &StableIndex, table: Tabulated, stream: &RngStream) -> Result<Self> {
        if table.nodes.is_empty() || table.nodes.len() != table.values.len() {
            return Err(Error::InvalidArgument("tabulated h needs one value per node".into()));
        }
        if let Some(i) = table.values.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::HarmonicityGate(format!("value {} at node {i} is not positive", table.values[i])));
        }
        let h = HFunction { domain: domain.clone(), idx: idx.clone(), kind: HKind::Tabulated(table.clone()) };
        let mut order: Vec<usize> = (0..table.nodes.len()).collect();
        order.sort_by(|&a, &b| domain.dist_to_boundary(&table.nodes[b]).total_cmp(&domain.dist_to_boundary(&table.nodes[a])));
        for (k, &i) in order.iter().take(4).enumerate() {
            let c = &table.nodes[i];
            let ball = BallSpec::new(c.clone(), 0.5 * domain.dist_to_boundary(c))?;
            let r = mean_value_residual_xd(domain, &ball, idx, |w: &Point| h.eval(w), 4000, &stream.substream(k as u64))?;
            if r.value.abs() > 5.0 * r.std_error {
                return Err(Error::HarmonicityGate(format!(
                    "mean-value residual {:e} at {c:?} exceeds 5 standard errors ({:e})",
                    r.value, r.std_error
                )));
            }
        }
        Ok(h)
    }

    pub fn kind(&self) -> &HKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn index(&self) -> &StableIndex {
        &self.idx
    }

    /// h(w), extended by zero off D.
    pub fn eval(&self, w: &Point) -> f64 {
        if !(self.domain.dist_to_boundary(w) > 0.0) {
            return 0.0;
        }
        match &self.kind {
            HKind::MartinPole { z } => martin_ball_unchecked(&self.idx, self.domain.as_ball().unwrap(), w, z),
            HKind::Mixture { measure } => {
                let b = self.domain.as_ball().unwrap();
                measure
                    .mesh
                    .nodes
                    .iter()
                    .zip(&measure.weights)
                    .filter(|(_, m)| **m > 0.0)
                    .map(|(z, m)| m * martin_ball_unchecked(&self.idx, b, w, z))
                    .sum()
            }
            HKind::GreenPole { y0 } => green_ball(&self.idx, self.domain.as_ball().unwrap(), w, y0).unwrap_or(0.0),
            HKind::Tabulated(t) => t.eval(w),
        }
    }
}

/// K_B(c, w) for the ball B = B(c, r) and |w − c| > r.
fn center_poisson(idx: &StableIndex, r: f64, rho: f64) -> f64 {
    let a = idx.alpha();
    idx.consts().poisson_const * r.powf(a) * ((rho - r) * (rho + r)).powf(-a / 2.0) * rho.powi(-(idx.n() as i32))
}

fn step_ball(domain: &Domain, p: &Point, shrink: f64) -> Result<BallSpec> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidArgument(format!("shrink {shrink} must lie in (0, 1)")));
    }
    let d = domain.dist_to_boundary(p);
    if !(d > 0.0) {
        return Err(Error::NotInterior(p.clone()));
    }
    Ok(BallSpec { center: p.clone(), radius: shrink * d })
}

const MAX_TRIES: usize = 10_000_000;

const SHELL_RATIO: f64 = 1.25;

/// Exact draw from K_B(p, w) M(w, z)/M(p, z) on D for the ball domain `dball`.
///
/// The envelope is a sum. Near the pole, on B(z, R0), it is K_A·C|w−z|^{α/2−n}/M(p, z)
/// with K_A the largest step kernel there and M(w, z) ≤ C|w−z|^{α/2−n},
/// C = 2^{α/2} R^{n−α/2}. Elsewhere the distance ρ = |w − p| is cut into geometric
/// shells [rq^k, rq^{k+1}) up to the diameter, q = 5/4, and on each shell the envelope is
/// K_B(p, w) times a bound on M(w, z)/M(p, z) from
/// R² − |w|² ≤ R² − |p|² + 2Rρ and |w − z| ≥ max(R0, |p − z| − ρ).
fn pole_step<R: Rng + ?Sized>(
    idx: &StableIndex,
    dball: &BallSpec,
    domain: &Domain,
    ce: &CenterExit,
    ball: &BallSpec,
    z: &Point,
    rng: &mut R,
) -> Result<Point> {
    let n = idx.n();
    let a = idx.alpha() / 2.0;
    let e = a - n as f64;
    let p = &ball.center;
    let r = ball.radius;
    let big_r = dball.radius;
    let mp = martin_ball_unchecked(idx, dball, p, z);
    let dpz = p.dist(z);
    let r0 = 0.5 * (dpz - r);
    if !(r0 > 0.0 && mp > 0.0) {
        return Err(Error::Degenerate(format!("step ball at {p:?} reaches the pole")));
    }
    let cm = 2f64.powf(a) * big_r.powf(n as f64 - a);
    let ka = center_poisson(idx, r, r + r0);
    let m_a = ka * cm * sphere_area(n) * r0.powf(a) / a / mp;

    let gap = (big_r - p.dist(&dball.center)) * (big_r + p.dist(&dball.center));
    let reach = p.dist(&dball.center) + big_r;
    let t_max = (reach / r).max(SHELL_RATIO);
    let mut edges = vec![1.0];
    while edges[edges.len() - 1] < t_max {
        let t = SHELL_RATIO * edges[edges.len() - 1];
        edges.push(if t >= t_max { t_max } else { t });
    }
    let shells: Vec<(f64, f64, f64)> = edges
        .windows(2)
        .map(|w| {
            let rho = r * w[1];
            let num = (gap + 2.0 * big_r * rho).min(big_r * big_r) / gap;
            let bound = num.powf(a) * (dpz / r0.max(dpz - rho)).powi(n as i32);
            (w[0], bound, bound * (ce.ratio_tail(w[0]) - ce.ratio_tail(w[1])))
        })
        .collect();
    let m_f: f64 = shells.iter().map(|s| s.2).sum();
    let acceptance = 1.0 / (m_a + m_f);
    if acceptance < MIN_ACCEPTANCE {
        return Err(Error::EnvelopeFailure { acceptance, h_at_point: mp, envelope_mass: m_a + m_f });
    }
    let shell_of = |t: f64| edges.partition_point(|&x| x <= t).clamp(1, shells.len()) - 1;
    for _ in 0..MAX_TRIES {
        let mut u = rng.random::<f64>() * (m_a + m_f);
        let w = if u < m_a {
            let s = r0 * rng.random::<f64>().powf(1.0 / a);
            z.add_scaled(s, &uniform_direction(n, rng))
        } else {
            u -= m_a;
            let mut k = shells.len() - 1;
            for (i, s) in shells.iter().enumerate() {
                if u < s.2 {
                    k = i;
                    break;
                }
                u -= s.2;
            }
            let t = ce.radius_ratio_between(edges[k], edges[k + 1], rng);
            p.add_scaled(r * t, &uniform_direction(n, rng))
        };
        let rho = w.dist(p);
        // ρ ≤ r only through rounding at the inner edge.
        if !(domain.dist_to_boundary(&w) > 0.0 && rho > r) {
            continue;
        }
        let k = center_poisson(idx, r, rho);
        let dwz = w.dist(z);
        let mut env = k * shells[shell_of(rho / r)].1;
        if dwz < r0 {
            env += ka * cm * dwz.powf(e) / mp;
        }
        let target = k * martin_ball_unchecked(idx, dball, &w, z) / mp;
        debug_assert!(target <= env * (1.0 + 1e-9), "envelope violated at {w:?}");
        if rng.random::<f64>() * env <= target {
            return Ok(w);
        }
    }
    Err(Error::EnvelopeFailure { acceptance, h_at_point: mp, envelope_mass: m_a + m_f })
}

/// One ball step of the h-conditioned killed process from `p`: a draw from
/// K_B(p, w) h(w)/h(p) with B = B(p, shrink·δ(p)). The result always lies in D.
pub fn conditioned_step<R: Rng + ?Sized>(h: &HFunction, p: &Point, shrink: f64, rng: &mut R) -> Result<Point> {
    let domain = &h.domain;
    let ball = step_ball(domain, p, shrink)?;
    let ce = CenterExit::new(&h.idx);
    match &h.kind {
        HKind::MartinPole { z } => pole_step(&h.idx, domain.as_ball().unwrap(), domain, &ce, &ball, z, rng),
        HKind::Mixture { measure } => {
            let b = domain.as_ball().unwrap();
            let w: Vec<f64> = measure
                .mesh
                .nodes
                .iter()
                .zip(&measure.weights)
                .map(|(z, m)| if *m > 0.0 { m * martin_ball_unchecked(&h.idx, b, p, z) } else { 0.0 })
                .collect();
            let j = pick(&w, rng);
            pole_step(&h.idx, b, domain, &ce, &ball, &measure.mesh.nodes[j], rng)
        }
        HKind::GreenPole { .. } => {
            Err(Error::Unsupported("conditioned steps toward an interior pole are not simulated".into()))
        }
        HKind::Tabulated(t) => {
            let hp = h.eval(p);
            let hmax = t.max();
            let acceptance = hp / hmax;
            if acceptance < MIN_ACCEPTANCE {
                return Err(Error::EnvelopeFailure { acceptance, h_at_point: hp, envelope_mass: hmax / hp });
            }
            for _ in 0..MAX_TRIES {
                let w = ce.sample(&ball, rng);
                let hw = h.eval(&w);
                if hw > 0.0 && rng.random::<f64>() * hmax <= hw {
                    return Ok(w);
                }
            }
            Err(Error::EnvelopeFailure { acceptance, h_at_point: hp, envelope_mass: hmax / hp })
        }
    }
}

/// Index drawn with probability proportional to `w`.
fn pick<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, x) in w.iter().enumerate() {
        if u < *x {
            return i;
        }
        u -= x;
    }
    w.iter().rposition(|x| *x > 0.0).unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ReachedPole,
    MaxSteps,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionedPath {
    /// Visited points, starting with the initial point.
    pub points: Vec<Point>,
    pub terminal: Point,
    pub steps: usize,
    pub stopped_reason: StopReason,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PathOptions {
    pub shrink: f64,
    /// Stop radius around the pole; `None` means 1e-2 times the inradius.
    pub eps_stop: Option<f64>,
    pub max_steps: usize,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions { shrink: 0.5, eps_stop: None, max_steps: 10_000 }
    }
}

fn pole_path<R: Rng + ?Sized>(
    h: &HFunction,
    x: &Point,
    z: &Point,
    opts: &PathOptions,
    rng: &mut R,
) -> Result<ConditionedPath> {
    let domain = &h.domain;
    let b = domain.as_ball().unwrap();
    let ce = CenterExit::new(&h.idx);
    let eps = opts.eps_stop.unwrap_or(1e-2 * domain.inradius());
    let mut p = x.clone();
    let mut points = vec![p.clone()];
    for step in 0..opts.max_steps {
        if p.dist(z) < eps {
            return Ok(ConditionedPath { terminal: p, points, steps: step, stopped_reason: StopReason::ReachedPole });
        }
        let ball = step_ball(domain, &p, opts.shrink)?;
        p = pole_step(&h.idx, b, domain, &ce, &ball, z, rng)?;
        points.push(p.clone());
    }
    let reason = if p.dist(z) < eps { StopReason::ReachedPole } else { StopReason::MaxSteps };
    Ok(ConditionedPath { terminal: p, points, steps: opts.max_steps, stopped_reason: reason })
}

/// Path of the process conditioned by h = M_D(·, z), run until it is within
/// `eps_stop` of z or `max_steps` is reached.
pub fn simulate_conditioned_path<R: Rng + ?Sized>(
    h: &HFunction,
    x: &Point,
    opts: &PathOptions,
    rng: &mut R,
) -> Result<ConditionedPath> {
    let HKind::MartinPole { z } = &h.kind else {
        return Err(Error::InvalidArgument("path simulation needs a MartinPole h-function".into()));
    };
    if !h.domain.contains(x)? {
        return Err(Error::NotInterior(x.clone()));
    }
    pole_path(h, x, z, opts, rng)
}

/// `n_paths` independent conditioned paths; path i uses chunked substreams of `stream`.
pub fn simulate_paths(h: &HFunction, x: &Point, n_paths: usize, opts: &PathOptions, stream: &RngStream) -> Result<Vec<ConditionedPath>> {
    mc_collect(n_paths, stream, |rng| simulate_conditioned_path(h, x, opts, rng))
}

/// E_x^z[τ_D] = (1/M(x, z)) ∫_D G_D(x, y) M(y, z) dy on a ball, by singular
/// quadrature with base order `order` (the refinement parameter).
pub fn conditional_lifetime(domain: &Domain, idx: &StableIndex, x: &Point, z: &Point, order: usize) -> Result<QuadResult> {
    let b = ball_of(domain, "conditional_lifetime")?;
    let mx = martin_ball(idx, &b, x, z)?;
    let n = idx.n() as f64;
    let sx = if n == idx.alpha() { 0.5 } else { n - idx.alpha() };
    let tx = b.tilde(x).norm();
    let res = integrate_interior(
        domain,
        |y: &Point| {
            let ty = b.tilde(y).norm().min(1.0);
            crate::kernels::green_ball_unchecked(idx, &b, x, y, tx, ty) * martin_ball_unchecked(idx, &b, y, z)
        },
        &[Singularity::new(x.clone(), sx), Singularity::new(z.clone(), n - idx.alpha() / 2.0)],
        &InteriorOptions { order, rel_tol: 1e-5, ..Default::default() },
    )?;
    Ok(QuadResult { value: res.value / mx, error: res.error / mx, levels: res.levels })
}

/// Analytic and empirical boundary-limit laws of the mixture-conditioned process.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitLaw {
    pub analytic: Vec<f64>,
    pub empirical: Vec<f64>,
    pub counts: Vec<usize>,
    pub n_paths: usize,
    /// Paths that hit `max_steps` before reaching their pole.
    pub unfinished: usize,
    pub chi_square: f64,
    pub p_value: f64,
    /// Set when p < 0.01 or a patch with zero analytic mass was hit.
    pub flagged: bool,
}

/// Law of lim X_t under P_x^h for h = Σ μ_j M(·, z_j), binned by nearest node of `patches`.
///
/// Each path draws its pole j with probability μ_j M(x, z_j)/h(x) and then runs
/// as the M(·, z_j)-conditioned process.
pub fn boundary_limit_law(
    h: &HFunction,
    x: &Point,
    patches: &BoundaryMesh,
    n_paths: usize,
    opts: &PathOptions,
    stream: &RngStream,
) -> Result<LimitLaw> {
    let HKind::Mixture { measure } = &h.kind else {
        return Err(Error::InvalidArgument("boundary_limit_law needs a Mixture h-function".into()));
    };
    if !h.domain.contains(x)? {
        return Err(Error::NotInterior(x.clone()));
    }
    let b = h.domain.as_ball().unwrap();
    let pole_w: Vec<f64> = measure
        .mesh
        .nodes
        .iter()
        .zip(&measure.weights)
        .map(|(z, m)| m * martin_ball_unchecked(&h.idx, b, x, z))
        .collect();
    let hx: f64 = pole_w.iter().sum();
    let mut analytic = vec![0.0; patches.len()];
    for (z, w) in measure.mesh.nodes.iter().zip(&pole_w) {
        analytic[patches.nearest(z)] += w / hx;
    }
    let ends: Vec<(usize, bool)> = mc_collect(n_paths, stream, |rng| {
        let j = pick(&pole_w, rng);
        let path = pole_path(h, x, &measure.mesh.nodes[j], opts, rng)?;
        Ok((patches.nearest(&path.terminal), path.stopped_reason == StopReason::MaxSteps))
    })?;
    let mut counts = vec![0usize; patches.len()];
    for (k, _) in &ends {
        counts[*k] += 1;
    }
    let unfinished = ends.iter().filter(|e| e.1).count();
    let total = n_paths as f64;
    let empirical: Vec<f64> = counts.iter().map(|c| *c as f64 / total).collect();
    let (chi_square, p_value, stray) = chi_square_test(&counts, &analytic);
    Ok(LimitLaw { analytic, empirical, counts, n_paths, unfinished, chi_square, p_value, flagged: stray || p_value < 0.01 })
}

/// Pearson statistic and p-value of `counts` against probabilities `probs`;
/// the flag reports counts in bins of zero probability.
pub fn chi_square_test(counts: &[usize], probs: &[f64]) -> (f64, f64, bool) {
    let total: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut stray = false;
    for (c, p) in counts.iter().zip(probs) {
        if *p > 0.0 {
            let e = p * total as f64;
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1;
        } else if *c > 0 {
            stray = true;
        }
    }
    if bins < 2 {
        return (stat, if stray { 0.0 } else { 1.0 }, stray);
    }
    let p = ChiSquared::new((bins - 1) as f64).map(|d| 1.0 - d.cdf(stat)).unwrap_or(0.0);
    (stat, p, stray)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::mc_mean;

    fn unit2(a: f64) -> (Domain, StableIndex) {
        (Domain::unit_ball(2), StableIndex::new(2, a).unwrap())
    }

    #[test]
    fn pole_step_stays_inside_and_tilts_toward_pole() {
        let (d, i) = unit2(1.0);
        let z = Point::from([0.0, 1.0]);
        let h = HFunction::martin_pole(&d, &i, &z).unwrap();
        let p = Point::from([0.2, 0.1]);
        let est = mc_mean(10_000, &RngStream::new(3, 0), |rng| {
            let w = conditioned_step(&h, &p, 0.5, rng)?;
            assert!(d.contains(&w).unwrap());
            Ok(w.sub(&p).dot(&z.sub(&p)))
        })
        .unwrap();
        assert!(est.value > 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn martingale_identity_for_martin_pole() {
        // E[h(W)/h(p); W ∈ D] = 1 under unconditioned ball exits.
        for a in [0.5, 1.5] {
            let (d, i) = unit2(a);
            let z = Point::from([1.0, 0.0]);
            let h = HFunction::martin_pole(&d, &i, &z).unwrap();
            let ball = BallSpec::new(Point::from([0.3, -0.2]), 0.3).unwrap();
            let r = mean_value_residual_xd(&d, &ball, &i, |w: &Point| h.eval(w), 200_000, &RngStream::new(5, 1)).unwrap();
            assert!(r.value.abs() < 3.0 * r.std_error, "a={a}: {r:?}");
        }
    }

    #[test]
    fn step_law_matches_target_density_in_one_dimension() {
        // Compare P(W > p) with the exact integral of the tilted step density.
        let d = Domain::unit_ball(1);
        let i = StableIndex::new(1, 1.2).unwrap();
        let z = Point::from([1.0]);
        let h = HFunction::martin_pole(&d, &i, &z).unwrap();
        let p = Point::from([0.3]);
        let r = 0.5 * 0.7;
        let mp = h.eval(&p);
        let f = |w: f64| center_poisson(&i, r, (w - 0.3f64).abs()) * h.eval(&Point::from([w])) / mp;
        // Both ends of each interval are integrable singularities: w = a + (b − a)·t⁴ from either side.
        let ends = |a: f64, b: f64| {
            let m = 0.5 * (a + b);
            let half = |from: f64, to: f64| {
                crate::quad::rules::adaptive(
                    |t: f64| {
                        // Nodes that round onto the singular endpoint carry no mass.
                        let v = f(from + (to - from) * t.powi(4)) * 4.0 * t.powi(3) * (to - from).abs();
                        if v.is_finite() { v } else { 0.0 }
                    },
                    0.0,
                    1.0,
                    1e-13,
                    1e-11,
                )
                .value
            };
            half(a, m) + half(b, m)
        };
        let right = ends(0.3 + r, 1.0);
        let left = ends(-1.0, 0.3 - r);
        assert!((right + left - 1.0).abs() < 1e-6, "{}", right + left);
        let est = mc_mean(40_000, &RngStream::new(9, 0), |rng| {
            Ok(if conditioned_step(&h, &p, 0.5, rng)?[0] > 0.3 { 1.0 } else { 0.0 })
        })
        .unwrap();
        assert!(est.z_score(right) < 4.0, "{} vs {right}", est.value);
    }

    #[test]
    fn paths_reach_the_pole() {
        let (d, i) = unit2(1.5);
        let z = Point::from([0.0, 1.0]);
        let h = HFunction::martin_pole(&d, &i, &z).unwrap();
        let paths = simulate_paths(&h, &Point::zeros(2), 200, &PathOptions::default(), &RngStream::new(1, 0)).unwrap();
        for p in &paths {
            assert_eq!(p.stopped_reason, StopReason::ReachedPole);
            assert!(p.points.iter().all(|q| d.contains(q).unwrap()));
        }
    }

    #[test]
    fn lifetime_scales_as_r_alpha() {
        let (d, i) = unit2(1.0);
        let x = Point::from([0.3, 0.1]);
        let z = Point::from([0.6, 0.8]);
        let a = conditional_lifetime(&d, &i, &x, &z, 12).unwrap().value;
        let d2 = d.dilate(2.0).unwrap();
        let b = conditional_lifetime(&d2, &i, &x.scale(2.0), &z.scale(2.0), 12).unwrap().value;
        assert!((b / a - 2.0).abs() < 1e-3, "{a} {b}");
    }

    #[test]
    fn chi_square_flags_stray_counts() {
        let (_, p, stray) = chi_square_test(&[50, 50, 1], &[0.5, 0.5, 0.0]);
        assert!(stray && p > 0.5);
        let (_, p, _) = chi_square_test(&[90, 10], &[0.5, 0.5]);
        assert!(p < 1e-6);
    }
}
