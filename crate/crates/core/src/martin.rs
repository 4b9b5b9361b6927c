//! Green functions on general domains by Monte Carlo, Martin kernels as boundary
//! ratio limits, and the 3G probe.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BallSpec, Domain, Point, StableIndex};
use crate::kernels::{green_ball, green_whole_unchecked, martin_ball, mean_exit_time_ball};
use crate::sampler::{mc_collect, mc_mean, wos_with, CenterExit, McEstimate, RngStream, WosOptions};

/// Source of G_D and M_D values.
pub trait KernelSource: Sync {
    fn green(&self, x: &Point, y: &Point) -> Result<f64>;
    fn martin(&self, x: &Point, z: &Point) -> Result<f64>;

    /// E_x[τ_D] = ∫_D G_D(x, u) du when it is known exactly.
    fn exit_time(&self, _x: &Point) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Closed-form kernels of a ball, Martin kernel normalized at the center.
#[derive(Clone, Debug)]
pub struct BallKernels {
    pub idx: StableIndex,
    pub ball: BallSpec,
}

impl BallKernels {
    pub fn new(idx: StableIndex, ball: BallSpec) -> Self {
        BallKernels { idx, ball }
    }
}

impl KernelSource for BallKernels {
    fn green(&self, x: &Point, y: &Point) -> Result<f64> {
        green_ball(&self.idx, &self.ball, x, y)
    }

    fn martin(&self, x: &Point, z: &Point) -> Result<f64> {
        martin_ball(&self.idx, &self.ball, x, z)
    }

    fn exit_time(&self, x: &Point) -> Result<Option<f64>> {
        mean_exit_time_ball(&self.idx, &self.ball, x).map(Some)
    }
}

/// Monte Carlo kernels on an arbitrary domain.
#[derive(Clone, Debug)]
pub struct McKernels {
    pub domain: Domain,
    pub idx: StableIndex,
    pub x0: Point,
    pub green_samples: usize,
    pub martin: MartinOptions,
    pub stream: RngStream,
}

impl KernelSource for McKernels {
    fn green(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(green_mc(&self.domain, &self.idx, x, y, self.green_samples, &self.stream, &WosOptions::default())?.value)
    }

    fn martin(&self, x: &Point, z: &Point) -> Result<f64> {
        Ok(martin_estimate(&self.domain, &self.idx, &self.x0, x, z, &self.martin, &self.stream)?.value)
    }
}

fn green_const(idx: &StableIndex) -> Result<f64> {
    idx.consts().green_const.ok_or(Error::Recurrent { n: idx.n(), alpha: idx.alpha() })
}

/// G_D(x, y) = G(x, y) − E_x[G(X_{τ_D}, y)].
pub fn green_mc(
    domain: &Domain,
    idx: &StableIndex,
    x: &Point,
    y: &Point,
    n_samples: usize,
    stream: &RngStream,
    opts: &WosOptions,
) -> Result<McEstimate> {
    let c = green_const(idx)?;
    if x == y {
        return Err(Error::InvalidArgument("green_mc needs x != y".into()));
    }
    if !(domain.dist_to_boundary(x) > 0.0) {
        return Err(Error::NotInterior(x.clone()));
    }
    if !(domain.dist_to_boundary(y) > 1e-6) {
        return Err(Error::InvalidArgument(format!("y = {y:?} is within 1e-6 of the boundary")));
    }
    let ce = CenterExit::new(idx);
    let gxy = green_whole_unchecked(idx, c, x.dist(y));
    mc_mean(n_samples, stream, |rng| {
        let e = wos_with(domain, &ce, x, opts, rng)?.exit_point;
        Ok(gxy - green_whole_unchecked(idx, c, e.dist(y)))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MartinMethod {
    /// Closed form on balls, Monte Carlo ratios otherwise.
    #[default]
    Auto,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MartinOptions {
    /// First approach distance; `None` means a quarter of the inradius.
    pub t0: Option<f64>,
    /// Relative stopping tolerance on successive ratios.
    pub tol: f64,
    /// Walks per level.
    pub n_samples: usize,
    pub max_levels: usize,
    pub method: MartinMethod,
    /// Walk balls have radius `shrink · δ`; full inscribed balls give the lowest variance.
    pub shrink: f64,
}

impl Default for MartinOptions {
    fn default() -> Self {
        MartinOptions { t0: None, tol: 5e-3, n_samples: 400_000, max_levels: 20, method: MartinMethod::Auto, shrink: 1.0 }
    }
}

/// A Martin kernel value M_D(x, z) normalized at x0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MartinEstimate {
    pub x0: Point,
    pub x: Point,
    pub z: Point,
    pub value: f64,
    /// Ratios G_D(x, y_k)/G_D(x0, y_k) along the approach sequence.
    pub sequence_values: Vec<f64>,
    pub error_bound: f64,
    /// Observed contraction factor of successive differences.
    pub contraction: f64,
    pub levels: usize,
}

/// Per-level data: ratio and per-sample influence values.
struct Level {
    ratio: f64,
    influence: Vec<f64>,
}

fn sd(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = xs.clone().sum::<f64>() / n;
    (xs.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Least-squares contraction factor |Δ_j| ≈ ρ|Δ_{j−1}| over pairs whose first
/// difference exceeds twice its standard error; 1/2 when no pair qualifies.
fn contraction(deltas: &[(f64, f64)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for w in deltas.windows(2) {
        let ((d0, se0), (d1, _)) = (w[0], w[1]);
        if d0.abs() > 2.0 * se0 {
            num += d1.abs() * d0.abs();
            den += d0 * d0;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.5
    }
}

/// M_D(x, z) = lim_{y→z} G_D(x, y)/G_D(x0, y) along the inward approach sequence.
///
/// Uses G_D(x, y) = G_D(y, x): walks start at y_k and the same walks serve the
/// numerator and the denominator. Every level uses the same random stream.
pub fn martin_estimate(
    domain: &Domain,
    idx: &StableIndex,
    x0: &Point,
    x: &Point,
    z: &Point,
    opts: &MartinOptions,
    stream: &RngStream,
) -> Result<MartinEstimate> {
    for p in [x0, x] {
        if !domain.contains(p)? {
            return Err(Error::NotInterior(p.clone()));
        }
    }
    let bd = domain.dist_to_boundary(z);
    if bd.abs() > domain.boundary_tol() {
        return Err(Error::NotOnBoundary { point: z.clone(), distance: bd });
    }
    let exact = |value: f64| MartinEstimate {
        x0: x0.clone(),
        x: x.clone(),
        z: z.clone(),
        value,
        sequence_values: vec![value],
        error_bound: 0.0,
        contraction: 0.0,
        levels: 0,
    };
    if x == x0 {
        return Ok(exact(1.0));
    }
    if let (MartinMethod::Auto, Some(b)) = (opts.method, domain.as_ball()) {
        let m = martin_ball(idx, b, x, z)? / martin_ball(idx, b, x0, z)?;
        return Ok(exact(m));
    }
    let c = green_const(idx)?;
    let t0 = opts.t0.unwrap_or(0.25 * domain.inradius());
    let t_min = 1e-4 * domain.inradius();
    let max_levels = opts.max_levels.clamp(3, 20);
    let count = (0..max_levels).take_while(|k| t0 * 0.5f64.powi(*k as i32) >= t_min).count().max(3);
    let ys = domain.approach_sequence(z, t0, count)?;
    for y in &ys {
        if y.dist(x) < 1e-12 || y.dist(x0) < 1e-12 {
            return Err(Error::InvalidArgument("x or x0 lies on the approach ray".into()));
        }
    }
    let ce = CenterExit::new(idx);
    let wos = WosOptions { shrink: opts.shrink, ..Default::default() };
    let mut levels: Vec<Level> = Vec::new();
    let mut seq = Vec::new();
    let ns = opts.n_samples.max(100);
    // (Δ_j, SE(Δ_j)) for j ≥ 1.
    let mut deltas: Vec<(f64, f64)> = Vec::new();
    for (k, y) in ys.iter().enumerate() {
        let gx = green_whole_unchecked(idx, c, y.dist(x));
        let g0 = green_whole_unchecked(idx, c, y.dist(x0));
        let pairs: Vec<(f64, f64)> = mc_collect(ns, stream, |rng| {
            let e = wos_with(domain, &ce, y, &wos, rng)?.exit_point;
            Ok((gx - green_whole_unchecked(idx, c, e.dist(x)), g0 - green_whole_unchecked(idx, c, e.dist(x0))))
        })?;
        let num = pairs.iter().map(|p| p.0).sum::<f64>() / ns as f64;
        let den = pairs.iter().map(|p| p.1).sum::<f64>() / ns as f64;
        if !(den > 0.0) {
            return Err(Error::Degenerate(format!("nonpositive Green estimate at level {k}")));
        }
        let ratio = num / den;
        let influence: Vec<f64> = pairs.iter().map(|(a, b)| (a - ratio * b) / den).collect();
        seq.push(ratio);
        levels.push(Level { ratio, influence });
        if k == 1 {
            let d = levels[1].ratio - levels[0].ratio;
            let se = sd(levels[1].influence.iter().zip(&levels[0].influence).map(|(a, b)| a - b)) / (ns as f64).sqrt();
            deltas.push((d, se));
        }
        if k < 2 {
            continue;
        }
        let cur = &levels[k];
        let prev = &levels[k - 1];
        let delta = cur.ratio - prev.ratio;
        let se_delta = sd(cur.influence.iter().zip(&prev.influence).map(|(a, b)| a - b)) / (ns as f64).sqrt();
        deltas.push((delta, se_delta));
        let converged = delta.abs() <= opts.tol * cur.ratio.abs();
        let floor = delta.abs() <= 2.0 * se_delta;
        if converged || floor || k + 1 == ys.len() {
            let rho = contraction(&deltas);
            if !(rho < 1.0) {
                // Two noisy differences can fake growth; refine before giving up.
                if k + 1 < ys.len() {
                    continue;
                }
                return Err(Error::NonContraction { factor: rho, levels: k + 1 });
            }
            let g = rho / (1.0 - rho);
            let tail = delta * g;
            // Standard error of the extrapolated value r_k + g (r_k − r_{k−1}).
            let se_value = sd(cur.influence.iter().zip(&prev.influence).map(|(a, b)| a + g * (a - b))) / (ns as f64).sqrt();
            return Ok(MartinEstimate {
                x0: x0.clone(),
                x: x.clone(),
                z: z.clone(),
                value: cur.ratio + tail,
                sequence_values: seq,
                error_bound: tail.abs() + 2.0 * se_value,
                contraction: rho,
                levels: k + 1,
            });
        }
    }
    unreachable!("the loop returns at the last level")
}

/// (lhs, rhs) of the 3G inequality at the triple (x, y, z).
pub fn three_g_ratio(idx: &StableIndex, x: &Point, y: &Point, z: &Point, source: &dyn KernelSource) -> Result<(f64, f64)> {
    if x == y || y == z || x == z {
        return Err(Error::Degenerate("3G needs three distinct points".into()));
    }
    let e = idx.n() as f64 - idx.alpha();
    let lhs = source.green(x, y)? * source.martin(y, z)? / source.martin(x, z)?;
    let rhs = x.dist(z).powf(e) / (x.dist(y).powf(e) * y.dist(z).powf(e));
    Ok((lhs, rhs))
}

/// Uniform point in a ball.
pub fn uniform_in_ball<R: Rng + ?Sized>(ball: &BallSpec, rng: &mut R) -> Point {
    let n = ball.dim();
    let u = crate::sampler::uniform_direction(n, rng);
    let r = ball.radius * rng.random::<f64>().powf(1.0 / n as f64);
    ball.center.add_scaled(r, &u)
}

/// sup of lhs/rhs over random triples (x, y uniform in the ball, z uniform on the sphere).
pub fn three_g_sup(idx: &StableIndex, ball: &BallSpec, n_triples: usize, stream: &RngStream) -> Result<f64> {
    let src = BallKernels::new(idx.clone(), ball.clone());
    let vals = mc_collect(n_triples, stream, |rng| {
        let x = uniform_in_ball(ball, rng);
        let y = uniform_in_ball(ball, rng);
        let z = ball.center.add_scaled(ball.radius, &crate::sampler::uniform_direction(idx.n(), rng));
        let (l, r) = three_g_ratio(idx, &x, &y, &z, &src)?;
        Ok(l / r)
    })?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}
