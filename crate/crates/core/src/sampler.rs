//! Reproducible Monte Carlo: exact exit draws from ball centers, walk-on-spheres,
//! harmonic measure and mean-value residuals.
//!
//! Work is split into fixed-size chunks. Chunk `k` draws from its own ChaCha
//! stream derived from `(seed, stream_id, k)`, and chunk results are merged in
//! chunk order, so estimates do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg};

use crate::error::{Error, Result};
use crate::geometry::{BallSpec, Domain, Point, StableIndex};
use crate::kernels::poisson_ball;
use crate::quad::{integrate_interior, InteriorOptions, Singularity};

/// Samples per chunk.
pub const CHUNK: usize = 4096;

/// Kurtosis above which an estimate is flagged as heavy-tailed.
pub const KURTOSIS_GUARD: f64 = 50.0;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies a reproducible random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Independent child stream number `k`.
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream { seed: self.seed, stream_id: splitmix(self.stream_id ^ splitmix(k.wrapping_add(1))) }
    }
}

/// Streaming mean and central moments up to order four, mergeable.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&self, o: &Moments) -> Moments {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let d3 = d2 * d;
        let d4 = d2 * d2;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3 + o.m3 + d3 * na * nb * (na - nb) / (n * n) + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        Moments { n: self.n + o.n, mean: self.mean + d * nb / n, m2, m3, m4 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Sample kurtosis n·M4/M2² (3 for a Gaussian).
    pub fn kurtosis(&self) -> f64 {
        if self.m2 <= 0.0 {
            0.0
        } else {
            self.n as f64 * self.m4 / (self.m2 * self.m2)
        }
    }
}

/// A Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation divided by √n_samples.
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Set when the kurtosis guard fired; the sample count was then doubled once.
    pub heavy_tail: bool,
}

impl McEstimate {
    fn from_moments(m: &Moments, seed: u64, heavy_tail: bool) -> Self {
        McEstimate { value: m.mean, std_error: m.std_error(), n_samples: m.n as usize, seed, heavy_tail }
    }

    /// |value − target| measured in standard errors (∞ if the error is zero and the values differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

fn chunk_moments<F>(stream: &RngStream, first_chunk: usize, n_samples: usize, f: &F) -> Result<Moments>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream((first_chunk + c) as u64).rng();
            let len = CHUNK.min(n_samples - c * CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(f(&mut rng)?);
            }
            Ok(m)
        })
        .collect();
    let mut acc = Moments::default();
    for p in parts {
        acc = acc.merge(&p?);
    }
    Ok(acc)
}

/// Mean of `f` over `n_samples` independent draws, with the kurtosis guard.
pub fn mc_mean<F>(n_samples: usize, stream: &RngStream, f: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let m = chunk_moments(stream, 0, n_samples, &f)?;
    if m.kurtosis() > KURTOSIS_GUARD {
        let first = n_samples.div_ceil(CHUNK);
        let extra = chunk_moments(stream, first, n_samples, &f)?;
        return Ok(McEstimate::from_moments(&m.merge(&extra), stream.seed, true));
    }
    Ok(McEstimate::from_moments(&m, stream.seed, false))
}

/// Collects `n_samples` draws of `f` in a thread-count independent order.
pub fn mc_collect<T, F>(n_samples: usize, stream: &RngStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c as u64).rng();
            let len = CHUNK.min(n_samples - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n_samples);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Exact sampler of X_{τ_B} for the process started at the center of B.
///
/// With V = r²/|Z − c|², V ~ Beta(α/2, 1 − α/2), and the direction is uniform.
#[derive(Clone, Debug)]
pub struct CenterExit {
    n: usize,
    a: f64,
    beta: Beta<f64>,
}

impl CenterExit {
    pub fn new(idx: &StableIndex) -> Self {
        let a = idx.alpha() / 2.0;
        CenterExit { n: idx.n(), a, beta: Beta::new(a, 1.0 - a).expect("valid beta parameters") }
    }

    /// Radius ratio |Z − c| / r > 1.
    #[inline]
    pub fn radius_ratio<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let v: f64 = self.beta.sample(rng);
            if v > 0.0 && v < 1.0 {
                let t = 1.0 / v.sqrt();
                if t > 1.0 && t.is_finite() {
                    return t;
                }
            }
        }
    }

    /// P(|Z − c|/r ≥ t) for t ≥ 1.
    pub fn ratio_tail(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        beta_reg(self.a, 1.0 - self.a, 1.0 / (t * t))
    }

    /// Radius ratio conditioned on lying in [lo, hi), by inversion.
    pub fn radius_ratio_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        let (a, b) = (self.a, 1.0 - self.a);
        let (p_hi, p_lo) = (self.ratio_tail(hi), self.ratio_tail(lo));
        let u = p_hi + (p_lo - p_hi) * rng.random::<f64>();
        let v = inv_beta_reg(a, b, u);
        (1.0 / v.sqrt()).clamp(lo, hi)
    }

    #[inline]
    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        uniform_direction(self.n, rng)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, ball: &BallSpec, rng: &mut R) -> Point {
        let t = self.radius_ratio(rng);
        let u = self.direction(rng);
        ball.center.add_scaled(ball.radius * t, &u)
    }
}

/// Uniform point on S^{n−1}.
pub fn uniform_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Point {
    if n == 1 {
        return Point::from([if rng.random::<bool>() { 1.0 } else { -1.0 }]);
    }
    loop {
        let g: Point = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = g.normalized() {
            return u;
        }
    }
}

/// One exact draw of X_{τ_B} started from the center of `ball`.
pub fn sample_center_exit<R: Rng + ?Sized>(idx: &StableIndex, ball: &BallSpec, rng: &mut R) -> Result<Point> {
    if ball.dim() != idx.n() {
        return Err(Error::DimensionMismatch { expected: idx.n(), got: ball.dim() });
    }
    Ok(CenterExit::new(idx).sample(ball, rng))
}

#[derive(Clone, Debug)]
pub struct WosOptions {
    /// Inscribed balls have radius `shrink · δ(p)`.
    pub shrink: f64,
    pub max_steps: usize,
}

impl Default for WosOptions {
    fn default() -> Self {
        WosOptions { shrink: 0.5, max_steps: 10_000 }
    }
}

/// Outcome of one walk-on-spheres run.
#[derive(Clone, Debug)]
pub struct ExitRecord {
    pub start: Point,
    /// Exit position, strictly outside the closed domain.
    pub exit_point: Point,
    pub steps: usize,
    pub final_ball: BallSpec,
}

pub(crate) fn wos_with<R: Rng + ?Sized>(
    domain: &Domain,
    ce: &CenterExit,
    x: &Point,
    opts: &WosOptions,
    rng: &mut R,
) -> Result<ExitRecord> {
    let mut p = x.clone();
    let mut d = domain.dist_to_boundary(&p);
    if !(d > 0.0) {
        return Err(Error::NotInterior(x.clone()));
    }
    let mut trail: Vec<Point> = Vec::new();
    for step in 1..=opts.max_steps {
        let ball = BallSpec { center: p.clone(), radius: opts.shrink * d };
        let q = ce.sample(&ball, rng);
        let dq = domain.dist_to_boundary(&q);
        if !(dq > 0.0) {
            return Ok(ExitRecord { start: x.clone(), exit_point: q, steps: step, final_ball: ball });
        }
        trail.push(p);
        p = q;
        d = dq;
    }
    trail.push(p);
    Err(Error::MaxStepsExceeded { max_steps: opts.max_steps, trajectory: trail })
}

/// Simulates X_{τ_D} from `x` by iterating exact exits from inscribed balls.
pub fn walk_on_spheres<R: Rng + ?Sized>(
    domain: &Domain,
    idx: &StableIndex,
    x: &Point,
    opts: &WosOptions,
    rng: &mut R,
) -> Result<ExitRecord> {
    if x.dim() != idx.n() || domain.dim() != idx.n() {
        return Err(Error::DimensionMismatch { expected: idx.n(), got: x.dim() });
    }
    if !(opts.shrink > 0.0 && opts.shrink <= 1.0) {
        return Err(Error::InvalidArgument(format!("shrink {} must lie in (0, 1]", opts.shrink)));
    }
    wos_with(domain, &CenterExit::new(idx), x, opts, rng)
}

/// `n_samples` exit positions from `x`, in a deterministic order.
pub fn sample_exits(
    domain: &Domain,
    idx: &StableIndex,
    x: &Point,
    n_samples: usize,
    stream: &RngStream,
    opts: &WosOptions,
) -> Result<Vec<Point>> {
    if !(domain.dist_to_boundary(x) > 0.0) {
        return Err(Error::NotInterior(x.clone()));
    }
    let ce = CenterExit::new(idx);
    mc_collect(n_samples, stream, |rng| Ok(wos_with(domain, &ce, x, opts, rng)?.exit_point))
}

/// A test function on ℝⁿ with declared growth |f(z)| ≲ |z|^growth at infinity.
#[derive(Clone, Copy, Debug)]
pub struct TestFunction<F> {
    pub f: F,
    pub growth: f64,
}

impl<F: Fn(&Point) -> f64 + Sync> TestFunction<F> {
    pub fn bounded(f: F) -> Self {
        TestFunction { f, growth: 0.0 }
    }

    pub fn with_growth(f: F, growth: f64) -> Self {
        TestFunction { f, growth }
    }

    /// Rejects growth for which E f(X_τ) is infinite or has infinite variance.
    pub fn check(&self, alpha: f64) -> Result<()> {
        if !self.growth.is_finite() || self.growth >= alpha {
            return Err(Error::Inadmissible {
                exponent: self.growth,
                alpha,
                reason: "the exit law has tail |z|^{-n-alpha}, so the mean is infinite",
            });
        }
        if 2.0 * self.growth >= alpha {
            return Err(Error::Inadmissible {
                exponent: self.growth,
                alpha,
                reason: "the Monte Carlo variance is infinite; truncate the function",
            });
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p)
    }
}

/// E_x[φ(X_{τ_D})] by walk-on-spheres.
pub fn harmonic_measure<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    idx: &StableIndex,
    x: &Point,
    phi: &TestFunction<F>,
    n_samples: usize,
    stream: &RngStream,
    opts: &WosOptions,
) -> Result<McEstimate> {
    phi.check(idx.alpha())?;
    if !(domain.dist_to_boundary(x) > 0.0) {
        return Err(Error::NotInterior(x.clone()));
    }
    let ce = CenterExit::new(idx);
    mc_mean(n_samples, stream, |rng| Ok(phi.eval(&wos_with(domain, &ce, x, opts, rng)?.exit_point)))
}

/// E_x[f(X_{τ_B})] − f(x) for B = B(x, r): zero when f is harmonic for X across B.
pub fn mean_value_residual_x<F: Fn(&Point) -> f64 + Sync>(
    ball: &BallSpec,
    idx: &StableIndex,
    f: &TestFunction<F>,
    n_samples: usize,
    stream: &RngStream,
) -> Result<McEstimate> {
    f.check(idx.alpha())?;
    let ce = CenterExit::new(idx);
    let fx = f.eval(&ball.center);
    mc_mean(n_samples, stream, |rng| Ok(f.eval(&ce.sample(ball, rng)) - fx))
}

/// E_x[h(X_{τ_B}); X_{τ_B} ∈ D] − h(x) for a ball with closure in D: zero when h is
/// harmonic for the killed process X^D.
pub fn mean_value_residual_xd<H: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    ball: &BallSpec,
    idx: &StableIndex,
    h: H,
    n_samples: usize,
    stream: &RngStream,
) -> Result<McEstimate> {
    if !(domain.dist_to_boundary(&ball.center) > ball.radius) {
        return Err(Error::InvalidArgument("the closed ball must lie inside D".into()));
    }
    let ce = CenterExit::new(idx);
    let hx = h(&ball.center);
    mc_mean(n_samples, stream, |rng| {
        let w = ce.sample(ball, rng);
        Ok(if domain.dist_to_boundary(&w) > 0.0 { h(&w) } else { 0.0 } - hx)
    })
}

/// Smooth cutoff: 1 on [0, 1/2], 0 beyond 1, C^∞ in between.
fn bump(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let s = 2.0 * t - 1.0;
        let f = |u: f64| (-1.0 / u).exp();
        f(1.0 - s) / (f(1.0 - s) + f(s))
    }
}

/// [`mean_value_residual_xd`] for an `h` with a boundary pole at `pole`, where
/// h(w) ≲ δ(w)^{α/2}|w − pole|^{−n} makes the plain estimator's variance infinite.
///
/// A smooth cutoff χ of radius ε = (|pole − x| − r)/2 splits h. The part h·χ
/// is integrated against the closed-form exit density of B(x, r) by quadrature;
/// the bounded remainder h·(1 − χ) is sampled. The quadrature error is added to
/// the standard error in quadrature.
pub fn mean_value_residual_xd_pole<H: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    ball: &BallSpec,
    idx: &StableIndex,
    h: H,
    pole: &Point,
    n_samples: usize,
    stream: &RngStream,
) -> Result<McEstimate> {
    if !(domain.dist_to_boundary(&ball.center) > ball.radius) {
        return Err(Error::InvalidArgument("the closed ball must lie inside D".into()));
    }
    let eps = 0.5 * (pole.dist(&ball.center) - ball.radius);
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("the pole must lie outside the closed ball".into()));
    }
    let chi = |w: &Point| bump(w.dist(pole) / eps);
    let near = integrate_interior(
        domain,
        |w: &Point| {
            let c = chi(w);
            if c == 0.0 {
                return 0.0;
            }
            let v = c * h(w) * poisson_ball(idx, ball, &ball.center, w).unwrap_or(0.0);
            // A node on the pole itself carries no mass.
            if v.is_finite() { v } else { 0.0 }
        },
        &[Singularity::new(pole.clone(), idx.n() as f64 - idx.alpha() / 2.0)],
        &InteriorOptions { rel_tol: 1e-5, ..Default::default() },
    )?;
    let ce = CenterExit::new(idx);
    let hx = h(&ball.center);
    let far = mc_mean(n_samples, stream, |rng| {
        let w = ce.sample(ball, rng);
        Ok(if domain.dist_to_boundary(&w) > 0.0 { h(&w) * (1.0 - chi(&w)) } else { 0.0 } - hx)
    })?;
    Ok(McEstimate { value: far.value + near.value, std_error: far.std_error.hypot(near.error), ..far })
}
